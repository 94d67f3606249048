//! Bessel functions of the first kind for integer order.

use crate::error::{GeoError, Result};

/// Largest order accepted by [`bessel_j`].
pub const MAX_ORDER: i32 = 20;
/// Largest argument modulus accepted by [`bessel_j`].
pub const MAX_ARG: f64 = 50.0;

/// `J_m(x)` for `0 <= m <= 20`, `|x| <= 50`.
pub fn bessel_j(m: i32, x: f64) -> Result<f64> {
    if !(0..=MAX_ORDER).contains(&m) {
        return Err(GeoError::Domain(format!(
            "Bessel order {m} outside [0, {MAX_ORDER}]"
        )));
    }
    if !x.is_finite() || x.abs() > MAX_ARG {
        return Err(GeoError::Domain(format!(
            "Bessel argument {x} outside [-{MAX_ARG}, {MAX_ARG}]"
        )));
    }
    Ok(bessel_j_upto(m as usize, x)[m as usize])
}

/// `[J_0(x), …, J_max(x)]` from one Miller downward recurrence.
///
/// Orders and arguments are not range-checked; the recurrence start is sized
/// from both, so accuracy holds well beyond the public limits.
pub fn bessel_j_upto(max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    // start order: comfortably past both the requested order and the argument
    let start = {
        let base = (max as f64).max(ax);
        let n = (base + 30.0 + 3.0 * base.sqrt()) as usize;
        n + (n & 1) // even
    };
    let mut j_next = 0.0; // J_{k+1}
    let mut j_cur = 1e-300; // J_k, arbitrary seed
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let j_prev = 2.0 * k as f64 / ax * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        // j_cur now holds J_{k-1}
        let order = k - 1;
        if order <= max {
            out[order] = j_cur;
        }
        if order % 2 == 0 && order > 0 {
            norm += 2.0 * j_cur;
        }
        if j_cur.abs() > 1e250 {
            // rescale to stay in range
            let s = 1e-250;
            j_cur *= s;
            j_next *= s;
            norm *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    norm += j_cur; // J_0
    for v in out.iter_mut() {
        *v /= norm;
    }
    if x < 0.0 {
        for (m, v) in out.iter_mut().enumerate() {
            if m % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// `J_m(x)` for any integer order using `J_{−m} = (−1)^m J_m`.
pub fn bessel_j_signed(m: i32, x: f64) -> f64 {
    let k = m.unsigned_abs() as usize;
    let v = bessel_j_upto(k, x)[k];
    if m < 0 && k % 2 == 1 {
        -v
    } else {
        v
    }
}

/// Location of the first maximum of `J_1`.
pub const J1_FIRST_MAX_ARG: f64 = 1.841_183_781_340_659_3;

/// Solves `J_1(β) = y` for `β ∈ [0, 1.8411…]` (the rising branch).
///
/// Returns `None` if `y` is negative or exceeds `max J_1`.
pub fn inverse_j1(y: f64) -> Option<f64> {
    let ymax = bessel_j_upto(1, J1_FIRST_MAX_ARG)[1];
    if !(0.0..=ymax).contains(&y) {
        return None;
    }
    if y == 0.0 {
        return Some(0.0);
    }
    let (mut lo, mut hi) = (0.0, J1_FIRST_MAX_ARG);
    // bisection to get close, then Newton polishing
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if bessel_j_upto(1, mid)[1] < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut b = 0.5 * (lo + hi);
    for _ in 0..3 {
        let j = bessel_j_upto(1, b);
        // J1' = J0 − J1/x
        let d = j[0] - j[1] / b;
        if d.abs() < 1e-12 {
            break;
        }
        let nb = b - (j[1] - y) / d;
        if !(0.0..=J1_FIRST_MAX_ARG).contains(&nb) {
            break;
        }
        b = nb;
    }
    Some(b)
}
