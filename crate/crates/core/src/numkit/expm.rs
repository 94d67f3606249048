//! Matrix exponential by scaling and squaring with a degree-13 Padé approximant.

use num_complex::Complex64 as C64;

use super::matrix::ComplexMatrix;
use crate::error::{GeoError, Result};

/// Largest dimension accepted by [`mat_exp`].
pub const MAX_EXP_DIM: usize = 32;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

/// `exp(A)` for a square matrix of dimension at most [`MAX_EXP_DIM`].
pub fn mat_exp(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = a.dim();
    if n > MAX_EXP_DIM {
        return Err(GeoError::Dimension(format!(
            "mat_exp supports dim <= {MAX_EXP_DIM}, got {n}"
        )));
    }
    if n == 2 {
        return Ok(exp2(a));
    }
    Ok(pade13(a))
}

/// Builds `exp(A)` from a flat row-major vector; rejects non-square input.
pub fn mat_exp_entries(entries: Vec<C64>) -> Result<ComplexMatrix> {
    mat_exp(&ComplexMatrix::from_vec(entries)?)
}

fn pade13(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.dim();
    let norm = a.one_norm();
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = a.scale_re(0.5f64.powi(s));
    let b = &PADE13;
    let id = ComplexMatrix::identity(n);
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);

    let lin = |c6: f64, c4: f64, c2: f64, c0: f64| -> ComplexMatrix {
        let mut m = a6.scale_re(c6);
        m = &m + &a4.scale_re(c4);
        m = &m + &a2.scale_re(c2);
        &m + &id.scale_re(c0)
    };

    let u_inner = a6.matmul(&lin(b[13], b[11], b[9], 0.0));
    let u = a.matmul(&(&u_inner + &lin(b[7], b[5], b[3], b[1])));
    let v_inner = a6.matmul(&lin(b[12], b[10], b[8], 0.0));
    let v = &v_inner + &lin(b[6], b[4], b[2], b[0]);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = solve(&q, &p).expect("Padé denominator is nonsingular for scaled input");
    for _ in 0..s {
        r = r.matmul(&r);
    }
    r
}

/// Closed form for 2x2 matrices: `A = a0 I + B` with traceless `B`,
/// `exp(A) = e^{a0} (cosh(s) I + sinh(s)/s B)`, `s² = −det B`.
fn exp2(a: &ComplexMatrix) -> ComplexMatrix {
    let m = a.as_slice();
    let a0 = (m[0] + m[3]) * 0.5;
    let b00 = m[0] - a0;
    let b01 = m[1];
    let b10 = m[2];
    let s2 = b00 * b00 + b01 * b10;
    let s = s2.sqrt();
    let (ch, sh_over_s) = if s.norm() < 1e-6 {
        // series to keep accuracy near s = 0
        (
            1.0 + s2 / 2.0 + s2 * s2 / 24.0,
            1.0 + s2 / 6.0 + s2 * s2 / 120.0,
        )
    } else {
        (s.cosh(), s.sinh() / s)
    };
    let e = a0.exp();
    ComplexMatrix::mat2(
        e * (ch + sh_over_s * b00),
        e * sh_over_s * b01,
        e * sh_over_s * b10,
        e * (ch - sh_over_s * b00),
    )
}

/// `exp(−i H dt)` for a Hermitian 2x2 `H`, written directly as an SU(2) rotation
/// times a phase.
pub fn expi_hermitian2(h: &ComplexMatrix, dt: f64) -> ComplexMatrix {
    debug_assert_eq!(h.dim(), 2);
    let m = h.as_slice();
    let h0 = 0.5 * (m[0].re + m[3].re);
    let hz = 0.5 * (m[0].re - m[3].re);
    let hx = m[2].re;
    let hy = m[2].im;
    let (u00, u01, u10, u11) = su2(hx, hy, hz, dt);
    let ph = C64::from_polar(1.0, -h0 * dt);
    ComplexMatrix::mat2(ph * u00, ph * u01, ph * u10, ph * u11)
}

/// Entries of `exp(−i dt (hx σx + hy σy + hz σz))`.
#[inline]
pub(crate) fn su2(hx: f64, hy: f64, hz: f64, dt: f64) -> (C64, C64, C64, C64) {
    let r = (hx * hx + hy * hy + hz * hz).sqrt();
    let th = r * dt;
    let c = th.cos();
    let sinc = if th.abs() < 1e-8 {
        dt * (1.0 - th * th / 6.0)
    } else {
        th.sin() / r
    };
    // −i sinc (hx σx + hy σy + hz σz)
    let u00 = C64::new(c, -sinc * hz);
    let u11 = C64::new(c, sinc * hz);
    let u01 = C64::new(-sinc * hy, -sinc * hx);
    let u10 = C64::new(sinc * hy, -sinc * hx);
    (u00, u01, u10, u11)
}

/// Solves `A X = B` by Gaussian elimination with partial pivoting.
pub fn solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = a.dim();
    if b.dim() != n {
        return Err(GeoError::Dimension("solve: dimension mismatch".into()));
    }
    let mut lu = a.clone();
    let mut x = b.clone();
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, lu[(i, k)].norm()))
            .fold((k, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        if pmax == 0.0 {
            return Err(GeoError::Model("singular matrix in solve".into()));
        }
        if p != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = t;
                let t = x[(k, j)];
                x[(k, j)] = x[(p, j)];
                x[(p, j)] = t;
            }
        }
        let piv = lu[(k, k)];
        for i in (k + 1)..n {
            let f = lu[(i, k)] / piv;
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            for j in k..n {
                let v = lu[(k, j)];
                lu[(i, j)] -= f * v;
            }
            for j in 0..n {
                let v = x[(k, j)];
                x[(i, j)] -= f * v;
            }
        }
    }
    for k in (0..n).rev() {
        let piv = lu[(k, k)];
        for j in 0..n {
            let mut acc = x[(k, j)];
            for m in (k + 1)..n {
                acc -= lu[(k, m)] * x[(m, j)];
            }
            x[(k, j)] = acc / piv;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::matrix::pauli;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn exp_of_zero_is_identity() {
        for n in [1, 2, 3, 5] {
            let e = mat_exp(&ComplexMatrix::zeros(n)).unwrap();
            assert!((&e - &ComplexMatrix::identity(n)).max_norm() < 1e-15);
        }
    }

    #[test]
    fn half_pi_x_rotation() {
        let a = pauli::x().scale(c(0.0, -std::f64::consts::FRAC_PI_2));
        let e = mat_exp(&a).unwrap();
        let want = ComplexMatrix::mat2(c(0.0, 0.0), c(0.0, -1.0), c(0.0, -1.0), c(0.0, 0.0));
        assert!((&e - &want).max_norm() < 1e-14);
    }

    #[test]
    fn padé_path_agrees_with_closed_form_on_2x2() {
        let a = ComplexMatrix::mat2(c(0.3, -1.2), c(2.0, 0.5), c(-0.7, 0.1), c(-0.4, 0.9));
        let closed = exp2(&a);
        let pade = pade13(&a);
        assert!((&closed - &pade).max_norm() < 1e-13);
    }

    #[test]
    fn hermitian_fast_path_matches_general() {
        let h = ComplexMatrix::mat2(c(0.7, 0.0), c(0.2, -0.9), c(0.2, 0.9), c(-1.3, 0.0));
        let dt = 0.37;
        let fast = expi_hermitian2(&h, dt);
        let gen = pade13(&h.scale(c(0.0, -dt)));
        assert!((&fast - &gen).max_norm() < 1e-14);
    }

    #[test]
    fn too_large_is_rejected() {
        assert!(matches!(
            mat_exp(&ComplexMatrix::zeros(33)),
            Err(GeoError::Dimension(_))
        ));
        assert!(mat_exp_entries(vec![c(1.0, 0.0); 6]).is_err());
    }

    #[test]
    fn solve_recovers_known_solution() {
        let a = ComplexMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(2.0, 1.0), c(1.0, 0.0)],
            vec![c(1.0, -1.0), c(0.0, 0.0), c(3.0, 0.0)],
            vec![c(4.0, 0.0), c(1.0, 0.0), c(0.0, 2.0)],
        ])
        .unwrap();
        let x = ComplexMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(0.0, 1.0), c(2.0, 0.0)],
            vec![c(0.5, 0.0), c(-1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, -1.0), c(1.0, 1.0), c(3.0, 0.0)],
        ])
        .unwrap();
        let b = a.matmul(&x);
        let got = solve(&a, &b).unwrap();
        assert!((&got - &x).max_norm() < 1e-13);
    }
}
