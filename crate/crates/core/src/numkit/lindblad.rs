//! Fixed-step RK4 integration of Lindblad master equations.
//!
//! Density matrices are handled as flat row-major slices so that several
//! inputs sharing one generator can be advanced together.

use num_complex::Complex64 as C64;

use super::matrix::ComplexMatrix;

/// Right-hand side `dρ/dt = L_t[ρ]` of a master equation on `dim x dim` matrices.
pub trait Lindbladian {
    fn dim(&self) -> usize;

    /// Writes `L_t[ρ_k]` into `out` for every `dim²`-sized chunk of `batch`.
    fn apply(&self, t: f64, batch: &[C64], out: &mut [C64]);
}

/// Dense Lindbladian `−i[H(t), ρ] + Σ_k (L_k ρ L_k† − ½{L_k†L_k, ρ})`.
pub struct DenseLindbladian<F> {
    hamiltonian: F,
    collapse: Vec<ComplexMatrix>,
    collapse_adj: Vec<ComplexMatrix>,
    // −½ Σ L†L, folded into an effective non-Hermitian generator
    decay: ComplexMatrix,
    dim: usize,
}

impl<F> DenseLindbladian<F>
where
    F: Fn(f64) -> ComplexMatrix,
{
    pub fn new(dim: usize, hamiltonian: F, collapse: Vec<ComplexMatrix>) -> Self {
        let mut decay = ComplexMatrix::zeros(dim);
        for l in &collapse {
            assert_eq!(l.dim(), dim, "collapse operator dimension");
            decay = &decay + &l.adjoint().matmul(l);
        }
        let collapse_adj = collapse.iter().map(|l| l.adjoint()).collect();
        Self {
            hamiltonian,
            collapse,
            collapse_adj,
            decay: decay.scale_re(-0.5),
            dim,
        }
    }
}

impl<F> Lindbladian for DenseLindbladian<F>
where
    F: Fn(f64) -> ComplexMatrix,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, t: f64, batch: &[C64], out: &mut [C64]) {
        let n = self.dim;
        let h = (self.hamiltonian)(t);
        // K = −iH − ½ΣL†L, so that dρ = Kρ + ρK† + Σ LρL†
        let mut k = h.scale(C64::new(0.0, -1.0));
        k = &k + &self.decay;
        let kd = k.adjoint();
        for (rho, o) in batch.chunks(n * n).zip(out.chunks_mut(n * n)) {
            let r = ComplexMatrix::from_vec(rho.to_vec()).expect("square chunk");
            let mut d = &k.matmul(&r) + &r.matmul(&kd);
            for (l, ld) in self.collapse.iter().zip(&self.collapse_adj) {
                d = &d + &l.matmul(&r).matmul(ld);
            }
            o.copy_from_slice(d.as_slice());
        }
    }
}

/// Advances `state` (a batch of density matrices) from `t0` to `t1` in `steps`
/// classical RK4 steps.
pub fn rk4_evolve<L: Lindbladian + ?Sized>(
    l: &L,
    state: &mut [C64],
    t0: f64,
    t1: f64,
    steps: usize,
) {
    let len = state.len();
    let dt = (t1 - t0) / steps as f64;
    let mut k1 = vec![C64::new(0.0, 0.0); len];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    for s in 0..steps {
        let t = t0 + s as f64 * dt;
        l.apply(t, state, &mut k1);
        for i in 0..len {
            tmp[i] = state[i] + k1[i] * (0.5 * dt);
        }
        l.apply(t + 0.5 * dt, &tmp, &mut k2);
        for i in 0..len {
            tmp[i] = state[i] + k2[i] * (0.5 * dt);
        }
        l.apply(t + 0.5 * dt, &tmp, &mut k3);
        for i in 0..len {
            tmp[i] = state[i] + k3[i] * dt;
        }
        l.apply(t + dt, &tmp, &mut k4);
        for i in 0..len {
            state[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
        }
    }
}
