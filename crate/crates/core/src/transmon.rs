//! Multi-level transmon driven by a pulse schedule, with first-order DRAG and
//! Lindblad relaxation and dephasing.
//!
//! Units follow the rest of the crate: angular frequencies in rad/μs, times in μs.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::numkit::lindblad::{rk4_evolve, DenseLindbladian};
use crate::numkit::{hermitian_eigenvalues, ComplexMatrix, StepPolicy, TimeGrid};
use crate::pulse::{inject, Envelope, InjectedDrive, PulseSchedule};
use crate::robustness::ErrorModel;

/// `2π × f` for `f` in MHz, giving rad/μs.
pub fn mhz(f: f64) -> f64 {
    2.0 * PI * f
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmonParams {
    pub levels: usize,
    pub alpha: f64,
    pub t1: f64,
    pub tphi: f64,
}

impl Default for TransmonParams {
    fn default() -> Self {
        Self {
            levels: 4,
            alpha: mhz(320.0),
            t1: 50.0,
            tphi: 50.0,
        }
    }
}

impl TransmonParams {
    /// Same parameters without decoherence.
    pub fn closed(self) -> Self {
        Self {
            t1: f64::INFINITY,
            tphi: f64::INFINITY,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(3..=6).contains(&self.levels) {
            return Err(GeoError::Parameter(format!(
                "transmon needs 3 to 6 levels, got {}",
                self.levels
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(GeoError::Parameter(format!("anharmonicity must be positive, got {}", self.alpha)));
        }
        if !(self.t1 > 0.0) || !(self.tphi > 0.0) {
            return Err(GeoError::Parameter("T1 and Tphi must be positive".into()));
        }
        Ok(())
    }

    /// Collapse operators `a/√T₁` and `√(2/T_φ)·a†a`; infinite times are omitted.
    pub fn collapse_operators(&self) -> Vec<ComplexMatrix> {
        let n = self.levels;
        let mut out = Vec::new();
        if self.t1.is_finite() {
            let mut a = ComplexMatrix::zeros(n);
            for k in 1..n {
                a[(k - 1, k)] = C64::new((k as f64 / self.t1).sqrt(), 0.0);
            }
            out.push(a);
        }
        if self.tphi.is_finite() {
            let w = (2.0 / self.tphi).sqrt();
            let diag: Vec<C64> = (0..n).map(|k| C64::new(w * k as f64, 0.0)).collect();
            out.push(ComplexMatrix::from_diag(&diag));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DragSettings {
    pub enabled: bool,
    pub scale: f64,
}

impl Default for DragSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            scale: 1.0,
        }
    }
}

impl DragSettings {
    pub fn off() -> Self {
        Self {
            enabled: false,
            scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.scale) {
            return Err(GeoError::Parameter(format!("DRAG scale {} outside [0, 2]", self.scale)));
        }
        Ok(())
    }
}

/// Transmon Hamiltonian for one injected drive sample.
///
/// Diagonal `½[(2n−1)Δ − n(n−1)α]`, couplings `⟨n−1|H|n⟩ = √n·c/2`; the
/// lowest two levels reproduce the two-level Hamiltonian.
pub fn leakage_hamiltonian(d: &InjectedDrive, levels: usize, alpha: f64) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(levels);
    for n in 0..levels {
        let nf = n as f64;
        h[(n, n)] = C64::new(0.5 * ((2.0 * nf - 1.0) * d.delta - nf * (nf - 1.0) * alpha), 0.0);
        if n > 0 {
            let c = 0.5 * nf.sqrt() * d.coupling;
            h[(n - 1, n)] = c;
            h[(n, n - 1)] = c.conj();
        }
    }
    h
}

/// Full Hamiltonian of the schedule at time `t`, including its DRAG term.
pub fn build_full_hamiltonian(schedule: &PulseSchedule, p: &TransmonParams, t: f64) -> Result<ComplexMatrix> {
    p.validate()?;
    let (i, s) = schedule.locate(t)?;
    let d = inject(
        &schedule.segments[i],
        s,
        schedule.omega_max,
        schedule.drag,
        &ErrorModel::default(),
    );
    Ok(leakage_hamiltonian(&d, p.levels, p.alpha))
}

/// First-order DRAG: the complex drive `c` becomes `c − i·scale·ċ/α`.
///
/// `ċ` includes the phase ramp of latitude segments. With this crate's sign
/// conventions the minus sign is the one that suppresses `|1⟩ → |2⟩`.
pub fn drag_correct(schedule: &PulseSchedule, p: &TransmonParams, s: &DragSettings) -> Result<PulseSchedule> {
    s.validate()?;
    let mut out = schedule.clone();
    if !s.enabled || s.scale == 0.0 {
        return Ok(out);
    }
    if schedule
        .segments
        .iter()
        .any(|seg| !seg.is_degenerate() && seg.envelope == Envelope::Square)
    {
        return Err(GeoError::Unsupported("DRAG needs differentiable (sine) envelopes".into()));
    }
    out.drag = -s.scale / p.alpha;
    Ok(out)
}

/// Integration controls for open-system evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpenSimOptions {
    /// Largest `‖H‖·dt` per RK4 step.
    pub max_phase_step: f64,
    pub min_steps: usize,
}

impl Default for OpenSimOptions {
    fn default() -> Self {
        Self {
            max_phase_step: 0.05,
            min_steps: 50,
        }
    }
}

fn check_density(rho: &ComplexMatrix) -> Result<()> {
    if rho.hermiticity_defect() > 1e-10 {
        return Err(GeoError::Input("density matrix is not Hermitian".into()));
    }
    if (rho.trace().re - 1.0).abs() > 1e-10 {
        return Err(GeoError::Input(format!("density matrix has trace {}", rho.trace().re)));
    }
    let min = hermitian_eigenvalues(rho).into_iter().fold(f64::INFINITY, f64::min);
    if min < -1e-10 {
        return Err(GeoError::Input(format!("density matrix not PSD (eigenvalue {min:e})")));
    }
    Ok(())
}

/// Evolves `ρ₀` under `H(t)` and the transmon's collapse operators over `grid`
/// with fixed-step RK4 (adaptive policies use their largest step count).
pub fn lindblad_evolve<F>(rho0: &ComplexMatrix, h: F, p: &TransmonParams, grid: &TimeGrid) -> Result<ComplexMatrix>
where
    F: Fn(f64) -> ComplexMatrix,
{
    grid.validate()?;
    if rho0.dim() != p.levels {
        return Err(GeoError::Dimension(format!(
            "density matrix dim {} vs {} levels",
            rho0.dim(),
            p.levels
        )));
    }
    check_density(rho0)?;
    let steps = match grid.policy {
        StepPolicy::Fixed(n) => n,
        StepPolicy::Adaptive { max_steps, .. } => max_steps,
    };
    let l = DenseLindbladian::new(p.levels, h, p.collapse_operators());
    let mut state = rho0.as_slice().to_vec();
    rk4_evolve(&l, &mut state, grid.t_start, grid.t_end, steps);
    ComplexMatrix::from_vec(state)
}

/// Evolves a batch of density matrices through the schedule, one RK4 run per
/// non-degenerate segment with step count set by `opts`.
pub fn evolve_schedule(
    rhos: &[ComplexMatrix],
    schedule: &PulseSchedule,
    p: &TransmonParams,
    opts: &OpenSimOptions,
) -> Result<Vec<ComplexMatrix>> {
    p.validate()?;
    let n = p.levels;
    let mut state: Vec<C64> = Vec::with_capacity(rhos.len() * n * n);
    for r in rhos {
        if r.dim() != n {
            return Err(GeoError::Dimension("density matrix dimension".into()));
        }
        state.extend_from_slice(r.as_slice());
    }
    let collapse = p.collapse_operators();
    let no_err = ErrorModel::default();
    for seg in schedule.segments.iter().filter(|s| !s.is_degenerate()) {
        let ham = |s: f64| {
            let d = inject(seg, s, schedule.omega_max, schedule.drag, &no_err);
            leakage_hamiltonian(&d, n, p.alpha)
        };
        let norm = (0..=8)
            .map(|k| ham(seg.duration * k as f64 / 8.0).one_norm())
            .fold(0.0, f64::max);
        let steps = ((seg.duration * norm / opts.max_phase_step).ceil() as usize).max(opts.min_steps);
        let l = DenseLindbladian::new(n, ham, collapse.clone());
        rk4_evolve(&l, &mut state, 0.0, seg.duration, steps);
    }
    state
        .chunks(n * n)
        .map(|c| ComplexMatrix::from_vec(c.to_vec()))
        .collect()
}

/// The six cardinal states `|0⟩, |1⟩, |±⟩, |±i⟩` as qubit amplitudes.
pub fn cardinal_states() -> [[C64; 2]; 6] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let c = |a: f64, b: C64| [C64::new(a, 0.0), b];
    [
        c(1.0, C64::new(0.0, 0.0)),
        c(0.0, C64::new(1.0, 0.0)),
        c(r, C64::new(r, 0.0)),
        c(r, C64::new(-r, 0.0)),
        c(r, C64::new(0.0, r)),
        c(r, C64::new(0.0, -r)),
    ]
}

fn embed(psi: &[C64; 2], levels: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); levels];
    v[0] = psi[0];
    v[1] = psi[1];
    v
}

/// Mean of `⟨ψ_t|ρ_final|ψ_t⟩` over the six cardinal inputs, `ψ_t = target·ψ₀`.
/// Population left outside the qubit levels counts as error.
pub fn gate_fidelity_open_with(
    schedule: &PulseSchedule,
    target: &ComplexMatrix,
    p: &TransmonParams,
    opts: &OpenSimOptions,
) -> Result<f64> {
    if target.dim() != 2 {
        return Err(GeoError::Dimension("target must be 2x2".into()));
    }
    let inputs = cardinal_states();
    let rhos: Vec<ComplexMatrix> = inputs
        .iter()
        .map(|psi| {
            let v = embed(psi, p.levels);
            ComplexMatrix::outer(&v, &v)
        })
        .collect();
    let finals = evolve_schedule(&rhos, schedule, p, opts)?;
    let mut total = 0.0;
    for (psi, rho) in inputs.iter().zip(&finals) {
        let out = target.apply(psi);
        let v = embed(&[out[0], out[1]], p.levels);
        let rv = rho.apply(&v);
        let f: C64 = v.iter().zip(&rv).map(|(a, b)| a.conj() * b).sum();
        total += f.re;
    }
    Ok(total / inputs.len() as f64)
}

pub fn gate_fidelity_open(schedule: &PulseSchedule, target: &ComplexMatrix, p: &TransmonParams) -> Result<f64> {
    gate_fidelity_open_with(schedule, target, p, &OpenSimOptions::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaSweep {
    /// Peak drive amplitudes in rad/μs.
    pub omega: Vec<f64>,
    pub infidelity_nodrag: Vec<f64>,
    pub infidelity_drag: Vec<f64>,
}

impl OmegaSweep {
    /// `(Ω_m, infidelity)` at the lowest DRAG-on infidelity.
    pub fn best_drag(&self) -> Option<(f64, f64)> {
        best(&self.omega, &self.infidelity_drag)
    }

    pub fn best_nodrag(&self) -> Option<(f64, f64)> {
        best(&self.omega, &self.infidelity_nodrag)
    }
}

fn best(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    x.iter()
        .zip(y)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(a, b)| (*a, *b))
}

/// Infidelity against `target` for each `Ω_m`, with and without DRAG.
/// `synth` builds the (DRAG-free) schedule for a given peak amplitude.
pub fn omega_sweep<S>(
    synth: S,
    target: &ComplexMatrix,
    p: &TransmonParams,
    omega_grid: &[f64],
    drag: &DragSettings,
    opts: &OpenSimOptions,
) -> Result<OmegaSweep>
where
    S: Fn(f64) -> Result<PulseSchedule> + Sync,
{
    if omega_grid.iter().any(|w| !(*w > 0.0)) {
        return Err(GeoError::Parameter("omega grid must be positive".into()));
    }
    let rows: Vec<(f64, f64)> = omega_grid
        .par_iter()
        .map(|&w| {
            let sched = synth(w)?;
            let off = 1.0 - gate_fidelity_open_with(&sched, target, p, opts)?;
            let with = drag_correct(&sched, p, drag)?;
            let on = 1.0 - gate_fidelity_open_with(&with, target, p, opts)?;
            Ok((off, on))
        })
        .collect::<Result<_>>()?;
    Ok(OmegaSweep {
        omega: omega_grid.to_vec(),
        infidelity_nodrag: rows.iter().map(|r| r.0).collect(),
        infidelity_drag: rows.iter().map(|r| r.1).collect(),
    })
}

/// CSV `omega_m,infidelity_nodrag,infidelity_drag` with `omega_m` in MHz (`Ω_m/2π`).
pub fn write_sweep_csv<W: Write>(sweep: &OmegaSweep, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["omega_m", "infidelity_nodrag", "infidelity_drag"])?;
    for i in 0..sweep.omega.len() {
        w.write_record(&[
            format!("{}", sweep.omega[i] / (2.0 * PI)),
            format!("{}", sweep.infidelity_nodrag[i]),
            format!("{}", sweep.infidelity_drag[i]),
        ])?;
    }
    w.flush()?;
    Ok(())
}
