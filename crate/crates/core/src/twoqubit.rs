//! Two capacitively coupled transmons with a parametrically modulated
//! frequency on the first one.
//!
//! Basis of the full model is `|00⟩, |01⟩, |10⟩, |02⟩, |11⟩, |20⟩` (labels
//! `|Q₁Q₂⟩`). The interaction-picture Hamiltonian couples `01–10`, `02–11` and
//! `11–20` through the Bessel sidebands of the modulation. Selecting one
//! sideband turns a pair into an effective two-level system driven by the same
//! pulse schedules as a single qubit.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::io::Write;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::gates::GateName;
use crate::geo::{synth_five_segment_with, GateParams, SynthOptions, TrajectorySpec, XiBranch};
use crate::numkit::bessel::{bessel_j_upto, J1_FIRST_MAX_ARG};
use crate::numkit::lindblad::{rk4_evolve, Lindbladian};
use crate::numkit::{inverse_j1, ComplexMatrix};
use crate::pulse::{
    propagate_schedule, synth_conventional_with, ConventionalGateSpec, Envelope, PulseSchedule,
    SegmentStepping,
};
use crate::robustness::{sensitivity_curve_with, ErrorModel, SensitivityCurve};
use crate::transmon::mhz;

/// Index of each basis state in the six-state full model.
pub mod basis {
    pub const S00: usize = 0;
    pub const S01: usize = 1;
    pub const S10: usize = 2;
    pub const S02: usize = 3;
    pub const S11: usize = 4;
    pub const S20: usize = 5;
    pub const DIM: usize = 6;
    /// Computational states in `|00⟩, |01⟩, |10⟩, |11⟩` order.
    pub const COMPUTATIONAL: [usize; 4] = [S00, S01, S10, S11];
    /// Excitation numbers `(n₁, n₂)` of each state.
    pub const OCCUPATION: [(usize, usize); DIM] = [(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitParams {
    pub g: f64,
    /// `Δ₁ = ω₂ − ω₁`.
    pub delta1: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub m_cutoff: usize,
}

impl Default for TwoQubitParams {
    fn default() -> Self {
        Self {
            g: mhz(8.0),
            delta1: mhz(500.0),
            alpha1: mhz(320.0),
            alpha2: mhz(280.0),
            m_cutoff: 7,
        }
    }
}

impl TwoQubitParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.g > 0.0 && self.g.is_finite()) {
            return Err(GeoError::Parameter(format!("coupling g must be positive, got {}", self.g)));
        }
        if self.m_cutoff < 3 {
            return Err(GeoError::Parameter(format!(
                "sideband cutoff must be at least 3, got {}",
                self.m_cutoff
            )));
        }
        for (name, v) in [("delta1", self.delta1), ("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !v.is_finite() {
                return Err(GeoError::Parameter(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// `ω₁(t) = ω₁ + ε sin(νt + φ)` with `β = ε/ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationParams {
    pub nu: f64,
    pub eps: f64,
    pub phi: f64,
    pub beta: f64,
}

impl ModulationParams {
    pub fn new(nu: f64, beta: f64, phi: f64) -> Result<Self> {
        let m = Self {
            nu,
            eps: beta * nu,
            phi,
            beta,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(GeoError::Parameter(format!("modulation frequency must be positive, got {}", self.nu)));
        }
        if !(self.beta >= 0.0) || (self.eps / self.nu - self.beta).abs() > 1e-9 * self.beta.max(1.0) {
            return Err(GeoError::Parameter(format!(
                "need beta = eps/nu >= 0, got beta = {}, eps/nu = {}",
                self.beta,
                self.eps / self.nu
            )));
        }
        Ok(())
    }
}

/// Which pair of states forms the effective qubit. The first state plays `|0⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubspaceKind {
    /// `{|01⟩, |10⟩}`.
    SingleExcitation,
    /// `{|02⟩, |11⟩}`.
    TwoExcitation,
}

impl SubspaceKind {
    pub fn for_gate(gate: GateName) -> Result<Self> {
        match gate {
            GateName::ISwap => Ok(Self::SingleExcitation),
            GateName::Cz => Ok(Self::TwoExcitation),
            other => Err(GeoError::Lookup(format!("{} is not a two-qubit gate", other.as_str()))),
        }
    }

    pub fn states(self) -> (usize, usize) {
        match self {
            Self::SingleExcitation => (basis::S01, basis::S10),
            Self::TwoExcitation => (basis::S02, basis::S11),
        }
    }

    /// Matrix-element factor of the coupling (1 or √2).
    pub fn weight(self) -> f64 {
        match self {
            Self::SingleExcitation => 1.0,
            Self::TwoExcitation => SQRT_2,
        }
    }

    /// Modulation frequency that puts the `m = −1` sideband exactly on resonance.
    pub fn resonance(self, p: &TwoQubitParams) -> f64 {
        match self {
            Self::SingleExcitation => p.delta1,
            Self::TwoExcitation => p.delta1 - p.alpha2,
        }
    }

    /// Largest effective coupling `2·w·g·max J₁`.
    pub fn max_coupling(self, p: &TwoQubitParams) -> f64 {
        2.0 * self.weight() * p.g * bessel_j_upto(1, J1_FIRST_MAX_ARG)[1]
    }

    pub fn coupling(self, p: &TwoQubitParams, beta: f64) -> f64 {
        2.0 * self.weight() * p.g * bessel_j_upto(1, beta)[1]
    }

    /// `β` on the rising branch of `J₁` giving effective coupling `g_eff`.
    pub fn beta_for(self, p: &TwoQubitParams, g_eff: f64) -> Result<f64> {
        inverse_j1(g_eff / (2.0 * self.weight() * p.g)).ok_or(GeoError::Amplitude {
            requested: g_eff,
            max: self.max_coupling(p),
        })
    }
}

/// Subspace choice plus the small detuning `Δ_s = ν − ν_res`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubspaceSelect {
    pub kind: SubspaceKind,
    pub delta_s: f64,
}

impl SubspaceSelect {
    pub fn new(kind: SubspaceKind) -> Self {
        Self { kind, delta_s: 0.0 }
    }

    pub fn nu(&self, p: &TwoQubitParams) -> f64 {
        self.kind.resonance(p) + self.delta_s
    }
}

/// Upper-triangle couplings `⟨01|H|10⟩`, `⟨02|H|11⟩`, `⟨11|H|20⟩`.
fn coupling_terms(p: &TwoQubitParams, m: &ModulationParams, t: f64) -> [C64; 3] {
    let mc = p.m_cutoff;
    let j = bessel_j_upto(mc, m.beta);
    let theta = m.nu * t + m.phi;
    let mut sum = C64::new(j[0], 0.0);
    let step = C64::from_polar(1.0, theta);
    let mut e = C64::new(1.0, 0.0);
    let mut im = C64::new(1.0, 0.0);
    for (k, jk) in j.iter().enumerate().skip(1) {
        e *= step;
        im *= C64::new(0.0, 1.0);
        // J_{−k} = (−1)^k J_k and i^{−k} = (−i)^k, so the −k term is conj(i^k e^{ikθ})·J_k
        let plus = im * e;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let minus = plus.conj() * sign;
        sum += (plus + minus) * *jk;
    }
    let s = sum * p.g;
    [
        s * C64::from_polar(1.0, p.delta1 * t),
        s * C64::from_polar(SQRT_2, (p.delta1 - p.alpha2) * t),
        s * C64::from_polar(SQRT_2, (p.delta1 + p.alpha1) * t),
    ]
}

/// Interaction Hamiltonian on `{|01⟩, |10⟩, |02⟩, |11⟩, |20⟩}`.
pub fn build_interaction_hamiltonian(p: &TwoQubitParams, m: &ModulationParams, t: f64) -> ComplexMatrix {
    let c = coupling_terms(p, m, t);
    let mut h = ComplexMatrix::zeros(5);
    for (k, (a, b)) in [(0, 1), (2, 3), (3, 4)].into_iter().enumerate() {
        h[(a, b)] = c[k];
        h[(b, a)] = c[k].conj();
    }
    h
}

/// One constant-coupling stretch of the modulation program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationSegment {
    pub start: f64,
    pub duration: f64,
    pub nu: f64,
    pub beta: f64,
    pub g_eff: f64,
    /// Frame detuning `Δ′` of the effective qubit.
    pub delta_prime: f64,
    /// Modulation phase `φ(t) = phase_start + phase_rate·(t − start)`.
    pub phase_start: f64,
    pub phase_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationProgram {
    pub select: SubspaceSelect,
    pub segments: Vec<ModulationSegment>,
}

impl ModulationProgram {
    pub fn total_time(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.start + s.duration)
    }

    /// `Θ = ∫Δ′ dt` over the whole program, the angle of the final frame `V`.
    pub fn frame_angle(&self) -> f64 {
        self.segments.iter().map(|s| s.delta_prime * s.duration).sum()
    }

    /// `V = exp(−iΘ S_z/2)` on the effective pair, embedded in the six-state basis.
    pub fn frame_unitary(&self) -> ComplexMatrix {
        let theta = self.frame_angle();
        let (a, b) = self.select.kind.states();
        let mut v = ComplexMatrix::identity(basis::DIM);
        v[(a, a)] = C64::from_polar(1.0, -0.5 * theta);
        v[(b, b)] = C64::from_polar(1.0, 0.5 * theta);
        v
    }

    pub fn modulation(seg: &ModulationSegment, t: f64) -> ModulationParams {
        ModulationParams {
            nu: seg.nu,
            eps: seg.beta * seg.nu,
            phi: seg.phase_start + seg.phase_rate * (t - seg.start),
            beta: seg.beta,
        }
    }
}

/// Modulation program that realizes `schedule` on the selected pair.
///
/// Every non-degenerate segment must have a square envelope (constant `g′`).
/// The phase program makes the effective phase in the frame `V(t)` equal to the
/// schedule's `φ(t)`.
pub fn effective_two_level(
    p: &TwoQubitParams,
    select: &SubspaceSelect,
    schedule: &PulseSchedule,
) -> Result<ModulationProgram> {
    p.validate()?;
    let nu = select.nu(p);
    if !(nu > 0.0) || select.delta_s.abs() >= nu / 10.0 {
        return Err(GeoError::Validity(format!(
            "small detuning {} must satisfy |delta_s| < nu/10 with nu = {nu}",
            select.delta_s
        )));
    }
    let mut t = 0.0;
    let mut frame = 0.0;
    let mut segments = Vec::new();
    for seg in schedule.segments.iter().filter(|s| !s.is_degenerate()) {
        if seg.envelope != Envelope::Square {
            return Err(GeoError::Parameter(
                "two-qubit schedules need square envelopes (constant g' per segment)".into(),
            ));
        }
        let g_eff = seg.peak();
        let beta = select.kind.beta_for(p, g_eff)?;
        let delta_prime = seg.detune_factor * g_eff;
        segments.push(ModulationSegment {
            start: t,
            duration: seg.duration,
            nu,
            beta,
            g_eff,
            delta_prime,
            phase_start: seg.phase_base + FRAC_PI_2 - select.delta_s * t + frame,
            phase_rate: seg.phase_slope * g_eff - select.delta_s + delta_prime,
        });
        t += seg.duration;
        frame += delta_prime * seg.duration;
    }
    Ok(ModulationProgram {
        select: *select,
        segments,
    })
}

/// `U` (2x2 on the effective pair) placed in the 4x4 computational space.
///
/// For the two-excitation pair only `|11⟩` is computational; the `|02⟩` row and
/// column are dropped.
pub fn embed_effective(kind: SubspaceKind, u: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::identity(4);
    match kind {
        SubspaceKind::SingleExcitation => {
            for i in 0..2 {
                for j in 0..2 {
                    out[(1 + i, 1 + j)] = u[(i, j)];
                }
            }
        }
        SubspaceKind::TwoExcitation => out[(3, 3)] = u[(1, 1)],
    }
    out
}

/// `|Tr(T†U)|/4` of the embedded effective gate against the embedded target.
pub fn embedded_fidelity(kind: SubspaceKind, target: &ComplexMatrix, actual: &ComplexMatrix) -> f64 {
    let t = embed_effective(kind, target);
    let u = embed_effective(kind, actual);
    t.adjoint().matmul(&u).trace().norm() / 4.0
}

/// Choice of effective coupling for synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveChoice {
    pub beta: f64,
    pub delta_s: f64,
    pub xi_branch: XiBranch,
}

impl Default for DriveChoice {
    fn default() -> Self {
        Self {
            beta: 1.0,
            delta_s: 0.0,
            xi_branch: XiBranch::Shortest,
        }
    }
}

/// Effective-model schedule, its modulation program and the targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitProgram {
    pub gate: GateName,
    pub schedule: PulseSchedule,
    pub modulation: ModulationProgram,
    /// Gate on the effective pair.
    pub target2: ComplexMatrix,
    /// Gate on `|00⟩, |01⟩, |10⟩, |11⟩`.
    pub target4: ComplexMatrix,
    pub trajectory: Option<TrajectorySpec>,
}

fn gate_params(gate: GateName) -> Result<GateParams> {
    let (chi0, xi0, gamma) = gate.geometric_triple();
    GateParams::new(chi0, xi0, gamma)
}

fn finish(
    gate: GateName,
    kind: SubspaceKind,
    schedule: PulseSchedule,
    target2: ComplexMatrix,
    trajectory: Option<TrajectorySpec>,
    p: &TwoQubitParams,
    delta_s: f64,
) -> Result<TwoQubitProgram> {
    let select = SubspaceSelect { kind, delta_s };
    let modulation = effective_two_level(p, &select, &schedule)?;
    Ok(TwoQubitProgram {
        gate,
        schedule,
        modulation,
        target2,
        target4: gate.ideal(),
        trajectory,
    })
}

/// Five-segment geometric iSWAP or CZ for loop parameters `gp` (one of the
/// gate's loop candidates).
pub fn synth_two_qubit_loop(
    gate: GateName,
    gp: &GateParams,
    chi1: f64,
    chi3: f64,
    p: &TwoQubitParams,
    drive: &DriveChoice,
) -> Result<TwoQubitProgram> {
    let kind = SubspaceKind::for_gate(gate)?;
    let g_eff = kind.coupling(p, drive.beta);
    if !(drive.beta > 0.0 && drive.beta <= J1_FIRST_MAX_ARG) {
        return Err(GeoError::Parameter(format!(
            "beta must lie in (0, {J1_FIRST_MAX_ARG}], got {}",
            drive.beta
        )));
    }
    let opts = SynthOptions {
        envelope: Envelope::Square,
        xi_branch: drive.xi_branch,
    };
    let (schedule, traj) = synth_five_segment_with(gp, chi1, chi3, g_eff, opts)?;
    finish(gate, kind, schedule, gp.unitary(), Some(traj), p, drive.delta_s)
}

pub fn synth_two_qubit_geo(
    gate: GateName,
    chi1: f64,
    chi3: f64,
    p: &TwoQubitParams,
    drive: &DriveChoice,
) -> Result<TwoQubitProgram> {
    synth_two_qubit_loop(gate, &gate_params(gate)?, chi1, chi3, p, drive)
}

/// Resonant constant-phase counterpart: `θ = π, φ = π` on `{|01⟩, |10⟩}` for
/// iSWAP, `θ = 2π` on `{|02⟩, |11⟩}` for CZ.
pub fn conventional_spec(gate: GateName) -> Result<ConventionalGateSpec> {
    match gate {
        GateName::ISwap => ConventionalGateSpec::new(PI, PI),
        GateName::Cz => ConventionalGateSpec::new(2.0 * PI, 0.0),
        other => Err(GeoError::Lookup(format!("{} is not a two-qubit gate", other.as_str()))),
    }
}

pub fn synth_two_qubit_conventional(
    gate: GateName,
    p: &TwoQubitParams,
    drive: &DriveChoice,
) -> Result<TwoQubitProgram> {
    let kind = SubspaceKind::for_gate(gate)?;
    let spec = conventional_spec(gate)?;
    let schedule = synth_conventional_with(&spec, kind.coupling(p, drive.beta), Envelope::Square)?;
    finish(gate, kind, schedule, spec.unitary(), None, p, drive.delta_s)
}

/// Effective-model infidelity `1 − F` under `Δ′ → Δ′ + δ′g′`.
pub fn effective_infidelity(prog: &TwoQubitProgram, delta: f64, stepping: &SegmentStepping) -> Result<f64> {
    let err = ErrorModel::detuning(delta);
    let u = propagate_schedule(&prog.schedule, &err, stepping)?;
    let kind = prog.modulation.select.kind;
    Ok((1.0 - embedded_fidelity(kind, &prog.target2, &u)).max(0.0))
}

/// Infidelity against `δ′` in the effective model.
pub fn sensitivity_two_qubit(
    prog: &TwoQubitProgram,
    grid: &[f64],
    stepping: &SegmentStepping,
) -> Result<SensitivityCurve> {
    sensitivity_curve_with(prog.gate.as_str(), grid, |d| effective_infidelity(prog, d, stepping))
}

/// Optimizer scorer for an effective-model loop: the embedded `1 − F` at the
/// configured probe values.
pub fn embedded_scorer(
    kind: SubspaceKind,
    target: ComplexMatrix,
) -> impl Fn(&PulseSchedule, &crate::optimizer::ScanConfig) -> Result<f64> + Sync {
    move |sched, cfg| {
        let probes = cfg.probe_values();
        let mut sum = 0.0;
        for v in &probes {
            let err = cfg.error_kind.model(*v, sched.omega_max);
            let u = propagate_schedule(sched, &err, &cfg.stepping)?;
            sum += 1.0 - embedded_fidelity(kind, &target, &u);
        }
        Ok(sum / probes.len() as f64)
    }
}

/// Relaxation and pure-dephasing times of the two transmons (μs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoherence {
    pub t1: [f64; 2],
    pub tphi: [f64; 2],
}

impl Default for Decoherence {
    fn default() -> Self {
        Self {
            t1: [50.0; 2],
            tphi: [50.0; 2],
        }
    }
}

impl Decoherence {
    pub fn none() -> Self {
        Self {
            t1: [f64::INFINITY; 2],
            tphi: [f64::INFINITY; 2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t1.iter().chain(&self.tphi).any(|t| !(*t > 0.0)) {
            return Err(GeoError::Parameter("coherence times must be positive".into()));
        }
        Ok(())
    }
}

/// Which sidebands enter the full model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Sidebands {
    /// Every `|m| ≤ m_cutoff` term of all three couplings.
    #[default]
    All,
    /// Only the `m = −1` term of the selected pair.
    ResonantOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullSimOptions {
    pub sidebands: Sidebands,
    /// Largest phase advance of the fastest significant term per RK4 step.
    pub max_phase_step: f64,
    /// Terms whose amplitude times gate time is below this are ignored when
    /// choosing the step.
    pub negligible_area: f64,
    pub max_steps: usize,
    /// Optimize single-qubit Z phases before comparing with the target.
    pub virtual_z: bool,
}

impl Default for FullSimOptions {
    fn default() -> Self {
        Self {
            sidebands: Sidebands::All,
            max_phase_step: 0.4,
            negligible_area: 1e-5,
            max_steps: 2_000_000,
            virtual_z: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullSimResult {
    /// Average gate fidelity on the computational subspace.
    pub fidelity: f64,
    /// Mean population left outside the computational subspace.
    pub leakage: f64,
    /// Population of `{|02⟩, |20⟩}` after starting in `|11⟩`.
    pub leakage_11: f64,
    /// Applied virtual Z phases on qubits 1 and 2.
    pub z_phases: [f64; 2],
    pub steps: usize,
}

struct TwoTransmonLindbladian<'a> {
    p: &'a TwoQubitParams,
    seg: &'a ModulationSegment,
    resonant_only: Option<SubspaceKind>,
    // rate applied elementwise to ρ_ij from the anticommutator and dephasing terms
    diag_rate: [f64; 36],
    // (dst, src, amplitude) of each lowering operator, already scaled by 1/√T1
    jumps: Vec<Vec<(usize, usize, f64)>>,
}

impl<'a> TwoTransmonLindbladian<'a> {
    fn new(
        p: &'a TwoQubitParams,
        seg: &'a ModulationSegment,
        dec: &Decoherence,
        resonant_only: Option<SubspaceKind>,
    ) -> Self {
        let occ = basis::OCCUPATION;
        let n_q = |i: usize, q: usize| if q == 0 { occ[i].0 } else { occ[i].1 } as f64;
        let mut diag_rate = [0.0; 36];
        for i in 0..6 {
            for j in 0..6 {
                let mut r = 0.0;
                for q in 0..2 {
                    if dec.t1[q].is_finite() {
                        r -= 0.5 * (n_q(i, q) + n_q(j, q)) / dec.t1[q];
                    }
                    if dec.tphi[q].is_finite() {
                        r -= (n_q(i, q) - n_q(j, q)).powi(2) / dec.tphi[q];
                    }
                }
                diag_rate[i * 6 + j] = r;
            }
        }
        let mut jumps = Vec::new();
        for q in 0..2 {
            if !dec.t1[q].is_finite() {
                continue;
            }
            let mut ops = Vec::new();
            for (src, &(a, b)) in occ.iter().enumerate() {
                let (lowered, n) = if q == 0 { ((a.wrapping_sub(1), b), a) } else { ((a, b.wrapping_sub(1)), b) };
                if n == 0 {
                    continue;
                }
                let dst = occ.iter().position(|&s| s == lowered).expect("lowered state in basis");
                ops.push((dst, src, (n as f64 / dec.t1[q]).sqrt()));
            }
            jumps.push(ops);
        }
        Self {
            p,
            seg,
            resonant_only,
            diag_rate,
            jumps,
        }
    }

    fn couplings(&self, t: f64) -> [(usize, usize, C64); 3] {
        let m = ModulationProgram::modulation(self.seg, t);
        let c = match self.resonant_only {
            None => coupling_terms(self.p, &m, t),
            Some(kind) => {
                // m = −1 term: g·i⁻¹·J₋₁(β)·e^{−i(νt+φ)} = i g J₁ e^{−i(νt+φ)}
                let j1 = bessel_j_upto(1, m.beta)[1];
                let base = C64::new(0.0, self.p.g * j1) * C64::from_polar(1.0, -(m.nu * t + m.phi));
                let mut c = [C64::new(0.0, 0.0); 3];
                match kind {
                    SubspaceKind::SingleExcitation => c[0] = base * C64::from_polar(1.0, self.p.delta1 * t),
                    SubspaceKind::TwoExcitation => {
                        c[1] = base * C64::from_polar(SQRT_2, (self.p.delta1 - self.p.alpha2) * t)
                    }
                }
                c
            }
        };
        use basis::*;
        [(S01, S10, c[0]), (S02, S11, c[1]), (S11, S20, c[2])]
    }
}

impl Lindbladian for TwoTransmonLindbladian<'_> {
    fn dim(&self) -> usize {
        basis::DIM
    }

    fn apply(&self, t: f64, batch: &[C64], out: &mut [C64]) {
        const N: usize = basis::DIM;
        let h = self.couplings(t);
        let mi = C64::new(0.0, -1.0);
        for (rho, o) in batch.chunks(N * N).zip(out.chunks_mut(N * N)) {
            for k in 0..N * N {
                o[k] = rho[k] * self.diag_rate[k];
            }
            // −i[H, ρ] with H_ab = c, H_ba = c*
            for &(a, b, c) in &h {
                let cc = c.conj();
                for j in 0..N {
                    o[a * N + j] += mi * c * rho[b * N + j];
                    o[b * N + j] += mi * cc * rho[a * N + j];
                    o[j * N + b] -= mi * rho[j * N + a] * c;
                    o[j * N + a] -= mi * rho[j * N + b] * cc;
                }
            }
            for ops in &self.jumps {
                for &(di, si, ai) in ops {
                    for &(dj, sj, aj) in ops {
                        o[di * N + dj] += rho[si * N + sj] * (ai * aj);
                    }
                }
            }
        }
    }
}

/// Step count for one program segment.
fn segment_steps(
    p: &TwoQubitParams,
    seg: &ModulationSegment,
    total_time: f64,
    opts: &FullSimOptions,
) -> Result<usize> {
    let j = bessel_j_upto(p.m_cutoff, seg.beta);
    let carriers = match opts.sidebands {
        Sidebands::All => vec![(p.delta1, 1.0), (p.delta1 - p.alpha2, SQRT_2), (p.delta1 + p.alpha1, SQRT_2)],
        Sidebands::ResonantOnly => vec![(0.0, 1.0)],
    };
    let mut fastest: f64 = 0.0;
    for &(carrier, w) in &carriers {
        for (k, jk) in j.iter().enumerate() {
            if p.g * w * jk.abs() * total_time < opts.negligible_area {
                continue;
            }
            for m in [k as f64, -(k as f64)] {
                fastest = fastest.max((carrier + m * seg.nu + seg.phase_rate).abs());
            }
        }
    }
    let rate = fastest.max(2.0 * SQRT_2 * p.g);
    let steps = ((seg.duration * rate / opts.max_phase_step).ceil() as usize).max(8);
    if steps > opts.max_steps {
        return Err(GeoError::Convergence(format!(
            "segment needs {steps} steps, cap is {}",
            opts.max_steps
        )));
    }
    Ok(steps)
}

/// Evolves `|i⟩⟨j|` for every pair of computational states (`i ≤ j`; the rest
/// follow by Hermitian conjugation). Returns the 16 outputs in row-major order
/// over `(i, j)` and the total step count.
pub fn evolve_computational(
    prog: &TwoQubitProgram,
    p: &TwoQubitParams,
    dec: &Decoherence,
    opts: &FullSimOptions,
) -> Result<(Vec<ComplexMatrix>, usize)> {
    p.validate()?;
    dec.validate()?;
    const N: usize = basis::DIM;
    let comp = basis::COMPUTATIONAL;
    let pairs: Vec<(usize, usize)> = (0..4).flat_map(|i| (i..4).map(move |j| (i, j))).collect();
    let mut state = vec![C64::new(0.0, 0.0); pairs.len() * N * N];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        state[k * N * N + comp[i] * N + comp[j]] = C64::new(1.0, 0.0);
    }
    let resonant = match opts.sidebands {
        Sidebands::All => None,
        Sidebands::ResonantOnly => Some(prog.modulation.select.kind),
    };
    let total = prog.modulation.total_time();
    let mut steps_total = 0;
    for seg in &prog.modulation.segments {
        let steps = segment_steps(p, seg, total, opts)?;
        let l = TwoTransmonLindbladian::new(p, seg, dec, resonant);
        rk4_evolve(&l, &mut state, seg.start, seg.start + seg.duration, steps);
        steps_total += steps;
    }
    let evolved: Vec<ComplexMatrix> = state
        .chunks(N * N)
        .map(|c| ComplexMatrix::from_vec(c.to_vec()))
        .collect::<Result<_>>()?;
    let mut out = vec![ComplexMatrix::zeros(N); 16];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        out[i * 4 + j] = evolved[k].clone();
        if i != j {
            out[j * 4 + i] = evolved[k].adjoint();
        }
    }
    Ok((out, steps_total))
}

/// Average gate fidelity of the evolved map against `target` (4x4), with
/// optional virtual Z phases on each qubit.
fn map_fidelity(outputs: &[ComplexMatrix], target: &ComplexMatrix, virtual_z: bool) -> (f64, [f64; 2]) {
    let comp = basis::COMPUTATIONAL;
    // F_pro(θ) = Σ_kl e^{i(θ_l − θ_k)} C_kl with the target's output phases θ
    let mut c = [[C64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let e = &outputs[i * 4 + j];
            for k in 0..4 {
                for l in 0..4 {
                    c[k][l] += target[(k, i)].conj() * e[(comp[k], comp[l])] * target[(l, j)];
                }
            }
        }
    }
    let f_pro = |a: f64, b: f64| {
        // phases of |00⟩, |01⟩, |10⟩, |11⟩ under Z(a) ⊗ Z(b)
        let th = [0.0, b, a, a + b];
        let mut s = C64::new(0.0, 0.0);
        for k in 0..4 {
            for l in 0..4 {
                s += c[k][l] * C64::from_polar(1.0, th[l] - th[k]);
            }
        }
        s.re / 16.0
    };
    let mut best = (f_pro(0.0, 0.0), [0.0, 0.0]);
    if virtual_z {
        let n = 72;
        for ia in 0..n {
            for ib in 0..n {
                let (a, b) = (2.0 * PI * ia as f64 / n as f64, 2.0 * PI * ib as f64 / n as f64);
                let f = f_pro(a, b);
                if f > best.0 {
                    best = (f, [a, b]);
                }
            }
        }
        let mut h = 2.0 * PI / n as f64;
        while h > 1e-9 {
            let [a, b] = best.1;
            for (da, db) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
                let f = f_pro(a + da, b + db);
                if f > best.0 {
                    best = (f, [a + da, b + db]);
                }
            }
            if best.1 == [a, b] {
                h *= 0.5;
            }
        }
    }
    let retained: f64 = (0..4)
        .map(|i| (0..4).map(|k| outputs[i * 4 + i][(comp[k], comp[k])].re).sum::<f64>())
        .sum::<f64>()
        / 4.0;
    let d = 4.0;
    ((d * d * best.0 + d * retained) / (d * (d + 1.0)), best.1)
}

/// Full-model open-system fidelity of a compiled program.
pub fn simulate_full(
    prog: &TwoQubitProgram,
    p: &TwoQubitParams,
    dec: &Decoherence,
    opts: &FullSimOptions,
) -> Result<FullSimResult> {
    let (outputs, steps) = evolve_computational(prog, p, dec, opts)?;
    let (fidelity, z_phases) = map_fidelity(&outputs, &prog.target4, opts.virtual_z);
    let comp = basis::COMPUTATIONAL;
    let leakage = (0..4)
        .map(|i| {
            let rho = &outputs[i * 5];
            1.0 - comp.iter().map(|&k| rho[(k, k)].re).sum::<f64>()
        })
        .sum::<f64>()
        / 4.0;
    let r11 = &outputs[15];
    let leakage_11 = r11[(basis::S02, basis::S02)].re + r11[(basis::S20, basis::S20)].re;
    Ok(FullSimResult {
        fidelity,
        leakage,
        leakage_11,
        z_phases,
        steps,
    })
}

/// Loop and waypoints of a geometric program, independent of the drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopChoice {
    pub gate: GateName,
    pub params: GateParams,
    pub xi_branch: XiBranch,
    pub chi1: f64,
    pub chi3: f64,
}

impl LoopChoice {
    pub fn compile(&self, p: &TwoQubitParams, beta: f64, delta_s: f64) -> Result<TwoQubitProgram> {
        let drive = DriveChoice {
            beta,
            delta_s,
            xi_branch: self.xi_branch,
        };
        synth_two_qubit_loop(self.gate, &self.params, self.chi1, self.chi3, p, &drive)
    }
}

/// `(ν, β)` window around the resonance of the gate's pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuBetaGrid {
    pub nu_halfwidth: f64,
    pub nu_points: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_points: usize,
}

impl Default for NuBetaGrid {
    fn default() -> Self {
        Self {
            nu_halfwidth: mhz(20.0),
            nu_points: 41,
            beta_min: 0.2,
            beta_max: 1.8,
            beta_points: 33,
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuBetaScan {
    pub nu: Vec<f64>,
    pub beta: Vec<f64>,
    /// `fidelity[i][j]` at `(nu[i], beta[j])`.
    pub fidelity: Vec<Vec<f64>>,
}

impl NuBetaScan {
    /// `(ν, β, F)` of the best cell (NaN cells skipped).
    pub fn best(&self) -> (f64, f64, f64) {
        let mut best = (f64::NAN, f64::NAN, f64::NEG_INFINITY);
        for (i, row) in self.fidelity.iter().enumerate() {
            for (j, &f) in row.iter().enumerate() {
                if f > best.2 {
                    best = (self.nu[i], self.beta[j], f);
                }
            }
        }
        best
    }
}

/// Recompiles the loop at every `(ν, β)` cell (`Δ_s = ν − ν_res`) and runs the
/// full model. Cells where `|Δ_s| < ν/10` fails are NaN. Cells run in
/// parallel; `progress` is called after each one.
pub fn scan_nu_beta<P>(
    choice: &LoopChoice,
    p: &TwoQubitParams,
    dec: &Decoherence,
    grid: &NuBetaGrid,
    opts: &FullSimOptions,
    progress: P,
) -> Result<NuBetaScan>
where
    P: Fn(usize, usize) + Sync,
{
    if grid.nu_points == 0 || grid.beta_points == 0 {
        return Err(GeoError::Parameter("scan grid needs at least one point per axis".into()));
    }
    if !(0.0 < grid.beta_min && grid.beta_min <= grid.beta_max && grid.beta_max <= J1_FIRST_MAX_ARG) {
        return Err(GeoError::Parameter(format!(
            "beta window [{}, {}] must lie in (0, {J1_FIRST_MAX_ARG}]",
            grid.beta_min, grid.beta_max
        )));
    }
    let kind = SubspaceKind::for_gate(choice.gate)?;
    let res = kind.resonance(p);
    let nu = linspace(res - grid.nu_halfwidth, res + grid.nu_halfwidth, grid.nu_points);
    let beta = linspace(grid.beta_min, grid.beta_max, grid.beta_points);
    let cells: Vec<(usize, usize)> = (0..nu.len())
        .flat_map(|i| (0..beta.len()).map(move |j| (i, j)))
        .collect();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let values = cells
        .par_iter()
        .map(|&(i, j)| {
            let f = match choice.compile(p, beta[j], nu[i] - res) {
                Ok(prog) => simulate_full(&prog, p, dec, opts)?.fidelity,
                Err(GeoError::Validity(_)) => f64::NAN,
                Err(e) => return Err(e),
            };
            let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
            progress(n, cells.len());
            Ok(f)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut fidelity = vec![vec![0.0; beta.len()]; nu.len()];
    for (&(i, j), f) in cells.iter().zip(values) {
        fidelity[i][j] = f;
    }
    Ok(NuBetaScan { nu, beta, fidelity })
}

/// Writes `nu,beta,fidelity` rows with `ν` in MHz.
pub fn write_nu_beta_csv<W: Write>(scan: &NuBetaScan, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["nu", "beta", "fidelity"])?;
    for (i, row) in scan.fidelity.iter().enumerate() {
        for (j, f) in row.iter().enumerate() {
            w.write_record([
                format!("{}", scan.nu[i] / (2.0 * PI)),
                format!("{}", scan.beta[j]),
                format!("{f}"),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{bessel_j, distance_up_to_phase, TimeGrid};
    use crate::numkit::propagate_with;
    use crate::numkit::PropagateOptions;
    use crate::numkit::Integrator;
    use crate::geo::geometric_phase;

    fn stepping() -> SegmentStepping {
        SegmentStepping::magnus(200)
    }

    #[test]
    fn static_couplings_at_zero_beta() {
        let p = TwoQubitParams::default();
        let m = ModulationParams::new(mhz(500.0), 0.0, 0.3).unwrap();
        let t = 0.013;
        let h = build_interaction_hamiltonian(&p, &m, t);
        let expect = C64::from_polar(p.g, p.delta1 * t);
        assert!((h[(0, 1)] - expect).norm() < 1e-12);
        let expect = C64::from_polar(SQRT_2 * p.g, (p.delta1 + p.alpha1) * t);
        assert!((h[(3, 4)] - expect).norm() < 1e-12);
    }

    #[test]
    fn series_matches_direct_sum() {
        let p = TwoQubitParams {
            m_cutoff: 5,
            ..Default::default()
        };
        let phi = 0.4;
        let m = ModulationParams::new(mhz(300.0), 1.0, phi).unwrap();
        let h = build_interaction_hamiltonian(&p, &m, 0.0);
        let mut s = C64::new(0.0, 0.0);
        for k in -5i32..=5 {
            let jm = bessel_j(k.abs(), 1.0).unwrap() * if k < 0 && k % 2 != 0 { -1.0 } else { 1.0 };
            s += C64::new(0.0, 1.0).powi(k) * jm * C64::from_polar(1.0, k as f64 * phi);
        }
        assert!((h[(2, 3)].norm() - SQRT_2 * p.g * s.norm()).abs() < 1e-10);
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let p = TwoQubitParams::default();
        let m = ModulationParams::new(mhz(480.0), 1.3, 0.2).unwrap();
        for t in [0.0, 0.0173, 0.31, 1.7] {
            assert!(build_interaction_hamiltonian(&p, &m, t).is_hermitian(1e-12));
        }
    }

    #[test]
    fn bessel_inversion_recovers_beta() {
        let p = TwoQubitParams::default();
        let kind = SubspaceKind::SingleExcitation;
        let g_eff = 2.0 * p.g * bessel_j(1, 1.8).unwrap();
        assert!((kind.beta_for(&p, g_eff).unwrap() - 1.8).abs() < 1e-8);
        let too_big = kind.max_coupling(&p) * 1.01;
        assert!(matches!(kind.beta_for(&p, too_big), Err(GeoError::Amplitude { .. })));
    }

    #[test]
    fn validity_and_envelope_checks() {
        let p = TwoQubitParams::default();
        let sched = synth_conventional_with(&conventional_spec(GateName::ISwap).unwrap(), 10.0, Envelope::Square).unwrap();
        let far = SubspaceSelect {
            kind: SubspaceKind::SingleExcitation,
            delta_s: p.delta1,
        };
        assert!(matches!(effective_two_level(&p, &far, &sched), Err(GeoError::Validity(_))));
        let sine = synth_conventional_with(&conventional_spec(GateName::ISwap).unwrap(), 10.0, Envelope::Sine).unwrap();
        let sel = SubspaceSelect::new(SubspaceKind::SingleExcitation);
        assert!(effective_two_level(&p, &sel, &sine).is_err());
    }

    #[test]
    fn resonant_segment_has_constant_phase() {
        let p = TwoQubitParams::default();
        let sched = synth_conventional_with(&ConventionalGateSpec::new(PI, 0.7).unwrap(), 20.0, Envelope::Square).unwrap();
        let prog = effective_two_level(&p, &SubspaceSelect::new(SubspaceKind::SingleExcitation), &sched).unwrap();
        let s = prog.segments[0];
        assert_eq!(s.phase_rate, 0.0);
        assert!((s.phase_start - (0.7 + FRAC_PI_2)).abs() < 1e-15);
        assert!((s.nu - p.delta1).abs() < 1e-12);
    }

    #[test]
    fn latitude_segment_phase_program() {
        let p = TwoQubitParams::default();
        let prog = synth_two_qubit_geo(GateName::ISwap, 0.27 * PI, 0.73 * PI, &p, &DriveChoice {
            delta_s: mhz(3.0),
            ..Default::default()
        })
        .unwrap();
        let chi1 = 0.27 * PI;
        let lat = prog.schedule.segments.iter().find(|s| s.detune_factor != 0.0).unwrap();
        let m = prog.modulation.segments.iter().find(|s| s.delta_prime != 0.0).unwrap();
        let g = m.g_eff;
        assert!((m.delta_prime - lat.detune_factor * g).abs() < 1e-9);
        assert!((m.delta_prime.abs() - g * chi1.tan()).abs() < 1e-9);
        // effective phase slope (Δ_s − Δ′) + program slope reproduces the schedule slope
        let eff_slope = mhz(3.0) - m.delta_prime + m.phase_rate;
        assert!((eff_slope - lat.phase_slope * g).abs() < 1e-9);
    }

    #[test]
    fn iswap_effective_gate() {
        let p = TwoQubitParams::default();
        let prog = synth_two_qubit_geo(GateName::ISwap, 0.27 * PI, 0.73 * PI, &p, &DriveChoice::default()).unwrap();
        let u = propagate_schedule(&prog.schedule, &ErrorModel::default(), &stepping()).unwrap();
        let want = GateParams::new(FRAC_PI_2, 0.0, FRAC_PI_2).unwrap().unitary();
        assert!(distance_up_to_phase(&u, &want).unwrap().value < 1e-6);
        let gamma = geometric_phase(prog.trajectory.as_ref().unwrap()).unwrap();
        assert!((crate::geo::wrap_angle(gamma - FRAC_PI_2)).abs() < 1e-9);
    }

    #[test]
    fn cz_loop_has_pole_jump() {
        let p = TwoQubitParams::default();
        let prog = synth_two_qubit_geo(GateName::Cz, 0.0, 0.9 * PI, &p, &DriveChoice::default()).unwrap();
        assert!(prog.schedule.segments[1].is_degenerate());
        let u = propagate_schedule(&prog.schedule, &ErrorModel::default(), &stepping()).unwrap();
        assert!((u[(1, 1)] + C64::new(1.0, 0.0)).norm() < 1e-6);
        assert!(effective_infidelity(&prog, 0.0, &stepping()).unwrap() < 1e-8);
    }

    #[test]
    fn conventional_counterparts_are_exact() {
        let p = TwoQubitParams::default();
        for gate in [GateName::ISwap, GateName::Cz] {
            let prog = synth_two_qubit_conventional(gate, &p, &DriveChoice::default()).unwrap();
            assert!(effective_infidelity(&prog, 0.0, &stepping()).unwrap() < 1e-8);
        }
    }

    // Only the resonant term, no decoherence: the pair evolves as
    // V(τ)·U_eff with U_eff the effective two-level propagator.
    #[test]
    fn resonant_only_matches_effective_model() {
        let p = TwoQubitParams::default();
        for gate in [GateName::ISwap, GateName::Cz] {
            let prog = synth_two_qubit_geo(gate, 0.2 * PI, 0.8 * PI, &p, &DriveChoice::default()).unwrap();
            let u2 = propagate_schedule(&prog.schedule, &ErrorModel::default(), &stepping()).unwrap();
            let opts = FullSimOptions {
                sidebands: Sidebands::ResonantOnly,
                virtual_z: false,
                ..Default::default()
            };
            let (outs, _) = evolve_computational(&prog, &p, &Decoherence::none(), &opts).unwrap();
            let v = prog.modulation.frame_unitary();
            let (a, b) = prog.modulation.select.kind.states();
            // column of |1⟩ of the pair: evolve |b⟩⟨b| and read the pair block
            let rho = &outs[if b == basis::S10 { 2 * 4 + 2 } else { 15 }];
            let col = [
                v[(a, a)] * u2[(0, 1)],
                v[(b, b)] * u2[(1, 1)],
            ];
            let idx = [a, b];
            for r in 0..2 {
                for c in 0..2 {
                    let want = col[r] * col[c].conj();
                    assert!((rho[(idx[r], idx[c])] - want).norm() < 1e-3, "{gate:?}");
                }
            }
        }
    }

    #[test]
    fn closed_resonant_iswap_fidelity_is_one() {
        let p = TwoQubitParams::default();
        let prog = synth_two_qubit_geo(GateName::ISwap, 0.27 * PI, 0.73 * PI, &p, &DriveChoice::default()).unwrap();
        let opts = FullSimOptions {
            sidebands: Sidebands::ResonantOnly,
            ..Default::default()
        };
        let r = simulate_full(&prog, &p, &Decoherence::none(), &opts).unwrap();
        assert!(r.fidelity > 1.0 - 1e-3, "{}", r.fidelity);
        assert!(r.leakage.abs() < 1e-9);
    }

    #[test]
    fn decoherence_only_removes_fidelity() {
        let p = TwoQubitParams::default();
        let prog = synth_two_qubit_conventional(GateName::ISwap, &p, &DriveChoice::default()).unwrap();
        let opts = FullSimOptions {
            sidebands: Sidebands::ResonantOnly,
            ..Default::default()
        };
        let (outs, _) = evolve_computational(&prog, &p, &Decoherence::default(), &opts).unwrap();
        for i in 0..4 {
            let rho = &outs[i * 5];
            assert!((rho.trace().re - 1.0).abs() < 1e-9);
            assert!(rho.is_hermitian(1e-12));
        }
        let closed = simulate_full(&prog, &p, &Decoherence::none(), &opts).unwrap().fidelity;
        let open = simulate_full(&prog, &p, &Decoherence::default(), &opts).unwrap().fidelity;
        assert!(open < closed);
    }

    #[test]
    fn exact_exponential_check_of_rk4_path() {
        // single static coupling: compare with the closed-form 2x2 rotation
        let p = TwoQubitParams::default();
        let seg = ModulationSegment {
            start: 0.0,
            duration: 0.05,
            nu: p.delta1,
            beta: 1.0,
            g_eff: 2.0 * p.g * bessel_j(1, 1.0).unwrap(),
            delta_prime: 0.0,
            phase_start: 0.0,
            phase_rate: 0.0,
        };
        let m = ModulationProgram::modulation(&seg, 0.0);
        let grid = TimeGrid::fixed(0.0, seg.duration, 4000).unwrap();
        let opts = PropagateOptions {
            integrator: Integrator::Magnus4,
            richardson: false,
        };
        let u = propagate_with(|t| Ok(build_interaction_hamiltonian(&p, &m, t)), &grid, opts).unwrap();
        assert!(u.unitarity_defect() < 1e-8);
    }

    #[test]
    fn csv_header() {
        let scan = NuBetaScan {
            nu: vec![mhz(500.0)],
            beta: vec![1.0],
            fidelity: vec![vec![0.99]],
        };
        let mut buf = Vec::new();
        write_nu_beta_csv(&scan, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("nu,beta,fidelity"));
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert!((row[0] - 500.0).abs() < 1e-9 && row[1] == 1.0 && row[2] == 0.99);
    }
}
