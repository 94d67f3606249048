//! Driven two-level Hamiltonian and piecewise pulse schedules.
//!
//! A schedule is a list of segments, each with an envelope `Ω(t)` of fixed
//! area, a phase that may drift linearly in accumulated area, and a detuning
//! locked to the envelope (`Δ = factor · Ω`).

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::numkit::{
    propagate_observed, propagate_with, ComplexMatrix, Integrator, PropagateOptions, StepPolicy,
    TimeGrid, DEFAULT_STEPS,
};
use crate::robustness::ErrorModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Envelope {
    /// `Ω(t) = Ω_peak sin(π t / d)` on the segment's local time.
    #[default]
    Sine,
    Square,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSegment {
    pub duration: f64,
    /// `∫Ω dt` over the segment.
    pub area: f64,
    pub envelope: Envelope,
    pub phase_base: f64,
    /// `φ(t) = phase_base + phase_slope · ∫₀ᵗ Ω`.
    pub phase_slope: f64,
    /// `Δ(t) = detune_factor · Ω(t)`.
    pub detune_factor: f64,
}

impl PulseSegment {
    pub fn new(
        duration: f64,
        area: f64,
        envelope: Envelope,
        phase_base: f64,
        phase_slope: f64,
        detune_factor: f64,
    ) -> Result<Self> {
        let seg = Self {
            duration,
            area,
            envelope,
            phase_base,
            phase_slope,
            detune_factor,
        };
        seg.validate()?;
        Ok(seg)
    }

    /// Segment with the duration implied by a fixed peak amplitude.
    pub fn with_peak(
        area: f64,
        peak: f64,
        envelope: Envelope,
        phase_base: f64,
        phase_slope: f64,
        detune_factor: f64,
    ) -> Result<Self> {
        if !(peak > 0.0) {
            return Err(GeoError::Parameter(format!("peak amplitude must be positive, got {peak}")));
        }
        Self::new(
            duration_for_area(area, peak, envelope),
            area,
            envelope,
            phase_base,
            phase_slope,
            detune_factor,
        )
    }

    /// Zero-duration placeholder (pole frame jumps, collapsed longitudes).
    pub fn degenerate(phase_base: f64, detune_factor: f64) -> Self {
        Self {
            duration: 0.0,
            area: 0.0,
            envelope: Envelope::Sine,
            phase_base,
            phase_slope: 0.0,
            detune_factor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.duration,
            self.area,
            self.phase_base,
            self.phase_slope,
            self.detune_factor,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(GeoError::Parameter("non-finite segment field".into()));
        }
        if self.area < 0.0 || self.duration < 0.0 {
            return Err(GeoError::Parameter(format!(
                "segment area {} and duration {} must be nonnegative",
                self.area, self.duration
            )));
        }
        if (self.duration == 0.0) != (self.area == 0.0) {
            return Err(GeoError::Parameter(
                "segment duration is zero iff its area is zero".into(),
            ));
        }
        Ok(())
    }

    pub fn is_degenerate(&self) -> bool {
        self.duration == 0.0
    }

    pub fn peak(&self) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        match self.envelope {
            Envelope::Sine => self.area * PI / (2.0 * self.duration),
            Envelope::Square => self.area / self.duration,
        }
    }

    /// `Ω` at local time `s ∈ [0, duration]`.
    pub fn omega(&self, s: f64) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        match self.envelope {
            Envelope::Sine => self.peak() * (PI * s / self.duration).sin(),
            Envelope::Square => self.peak(),
        }
    }

    /// `dΩ/dt` at local time `s`; zero for square envelopes away from the edges.
    pub fn omega_dot(&self, s: f64) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        match self.envelope {
            Envelope::Sine => self.peak() * PI / self.duration * (PI * s / self.duration).cos(),
            Envelope::Square => 0.0,
        }
    }

    /// `∫₀ˢ Ω`.
    pub fn accumulated_area(&self, s: f64) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        match self.envelope {
            Envelope::Sine => {
                self.peak() * self.duration / PI * (1.0 - (PI * s / self.duration).cos())
            }
            Envelope::Square => self.peak() * s,
        }
    }

    pub fn phase(&self, s: f64) -> f64 {
        self.phase_base + self.phase_slope * self.accumulated_area(s)
    }

    pub fn detuning(&self, s: f64) -> f64 {
        self.detune_factor * self.omega(s)
    }

    /// Phase at the end of the segment.
    pub fn end_phase(&self) -> f64 {
        self.phase_base + self.phase_slope * self.area
    }
}

/// Duration giving `area` at fixed peak amplitude.
pub fn duration_for_area(area: f64, peak: f64, envelope: Envelope) -> f64 {
    match envelope {
        Envelope::Sine => FRAC_PI_2 * area / peak,
        Envelope::Square => area / peak,
    }
}

/// Ordered list of segments plus the nominal peak amplitude `Ω_m` used for
/// error scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub segments: Vec<PulseSegment>,
    pub omega_max: f64,
    /// Derivative coefficient `q`: the complex drive `c = Ω e^{−iφ}` becomes
    /// `c + i q ċ`.
    #[serde(default)]
    pub drag: f64,
}

/// Drive quantities at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSample {
    pub omega: f64,
    pub omega_dot: f64,
    pub phi: f64,
    pub delta: f64,
}

impl PulseSchedule {
    pub fn new(segments: Vec<PulseSegment>, omega_max: f64) -> Result<Self> {
        let s = Self {
            segments,
            omega_max,
            drag: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn empty(omega_max: f64) -> Self {
        Self {
            segments: Vec::new(),
            omega_max,
            drag: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_max > 0.0) || !self.omega_max.is_finite() {
            return Err(GeoError::Parameter(format!(
                "omega_max must be positive, got {}",
                self.omega_max
            )));
        }
        for s in &self.segments {
            s.validate()?;
        }
        Ok(())
    }

    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn total_area(&self) -> f64 {
        self.segments.iter().map(|s| s.area).sum()
    }

    /// Start times `τ_i` of each segment.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut t = 0.0;
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        out.push(0.0);
        for s in &self.segments {
            t += s.duration;
            out.push(t);
        }
        out
    }

    pub fn concat(mut self, other: PulseSchedule) -> Self {
        self.segments.extend(other.segments);
        self
    }

    /// Segment index and local time for global time `t` (last segment wins ties
    /// at the final instant).
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let tau = self.total_time();
        let eps = 1e-12 * tau.max(1.0);
        if t < -eps || t > tau + eps {
            return Err(GeoError::Domain(format!("t = {t} outside [0, {tau}]")));
        }
        let mut start = 0.0;
        let mut last = None;
        for (i, s) in self.segments.iter().enumerate() {
            if s.is_degenerate() {
                continue;
            }
            if t < start + s.duration {
                return Ok((i, (t - start).max(0.0)));
            }
            last = Some((i, start));
            start += s.duration;
        }
        match last {
            Some((i, st)) => Ok((i, (t - st).min(self.segments[i].duration))),
            None => Err(GeoError::Domain("schedule has no non-degenerate segment".into())),
        }
    }

    /// Error-free drive at global time `t`.
    pub fn drive(&self, t: f64) -> Result<DriveSample> {
        let (i, s) = self.locate(t)?;
        Ok(self.segments[i].drive_at(s))
    }
}

impl PulseSegment {
    pub fn drive_at(&self, s: f64) -> DriveSample {
        DriveSample {
            omega: self.omega(s),
            omega_dot: self.omega_dot(s),
            phi: self.phase(s),
            delta: self.detuning(s),
        }
    }
}

/// Drive after error injection: complex coupling `c` (the ⟨0|·|1⟩ entry times 2)
/// and detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectedDrive {
    pub coupling: C64,
    pub delta: f64,
}

/// Applies amplitude and detuning errors to a drive sample.
///
/// The amplitude error scales the physical envelope before the detuning law is
/// evaluated, so `Δ = factor·Ω` scales with it.
pub fn inject(
    seg: &PulseSegment,
    s: f64,
    omega_max: f64,
    drag: f64,
    error: &ErrorModel,
) -> InjectedDrive {
    let gain = 1.0 + error.amplitude;
    let omega = gain * seg.omega(s);
    let omega_dot = gain * seg.omega_dot(s);
    let delta = seg.detune_factor * omega + error.detuning * omega_max;
    // ċ = (Ω̇ − iΩφ̇) e^{−iφ} with φ̇ = slope·Ω
    let phi_dot = seg.phase_slope * omega;
    let coupling = (C64::new(omega, 0.0) + C64::new(0.0, drag) * C64::new(omega_dot, -omega * phi_dot))
        * C64::from_polar(1.0, -seg.phase(s));
    InjectedDrive { coupling, delta }
}

/// `½[[−Δ, c], [c*, Δ]]`.
pub fn two_level_hamiltonian(d: &InjectedDrive) -> ComplexMatrix {
    ComplexMatrix::mat2(
        C64::new(-0.5 * d.delta, 0.0),
        0.5 * d.coupling,
        0.5 * d.coupling.conj(),
        C64::new(0.5 * d.delta, 0.0),
    )
}

/// Two-level Hamiltonian of the schedule at global time `t` with errors applied.
pub fn sample_hamiltonian(
    schedule: &PulseSchedule,
    t: f64,
    error: &ErrorModel,
) -> Result<ComplexMatrix> {
    let (i, s) = schedule.locate(t)?;
    let d = inject(
        &schedule.segments[i],
        s,
        schedule.omega_max,
        schedule.drag,
        error,
    );
    Ok(two_level_hamiltonian(&d))
}

/// How each non-degenerate segment is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentStepping {
    pub policy: StepPolicy,
    pub options: PropagateOptions,
}

impl Default for SegmentStepping {
    fn default() -> Self {
        Self::magnus(DEFAULT_STEPS)
    }
}

impl SegmentStepping {
    /// Midpoint-rule stepping (second order).
    pub fn fixed(steps: usize) -> Self {
        Self {
            policy: StepPolicy::Fixed(steps),
            options: PropagateOptions::default(),
        }
    }

    pub fn magnus(steps: usize) -> Self {
        Self {
            policy: StepPolicy::Fixed(steps),
            options: PropagateOptions {
                integrator: Integrator::Magnus4,
                richardson: false,
            },
        }
    }
}

/// Propagator of one segment (identity for degenerate segments).
pub fn propagate_segment(
    seg: &PulseSegment,
    omega_max: f64,
    drag: f64,
    error: &ErrorModel,
    stepping: &SegmentStepping,
) -> Result<ComplexMatrix> {
    if seg.is_degenerate() {
        return Ok(ComplexMatrix::identity(2));
    }
    let grid = TimeGrid::new(0.0, seg.duration, stepping.policy)?;
    propagate_with(
        |s| Ok(two_level_hamiltonian(&inject(seg, s, omega_max, drag, error))),
        &grid,
        stepping.options,
    )
}

/// Time-ordered propagator of the whole schedule, segment by segment.
pub fn propagate_schedule(
    schedule: &PulseSchedule,
    error: &ErrorModel,
    stepping: &SegmentStepping,
) -> Result<ComplexMatrix> {
    let mut u = ComplexMatrix::identity(2);
    for seg in &schedule.segments {
        let s = propagate_segment(seg, schedule.omega_max, schedule.drag, error, stepping)?;
        u = s.matmul(&u);
    }
    Ok(u)
}

/// Propagates the schedule and reports `(t, H(t), U(t))` after every step, plus
/// the propagator at every segment boundary (one entry per segment).
pub fn propagate_schedule_observed<O>(
    schedule: &PulseSchedule,
    error: &ErrorModel,
    steps: usize,
    mut observer: O,
) -> Result<Vec<ComplexMatrix>>
where
    O: FnMut(f64, &ComplexMatrix, &ComplexMatrix),
{
    let mut u = ComplexMatrix::identity(2);
    let mut at_boundaries = Vec::with_capacity(schedule.segments.len());
    let mut t0 = 0.0;
    for seg in &schedule.segments {
        if !seg.is_degenerate() {
            let grid = TimeGrid::fixed(0.0, seg.duration, steps)?;
            let start = u.clone();
            let sampler = |s: f64| {
                Ok(two_level_hamiltonian(&inject(
                    seg,
                    s,
                    schedule.omega_max,
                    schedule.drag,
                    error,
                )))
            };
            let seg_u = propagate_observed(sampler, &grid, Integrator::Midpoint, |s, useg| {
                let h = two_level_hamiltonian(&inject(
                    seg,
                    s.min(seg.duration),
                    schedule.omega_max,
                    schedule.drag,
                    error,
                ));
                observer(t0 + s, &h, &useg.matmul(&start));
            })?;
            u = seg_u.matmul(&u);
            t0 += seg.duration;
        }
        at_boundaries.push(u.clone());
    }
    Ok(at_boundaries)
}

/// Rotation angle and axis phase of a resonant constant-phase gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConventionalGateSpec {
    pub theta: f64,
    pub phi: f64,
}

impl ConventionalGateSpec {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(theta >= 0.0) || !theta.is_finite() || !phi.is_finite() {
            return Err(GeoError::Parameter(format!(
                "rotation angle must be finite and >= 0, got {theta}"
            )));
        }
        Ok(Self { theta, phi })
    }

    /// Closed-form resonant rotation
    /// `[[cos θ/2, −i sin θ/2 e^{−iφ}], [−i sin θ/2 e^{iφ}, cos θ/2]]`.
    pub fn unitary(&self) -> ComplexMatrix {
        conventional_unitary(self.theta, self.phi)
    }
}

pub fn conventional_unitary(theta: f64, phi: f64) -> ComplexMatrix {
    let (s, c) = (0.5 * theta).sin_cos();
    let mi = C64::new(0.0, -1.0);
    ComplexMatrix::mat2(
        C64::new(c, 0.0),
        mi * s * C64::from_polar(1.0, -phi),
        mi * s * C64::from_polar(1.0, phi),
        C64::new(c, 0.0),
    )
}

/// Single resonant sine-envelope segment realizing the rotation.
pub fn synth_conventional(spec: &ConventionalGateSpec, omega_max: f64) -> Result<PulseSchedule> {
    synth_conventional_with(spec, omega_max, Envelope::Sine)
}

pub fn synth_conventional_with(
    spec: &ConventionalGateSpec,
    omega_max: f64,
    envelope: Envelope,
) -> Result<PulseSchedule> {
    if !(omega_max > 0.0) {
        return Err(GeoError::Parameter("omega_max must be positive".into()));
    }
    if spec.theta == 0.0 {
        return Ok(PulseSchedule::empty(omega_max));
    }
    let seg = PulseSegment::with_peak(spec.theta, omega_max, envelope, spec.phi, 0.0, 0.0)?;
    PulseSchedule::new(vec![seg], omega_max)
}

/// Concatenates resonant rotations, first element applied first.
pub fn synth_conventional_sequence(
    specs: &[ConventionalGateSpec],
    omega_max: f64,
    envelope: Envelope,
) -> Result<PulseSchedule> {
    let mut out = PulseSchedule::empty(omega_max);
    for s in specs {
        out = out.concat(synth_conventional_with(s, omega_max, envelope)?);
    }
    out.validate()?;
    Ok(out)
}

/// Writes `t,omega,phi,delta` rows, `samples_per_segment` evenly spaced samples
/// per non-degenerate segment (segment end points included).
pub fn write_schedule_csv<W: Write>(
    schedule: &PulseSchedule,
    samples_per_segment: usize,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "omega", "phi", "delta"])?;
    let n = samples_per_segment.max(1);
    let mut t0 = 0.0;
    for seg in schedule.segments.iter().filter(|s| !s.is_degenerate()) {
        for k in 0..=n {
            let s = seg.duration * k as f64 / n as f64;
            let d = seg.drive_at(s);
            w.write_record(&[
                format!("{}", t0 + s),
                format!("{}", d.omega),
                format!("{}", d.phi),
                format!("{}", d.delta),
            ])?;
        }
        t0 += seg.duration;
    }
    w.flush()?;
    Ok(())
}

pub fn schedule_to_json(schedule: &PulseSchedule) -> String {
    serde_json::to_string(schedule).expect("schedule serializes")
}

pub fn schedule_from_json(s: &str) -> Result<PulseSchedule> {
    let sched: PulseSchedule =
        serde_json::from_str(s).map_err(|e| GeoError::Input(e.to_string()))?;
    sched.validate()?;
    Ok(sched)
}
