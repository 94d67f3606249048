//! Gate-level recipes shared by the command-line tool and the test suites:
//! published waypoints, loop selection and geometric/conventional pairs.

use std::f64::consts::PI;

use crate::error::{GeoError, Result};
use crate::gates::{conventional_composite, GateName};
use crate::geo::{synth_five_segment_with, GateParams, SynthOptions, XiBranch};
use crate::optimizer::{optimize_candidates, two_level_scorer, RefineConfig, ScanConfig, ScheduleScorer};
use crate::pulse::{synth_conventional_sequence, Envelope, SegmentStepping};
use crate::robustness::{sensitivity_curve, ErrorKind, FidelityKind, GateProgram, SensitivityCurve};
use crate::transmon::{omega_sweep, DragSettings, OmegaSweep, OpenSimOptions, TransmonParams};
use crate::twoqubit::{
    embedded_scorer, sensitivity_two_qubit, synth_two_qubit_conventional, synth_two_qubit_loop, DriveChoice,
    SubspaceKind, TwoQubitParams,
};

/// Published `(χ₁, χ₃)` optimum, where there is one.
pub fn published_optimum(gate: GateName) -> Option<(f64, f64)> {
    match gate {
        GateName::H => Some((0.05 * PI, 0.73 * PI)),
        GateName::Xpi2 | GateName::Ypi2 | GateName::MXpi2 | GateName::MYpi2 => Some((0.1 * PI, 0.9 * PI)),
        GateName::ISwap => Some((0.27 * PI, 0.73 * PI)),
        GateName::Cz => Some((0.0, 0.9 * PI)),
        _ => None,
    }
}

/// Scan settings for a gate: sine envelopes for single-qubit gates, square
/// envelopes (constant `g′`) for two-qubit gates.
pub fn scan_config(gate: GateName) -> ScanConfig {
    let mut cfg = ScanConfig::default();
    if gate.is_two_qubit() {
        cfg.synth.envelope = Envelope::Square;
    }
    cfg
}

/// Landscape scorer for one loop of `gate`.
pub fn loop_scorer(gate: GateName, params: &GateParams) -> Result<Box<ScheduleScorer<'static>>> {
    Ok(if gate.is_two_qubit() {
        Box::new(embedded_scorer(SubspaceKind::for_gate(gate)?, params.unitary()))
    } else {
        Box::new(two_level_scorer(*params))
    })
}

/// Published optimum, or the best coarse-scan cell over all loop candidates.
pub fn waypoints_for(gate: GateName, cfg: &ScanConfig) -> Result<(f64, f64)> {
    if let Some(w) = published_optimum(gate) {
        return Ok(w);
    }
    let refine = RefineConfig { keep: 0, ..Default::default() };
    let best = optimize_candidates(&gate.loop_candidates(), cfg, &refine, |p| {
        loop_scorer(gate, p).expect("scorer for a known gate")
    })?;
    Ok((best.result.optimum.chi1, best.result.optimum.chi3))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopPick {
    pub params: GateParams,
    pub branch: XiBranch,
    pub metric: f64,
}

/// Loop candidate with the lowest scan metric at `(χ₁, χ₃)`; the first one
/// wins ties.
pub fn select_loop(gate: GateName, chi1: f64, chi3: f64, cfg: &ScanConfig) -> Result<LoopPick> {
    let mut best: Option<LoopPick> = None;
    let mut last_err = None;
    for (params, branch) in gate.loop_candidates() {
        let mut c = *cfg;
        c.synth.xi_branch = branch;
        let sched = match synth_five_segment_with(&params, chi1, chi3, c.omega_max, c.synth) {
            Ok((s, _)) => s,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let metric = loop_scorer(gate, &params)?(&sched, &c)?;
        if best.map_or(true, |b| metric < b.metric) {
            best = Some(LoopPick { params, branch, metric });
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(GeoError::EmptyLandscape))
}

/// Geometric single-qubit program on the chosen loop (`Ω_m = omega_max`).
pub fn geometric_program(
    gate: GateName,
    pick: &LoopPick,
    chi1: f64,
    chi3: f64,
    omega_max: f64,
    envelope: Envelope,
) -> Result<GateProgram> {
    let opts = SynthOptions {
        envelope,
        xi_branch: pick.branch,
    };
    let (schedule, _) = synth_five_segment_with(&pick.params, chi1, chi3, omega_max, opts)?;
    Ok(GateProgram {
        name: format!("{gate}^g"),
        schedule,
        target: pick.params.unitary(),
    })
}

/// Conventional single-qubit program from resonant rotations.
pub fn conventional_program(gate: GateName, omega_max: f64, envelope: Envelope) -> Result<GateProgram> {
    let specs = conventional_composite(gate)?;
    let schedule = synth_conventional_sequence(&specs, omega_max, envelope)?;
    Ok(GateProgram {
        name: format!("{gate}^c"),
        schedule,
        target: gate.ideal(),
    })
}

/// Sensitivity curves `(geometric, conventional)` of `gate` at `(χ₁, χ₃)`.
///
/// The loop is picked by [`select_loop`] with `cfg`. Two-qubit gates use the
/// effective model and support detuning errors only.
pub fn sensitivity_pair(
    gate: GateName,
    chi1: f64,
    chi3: f64,
    kind: ErrorKind,
    grid: &[f64],
    cfg: &ScanConfig,
    stepping: &SegmentStepping,
) -> Result<(SensitivityCurve, SensitivityCurve)> {
    let mut probe_cfg = *cfg;
    probe_cfg.error_kind = kind;
    let pick = select_loop(gate, chi1, chi3, &probe_cfg)?;
    if gate.is_two_qubit() {
        if kind != ErrorKind::Detuning {
            return Err(GeoError::Unsupported(format!(
                "two-qubit sensitivity supports detuning errors only, got {}",
                kind.label()
            )));
        }
        let p = TwoQubitParams::default();
        let drive = DriveChoice {
            xi_branch: pick.branch,
            ..Default::default()
        };
        let geo = synth_two_qubit_loop(gate, &pick.params, chi1, chi3, &p, &drive)?;
        let conv = synth_two_qubit_conventional(gate, &p, &drive)?;
        let mut g = sensitivity_two_qubit(&geo, grid, stepping)?;
        let mut c = sensitivity_two_qubit(&conv, grid, stepping)?;
        g.gate_name = format!("{gate}^g");
        c.gate_name = format!("{gate}^c");
        return Ok((g, c));
    }
    let geo = geometric_program(gate, &pick, chi1, chi3, cfg.omega_max, cfg.synth.envelope)?;
    let conv = conventional_program(gate, cfg.omega_max, cfg.synth.envelope)?;
    Ok((
        sensitivity_curve(&geo, kind, grid, stepping, FidelityKind::Modulus)?,
        sensitivity_curve(&conv, kind, grid, stepping, FidelityKind::Modulus)?,
    ))
}

/// Transmon `Ω_m` sweep on the loop with the lowest DRAG-on infidelity.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmonRun {
    pub params: GateParams,
    pub branch: XiBranch,
    pub sweep: OmegaSweep,
}

/// Sweeps every loop candidate of a single-qubit gate (sine envelopes) and
/// keeps the one whose DRAG-on curve reaches the lowest infidelity.
/// `progress(done, total)` is called after each candidate.
#[allow(clippy::too_many_arguments)]
pub fn transmon_sweep<P>(
    gate: GateName,
    chi1: f64,
    chi3: f64,
    p: &TransmonParams,
    omega_grid: &[f64],
    drag: &DragSettings,
    opts: &OpenSimOptions,
    progress: P,
) -> Result<TransmonRun>
where
    P: Fn(usize, usize),
{
    if gate.is_two_qubit() {
        return Err(GeoError::Unsupported(format!("{gate} is not a single-qubit gate")));
    }
    let cands = gate.loop_candidates();
    let mut best: Option<(f64, TransmonRun)> = None;
    for (k, (params, branch)) in cands.iter().enumerate() {
        let synth_opts = SynthOptions {
            envelope: Envelope::Sine,
            xi_branch: *branch,
        };
        let synth = |w: f64| synth_five_segment_with(params, chi1, chi3, w, synth_opts).map(|r| r.0);
        let sweep = omega_sweep(synth, &params.unitary(), p, omega_grid, drag, opts)?;
        progress(k + 1, cands.len());
        let peak = sweep.best_drag().map_or(f64::INFINITY, |b| b.1);
        if best.as_ref().map_or(true, |b| peak < b.0) {
            best = Some((
                peak,
                TransmonRun {
                    params: *params,
                    branch: *branch,
                    sweep,
                },
            ));
        }
    }
    best.map(|b| b.1).ok_or(GeoError::EmptyLandscape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robustness::symmetric_grid;

    #[test]
    fn h_prefers_long_loop_at_published_point() {
        let (c1, c3) = published_optimum(GateName::H).unwrap();
        let pick = select_loop(GateName::H, c1, c3, &scan_config(GateName::H)).unwrap();
        assert!((pick.params.gamma.abs() - 1.5 * PI).abs() < 1e-12 || pick.branch == XiBranch::Alternate);
        assert!(pick.metric < 2e-3);
    }

    #[test]
    fn pair_is_exact_without_error() {
        let grid = [0.0];
        let st = SegmentStepping::magnus(200);
        for gate in [GateName::Xpi, GateName::H, GateName::ISwap] {
            let (c1, c3) = published_optimum(gate).unwrap_or((0.2 * PI, 0.8 * PI));
            let (g, c) =
                sensitivity_pair(gate, c1, c3, ErrorKind::Detuning, &grid, &scan_config(gate), &st).unwrap();
            assert!(g.infidelity[0] < 1e-8 && c.infidelity[0] < 1e-8, "{gate}");
        }
    }

    #[test]
    fn two_qubit_rejects_amplitude_error() {
        let grid = symmetric_grid(0.1, 3);
        let r = sensitivity_pair(
            GateName::Cz,
            0.0,
            0.9 * PI,
            ErrorKind::Amplitude,
            &grid,
            &scan_config(GateName::Cz),
            &SegmentStepping::magnus(50),
        );
        assert!(matches!(r, Err(GeoError::Unsupported(_))));
    }
}
