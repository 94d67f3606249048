//! Subcommand implementations. Flags override config values; outputs go to
//! `--out` (created if missing).

use std::f64::consts::PI;
use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use clap::{Args, ValueEnum};
use geotraj::gates::GateName;
use geotraj::geo::{synth_five_segment_with, write_trajectory_csv, GateParams, SynthOptions, XiBranch};
use geotraj::optimizer::{
    optimize_candidates, write_landscape_csv, Landscape, Metric, RefineConfig,
};
use geotraj::pulse::{propagate_schedule, write_schedule_csv, Envelope, SegmentStepping};
use geotraj::recipes::{
    loop_scorer, scan_config, select_loop, sensitivity_pair, transmon_sweep, waypoints_for,
};
use geotraj::robustness::{
    compare_curves, symmetric_grid, write_curve_csv, ErrorKind, ErrorModel, SensitivityCurve,
};
use geotraj::transmon::{
    cardinal_states, mhz, write_sweep_csv, DragSettings, OmegaSweep, OpenSimOptions, TransmonParams,
};
use geotraj::twoqubit::{
    scan_nu_beta, sensitivity_two_qubit, synth_two_qubit_conventional, synth_two_qubit_loop,
    write_nu_beta_csv, Decoherence, DriveChoice, FullSimOptions, LoopChoice, NuBetaGrid, NuBetaScan,
    TwoQubitParams,
};
use geotraj::GeoError;

use crate::angle::{parse_angle, parse_time};
use crate::config::RunConfig;
use crate::report::{heatmap, line_plot, Series};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<GeoError> for CliError {
    fn from(e: GeoError) -> Self {
        match e {
            GeoError::Convergence(_) => CliError::Numeric(e.to_string()),
            GeoError::Io(m) => CliError::Io(m),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_gate(s: &str) -> Result<GateName, String> {
    s.parse::<GateName>().map_err(|_| {
        format!("unknown gate '{s}' (expected I, H, Xpi, Ypi, Xpi2, Ypi2, mXpi2, mYpi2, iSWAP or CZ)")
    })
}

fn parse_error_kind(s: &str) -> Result<ErrorKind, String> {
    s.parse::<ErrorKind>()
        .map_err(|_| format!("unknown error kind '{s}' (expected detuning or amplitude)"))
}

fn in_pi(x: f64) -> f64 {
    x / PI
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    Auto,
    Shortest,
    Alternate,
    Literal,
}

impl BranchArg {
    fn fixed(self) -> Option<XiBranch> {
        match self {
            BranchArg::Auto => None,
            BranchArg::Shortest => Some(XiBranch::Shortest),
            BranchArg::Alternate => Some(XiBranch::Alternate),
            BranchArg::Literal => Some(XiBranch::Literal),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnvelopeArg {
    Sine,
    Square,
}

impl From<EnvelopeArg> for Envelope {
    fn from(e: EnvelopeArg) -> Self {
        match e {
            EnvelopeArg::Sine => Envelope::Sine,
            EnvelopeArg::Square => Envelope::Square,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Probe,
    Mean,
}

fn create_dir(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("cannot create {}: {e}", out.display())))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn gate_params(gate: GateName) -> GateParams {
    let (chi0, xi0, gamma) = gate.geometric_triple();
    GateParams { chi0, xi0, gamma }
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Gate name; alternatively give --chi0, --xi0 and --gamma.
    #[arg(long, value_parser = parse_gate, conflicts_with_all = ["chi0", "xi0", "gamma"])]
    pub gate: Option<GateName>,
    #[arg(long, value_parser = parse_angle, requires_all = ["xi0", "gamma"])]
    pub chi0: Option<f64>,
    #[arg(long, value_parser = parse_angle, requires_all = ["chi0", "gamma"])]
    pub xi0: Option<f64>,
    #[arg(long, value_parser = parse_angle, requires_all = ["chi0", "xi0"])]
    pub gamma: Option<f64>,
    #[arg(long, value_parser = parse_angle)]
    pub chi1: Option<f64>,
    #[arg(long, value_parser = parse_angle)]
    pub chi3: Option<f64>,
    #[arg(long, value_enum, default_value = "shortest")]
    pub branch: BranchArg,
    /// Envelope; defaults to sine for single-qubit and square for two-qubit gates.
    #[arg(long, value_enum)]
    pub envelope: Option<EnvelopeArg>,
    /// Peak drive in MHz (times then in μs); default is the normalized `Ω_m = 1`.
    #[arg(long)]
    pub omega_mhz: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value = "geotraj-out")]
    pub out: PathBuf,
}

pub fn cmd_synth(a: &SynthArgs, cfg: &RunConfig) -> CliResult<()> {
    let (params, gate) = match (a.gate, a.chi0, a.xi0, a.gamma) {
        (Some(g), ..) => (gate_params(g), Some(g)),
        (None, Some(chi0), Some(xi0), Some(gamma)) => (GateParams::new(chi0, xi0, gamma)?, None),
        _ => return Err(usage("give --gate or all of --chi0, --xi0, --gamma")),
    };
    params.validate()?;
    let published = gate.and_then(geotraj::recipes::published_optimum);
    let chi1 = a.chi1.or(published.map(|w| w.0)).unwrap_or(params.chi0 / 2.0);
    let chi3 = a.chi3.or(published.map(|w| w.1)).unwrap_or((params.chi0 + PI) / 2.0);
    let two_qubit = gate.map_or(false, |g| g.is_two_qubit());
    let envelope: Envelope = a
        .envelope
        .map(Into::into)
        .unwrap_or(if two_qubit { Envelope::Square } else { Envelope::Sine });
    let omega_mhz = a.omega_mhz.or(cfg.synth.omega_mhz);
    let omega_max = match omega_mhz {
        Some(f) if f > 0.0 && f.is_finite() => mhz(f),
        Some(f) => return Err(usage(format!("--omega-mhz must be positive, got {f}"))),
        None => 1.0,
    };
    let (params, branch) = match (a.branch.fixed(), gate) {
        (Some(b), _) => (params, b),
        (None, Some(g)) => {
            let mut c = scan_config(g);
            c.synth.envelope = envelope;
            let pick = select_loop(g, chi1, chi3, &c)?;
            (pick.params, pick.branch)
        }
        (None, None) => (params, XiBranch::Shortest),
    };
    if (chi1 - params.chi0).abs() < 1e-12 {
        eprintln!("warning: chi1 equals chi0, the first segment is degenerate (zero area)");
    }
    let (schedule, traj) = synth_five_segment_with(&params, chi1, chi3, omega_max, SynthOptions { envelope, xi_branch: branch })?;
    create_dir(&a.out)?;
    let stem = gate.map_or("custom".to_string(), |g| g.as_str().to_string());
    let sched_path = a.out.join(format!("schedule_{stem}.csv"));
    let traj_path = a.out.join(format!("trajectory_{stem}.csv"));
    write_schedule_csv(&schedule, a.samples.unwrap_or(cfg.synth.samples_per_segment), create(&sched_path)?)?;
    write_trajectory_csv(&traj, &schedule, create(&traj_path)?)?;
    let unit = if omega_mhz.is_some() { "us" } else { "1/omega_m" };
    println!(
        "gate {stem}: chi0 = {:.4}pi, xi0 = {:.4}pi, gamma_g = {:.4}pi, branch {branch:?}",
        in_pi(params.chi0),
        in_pi(params.xi0),
        in_pi(params.gamma)
    );
    println!("waypoints chi1 = {:.4}pi, chi3 = {:.4}pi", in_pi(chi1), in_pi(chi3));
    println!("total area = {:.6} rad", schedule.total_area());
    println!("gate time = {:.6} {unit}", schedule.total_time());
    println!("wrote {} and {}", sched_path.display(), traj_path.display());
    Ok(())
}

// ---------------------------------------------------------------- scan

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[arg(long, value_parser = parse_gate)]
    pub gate: GateName,
    #[arg(long, value_parser = parse_error_kind)]
    pub error: Option<ErrorKind>,
    #[arg(long)]
    pub delta_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Waypoints; default is the published optimum or a coarse scan optimum.
    #[arg(long, value_parser = parse_angle, requires = "chi3")]
    pub chi1: Option<f64>,
    #[arg(long, value_parser = parse_angle, requires = "chi1")]
    pub chi3: Option<f64>,
    #[arg(long, default_value = "geotraj-out")]
    pub out: PathBuf,
}

fn curve_plot(title: &str, xlabel: &str, geo: &SensitivityCurve, conv: &SensitivityCurve) -> String {
    line_plot(
        title,
        xlabel,
        "infidelity",
        &[
            Series { name: &conv.gate_name, x: &conv.delta_grid, y: &conv.infidelity },
            Series { name: &geo.gate_name, x: &geo.delta_grid, y: &geo.infidelity },
        ],
        false,
    )
}

/// Integration noise allowed when comparing curves pointwise.
const DOMINANCE_SLACK: f64 = 1e-9;

pub fn cmd_scan(a: &ScanArgs, cfg: &RunConfig) -> CliResult<()> {
    let kind = match a.error {
        Some(k) => k,
        None => parse_error_kind(&cfg.scan.error).map_err(usage)?,
    };
    let delta_max = a.delta_max.unwrap_or(cfg.scan.delta_max);
    let points = a.points.unwrap_or(cfg.scan.points);
    if !(delta_max >= 0.0 && delta_max.is_finite()) || points == 0 {
        return Err(usage("need --delta-max >= 0 and --points >= 1"));
    }
    let mut sc = scan_config(a.gate);
    sc.error_kind = kind;
    sc.resolution = cfg.optimize.resolution_pi * PI;
    let (chi1, chi3) = match (a.chi1, a.chi3) {
        (Some(c1), Some(c3)) => (c1, c3),
        _ => waypoints_for(a.gate, &sc)?,
    };
    let grid = symmetric_grid(delta_max, points);
    let stepping = SegmentStepping::magnus(cfg.scan.steps_per_segment);
    let (geo, conv) = sensitivity_pair(a.gate, chi1, chi3, kind, &grid, &sc, &stepping)?;
    create_dir(&a.out)?;
    let stem = format!("scan_{}_{}", a.gate.as_str(), kind.label());
    write_curve_csv(&geo, create(&a.out.join(format!("{stem}_geometric.csv")))?)?;
    write_curve_csv(&conv, create(&a.out.join(format!("{stem}_conventional.csv")))?)?;
    let xlabel = if kind == ErrorKind::Detuning { "delta" } else { "epsilon" };
    write_text(
        &a.out.join(format!("{stem}.svg")),
        &curve_plot(&format!("{} {} error", a.gate, kind.label()), xlabel, &geo, &conv),
    )?;
    compare_curves(&geo, &conv)?;
    let dominates = geo.infidelity.iter().zip(&conv.infidelity).all(|(g, c)| *g <= c + DOMINANCE_SLACK);
    println!(
        "{}: chi1 = {:.4}pi, chi3 = {:.4}pi; max infidelity geometric {:.3e}, conventional {:.3e}; geometric dominates: {}",
        a.gate,
        in_pi(chi1),
        in_pi(chi3),
        geo.max(),
        conv.max(),
        dominates
    );
    println!("wrote {}/{stem}_{{geometric,conventional}}.csv and {stem}.svg", a.out.display());
    Ok(())
}

// ---------------------------------------------------------------- optimize

#[derive(Debug, Clone, Args)]
pub struct OptimizeArgs {
    #[arg(long, value_parser = parse_gate)]
    pub gate: GateName,
    /// Coarse grid spacing in units of π.
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Fine grid spacing in units of π.
    #[arg(long)]
    pub fine: Option<f64>,
    #[arg(long)]
    pub no_refine: bool,
    #[arg(long)]
    pub delta_probe: Option<f64>,
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    #[arg(long, value_parser = parse_error_kind)]
    pub error: Option<ErrorKind>,
    #[arg(long, default_value = "geotraj-out")]
    pub out: PathBuf,
}

fn landscape_svg(gate: GateName, l: &Landscape) -> String {
    let z: Vec<Vec<f64>> = (0..l.chi1_grid.len())
        .map(|i| {
            (0..l.chi3_grid.len())
                .map(|j| l.metric(i, j).map_or(f64::NAN, |m| m.max(1e-16).log10()))
                .collect()
        })
        .collect();
    let x: Vec<f64> = l.chi1_grid.iter().map(|v| in_pi(*v)).collect();
    let y: Vec<f64> = l.chi3_grid.iter().map(|v| in_pi(*v)).collect();
    heatmap(&format!("{gate}: log10 infidelity"), "chi1 / pi", "chi3 / pi", &x, &y, &z)
}

pub fn cmd_optimize(a: &OptimizeArgs, cfg: &RunConfig) -> CliResult<()> {
    let mut sc = scan_config(a.gate);
    let res = a.resolution.unwrap_or(cfg.optimize.resolution_pi);
    let fine = a.fine.unwrap_or(cfg.optimize.fine_resolution_pi);
    if !(res > 0.0 && fine > 0.0) {
        return Err(usage("resolutions must be positive"));
    }
    sc.resolution = res * PI;
    sc.delta_probe = a.delta_probe.unwrap_or(cfg.optimize.delta_probe);
    sc.metric = match a.metric {
        Some(MetricArg::Probe) => Metric::Probe,
        Some(MetricArg::Mean) => Metric::MeanOverRange,
        None => match cfg.optimize.metric.as_str() {
            "probe" => Metric::Probe,
            "mean" => Metric::MeanOverRange,
            m => return Err(usage(format!("unknown metric '{m}' (expected probe or mean)"))),
        },
    };
    if let Some(k) = a.error {
        sc.error_kind = k;
    }
    if a.gate.is_two_qubit() && sc.error_kind != ErrorKind::Detuning {
        return Err(usage("two-qubit landscapes support detuning errors only"));
    }
    let refine = RefineConfig {
        fine_resolution: fine * PI,
        keep: if a.no_refine || !cfg.optimize.refine { 0 } else { RefineConfig::default().keep },
    };
    let gate = a.gate;
    let best = optimize_candidates(&gate.loop_candidates(), &sc, &refine, |p| {
        loop_scorer(gate, p).expect("scorer for a known gate")
    })?;
    create_dir(&a.out)?;
    let stem = format!("landscape_{}", gate.as_str());
    write_landscape_csv(&best.result.coarse, create(&a.out.join(format!("{stem}.csv")))?)?;
    write_text(&a.out.join(format!("{stem}.svg")), &landscape_svg(gate, &best.result.coarse))?;
    let o = best.result.optimum;
    let summary = serde_json::json!({
        "gate": gate.as_str(),
        "chi1": o.chi1,
        "chi3": o.chi3,
        "chi1_pi": in_pi(o.chi1),
        "chi3_pi": in_pi(o.chi3),
        "metric": o.metric,
        "total_area": o.total_area,
        "gamma": best.gate.gamma,
        "xi_branch": format!("{:?}", best.xi_branch),
        "error": sc.error_kind.label(),
        "delta_probe": sc.delta_probe,
        "resolution_pi": res,
    });
    let json = serde_json::to_string_pretty(&summary).expect("json");
    write_text(&a.out.join(format!("optimum_{}.json", gate.as_str())), &(json.clone() + "\n"))?;
    println!("{json}");
    Ok(())
}

// ---------------------------------------------------------------- transmon

#[derive(Debug, Clone, Args)]
pub struct TransmonArgs {
    #[arg(long, value_parser = parse_gate)]
    pub gate: GateName,
    #[arg(long, value_enum, default_value = "on")]
    pub drag: OnOff,
    #[arg(long)]
    pub drag_scale: Option<f64>,
    /// Transmon levels (3 to 6); 2 gives the closed qubit model.
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub alpha_mhz: Option<f64>,
    /// T1 in μs, or `inf`.
    #[arg(long, value_parser = parse_time)]
    pub t1: Option<f64>,
    /// Tφ in μs, or `inf`.
    #[arg(long, value_parser = parse_time)]
    pub tphi: Option<f64>,
    #[arg(long)]
    pub omega_min_mhz: Option<f64>,
    #[arg(long)]
    pub omega_max_mhz: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, value_parser = parse_angle, requires = "chi3")]
    pub chi1: Option<f64>,
    #[arg(long, value_parser = parse_angle, requires = "chi1")]
    pub chi3: Option<f64>,
    #[arg(long, default_value = "geotraj-out")]
    pub out: PathBuf,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Cardinal-state infidelity of the closed two-level model (no leakage level).
fn qubit_only_sweep(gate: GateName, chi1: f64, chi3: f64, omega: &[f64]) -> CliResult<OmegaSweep> {
    let mut best: Option<Vec<f64>> = None;
    for (params, branch) in gate.loop_candidates() {
        let target = params.unitary();
        let mut row = Vec::with_capacity(omega.len());
        for &w in omega {
            let opts = SynthOptions { envelope: Envelope::Sine, xi_branch: branch };
            let (s, _) = synth_five_segment_with(&params, chi1, chi3, w, opts)?;
            let u = propagate_schedule(&s, &ErrorModel::default(), &SegmentStepping::magnus(400))?;
            let mut f = 0.0;
            for psi in cardinal_states() {
                let want = target.apply(&psi);
                let got = u.apply(&psi);
                let ov: num_complex::Complex64 = want.iter().zip(&got).map(|(a, b)| a.conj() * b).sum();
                f += ov.norm_sqr();
            }
            row.push((1.0 - f / 6.0).max(0.0));
        }
        let peak = row.iter().copied().fold(f64::INFINITY, f64::min);
        if best.as_ref().map_or(true, |b| peak < b.iter().copied().fold(f64::INFINITY, f64::min)) {
            best = Some(row);
        }
    }
    let row = best.unwrap_or_default();
    Ok(OmegaSweep { omega: omega.to_vec(), infidelity_nodrag: row.clone(), infidelity_drag: row })
}

pub fn cmd_transmon(a: &TransmonArgs, cfg: &RunConfig) -> CliResult<()> {
    if a.gate.is_two_qubit() {
        return Err(usage(format!("{} is a two-qubit gate; use the twoqubit command", a.gate)));
    }
    let tc = &cfg.transmon;
    let levels = a.levels.unwrap_or(tc.levels);
    let t1 = a.t1.unwrap_or(tc.t1_us);
    let tphi = a.tphi.unwrap_or(tc.tphi_us);
    let lo = a.omega_min_mhz.unwrap_or(tc.omega_min_mhz);
    let hi = a.omega_max_mhz.unwrap_or(tc.omega_max_mhz);
    let n = a.points.unwrap_or(tc.omega_points);
    if !(lo > 0.0 && hi >= lo) || n == 0 {
        return Err(usage("need 0 < omega-min <= omega-max and points >= 1"));
    }
    let omega: Vec<f64> = linspace(lo, hi, n).into_iter().map(mhz).collect();
    let (chi1, chi3) = match (a.chi1, a.chi3) {
        (Some(c1), Some(c3)) => (c1, c3),
        _ => waypoints_for(a.gate, &scan_config(a.gate))?,
    };
    let drag = match a.drag {
        OnOff::On => DragSettings { enabled: true, scale: a.drag_scale.unwrap_or(tc.drag_scale) },
        OnOff::Off => DragSettings::off(),
    };
    drag.validate()?;
    let sweep = if levels == 2 {
        if t1.is_finite() || tphi.is_finite() {
            return Err(usage("--levels 2 is the closed qubit model; it needs --t1 inf --tphi inf"));
        }
        qubit_only_sweep(a.gate, chi1, chi3, &omega)?
    } else {
        let p = TransmonParams { levels, alpha: mhz(a.alpha_mhz.unwrap_or(tc.alpha_mhz)), t1, tphi };
        p.validate()?;
        let run = transmon_sweep(a.gate, chi1, chi3, &p, &omega, &drag, &OpenSimOptions::default(), |k, total| {
            eprintln!("transmon {}: loop candidate {k}/{total} done", a.gate);
        })?;
        eprintln!("transmon {}: best loop gamma = {:.4}pi, {:?}", a.gate, in_pi(run.params.gamma), run.branch);
        run.sweep
    };
    create_dir(&a.out)?;
    let stem = format!("transmon_{}", a.gate.as_str());
    write_sweep_csv(&sweep, create(&a.out.join(format!("{stem}.csv")))?)?;
    let x: Vec<f64> = sweep.omega.iter().map(|w| w / (2.0 * PI)).collect();
    let svg = line_plot(
        &format!("{} on a transmon", a.gate),
        "omega_m / 2pi (MHz)",
        "infidelity",
        &[
            Series { name: "without DRAG", x: &x, y: &sweep.infidelity_nodrag },
            Series { name: "with DRAG", x: &x, y: &sweep.infidelity_drag },
        ],
        true,
    );
    write_text(&a.out.join(format!("{stem}.svg")), &svg)?;
    let peak = match a.drag {
        OnOff::On => sweep.best_drag(),
        OnOff::Off => sweep.best_nodrag(),
    };
    if let Some((w, inf)) = peak {
        println!(
            "{}: peak fidelity {:.5} at omega_m = 2pi x {:.2} MHz (chi1 = {:.3}pi, chi3 = {:.3}pi)",
            a.gate,
            1.0 - inf,
            w / (2.0 * PI),
            in_pi(chi1),
            in_pi(chi3)
        );
    }
    println!("wrote {}/{stem}.csv and {stem}.svg", a.out.display());
    Ok(())
}

// ---------------------------------------------------------------- twoqubit

#[derive(Debug, Clone, Args)]
pub struct TwoQubitArgs {
    #[arg(long, value_parser = parse_gate)]
    pub gate: GateName,
    #[arg(long, value_parser = parse_angle, requires = "chi3")]
    pub chi1: Option<f64>,
    #[arg(long, value_parser = parse_angle, requires = "chi1")]
    pub chi3: Option<f64>,
    /// Loop direction; `auto` scans every candidate and keeps the best map.
    #[arg(long, value_enum, default_value = "auto")]
    pub branch: BranchArg,
    #[arg(long)]
    pub nu_points: Option<usize>,
    #[arg(long)]
    pub beta_points: Option<usize>,
    #[arg(long)]
    pub nu_halfwidth_mhz: Option<f64>,
    #[arg(long)]
    pub beta_min: Option<f64>,
    #[arg(long)]
    pub beta_max: Option<f64>,
    #[arg(long, value_parser = parse_time)]
    pub t1: Option<f64>,
    #[arg(long, value_parser = parse_time)]
    pub tphi: Option<f64>,
    /// Effective-model sensitivity only (skips the (ν, β) map).
    #[arg(long)]
    pub skip_map: bool,
    #[arg(long, default_value = "geotraj-out")]
    pub out: PathBuf,
}

fn two_qubit_params(cfg: &RunConfig) -> CliResult<TwoQubitParams> {
    let c = &cfg.twoqubit;
    let p = TwoQubitParams {
        g: mhz(c.g_mhz),
        delta1: mhz(c.delta1_mhz),
        alpha1: mhz(c.alpha1_mhz),
        alpha2: mhz(c.alpha2_mhz),
        m_cutoff: c.m_cutoff,
    };
    p.validate()?;
    Ok(p)
}

pub fn cmd_twoqubit(a: &TwoQubitArgs, cfg: &RunConfig) -> CliResult<()> {
    if !a.gate.is_two_qubit() {
        return Err(usage(format!("{} is a single-qubit gate; use the transmon command", a.gate)));
    }
    let p = two_qubit_params(cfg)?;
    let c = &cfg.twoqubit;
    let (chi1, chi3) = match (a.chi1, a.chi3) {
        (Some(c1), Some(c3)) => (c1, c3),
        _ => waypoints_for(a.gate, &scan_config(a.gate))?,
    };
    create_dir(&a.out)?;
    let stem = format!("twoqubit_{}", a.gate.as_str());

    // effective-model sensitivity on the most robust loop
    let pick = select_loop(a.gate, chi1, chi3, &scan_config(a.gate))?;
    let drive = DriveChoice { xi_branch: pick.branch, ..Default::default() };
    let grid = symmetric_grid(cfg.scan.delta_max, cfg.scan.points.max(1));
    let stepping = SegmentStepping::magnus(cfg.scan.steps_per_segment);
    let mut geo = sensitivity_two_qubit(&synth_two_qubit_loop(a.gate, &pick.params, chi1, chi3, &p, &drive)?, &grid, &stepping)?;
    let mut conv = sensitivity_two_qubit(&synth_two_qubit_conventional(a.gate, &p, &drive)?, &grid, &stepping)?;
    geo.gate_name = format!("{}^g", a.gate);
    conv.gate_name = format!("{}^c", a.gate);
    write_curve_csv(&geo, create(&a.out.join(format!("{stem}_sensitivity_geometric.csv")))?)?;
    write_curve_csv(&conv, create(&a.out.join(format!("{stem}_sensitivity_conventional.csv")))?)?;
    write_text(
        &a.out.join(format!("{stem}_sensitivity.svg")),
        &curve_plot(&format!("{} detuning error (effective model)", a.gate), "delta'", &geo, &conv),
    )?;
    println!(
        "{}: effective model, max infidelity geometric {:.3e}, conventional {:.3e}",
        a.gate,
        geo.max(),
        conv.max()
    );
    if a.skip_map {
        return Ok(());
    }

    let dec = Decoherence {
        t1: [a.t1.unwrap_or(c.t1_us); 2],
        tphi: [a.tphi.unwrap_or(c.tphi_us); 2],
    };
    dec.validate()?;
    let grid = NuBetaGrid {
        nu_halfwidth: mhz(a.nu_halfwidth_mhz.unwrap_or(c.nu_halfwidth_mhz)),
        nu_points: a.nu_points.unwrap_or(c.nu_points),
        beta_min: a.beta_min.unwrap_or(c.beta_min),
        beta_max: a.beta_max.unwrap_or(c.beta_max),
        beta_points: a.beta_points.unwrap_or(c.beta_points),
    };
    let loops: Vec<(GateParams, XiBranch)> = match a.branch.fixed() {
        Some(b) => vec![(gate_params(a.gate), b)],
        None => a.gate.loop_candidates(),
    };
    let opts = FullSimOptions { max_steps: c.max_steps, ..Default::default() };
    let mut best: Option<(XiBranch, NuBetaScan)> = None;
    for (params, branch) in loops {
        let choice = LoopChoice { gate: a.gate, params, xi_branch: branch, chi1, chi3 };
        let cells = grid.nu_points * grid.beta_points;
        let step = (cells / 20).max(1);
        let last = AtomicUsize::new(0);
        let scan = scan_nu_beta(&choice, &p, &dec, &grid, &opts, |done, total| {
            if done % step == 0 || done == total {
                let prev = last.fetch_max(done, Ordering::Relaxed);
                if done > prev {
                    eprintln!("twoqubit {} {branch:?}: {done}/{total} cells", a.gate);
                }
            }
        })?;
        let f = scan.best().2;
        eprintln!("twoqubit {} {branch:?}: best fidelity {f:.5}", a.gate);
        if best.as_ref().map_or(true, |b| f > b.1.best().2) {
            best = Some((branch, scan));
        }
    }
    let (branch, scan) = best.ok_or_else(|| usage("no loop to scan"))?;
    write_nu_beta_csv(&scan, create(&a.out.join(format!("{stem}_nu_beta.csv")))?)?;
    let x: Vec<f64> = scan.nu.iter().map(|v| v / (2.0 * PI)).collect();
    write_text(
        &a.out.join(format!("{stem}_nu_beta.svg")),
        &heatmap(&format!("{} fidelity", a.gate), "nu / 2pi (MHz)", "beta", &x, &scan.beta, &scan.fidelity),
    )?;
    let (nu, beta, f) = scan.best();
    println!(
        "{}: loop {branch:?}, best fidelity {f:.5} at nu = 2pi x {:.2} MHz, beta = {beta:.3}",
        a.gate,
        nu / (2.0 * PI)
    );
    println!("wrote {}/{stem}_*.csv and .svg", a.out.display());
    Ok(())
}

// ---------------------------------------------------------------- report

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Coarser grids for a fast preview.
    #[arg(long)]
    pub quick: bool,
    #[arg(long, default_value = "geotraj-report")]
    pub out: PathBuf,
}

pub fn cmd_report(a: &ReportArgs, cfg: &RunConfig) -> CliResult<()> {
    let out = a.out.clone();
    let mut cfg = cfg.clone();
    if a.quick {
        cfg.scan.points = cfg.scan.points.min(21);
        cfg.optimize.resolution_pi = cfg.optimize.resolution_pi.max(0.05);
        cfg.optimize.refine = false;
        cfg.transmon.omega_points = cfg.transmon.omega_points.min(6);
        cfg.twoqubit.nu_points = cfg.twoqubit.nu_points.min(5);
        cfg.twoqubit.beta_points = cfg.twoqubit.beta_points.min(5);
    }
    let scan = |gate, error| ScanArgs {
        gate,
        error: Some(error),
        delta_max: None,
        points: None,
        chi1: None,
        chi3: None,
        out: out.join("scan"),
    };
    let gates = [
        GateName::I,
        GateName::H,
        GateName::Xpi,
        GateName::Ypi,
        GateName::Xpi2,
        GateName::Ypi2,
        GateName::MXpi2,
        GateName::MYpi2,
    ];
    for g in gates {
        for e in [ErrorKind::Detuning, ErrorKind::Amplitude] {
            eprintln!("report: scan {g} {}", e.label());
            cmd_scan(&scan(g, e), &cfg)?;
        }
    }
    for g in [GateName::H, GateName::Xpi2, GateName::ISwap, GateName::Cz] {
        eprintln!("report: optimize {g}");
        cmd_optimize(
            &OptimizeArgs {
                gate: g,
                resolution: None,
                fine: None,
                no_refine: false,
                delta_probe: None,
                metric: None,
                error: None,
                out: out.join("optimize"),
            },
            &cfg,
        )?;
    }
    for g in [GateName::H, GateName::Xpi2] {
        eprintln!("report: transmon {g}");
        cmd_transmon(
            &TransmonArgs {
                gate: g,
                drag: OnOff::On,
                drag_scale: None,
                levels: None,
                alpha_mhz: None,
                t1: None,
                tphi: None,
                omega_min_mhz: None,
                omega_max_mhz: None,
                points: None,
                chi1: None,
                chi3: None,
                out: out.join("transmon"),
            },
            &cfg,
        )?;
    }
    for g in [GateName::ISwap, GateName::Cz] {
        eprintln!("report: twoqubit {g}");
        cmd_twoqubit(
            &TwoQubitArgs {
                gate: g,
                chi1: None,
                chi3: None,
                branch: if a.quick { BranchArg::Shortest } else { BranchArg::Auto },
                nu_points: None,
                beta_points: None,
                nu_halfwidth_mhz: None,
                beta_min: None,
                beta_max: None,
                t1: None,
                tphi: None,
                skip_map: false,
                out: out.join("twoqubit"),
            },
            &cfg,
        )?;
    }
    println!("report written to {}", out.display());
    Ok(())
}
