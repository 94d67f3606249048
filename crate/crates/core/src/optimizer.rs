//! Grid search over the free waypoints `(χ₁, χ₃)` of the five-segment loop.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::geo::{
    four_segment_loop, synth_five_segment_with, synth_n_segment, GateParams, SynthOptions, XiBranch,
};
use crate::pulse::{propagate_schedule, PulseSchedule, SegmentStepping};
use crate::robustness::{gate_fidelity_with, symmetric_grid, ErrorKind, FidelityKind};

/// What a cell is scored by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Metric {
    /// `1 − F` at `+δ_probe`.
    #[default]
    Probe,
    /// Mean `1 − F` over 11 points in `[−δ_probe, δ_probe]`.
    MeanOverRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub resolution: f64,
    pub error_kind: ErrorKind,
    pub delta_probe: f64,
    pub metric: Metric,
    pub fidelity: FidelityKind,
    pub omega_max: f64,
    pub synth: SynthOptions,
    pub stepping: SegmentStepping,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            resolution: 0.02 * PI,
            error_kind: ErrorKind::Detuning,
            delta_probe: 0.1,
            metric: Metric::Probe,
            fidelity: FidelityKind::Modulus,
            omega_max: 1.0,
            synth: SynthOptions::default(),
            stepping: SegmentStepping::magnus(400),
        }
    }
}

impl ScanConfig {
    pub fn probe_values(&self) -> Vec<f64> {
        match self.metric {
            Metric::Probe => vec![self.delta_probe],
            Metric::MeanOverRange => symmetric_grid(self.delta_probe, 11),
        }
    }
}

/// Score of one `(χ₁, χ₃)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub metric: f64,
    pub total_area: f64,
}

/// Scores a schedule synthesized for `(χ₁, χ₃)`; supplied by the caller so
/// that two-qubit targets can be scored in their embedded space.
pub type ScheduleScorer<'a> = dyn Fn(&PulseSchedule, &ScanConfig) -> Result<f64> + Sync + 'a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub gate: GateParams,
    pub chi1_grid: Vec<f64>,
    pub chi3_grid: Vec<f64>,
    /// `cells[i][j]` for `(chi1_grid[i], chi3_grid[j])`; `None` where no loop exists.
    pub cells: Vec<Vec<Option<CellScore>>>,
}

impl Landscape {
    pub fn metric(&self, i: usize, j: usize) -> Option<f64> {
        self.cells[i][j].map(|c| c.metric)
    }

    pub fn feasible_count(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.is_some()).count()
    }
}

/// Grid from `lo` to `hi` (inclusive within rounding) at spacing `res`. A point
/// on the equator is pushed half a step into the interval.
pub fn waypoint_grid(lo: f64, hi: f64, res: f64) -> Vec<f64> {
    let n = ((hi - lo) / res + 1e-9).floor() as usize;
    let mut out: Vec<f64> = (0..=n).map(|k| lo + k as f64 * res).collect();
    if let Some(last) = out.last() {
        if hi - last > 1e-9 * res.max(1.0) {
            out.push(hi);
        }
    }
    for x in &mut out {
        if x.cos().abs() < 1e-9 {
            *x += if *x >= hi { -0.5 * res } else { 0.5 * res };
        }
    }
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    out
}

/// Single-qubit scorer: `1 − F` against `gate_unitary(p)`.
pub fn two_level_scorer(p: GateParams) -> impl Fn(&PulseSchedule, &ScanConfig) -> Result<f64> + Sync {
    let target = p.unitary();
    move |sched, cfg| {
        let probes = cfg.probe_values();
        let mut sum = 0.0;
        for v in &probes {
            let err = cfg.error_kind.model(*v, sched.omega_max);
            let u = propagate_schedule(sched, &err, &cfg.stepping)?;
            sum += 1.0 - gate_fidelity_with(&target, &u, cfg.fidelity)?;
        }
        Ok(sum / probes.len() as f64)
    }
}

fn score_cell(
    p: &GateParams,
    chi1: f64,
    chi3: f64,
    cfg: &ScanConfig,
    scorer: &ScheduleScorer<'_>,
) -> Result<Option<CellScore>> {
    match synth_five_segment_with(p, chi1, chi3, cfg.omega_max, cfg.synth) {
        Ok((sched, _)) => Ok(Some(CellScore {
            metric: scorer(&sched, cfg)?.max(0.0),
            total_area: sched.total_area(),
        })),
        Err(GeoError::SingularDrift { .. } | GeoError::DegenerateLoop) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn scan_landscape(p: &GateParams, cfg: &ScanConfig) -> Result<Landscape> {
    scan_landscape_with(p, cfg, &two_level_scorer(*p))
}

/// Scores every cell of `[0, χ₀] × [χ₀, π]` at the configured resolution.
pub fn scan_landscape_with(
    p: &GateParams,
    cfg: &ScanConfig,
    scorer: &ScheduleScorer<'_>,
) -> Result<Landscape> {
    p.validate()?;
    if !(cfg.resolution > 0.0) {
        return Err(GeoError::Parameter(format!("resolution {} must be positive", cfg.resolution)));
    }
    let chi1_grid = waypoint_grid(0.0, p.chi0, cfg.resolution);
    let chi3_grid = waypoint_grid(p.chi0, PI, cfg.resolution);
    scan_grid(p, chi1_grid, chi3_grid, cfg, scorer)
}

fn scan_grid(
    p: &GateParams,
    chi1_grid: Vec<f64>,
    chi3_grid: Vec<f64>,
    cfg: &ScanConfig,
    scorer: &ScheduleScorer<'_>,
) -> Result<Landscape> {
    let pairs: Vec<(usize, usize)> = (0..chi1_grid.len())
        .flat_map(|i| (0..chi3_grid.len()).map(move |j| (i, j)))
        .collect();
    let scores = pairs
        .par_iter()
        .map(|&(i, j)| score_cell(p, chi1_grid[i], chi3_grid[j], cfg, scorer))
        .collect::<Result<Vec<_>>>()?;
    let mut cells = vec![vec![None; chi3_grid.len()]; chi1_grid.len()];
    for (&(i, j), s) in pairs.iter().zip(scores) {
        cells[i][j] = s;
    }
    let l = Landscape {
        gate: *p,
        chi1_grid,
        chi3_grid,
        cells,
    };
    if l.feasible_count() == 0 {
        return Err(GeoError::EmptyLandscape);
    }
    Ok(l)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub chi1: f64,
    pub chi3: f64,
    pub metric: f64,
    pub total_area: f64,
}

fn better(a: &Optimum, b: &Optimum) -> bool {
    // metrics closer than this are treated as equal
    const TIE: f64 = 1e-12;
    if (a.metric - b.metric).abs() > TIE {
        return a.metric < b.metric;
    }
    if (a.total_area - b.total_area).abs() > TIE {
        return a.total_area < b.total_area;
    }
    (a.chi1, a.chi3) < (b.chi1, b.chi3)
}

fn ranked(l: &Landscape) -> Vec<Optimum> {
    let mut all: Vec<Optimum> = Vec::new();
    for (i, row) in l.cells.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            if let Some(c) = c {
                all.push(Optimum {
                    chi1: l.chi1_grid[i],
                    chi3: l.chi3_grid[j],
                    metric: c.metric,
                    total_area: c.total_area,
                });
            }
        }
    }
    all.sort_by(|a, b| {
        if better(a, b) {
            std::cmp::Ordering::Less
        } else if better(b, a) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });
    all
}

/// Lowest-metric cell; ties go to the smaller total area, then to the
/// lexicographically smaller `(χ₁, χ₃)`.
pub fn select_optimum(l: &Landscape) -> Result<Optimum> {
    ranked(l).into_iter().next().ok_or(GeoError::EmptyLandscape)
}

/// Coarse scan, then a scan at `fine_resolution` around the best `keep` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub fine_resolution: f64,
    pub keep: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            fine_resolution: 0.005 * PI,
            keep: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub coarse: Landscape,
    pub optimum: Optimum,
}

pub fn optimize(p: &GateParams, cfg: &ScanConfig, refine: &RefineConfig) -> Result<OptimizeResult> {
    optimize_with(p, cfg, refine, &two_level_scorer(*p))
}

pub fn optimize_with(
    p: &GateParams,
    cfg: &ScanConfig,
    refine: &RefineConfig,
    scorer: &ScheduleScorer<'_>,
) -> Result<OptimizeResult> {
    let coarse = scan_landscape_with(p, cfg, scorer)?;
    let mut best = select_optimum(&coarse)?;
    if refine.keep > 0 && refine.fine_resolution < cfg.resolution {
        for seed in ranked(&coarse).into_iter().take(refine.keep) {
            let half = cfg.resolution;
            let g1 = waypoint_grid(
                (seed.chi1 - half).max(0.0),
                (seed.chi1 + half).min(p.chi0),
                refine.fine_resolution,
            );
            let g3 = waypoint_grid(
                (seed.chi3 - half).max(p.chi0),
                (seed.chi3 + half).min(PI),
                refine.fine_resolution,
            );
            if let Ok(fine) = scan_grid(p, g1, g3, cfg, scorer) {
                let cand = select_optimum(&fine)?;
                if better(&cand, &best) {
                    best = cand;
                }
            }
        }
    }
    Ok(OptimizeResult {
        coarse,
        optimum: best,
    })
}

/// Optimum over several loops realizing the same gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateOptimum {
    pub gate: GateParams,
    pub xi_branch: XiBranch,
    pub result: OptimizeResult,
}

/// Runs [`optimize_with`] for every `(params, branch)` candidate and keeps the
/// best optimum (same tie-break rules as a single scan, candidate order last).
pub fn optimize_candidates<M>(
    candidates: &[(GateParams, XiBranch)],
    cfg: &ScanConfig,
    refine: &RefineConfig,
    make_scorer: M,
) -> Result<CandidateOptimum>
where
    M: Fn(&GateParams) -> Box<ScheduleScorer<'static>>,
{
    let mut best: Option<CandidateOptimum> = None;
    for (p, branch) in candidates {
        let mut c = *cfg;
        c.synth.xi_branch = *branch;
        let scorer = make_scorer(p);
        let result = match optimize_with(p, &c, refine, scorer.as_ref()) {
            Ok(r) => r,
            Err(GeoError::EmptyLandscape) => continue,
            Err(e) => return Err(e),
        };
        if best
            .as_ref()
            .map_or(true, |b| better(&result.optimum, &b.result.optimum))
        {
            best = Some(CandidateOptimum {
                gate: *p,
                xi_branch: *branch,
                result,
            });
        }
    }
    best.ok_or(GeoError::EmptyLandscape)
}

/// Metric of the four-segment loop `(χ₁ = 0, χ₃ = χ₂)` for each `χ₂`.
pub fn scan_four_segment(
    p: &GateParams,
    chi2_grid: &[f64],
    cfg: &ScanConfig,
) -> Result<Vec<(f64, Option<f64>)>> {
    let scorer = two_level_scorer(*p);
    chi2_grid
        .par_iter()
        .map(|&chi2| {
            let traj = match four_segment_loop(p, chi2) {
                Ok(t) => t,
                Err(GeoError::SingularDrift { .. } | GeoError::DegenerateLoop) => {
                    return Ok((chi2, None))
                }
                Err(e) => return Err(e),
            };
            let sched = synth_n_segment(&traj, cfg.omega_max, cfg.synth.envelope)?;
            Ok((chi2, Some(scorer(&sched, cfg)?)))
        })
        .collect()
}

/// CSV `chi1,chi3,infidelity`; infeasible cells are written with an empty
/// infidelity field.
pub fn write_landscape_csv<W: Write>(l: &Landscape, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["chi1", "chi3", "infidelity"])?;
    for (i, row) in l.cells.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            w.write_record([
                l.chi1_grid[i].to_string(),
                l.chi3_grid[j].to_string(),
                c.map(|c| c.metric.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
    use crate::pulse::Envelope;

    #[test]
    fn grid_avoids_equator() {
        let g = waypoint_grid(FRAC_PI_2, PI, 0.1 * PI);
        assert!((g[0] - 0.55 * PI).abs() < 1e-12);
        assert!((g.last().unwrap() - PI).abs() < 1e-12);
        let g = waypoint_grid(0.0, FRAC_PI_2, 0.1 * PI);
        assert!((g.last().unwrap() - 0.45 * PI).abs() < 1e-12);
        assert!(g.iter().all(|x| x.cos().abs() > 1e-6));
        let g = waypoint_grid(0.0, FRAC_PI_4, 0.02 * PI);
        assert!((g.last().unwrap() - FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn zero_probe_is_flat() {
        let p = GateParams::new(FRAC_PI_4, 0.0, FRAC_PI_2).unwrap();
        let cfg = ScanConfig {
            resolution: 0.1 * PI,
            delta_probe: 0.0,
            ..Default::default()
        };
        let l = scan_landscape(&p, &cfg).unwrap();
        assert!(l.chi1_grid.iter().all(|&x| (0.0..=FRAC_PI_4).contains(&x)));
        assert!(l.chi3_grid.iter().all(|&x| (FRAC_PI_4..=PI).contains(&x)));
        for c in l.cells.iter().flatten().flatten() {
            assert!(c.metric < 1e-8);
        }
    }

    #[test]
    fn ties_prefer_short_then_lexicographic() {
        let p = GateParams::new(FRAC_PI_2, 0.0, 0.0).unwrap();
        let mk = |m, a| Some(CellScore { metric: m, total_area: a });
        let l = Landscape {
            gate: p,
            chi1_grid: vec![0.1, 0.2],
            chi3_grid: vec![2.0, 2.5],
            cells: vec![vec![mk(0.5, 3.0), mk(0.1, 4.0)], vec![mk(0.1, 3.5), None]],
        };
        let o = select_optimum(&l).unwrap();
        assert_eq!((o.chi1, o.chi3), (0.2, 2.0));
        let l2 = Landscape {
            cells: vec![vec![mk(0.5, 3.0), mk(0.1, 3.5)], vec![mk(0.1, 3.5), None]],
            ..l
        };
        let o = select_optimum(&l2).unwrap();
        assert_eq!((o.chi1, o.chi3), (0.1, 2.5));
    }

    #[test]
    fn csv_header() {
        let p = GateParams::new(FRAC_PI_2, PI, FRAC_PI_2).unwrap();
        let cfg = ScanConfig {
            resolution: 0.25 * PI,
            ..Default::default()
        };
        let l = scan_landscape(&p, &cfg).unwrap();
        let mut buf = Vec::new();
        write_landscape_csv(&l, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("chi1,chi3,infidelity\n"));
        assert_eq!(text.lines().count(), 1 + l.chi1_grid.len() * l.chi3_grid.len());
    }

    fn coarse() -> ScanConfig {
        ScanConfig {
            resolution: 0.1 * PI,
            stepping: SegmentStepping::magnus(100),
            ..Default::default()
        }
    }

    #[test]
    fn deterministic() {
        let p = GateParams::new(FRAC_PI_4, 0.0, 1.5 * PI).unwrap();
        let a = optimize(&p, &coarse(), &RefineConfig::default()).unwrap();
        let b = optimize(&p, &coarse(), &RefineConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn refinement_never_worse_than_coarse() {
        let p = GateParams::new(FRAC_PI_2, PI, FRAC_PI_4).unwrap();
        let r = optimize(&p, &coarse(), &RefineConfig::default()).unwrap();
        let c = select_optimum(&r.coarse).unwrap();
        assert!(r.optimum.metric <= c.metric);
    }

    #[test]
    fn four_segment_endpoint_is_three_segment() {
        let p = GateParams::new(FRAC_PI_2, PI, FRAC_PI_2).unwrap();
        let rows = scan_four_segment(&p, &[0.6 * PI, PI], &coarse()).unwrap();
        let three = crate::geo::three_segment_loop(&p).unwrap();
        let sched = synth_n_segment(&three, 1.0, Envelope::Sine).unwrap();
        let want = two_level_scorer(p)(&sched, &coarse()).unwrap();
        assert!((rows[1].1.unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn candidate_search_keeps_best() {
        let p = GateParams::new(FRAC_PI_4, 0.0, FRAC_PI_2).unwrap();
        let cands = [(p, XiBranch::Shortest), (p, XiBranch::Alternate)];
        let refine = RefineConfig { keep: 0, ..Default::default() };
        let best = optimize_candidates(&cands, &coarse(), &refine, |p| Box::new(two_level_scorer(*p))).unwrap();
        for (q, b) in cands {
            let mut c = coarse();
            c.synth.xi_branch = b;
            let r = optimize(&q, &c, &refine).unwrap();
            assert!(best.result.optimum.metric <= r.optimum.metric);
        }
    }
}
