//! TOML run configuration. Every key carries its unit; unknown keys are errors.

use std::path::Path;

use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    pub synth: SynthConfig,
    pub scan: ScanSection,
    pub optimize: OptimizeConfig,
    pub transmon: TransmonConfig,
    pub twoqubit: TwoQubitConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: None,
            synth: SynthConfig::default(),
            scan: ScanSection::default(),
            optimize: OptimizeConfig::default(),
            transmon: TransmonConfig::default(),
            twoqubit: TwoQubitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Peak drive in MHz; unset means the normalized `Ω_m = 1`.
    pub omega_mhz: Option<f64>,
    pub samples_per_segment: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            omega_mhz: None,
            samples_per_segment: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub error: String,
    pub delta_max: f64,
    pub points: usize,
    pub steps_per_segment: usize,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            error: "detuning".into(),
            delta_max: 0.1,
            points: 41,
            steps_per_segment: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    pub resolution_pi: f64,
    pub fine_resolution_pi: f64,
    pub delta_probe: f64,
    pub metric: String,
    pub refine: bool,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            resolution_pi: 0.02,
            fine_resolution_pi: 0.005,
            delta_probe: 0.1,
            metric: "probe".into(),
            refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransmonConfig {
    pub levels: usize,
    pub alpha_mhz: f64,
    pub t1_us: f64,
    pub tphi_us: f64,
    pub drag_scale: f64,
    pub omega_min_mhz: f64,
    pub omega_max_mhz: f64,
    pub omega_points: usize,
}

impl Default for TransmonConfig {
    fn default() -> Self {
        Self {
            levels: 4,
            alpha_mhz: 320.0,
            t1_us: 50.0,
            tphi_us: 50.0,
            drag_scale: 1.0,
            omega_min_mhz: 8.0,
            omega_max_mhz: 48.0,
            omega_points: 21,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoQubitConfig {
    pub g_mhz: f64,
    pub delta1_mhz: f64,
    pub alpha1_mhz: f64,
    pub alpha2_mhz: f64,
    pub m_cutoff: usize,
    pub t1_us: f64,
    pub tphi_us: f64,
    pub nu_halfwidth_mhz: f64,
    pub nu_points: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_points: usize,
    /// RK4 step cap per simulation; exceeding it is a convergence failure.
    pub max_steps: usize,
}

impl Default for TwoQubitConfig {
    fn default() -> Self {
        Self {
            g_mhz: 8.0,
            delta1_mhz: 500.0,
            alpha1_mhz: 320.0,
            alpha2_mhz: 280.0,
            m_cutoff: 7,
            t1_us: 50.0,
            tphi_us: 50.0,
            nu_halfwidth_mhz: 20.0,
            nu_points: 41,
            beta_min: 0.2,
            beta_max: 1.8,
            beta_points: 33,
            max_steps: 2_000_000,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config: {e}"))
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::parse(&text)
    }
}
