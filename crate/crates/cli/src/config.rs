//! JSON run configuration. Durations are in seconds, everything else is dimensionless.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use photocount::timing::{Bounds, GapModel, TimingParams};
use photocount::{DetectorConfig, StateSpec};

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub detector: Option<DetectorBlock>,
    pub state: Option<StateBlock>,
    #[serde(default)]
    pub task: TaskBlock,
    #[serde(default)]
    pub output: OutputBlock,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorBlock {
    pub tau_m: f64,
    pub tau_d: f64,
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default)]
    pub nu: f64,
    #[serde(default)]
    pub p0: f64,
    #[serde(default)]
    pub r_ap: f64,
    #[serde(default)]
    pub tau_r: f64,
    #[serde(default)]
    pub tau_after: f64,
}

fn one() -> f64 {
    1.0
}

impl DetectorBlock {
    pub fn build(&self) -> photocount::Result<DetectorConfig<f64>> {
        DetectorConfig::with_params(self.tau_m, self.tau_d, self.eta, self.nu, self.p0, self.r_ap)?
            .with_timing(self.tau_r, self.tau_after)
    }
}

/// Field state; complex amplitudes are written as `[re, im]`.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateBlock {
    Coherent {
        alpha: [f64; 2],
    },
    Thermal {
        n_th: f64,
    },
    Fock {
        l: usize,
        #[serde(default = "one")]
        eta: f64,
    },
    Squeezed {
        alpha: [f64; 2],
        r: f64,
        #[serde(default = "one")]
        eta: f64,
    },
}

impl StateBlock {
    pub fn spec(&self) -> StateSpec<f64> {
        match *self {
            StateBlock::Coherent { alpha } => StateSpec::Coherent { alpha: Complex::new(alpha[0], alpha[1]) },
            StateBlock::Thermal { n_th } => StateSpec::Thermal { n_th },
            StateBlock::Fock { l, eta } => StateSpec::AttenuatedFock { l, eta },
            StateBlock::Squeezed { alpha, r, eta } => {
                StateSpec::SqueezedCoherent { alpha: Complex::new(alpha[0], alpha[1]), r, eta }
            }
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TaskBlock {
    #[serde(default)]
    pub stats: StatsTask,
    #[serde(default)]
    pub simulate: SimulateTask,
    #[serde(default)]
    pub fit: FitTask,
    #[serde(default)]
    pub reconstruct: ReconstructTask,
    #[serde(default)]
    pub validate: ValidateTask,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatsMode {
    Independent,
    CwUniform,
    CwExact,
}

impl StatsMode {
    pub fn name(self) -> &'static str {
        match self {
            StatsMode::Independent => "independent",
            StatsMode::CwUniform => "cw-uniform",
            StatsMode::CwExact => "cw-exact",
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StatsTask {
    /// Defaults to all modes available for the state.
    pub modes: Option<Vec<StatsMode>>,
    /// Memory-series depth of the uniform approximation; `null` sums the series.
    pub depth: Option<usize>,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_grid() -> usize {
    photocount::multiwindow::DEFAULT_GRID
}

impl Default for StatsTask {
    fn default() -> Self {
        StatsTask { modes: None, depth: None, grid: default_grid() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    Independent,
    Cw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingKind {
    Instant,
    Refined,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateTask {
    #[serde(default = "default_windows")]
    pub windows: usize,
    #[serde(default = "default_sim_mode")]
    pub mode: SimMode,
    #[serde(default = "default_timing")]
    pub timing: TimingKind,
    #[serde(default)]
    pub record_gaps: bool,
    /// Report the total-variation distance to the analytic distribution.
    #[serde(default)]
    pub compare: bool,
}

fn default_windows() -> usize {
    100_000
}
fn default_sim_mode() -> SimMode {
    SimMode::Independent
}
fn default_timing() -> TimingKind {
    TimingKind::Instant
}

impl Default for SimulateTask {
    fn default() -> Self {
        SimulateTask {
            windows: default_windows(),
            mode: default_sim_mode(),
            timing: default_timing(),
            record_gaps: false,
            compare: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Auto,
    Gaps,
    Timestamps,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Basic,
    Refined,
}

impl ModelKind {
    pub fn model(self) -> GapModel {
        match self {
            ModelKind::Basic => GapModel::Basic,
            ModelKind::Refined => GapModel::Refined,
        }
    }
}

/// Timing parameters in seconds.
#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsBlock {
    pub tau_phot: f64,
    pub tau_d: f64,
    pub p: f64,
    #[serde(default)]
    pub tau_after: f64,
    #[serde(default)]
    pub tau_r: f64,
}

impl From<ParamsBlock> for TimingParams {
    fn from(b: ParamsBlock) -> Self {
        TimingParams { tau_phot: b.tau_phot, tau_d: b.tau_d, p: b.p, tau_after: b.tau_after, tau_r: b.tau_r }
    }
}

impl From<TimingParams> for ParamsBlock {
    fn from(t: TimingParams) -> Self {
        ParamsBlock { tau_phot: t.tau_phot, tau_d: t.tau_d, p: t.p, tau_after: t.tau_after, tau_r: t.tau_r }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FitTask {
    pub input: Option<PathBuf>,
    #[serde(default = "default_input_kind")]
    pub input_kind: InputKind,
    #[serde(default = "default_model")]
    pub model: ModelKind,
    /// Initial guess; derived from the data when absent.
    pub init: Option<ParamsBlock>,
    pub lower: Option<ParamsBlock>,
    pub upper: Option<ParamsBlock>,
}

fn default_input_kind() -> InputKind {
    InputKind::Auto
}
fn default_model() -> ModelKind {
    ModelKind::Refined
}

impl Default for FitTask {
    fn default() -> Self {
        FitTask {
            input: None,
            input_kind: default_input_kind(),
            model: default_model(),
            init: None,
            lower: None,
            upper: None,
        }
    }
}

impl FitTask {
    pub fn bounds(&self, init: &TimingParams) -> Bounds {
        let mut b = Bounds::around(init);
        if let Some(l) = self.lower {
            b.lower = l.into();
        }
        if let Some(u) = self.upper {
            b.upper = u.into();
        }
        b
    }
}

/// Real displacement grid: either explicit points or `start..=stop` in steps of `step`.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum GridBlock {
    Points(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl GridBlock {
    pub fn points(&self) -> anyhow::Result<Vec<f64>> {
        match self {
            GridBlock::Points(v) => Ok(v.clone()),
            GridBlock::Range { start, stop, step } => {
                if !(*step > 0.0) || !(stop >= start) {
                    bail!("alpha_grid range needs step > 0 and stop >= start");
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                Ok((0..=n).map(|i| start + i as f64 * step).collect())
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructTask {
    #[serde(default = "default_s")]
    pub s: f64,
    #[serde(default = "default_alpha_grid")]
    pub alpha_grid: GridBlock,
    #[serde(default = "default_samples")]
    pub samples_per_point: usize,
    /// Use exact pulse distributions instead of sampling.
    #[serde(default)]
    pub exact: bool,
}

fn default_s() -> f64 {
    -0.8
}
fn default_alpha_grid() -> GridBlock {
    GridBlock::Range { start: -2.0, stop: 2.0, step: 0.1 }
}
fn default_samples() -> usize {
    10_000
}

impl Default for ReconstructTask {
    fn default() -> Self {
        ReconstructTask {
            s: default_s(),
            alpha_grid: default_alpha_grid(),
            samples_per_point: default_samples(),
            exact: false,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateTask {
    /// Criteria to run; all when absent.
    pub criteria: Option<Vec<u8>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: Format,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { dir: default_dir(), format: Format::Csv }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn detector(&self) -> anyhow::Result<DetectorConfig<f64>> {
        match &self.detector {
            Some(d) => Ok(d.build()?),
            None => bail!("config has no detector block"),
        }
    }

    pub fn state(&self) -> anyhow::Result<StateSpec<f64>> {
        match &self.state {
            Some(s) => Ok(s.spec()),
            None => bail!("config has no state block"),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_rejects_unknown_keys() {
        let c: RunConfig = serde_json::from_str(
            r#"{"detector": {"tau_m": 1.0, "tau_d": 0.09}, "state": {"kind": "coherent", "alpha": [2.0, 0.0]}}"#,
        )
        .unwrap();
        assert_eq!(c.detector.unwrap().eta, 1.0);
        assert!(
            serde_json::from_str::<RunConfig>(r#"{"detector": {"tau_m": 1.0, "tau_d": 0.09, "tau_x": 1}}"#).is_err()
        );
        assert!(serde_json::from_str::<RunConfig>(r#"{"colour": 1}"#).is_err());
    }

    #[test]
    fn grid_range() {
        let g = GridBlock::Range { start: -1.0, stop: 1.0, step: 0.5 };
        assert_eq!(g.points().unwrap(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }
}
