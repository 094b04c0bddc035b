//! JSON run configurations.

use saddlecross::landscape::{CutOptions, GridSpec, LevelSpec};
use saddlecross::model::{Mode, PhysicalSystem, PotentialKind, PotentialSpec};
use saddlecross::saddles::CoordinateMode;
use saddlecross::tracking::BranchPreference;
use saddlecross::Complex64;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub task: TaskConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub potential: PotentialKind,
    #[serde(default)]
    pub strength: f64,
    pub mass: f64,
    #[serde(default = "one")]
    pub hbar: f64,
    pub x0: f64,
    /// Exactly one of `energy` and `time` must be given.
    pub energy: Option<f64>,
    pub time: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl SystemConfig {
    pub fn build(&self) -> Result<PhysicalSystem, CliError> {
        let mode = match (self.energy, self.time) {
            (Some(energy), None) => Mode::FixedEnergy { energy },
            (None, Some(time)) => Mode::FixedTime { time },
            _ => {
                return Err(CliError::Config(
                    "system: give exactly one of `energy` and `time`".into(),
                ))
            }
        };
        let potential = PotentialSpec::new(self.potential, self.strength)
            .map_err(|e| CliError::Config(format!("system.potential: {e}")))?;
        PhysicalSystem::new(self.mass, self.hbar, potential, mode, self.x0)
            .map_err(|e| CliError::Config(format!("system: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    Landscape(LandscapeTask),
    Track(TrackTask),
    Compare(CompareTask),
    Discrete(DiscreteTask),
    Saddles(SaddlesTask),
}

impl TaskConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Landscape(_) => "landscape",
            Self::Track(_) => "track",
            Self::Compare(_) => "compare",
            Self::Discrete(_) => "discrete",
            Self::Saddles(_) => "saddles",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Stem for every file written; also names the plot script.
    #[serde(default = "default_figure")]
    pub figure: String,
    #[serde(default = "yes")]
    pub plot: bool,
}

fn default_figure() -> String {
    "run".into()
}

fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            figure: default_figure(),
            plot: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Plain,
    SinhX1,
}

impl From<ModeName> for CoordinateMode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::Plain => Self::Plain,
            ModeName::SinhX1 => Self::SinhX1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexValue {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl From<ComplexValue> for Complex64 {
    fn from(c: ComplexValue) -> Self {
        Complex64::new(c.re, c.im)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeTask {
    pub grid: GridSpec,
    #[serde(default = "plain_only")]
    pub modes: Vec<ModeName>,
    #[serde(default = "plus")]
    pub sign: i8,
    #[serde(default = "im_zero")]
    pub levels: Vec<LevelSpec>,
    #[serde(default)]
    pub cuts: CutOptions,
    #[serde(default = "default_ivp_tol")]
    pub ivp_tol: f64,
}

fn plain_only() -> Vec<ModeName> {
    vec![ModeName::Plain]
}

fn plus() -> i8 {
    1
}

fn im_zero() -> Vec<LevelSpec> {
    vec![LevelSpec::ImZero]
}

fn default_ivp_tol() -> f64 {
    1e-10
}

/// Starting saddle for a track.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StartSpec {
    /// k-th real saddle at the first schedule point, ordered by control.
    RealIndex(usize),
    /// Newton refinement of a control guess.
    Guess(ComplexValue),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PreferenceName {
    #[default]
    LaterTime,
    EarlierTime,
}

impl From<PreferenceName> for BranchPreference {
    fn from(p: PreferenceName) -> Self {
        match p {
            PreferenceName::LaterTime => Self::LaterTime,
            PreferenceName::EarlierTime => Self::EarlierTime,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackTask {
    pub from: f64,
    pub to: f64,
    pub step: f64,
    pub start: StartSpec,
    /// Final positions whose paths are dumped; added to the schedule.
    #[serde(default)]
    pub dumps: Vec<f64>,
    #[serde(default = "default_samples")]
    pub dump_samples: usize,
    #[serde(default)]
    pub preference: PreferenceName,
    #[serde(default)]
    pub stop_at_fold: bool,
}

fn default_samples() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareTask {
    pub from: f64,
    pub to: f64,
    pub step: f64,
    /// Planck constants to sweep; the system value when empty.
    #[serde(default)]
    pub hbar: Vec<f64>,
    #[serde(default)]
    pub exact_only: bool,
    /// Windows of x1 over which the error summary is taken.
    #[serde(default = "default_windows")]
    pub windows: Vec<[f64; 2]>,
}

fn default_windows() -> Vec<[f64; 2]> {
    vec![[2.0, 5.0]]
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainTask {
    pub n: usize,
    /// Discrete initial velocity near the saddle at `from`.
    pub guess: ComplexValue,
    pub from: f64,
    pub to: f64,
    pub step: f64,
    #[serde(default)]
    pub dumps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteTask {
    pub grid: GridSpec,
    pub steps: Vec<usize>,
    #[serde(default)]
    pub continuum: bool,
    #[serde(default = "im_zero")]
    pub levels: Vec<LevelSpec>,
    #[serde(default)]
    pub cuts: CutOptions,
    /// Peaks above this multiple of the median count as divergence sites.
    #[serde(default = "default_site_ratio")]
    pub site_ratio: f64,
    #[serde(default)]
    pub chain: Option<ChainTask>,
}

fn default_site_ratio() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaddlesTask {
    pub x1: Vec<f64>,
    /// Extra Newton seeds tried at every x1.
    #[serde(default)]
    pub guesses: Vec<ComplexValue>,
}

fn finite(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be finite")))
    }
}

fn range(name: &str, from: f64, to: f64, step: f64) -> Result<(), CliError> {
    finite(&format!("{name}.from"), from)?;
    finite(&format!("{name}.to"), to)?;
    finite(&format!("{name}.step"), step)?;
    if !(to > from) || !(step > 0.0) || (to - from) / step > 1e6 {
        return Err(CliError::Config(format!(
            "{name}: need from < to and a positive step"
        )));
    }
    Ok(())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.system;
        for (name, v) in [
            ("system.strength", s.strength),
            ("system.mass", s.mass),
            ("system.hbar", s.hbar),
            ("system.x0", s.x0),
        ] {
            finite(name, v)?;
        }
        let fig = &self.output.figure;
        if fig.is_empty()
            || fig.len() > 64
            || !fig
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(CliError::Config(
                "output.figure must be 1-64 characters of [A-Za-z0-9_-]".into(),
            ));
        }
        match &self.task {
            TaskConfig::Landscape(t) => {
                t.grid
                    .validate()
                    .map_err(|e| CliError::Config(format!("task.landscape.grid: {e}")))?;
                if t.modes.is_empty() {
                    return Err(CliError::Config("task.landscape.modes is empty".into()));
                }
                if !(1e-13..=1e-6).contains(&t.ivp_tol) {
                    return Err(CliError::Config(
                        "task.landscape.ivp_tol out of [1e-13, 1e-6]".into(),
                    ));
                }
            }
            TaskConfig::Track(t) => {
                range("task.track", t.from, t.to, t.step)?;
                if t.dumps.iter().any(|d| !d.is_finite())
                    || !(2..=100_000).contains(&t.dump_samples)
                {
                    return Err(CliError::Config("task.track: bad dumps".into()));
                }
            }
            TaskConfig::Compare(t) => {
                range("task.compare", t.from, t.to, t.step)?;
                if t.hbar.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
                    return Err(CliError::Config(
                        "task.compare.hbar must be positive".into(),
                    ));
                }
                if t.windows.iter().flatten().any(|w| !w.is_finite()) {
                    return Err(CliError::Config(
                        "task.compare.windows must be finite".into(),
                    ));
                }
            }
            TaskConfig::Discrete(t) => {
                t.grid
                    .validate()
                    .map_err(|e| CliError::Config(format!("task.discrete.grid: {e}")))?;
                if t.steps.iter().any(|&n| !(1..=100_000).contains(&n)) {
                    return Err(CliError::Config(
                        "task.discrete.steps must lie in 1..=100000".into(),
                    ));
                }
                if let Some(c) = &t.chain {
                    range("task.discrete.chain", c.from, c.to, c.step)?;
                    if !(1..=100_000).contains(&c.n) {
                        return Err(CliError::Config(
                            "task.discrete.chain.n must lie in 1..=100000".into(),
                        ));
                    }
                }
            }
            TaskConfig::Saddles(t) => {
                if t.x1.is_empty() || t.x1.iter().any(|x| !x.is_finite()) {
                    return Err(CliError::Config(
                        "task.saddles.x1 must be nonempty and finite".into(),
                    ));
                }
            }
        }
        self.system.build().map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{"system": {"potential": "rosen_morse", "strength": 1, "mass": 1, "x0": -5, "energy": 0.9},
        "task": {"saddles": {"x1": [-2]}}}"#;

    #[test]
    fn parses_minimal() {
        let cfg = RunConfig::parse(BASE).unwrap();
        assert_eq!(cfg.task.name(), "saddles");
        assert_eq!(cfg.output.figure, "run");
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = BASE.replace("\"mass\"", "\"colour\": 1, \"mass\"");
        assert!(matches!(RunConfig::parse(&bad), Err(CliError::Config(_))));
    }

    #[test]
    fn rejects_both_modes() {
        let bad = BASE.replace("\"energy\": 0.9", "\"energy\": 0.9, \"time\": 3");
        assert!(matches!(RunConfig::parse(&bad), Err(CliError::Config(_))));
    }

    #[test]
    fn rejects_unsafe_figure_name() {
        let bad = BASE.replace("}}}", "}}, \"output\": {\"figure\": \"../x\"}}");
        assert!(matches!(RunConfig::parse(&bad), Err(CliError::Config(_))));
    }

    #[test]
    fn error_mentions_line() {
        let Err(CliError::Config(msg)) = RunConfig::parse("{\n\"system\": 3}") else {
            panic!()
        };
        assert!(msg.contains("line 2"), "{msg}");
    }
}
