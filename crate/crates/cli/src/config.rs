use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use opuc::asymptotics::DEFAULT_EPSILON1;
use opuc::verblunsky::{default_precision, MAX_PRECISION};
use opuc::Potential;
use serde::{Deserialize, Serialize};

/// Tolerances recognised in `tolerances`, with their defaults.
pub const DEFAULT_TOLERANCES: &[(&str, f64)] = &[
    ("b_stability", 0.1),
    ("convolution", 1e-6),
    ("intercept", 0.05),
    ("kernel_mass", 1e-8),
    ("mass", 1e-8),
    ("slope_relative", 0.15),
    ("string_integral", 1e-8),
    ("string_matrix", 1e-6),
    ("symbol_agreement", 1e-6),
    ("unitarity", 1e-10),
    ("v_identity", 1e-8),
    ("whole_circle_max", 0.1),
    ("zero_order", 0.08),
];

/// One experiment: a potential, an `n` ladder and the offset window around each `n`.
///
/// `out` and `jobs` are execution settings and are not echoed into reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub potential: Potential,
    pub n: Vec<usize>,
    pub window: i64,
    /// Starting precision in bits; `max(128, 10n)` when absent.
    pub precision: Option<u32>,
    pub max_precision: u32,
    /// Largest Verblunsky index; `n + max(window, string_window) + 3` when absent.
    pub kmax: Option<usize>,
    /// Fixed arc half-angle instead of the normalized one.
    pub theta: Option<f64>,
    pub epsilon1: f64,
    pub gamma_max: usize,
    pub symbol_points: usize,
    pub density_points: usize,
    pub string_window: usize,
    pub tolerances: BTreeMap<String, f64>,
    #[serde(skip_serializing)]
    pub out: PathBuf,
    #[serde(skip_serializing)]
    pub jobs: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            potential: Potential::gww(2.0).with_name("gww2"),
            n: vec![20, 40, 80],
            window: 5,
            precision: None,
            max_precision: MAX_PRECISION,
            kmax: None,
            theta: None,
            epsilon1: DEFAULT_EPSILON1,
            gamma_max: 50,
            symbol_points: 64,
            density_points: 41,
            string_window: 6,
            tolerances: BTreeMap::new(),
            out: PathBuf::from("out"),
            jobs: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.n.is_empty() {
            bail!("n: ladder is empty");
        }
        if self.n.iter().any(|&n| n < 4) {
            bail!("n: every entry must be at least 4");
        }
        if self.n.windows(2).any(|w| w[1] <= w[0]) {
            bail!("n: ladder must be strictly increasing");
        }
        if self.window < 0 {
            bail!("window: must be non-negative");
        }
        if !(self.epsilon1 > 0.0 && self.epsilon1 < 1.0) {
            bail!("epsilon1: must lie in (0, 1)");
        }
        let limit = self.epsilon1 * self.n[0] as f64;
        if self.window as f64 > limit {
            bail!("window: {} exceeds epsilon1 * min(n) = {limit}", self.window);
        }
        if let Some(p) = self.precision {
            if p < 53 {
                bail!("precision: must be at least 53 bits");
            }
            if p > self.max_precision {
                bail!("precision: exceeds max_precision {}", self.max_precision);
            }
        }
        if let Some(k) = self.kmax {
            let need = self.n[self.n.len() - 1] + self.window as usize + 1;
            if k < need {
                bail!("kmax: {k} is below the required {need}");
            }
        }
        if let Some(t) = self.theta {
            if !(t > 0.0 && t < std::f64::consts::PI) {
                bail!("theta: must lie in (0, pi)");
            }
        }
        if self.gamma_max < 5 {
            bail!("gamma_max: must be at least 5");
        }
        if self.symbol_points < 4 || self.density_points < 2 {
            bail!("symbol_points/density_points: too few samples");
        }
        if self.jobs == Some(0) {
            bail!("jobs: must be positive");
        }
        for (name, value) in &self.tolerances {
            if !DEFAULT_TOLERANCES.iter().any(|(k, _)| k == name) {
                bail!("tolerances.{name}: unknown tolerance");
            }
            if !(value.is_finite() && *value > 0.0) {
                bail!("tolerances.{name}: must be positive and finite");
            }
        }
        Ok(())
    }

    pub fn tolerance(&self, name: &str) -> f64 {
        self.tolerances.get(name).copied().unwrap_or_else(|| {
            DEFAULT_TOLERANCES
                .iter()
                .find(|(k, _)| *k == name)
                .unwrap_or_else(|| panic!("unknown tolerance {name}"))
                .1
        })
    }

    pub fn kmax_for(&self, n: usize) -> usize {
        self.kmax
            .unwrap_or(n + (self.window as usize).max(self.string_window) + 3)
    }

    pub fn precision_for(&self, n: usize) -> u32 {
        self.precision.unwrap_or_else(|| default_precision(n).min(self.max_precision))
    }

    pub fn offsets(&self) -> Vec<i64> {
        (-self.window..=self.window).collect()
    }
}

/// Parses `20,40,80`.
pub fn parse_ladder(s: &str) -> anyhow::Result<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().with_context(|| format!("n: bad entry {t:?}")))
        .collect()
}
