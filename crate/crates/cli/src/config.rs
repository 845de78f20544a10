//! Experiment configuration: a preset (`desk` or `paper`) overridden by a
//! TOML-style file of `key = value` pairs grouped in sections.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use ris_skg_core::chansim::{db_to_linear, linear_to_db, DatasetConfig, GridSpec, SystemParams};
use ris_skg_core::keys::{QuantizerConfig, SpreadMode};
use ris_skg_core::neural::{AdversaryInput, EveConfig, LossKind, TrainConfig};
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Paper,
}

impl Scale {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            _ => bail!("unknown scale {s:?} (expected desk or paper)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Csi,
    CrossMult,
    Nn,
    Poly,
}

impl SchemeKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csi" => Ok(SchemeKind::Csi),
            "crossmult" => Ok(SchemeKind::CrossMult),
            "nn" => Ok(SchemeKind::Nn),
            "poly" => Ok(SchemeKind::Poly),
            _ => bail!("unknown scheme {s:?} (expected csi, crossmult, nn or poly)"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Csi => "csi",
            SchemeKind::CrossMult => "crossmult",
            SchemeKind::Nn => "nn",
            SchemeKind::Poly => "poly",
        }
    }

    /// Whether the scheme needs trained generator networks.
    pub fn needs_training(self) -> bool {
        matches!(self, SchemeKind::Nn | SchemeKind::Poly)
    }
}

/// Training-set geometry and evaluation sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub n: usize,
    pub dist_range: (f64, f64),
    pub angle_splits: usize,
    pub dist_splits: usize,
    /// Rounds per noise level in evaluation sweeps.
    pub eval_n: usize,
    /// Rounds in Eve's supervised set.
    pub eve_n: usize,
}

impl DataConfig {
    pub fn training(&self) -> DatasetConfig {
        DatasetConfig::grid(
            self.n,
            GridSpec { angle_splits: self.angle_splits, dist_splits: self.dist_splits, dist_range: self.dist_range },
        )
    }

    pub fn evaluation(&self) -> DatasetConfig {
        DatasetConfig { train_frac: 0.0, val_frac: 0.0, ..DatasetConfig::uniform(self.eval_n, self.dist_range) }
    }

    pub fn eve(&self) -> DatasetConfig {
        DatasetConfig::uniform(self.eve_n, self.dist_range)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub sigma2_dbw: (f64, f64),
    pub sigma2_steps: usize,
    pub lambdas: Vec<f64>,
    /// Also train the MSE-loss variant and its correlation-loss control.
    pub mse_ablation: bool,
}

impl SweepConfig {
    pub fn sigma2_points(&self) -> Vec<f64> {
        linspace(self.sigma2_dbw.0, self.sigma2_dbw.1, self.sigma2_steps)
    }
}

pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scale: Scale,
    pub params: SystemParams,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub eve: EveConfig,
    pub eve_enabled: bool,
    pub quant: QuantizerConfig,
    pub sweep: SweepConfig,
    pub schemes: Vec<SchemeKind>,
    pub seeds: Vec<u64>,
    /// Alice-RIS distance for the SKR analysis.
    pub skr_d_ar: f64,
    /// Alice-Bob distance for the sufficient positivity condition.
    pub skr_d_ab: f64,
}

impl ExperimentConfig {
    pub fn preset(scale: Scale) -> Self {
        let sweep = SweepConfig {
            sigma2_dbw: (-130.0, -90.0),
            sigma2_steps: 9,
            lambdas: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            mse_ablation: false,
        };
        match scale {
            Scale::Desk => Self {
                scale,
                params: SystemParams::desk(),
                data: DataConfig {
                    n: 100_000,
                    dist_range: (1.0, 25.0),
                    angle_splits: 100,
                    dist_splits: 1000,
                    eval_n: 5000,
                    eve_n: 100_000,
                },
                train: TrainConfig::desk(0),
                eve: EveConfig::desk(0),
                eve_enabled: true,
                quant: QuantizerConfig::default(),
                sweep,
                schemes: vec![SchemeKind::Nn],
                seeds: vec![0],
                skr_d_ar: 5.0,
                skr_d_ab: 10.0,
            },
            Scale::Paper => Self {
                scale,
                params: SystemParams::paper(),
                data: DataConfig {
                    n: 10_000_000,
                    dist_range: (1.0, 200.0),
                    angle_splits: 100,
                    dist_splits: 1000,
                    eval_n: 100_000,
                    eve_n: 10_000_000,
                },
                train: TrainConfig::default(),
                eve: EveConfig { max_epochs: 1_500_000, ..EveConfig::default() },
                eve_enabled: true,
                quant: QuantizerConfig::default(),
                sweep,
                schemes: vec![SchemeKind::Nn],
                seeds: vec![0],
                skr_d_ar: 5.0,
                skr_d_ab: 10.0,
            },
        }
    }

    pub fn load(path: Option<&Path>, scale: Scale) -> Result<Self> {
        let mut cfg = Self::preset(scale);
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            cfg.apply_text(&text).with_context(|| format!("in config {}", p.display()))?;
        }
        Ok(cfg)
    }

    /// Applies overrides from `text`; unknown keys are errors.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let table: Table = text.parse().map_err(|e| anyhow!("parse error: {e}"))?;
        for (section, body) in &table {
            let Value::Table(body) = body else { bail!("top-level key {section:?} must be a section") };
            for (key, v) in body {
                self.set(section, key, v).with_context(|| format!("{section}.{key}"))?;
            }
        }
        self.validate()
    }

    fn set(&mut self, section: &str, key: &str, v: &Value) -> Result<()> {
        let p = &mut self.params;
        let t = &mut self.train;
        match (section, key) {
            ("params", "c0") => p.c0 = num(v)?,
            ("params", "c0_db") => p.c0 = db_to_linear(num(v)?),
            ("params", "alpha") => p.alpha = num(v)?,
            ("params", "num_paths") => p.num_paths = count(v)?,
            ("params", "pt") => p.pt = num(v)?,
            ("params", "sigma2") => p.sigma2 = num(v)?,
            ("params", "sigma2_db") | ("params", "sigma2_dbw") => p.sigma2 = db_to_linear(num(v)?),
            ("params", "amp_ae") => p.amp_ae = num(v)?,
            ("params", "amp_ae_db") => p.amp_ae = db_to_linear(num(v)?),
            ("params", "mx") => p.mx = count(v)?,
            ("params", "my") => p.my = count(v)?,
            ("params", "elem_spacing") => p.elem_spacing = num(v)?,
            ("params", "wavelength") => p.wavelength = num(v)?,

            ("data", "n") => self.data.n = count(v)?,
            ("data", "dist_min") => self.data.dist_range.0 = num(v)?,
            ("data", "dist_max") => self.data.dist_range.1 = num(v)?,
            ("data", "angle_splits") => self.data.angle_splits = count(v)?,
            ("data", "dist_splits") => self.data.dist_splits = count(v)?,
            ("data", "eval_n") => self.data.eval_n = count(v)?,
            ("data", "eve_n") => self.data.eve_n = count(v)?,

            ("train", "learning_rate") => t.learning_rate = num(v)?,
            ("train", "adversary_learning_rate") => t.adversary_learning_rate = Some(num(v)?),
            ("train", "batch_size") => t.batch_size = count(v)?,
            ("train", "max_epochs") => t.max_epochs = count(v)?,
            ("train", "lambda") => t.lambda = num(v)?,
            ("train", "loss") => t.loss_kind = LossKind::parse(string(v)?)?,
            ("train", "generator_hidden") => t.generator_hidden = counts(v)?,
            ("train", "adversary_hidden") => t.adversary_hidden = counts(v)?,
            ("train", "adversary_input") => t.adversary_input = adversary_input(string(v)?)?,
            ("train", "eval_every") => t.eval_every = count(v)?,
            ("train", "select_window") => t.select_window = num(v)?,
            ("train", "adversary_reset_every") => {
                let k = count(v)?;
                t.adversary_reset_every = (k > 0).then_some(k);
            }

            ("eve", "enabled") => self.eve_enabled = v.as_bool().ok_or_else(|| anyhow!("expected a boolean"))?,
            ("eve", "learning_rate") => self.eve.learning_rate = num(v)?,
            ("eve", "batch_size") => self.eve.batch_size = count(v)?,
            ("eve", "max_epochs") => self.eve.max_epochs = count(v)?,
            ("eve", "hidden") => self.eve.hidden = counts(v)?,
            ("eve", "eval_every") => self.eve.eval_every = count(v)?,

            ("quant", "gamma") => self.quant.gamma = num(v)?,
            ("quant", "spread") => {
                self.quant.spread_mode = match string(v)? {
                    "variance" => SpreadMode::Variance,
                    "stddev" => SpreadMode::StdDev,
                    s => bail!("unknown spread {s:?}"),
                }
            }

            ("sweep", "sigma2_dbw_min") => self.sweep.sigma2_dbw.0 = num(v)?,
            ("sweep", "sigma2_dbw_max") => self.sweep.sigma2_dbw.1 = num(v)?,
            ("sweep", "sigma2_steps") => self.sweep.sigma2_steps = count(v)?,
            ("sweep", "lambdas") => self.sweep.lambdas = nums(v)?,
            ("sweep", "mse_ablation") => {
                self.sweep.mse_ablation = v.as_bool().ok_or_else(|| anyhow!("expected a boolean"))?
            }

            ("run", "schemes") => {
                self.schemes = list(v)?.iter().map(|s| SchemeKind::parse(string(s)?)).collect::<Result<_>>()?
            }
            ("run", "seeds") => self.seeds = counts(v)?.into_iter().map(|s| s as u64).collect(),

            ("skr", "d_ar") => self.skr_d_ar = num(v)?,
            ("skr", "d_ab") => self.skr_d_ab = num(v)?,
            _ => bail!("unknown key"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate().map_err(|e| anyhow!("params: {e}"))?;
        self.train.validate().map_err(|e| anyhow!("train: {e}"))?;
        let (lo, hi) = self.data.dist_range;
        if !(lo >= 1.0 && hi >= lo) {
            bail!("data distance range must satisfy 1 <= min <= max");
        }
        if self.data.n == 0 || self.data.eval_n < 2 {
            bail!("data.n must be positive and data.eval_n at least 2");
        }
        if self.sweep.sigma2_steps == 0 || self.sweep.lambdas.is_empty() {
            bail!("sweep ranges must be non-empty");
        }
        if self.schemes.is_empty() || self.seeds.is_empty() {
            bail!("run.schemes and run.seeds must be non-empty");
        }
        Ok(())
    }

    /// Training config for one seed.
    pub fn train_for(&self, seed: u64) -> TrainConfig {
        TrainConfig { seed, ..self.train.clone() }
    }

    pub fn eve_for(&self, seed: u64) -> EveConfig {
        EveConfig { seed, input: self.train.adversary_input, ..self.eve.clone() }
    }

    /// Canonical text of every resolved setting; the manifest hashes this.
    pub fn snapshot(&self) -> String {
        let p = &self.params;
        let t = &self.train;
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("scale", format!("{:?}", self.scale).to_lowercase());
        line("params.c0_db", format!("{}", linear_to_db(p.c0)));
        line("params.alpha", format!("{}", p.alpha));
        line("params.num_paths", format!("{}", p.num_paths));
        line("params.pt", format!("{}", p.pt));
        line("params.sigma2", format!("{:e}", p.sigma2));
        line("params.amp_ae", format!("{}", p.amp_ae));
        line("params.array", format!("{}x{}", p.mx, p.my));
        line("params.elem_spacing", format!("{}", p.elem_spacing));
        line("params.wavelength", format!("{}", p.wavelength));
        line("data.n", format!("{}", self.data.n));
        line("data.dist_range", format!("{:?}", self.data.dist_range));
        line("data.grid", format!("{}x{}", self.data.angle_splits, self.data.dist_splits));
        line("data.eval_n", format!("{}", self.data.eval_n));
        line("data.eve_n", format!("{}", self.data.eve_n));
        line("train.learning_rate", format!("{}", t.learning_rate));
        line("train.adversary_learning_rate", format!("{:?}", t.adversary_learning_rate));
        line("train.batch_size", format!("{}", t.batch_size));
        line("train.max_epochs", format!("{}", t.max_epochs));
        line("train.lambda", format!("{}", t.lambda));
        line("train.loss", t.loss_kind.name().to_string());
        line("train.generator_hidden", format!("{:?}", t.generator_hidden));
        line("train.adversary_hidden", format!("{:?}", t.adversary_hidden));
        line("train.adversary_input", t.adversary_input.name().to_string());
        line("train.eval_every", format!("{}", t.eval_every));
        line("train.select_window", format!("{}", t.select_window));
        line("train.adversary_reset_every", format!("{:?}", t.adversary_reset_every));
        line("eve.enabled", format!("{}", self.eve_enabled));
        line("eve.learning_rate", format!("{}", self.eve.learning_rate));
        line("eve.batch_size", format!("{}", self.eve.batch_size));
        line("eve.max_epochs", format!("{}", self.eve.max_epochs));
        line("eve.hidden", format!("{:?}", self.eve.hidden));
        line("eve.eval_every", format!("{}", self.eve.eval_every));
        line("quant.gamma", format!("{}", self.quant.gamma));
        line("quant.spread", format!("{:?}", self.quant.spread_mode).to_lowercase());
        line("sweep.sigma2_dbw", format!("{:?}", self.sweep.sigma2_dbw));
        line("sweep.sigma2_steps", format!("{}", self.sweep.sigma2_steps));
        line("sweep.lambdas", format!("{:?}", self.sweep.lambdas));
        line("sweep.mse_ablation", format!("{}", self.sweep.mse_ablation));
        line("run.schemes", format!("{:?}", self.schemes.iter().map(|s| s.name()).collect::<Vec<_>>()));
        line("run.seeds", format!("{:?}", self.seeds));
        line("skr.d_ar", format!("{}", self.skr_d_ar));
        line("skr.d_ab", format!("{}", self.skr_d_ab));
        s
    }
}

fn adversary_input(s: &str) -> Result<AdversaryInput> {
    [AdversaryInput::Reflection, AdversaryInput::Raw]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| anyhow!("unknown adversary input {s:?}"))
}

fn num(v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => bail!("expected a number"),
    }
}

fn count(v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => bail!("expected a non-negative integer"),
    }
}

fn string(v: &Value) -> Result<&str> {
    v.as_str().ok_or_else(|| anyhow!("expected a string"))
}

fn list(v: &Value) -> Result<&Vec<Value>> {
    v.as_array().ok_or_else(|| anyhow!("expected an array"))
}

fn nums(v: &Value) -> Result<Vec<f64>> {
    list(v)?.iter().map(num).collect()
}

fn counts(v: &Value) -> Result<Vec<usize>> {
    list(v)?.iter().map(count).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_apply() {
        let mut c = ExperimentConfig::preset(Scale::Desk);
        c.apply_text(
            "[params]\nsigma2_dbw = -100\nmx = 2\nmy = 2\n[train]\nlambda = 0.2\ngenerator_hidden = [8, 4]\n\
             [run]\nschemes = [\"crossmult\", \"nn\"]\nseeds = [3, 4]\n",
        )
        .unwrap();
        assert!((c.params.sigma2 - 1e-10).abs() < 1e-22);
        assert_eq!(c.params.m(), 4);
        assert_eq!(c.train.lambda, 0.2);
        assert_eq!(c.train.generator_hidden, vec![8, 4]);
        assert_eq!(c.schemes, vec![SchemeKind::CrossMult, SchemeKind::Nn]);
        assert_eq!(c.seeds, vec![3, 4]);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let mut c = ExperimentConfig::preset(Scale::Desk);
        let err = c.apply_text("[train]\nlamda = 0.5\n").unwrap_err();
        assert!(format!("{err:#}").contains("train.lamda"));
    }

    #[test]
    fn empty_sweep_is_rejected() {
        let mut c = ExperimentConfig::preset(Scale::Desk);
        assert!(c.apply_text("[sweep]\nlambdas = []\n").is_err());
    }

    #[test]
    fn snapshot_tracks_changes() {
        let a = ExperimentConfig::preset(Scale::Desk);
        let mut b = a.clone();
        b.apply_text("[quant]\ngamma = 0.2\n").unwrap();
        assert_ne!(a.snapshot(), b.snapshot());
        assert_eq!(a.snapshot(), a.clone().snapshot());
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(-115.0, -90.0, 6), vec![-115.0, -110.0, -105.0, -100.0, -95.0, -90.0]);
        assert_eq!(linspace(1.0, 2.0, 1), vec![1.0]);
    }
}
