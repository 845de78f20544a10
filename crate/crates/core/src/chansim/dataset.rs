use std::f64::consts::FRAC_PI_2;
use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;

use super::{
    sample_direct_channel, sample_probe_round_with, sample_ris_phase, ChanError, LinkGeometry,
    ProbeRound, ProbeSignals, Result, SystemParams,
};
use crate::rng::seeded;

/// Rounds per seeded partition. Fixed so output does not depend on thread count.
const PARTITION: usize = 1024;

/// Even grid over the angle half-space and the distance range.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub angle_splits: usize,
    pub dist_splits: usize,
    pub dist_range: (f64, f64),
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { angle_splits: 100, dist_splits: 1000, dist_range: (1.0, 200.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeometrySampler {
    /// Draw grid points uniformly (training data).
    Grid(GridSpec),
    /// Continuous uniform angles and distances (evaluation data).
    Uniform { dist_range: (f64, f64) },
}

impl GeometrySampler {
    fn dist_range(&self) -> (f64, f64) {
        match self {
            Self::Grid(g) => g.dist_range,
            Self::Uniform { dist_range } => *dist_range,
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.dist_range();
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo > 0.0) {
            return Err(ChanError::InvalidParam(format!("bad distance range [{lo}, {hi}]")));
        }
        if let Self::Grid(g) = self {
            if g.angle_splits == 0 || g.dist_splits == 0 {
                return Err(ChanError::InvalidParam("grid splits must be positive".into()));
            }
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, num_paths: usize, rng: &mut R) -> Result<LinkGeometry> {
        let (lo, hi) = self.dist_range();
        match self {
            Self::Grid(g) => {
                let dist = grid_point(lo, hi, g.dist_splits, rng.gen_range(0..g.dist_splits));
                let mut angle = || {
                    grid_point(-FRAC_PI_2, FRAC_PI_2, g.angle_splits, rng.gen_range(0..g.angle_splits))
                        .clamp(-FRAC_PI_2, FRAC_PI_2)
                };
                let angles = (0..num_paths).map(|_| (angle(), angle())).collect();
                LinkGeometry::new(dist, angles)
            }
            Self::Uniform { .. } => {
                let dist = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
                let mut angle = || rng.gen_range(-FRAC_PI_2..=FRAC_PI_2);
                let angles = (0..num_paths).map(|_| (angle(), angle())).collect();
                LinkGeometry::new(dist, angles)
            }
        }
    }
}

fn grid_point(lo: f64, hi: f64, splits: usize, k: usize) -> f64 {
    if splits == 1 {
        return 0.5 * (lo + hi);
    }
    lo + (hi - lo) * k as f64 / (splits - 1) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub n: usize,
    pub sampler: GeometrySampler,
    pub signals: ProbeSignals,
    pub train_frac: f64,
    pub val_frac: f64,
}

impl DatasetConfig {
    pub fn grid(n: usize, grid: GridSpec) -> Self {
        Self { n, sampler: GeometrySampler::Grid(grid), signals: ProbeSignals::Random, train_frac: 0.7, val_frac: 0.2 }
    }

    pub fn uniform(n: usize, dist_range: (f64, f64)) -> Self {
        Self {
            n,
            sampler: GeometrySampler::Uniform { dist_range },
            signals: ProbeSignals::Random,
            train_frac: 0.7,
            val_frac: 0.2,
        }
    }

    pub fn with_signals(mut self, signals: ProbeSignals) -> Self {
        self.signals = signals;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Ordered probing rounds; the first `n_train` are training, the next `n_val`
/// validation, the rest test.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub params: SystemParams,
    pub rounds: Vec<ProbeRound>,
    n_train: usize,
    n_val: usize,
}

impl Dataset {
    pub fn new(params: SystemParams, rounds: Vec<ProbeRound>, n_train: usize, n_val: usize) -> Result<Self> {
        if n_train + n_val > rounds.len() {
            return Err(ChanError::InvalidParam(format!(
                "split sizes {n_train}+{n_val} exceed {} rounds",
                rounds.len()
            )));
        }
        let m = params.m();
        for r in &rounds {
            for len in [r.y_r_a.len(), r.y_r_b.len(), r.w.len()] {
                if len != m {
                    return Err(ChanError::LengthMismatch { expected: m, got: len });
                }
            }
        }
        Ok(Self { params, rounds, n_train, n_val })
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn split_range(&self, split: Split) -> Range<usize> {
        match split {
            Split::Train => 0..self.n_train,
            Split::Validation => self.n_train..self.n_train + self.n_val,
            Split::Test => self.n_train + self.n_val..self.rounds.len(),
        }
    }

    pub fn split(&self, split: Split) -> &[ProbeRound] {
        &self.rounds[self.split_range(split)]
    }

    /// (train, validation, test) counts.
    pub fn split_counts(&self) -> (usize, usize, usize) {
        (self.n_train, self.n_val, self.rounds.len() - self.n_train - self.n_val)
    }
}

/// Draws `cfg.n` rounds, each with fresh Alice/Bob geometries, channels and RIS
/// phases. Partitions of 1024 rounds use stream `partition_id` of `seed`.
pub fn generate_dataset(params: &SystemParams, cfg: &DatasetConfig, seed: u64) -> Result<Dataset> {
    params.validate()?;
    cfg.sampler.validate()?;
    if cfg.n == 0 {
        return Err(ChanError::InvalidParam("dataset needs at least one round".into()));
    }
    if !(cfg.train_frac >= 0.0 && cfg.val_frac >= 0.0 && cfg.train_frac + cfg.val_frac <= 1.0) {
        return Err(ChanError::InvalidParam("split fractions must be in [0,1] and sum to at most 1".into()));
    }
    let parts = cfg.n.div_ceil(PARTITION);
    let chunks: Vec<Result<Vec<ProbeRound>>> = (0..parts)
        .into_par_iter()
        .map(|pid| {
            let mut rng = seeded(seed, pid as u64);
            let count = PARTITION.min(cfg.n - pid * PARTITION);
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                let geo_a = cfg.sampler.sample(params.num_paths, &mut rng)?;
                let geo_b = cfg.sampler.sample(params.num_paths, &mut rng)?;
                let g_ar = sample_direct_channel(params, &geo_a, &mut rng)?;
                let g_br = sample_direct_channel(params, &geo_b, &mut rng)?;
                let w = sample_ris_phase(params, &mut rng);
                out.push(sample_probe_round_with(&g_ar, &g_br, &w, params, cfg.signals, &mut rng)?);
            }
            Ok(out)
        })
        .collect();
    let mut rounds = Vec::with_capacity(cfg.n);
    for c in chunks {
        rounds.extend(c?);
    }
    let n_train = (cfg.train_frac * cfg.n as f64).round() as usize;
    let n_val = ((cfg.val_frac * cfg.n as f64).round() as usize).min(cfg.n - n_train);
    Dataset::new(params.clone(), rounds, n_train, n_val)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SystemParams {
        SystemParams::desk().with_array(2, 2)
    }

    #[test]
    fn deterministic_and_split() {
        let cfg = DatasetConfig::grid(10, GridSpec::default());
        let a = generate_dataset(&small(), &cfg, 5).unwrap();
        let b = generate_dataset(&small(), &cfg, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.split_counts(), (7, 2, 1));
        assert_eq!(a.split(Split::Validation).len(), 2);
        let c = generate_dataset(&small(), &cfg, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn grid_points_cover_ends() {
        assert_eq!(grid_point(1.0, 200.0, 1000, 0), 1.0);
        assert_eq!(grid_point(1.0, 200.0, 1000, 999), 200.0);
        assert!(grid_point(-FRAC_PI_2, FRAC_PI_2, 100, 99) <= FRAC_PI_2 + 1e-15);
        assert!((grid_point(-FRAC_PI_2, FRAC_PI_2, 100, 99) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn grid_geometry_within_bounds() {
        let s = GeometrySampler::Grid(GridSpec::default());
        let mut rng = seeded(1, 0);
        for _ in 0..500 {
            let g = s.sample(10, &mut rng).unwrap();
            assert!((1.0..=200.0).contains(&g.dist()));
            for &(e, a) in g.angles() {
                assert!(e.abs() <= FRAC_PI_2 && a.abs() <= FRAC_PI_2);
            }
        }
    }

    #[test]
    fn spans_multiple_partitions() {
        let cfg = DatasetConfig::uniform(PARTITION + 5, (1.0, 25.0));
        let d = generate_dataset(&small(), &cfg, 1).unwrap();
        assert_eq!(d.len(), PARTITION + 5);
        assert_ne!(d.rounds[0], d.rounds[PARTITION]);
    }

    #[test]
    fn zero_rounds_rejected() {
        assert!(generate_dataset(&small(), &DatasetConfig::uniform(0, (1.0, 2.0)), 1).is_err());
    }
}
