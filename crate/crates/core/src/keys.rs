//! Two-threshold quantization and key agreement metrics.

use thiserror::Error;

use crate::stats::{mean, variance};

#[derive(Debug, Error, PartialEq)]
pub enum KeyError {
    #[error("need at least {need} features, got {got}")]
    TooFewFeatures { need: usize, got: usize },
    #[error("streams cover different index ranges ({0} vs {1})")]
    RangeMismatch(usize, usize),
    #[error("no aligned bits to compare")]
    EmptyAlignment,
    #[error("invalid quantizer config: {0}")]
    InvalidConfig(String),
}

/// Spread measure multiplying the guard-band scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpreadMode {
    /// Variance of the features (literal reading of the threshold formula).
    #[default]
    Variance,
    StdDev,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerConfig {
    pub gamma: f64,
    pub spread_mode: SpreadMode,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        Self { gamma: 0.1, spread_mode: SpreadMode::Variance }
    }
}

/// Quantized bits of one party plus which feature indices survived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyStream {
    pub bits: Vec<u8>,
    pub retained: Vec<bool>,
}

impl KeyStream {
    /// Bit at feature index `i`, if retained.
    fn bits_by_index(&self) -> Vec<Option<u8>> {
        let mut it = self.bits.iter();
        self.retained.iter().map(|&keep| if keep { it.next().copied() } else { None }).collect()
    }
}

/// Thresholds mean +/- gamma * spread. Features at or above the upper threshold
/// give 1, at or below the lower give 0, anything strictly between is dropped.
/// With gamma = 0 both thresholds coincide and a tie at the mean gives 1.
pub fn quantize(features: &[f64], cfg: &QuantizerConfig) -> Result<KeyStream, KeyError> {
    if features.len() < 2 {
        return Err(KeyError::TooFewFeatures { need: 2, got: features.len() });
    }
    if !(cfg.gamma >= 0.0) || !cfg.gamma.is_finite() {
        return Err(KeyError::InvalidConfig(format!("gamma {} must be non-negative", cfg.gamma)));
    }
    let mu = mean(features);
    let var = variance(features);
    let spread = match cfg.spread_mode {
        SpreadMode::Variance => var,
        SpreadMode::StdDev => var.sqrt(),
    };
    let upper = mu + cfg.gamma * spread;
    let lower = mu - cfg.gamma * spread;
    let mut bits = Vec::with_capacity(features.len());
    let mut retained = Vec::with_capacity(features.len());
    for &f in features {
        if f >= upper {
            bits.push(1);
            retained.push(true);
        } else if f <= lower {
            bits.push(0);
            retained.push(true);
        } else {
            retained.push(false);
        }
    }
    Ok(KeyStream { bits, retained })
}

/// Bits at indices retained by both parties (public index intersection).
pub fn align_streams(a: &KeyStream, b: &KeyStream) -> Result<(Vec<u8>, Vec<u8>), KeyError> {
    if a.retained.len() != b.retained.len() {
        return Err(KeyError::RangeMismatch(a.retained.len(), b.retained.len()));
    }
    let (ba, bb) = (a.bits_by_index(), b.bits_by_index());
    Ok(ba.into_iter().zip(bb).filter_map(|(x, y)| Some((x?, y?))).unzip())
}

/// Bits at indices retained by all three parties.
pub fn align_three(a: &KeyStream, b: &KeyStream, e: &KeyStream) -> Result<Vec<(u8, u8, u8)>, KeyError> {
    let n = a.retained.len();
    for other in [b, e] {
        if other.retained.len() != n {
            return Err(KeyError::RangeMismatch(n, other.retained.len()));
        }
    }
    let (ba, bb, be) = (a.bits_by_index(), b.bits_by_index(), e.bits_by_index());
    Ok((0..n).filter_map(|i| Some((ba[i]?, bb[i]?, be[i]?))).collect())
}

pub fn key_agreement_rate(a: &[u8], b: &[u8]) -> Result<f64, KeyError> {
    if a.len() != b.len() {
        return Err(KeyError::RangeMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(KeyError::EmptyAlignment);
    }
    let hits = a.iter().zip(b).filter(|(x, y)| x == y).count();
    Ok(hits as f64 / a.len() as f64)
}

/// Pr{k_A = k_B != k_E} over positions retained by all three parties.
pub fn available_key_rate(a: &KeyStream, b: &KeyStream, e: &KeyStream) -> Result<f64, KeyError> {
    let triples = align_three(a, b, e)?;
    if triples.is_empty() {
        return Err(KeyError::EmptyAlignment);
    }
    let good = triples.iter().filter(|(x, y, z)| x == y && x != z).count();
    Ok(good as f64 / triples.len() as f64)
}

/// Quantize three feature streams and report (kar_ab, kar_ae, kar_be, akr).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyMetrics {
    pub kar_ab: f64,
    pub kar_ae: f64,
    pub kar_be: f64,
    pub akr: f64,
}

pub fn key_metrics(fa: &[f64], fb: &[f64], fe: &[f64], cfg: &QuantizerConfig) -> Result<KeyMetrics, KeyError> {
    let (ka, kb, ke) = (quantize(fa, cfg)?, quantize(fb, cfg)?, quantize(fe, cfg)?);
    let (ab_a, ab_b) = align_streams(&ka, &kb)?;
    let (ae_a, ae_e) = align_streams(&ka, &ke)?;
    let (be_b, be_e) = align_streams(&kb, &ke)?;
    Ok(KeyMetrics {
        kar_ab: key_agreement_rate(&ab_a, &ab_b)?,
        kar_ae: key_agreement_rate(&ae_a, &ae_e)?,
        kar_be: key_agreement_rate(&be_b, &be_e)?,
        akr: available_key_rate(&ka, &kb, &ke)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn akr_can_exceed_pairwise_kar_on_a_different_alignment() {
        let cfg = QuantizerConfig { gamma: 0.41, spread_mode: SpreadMode::Variance };
        let (a, b, e) = (
            quantize(&[-0.599, 0.0, 0.554, -0.319], &cfg).unwrap(),
            quantize(&[-0.443, 0.0, 0.0, 0.0], &cfg).unwrap(),
            quantize(&[0.643, 0.0, 0.0, 0.213], &cfg).unwrap(),
        );
        let (pa, pb) = align_streams(&a, &b).unwrap();
        let akr = available_key_rate(&a, &b, &e).unwrap();
        assert!(akr > key_agreement_rate(&pa, &pb).unwrap());
        let t = align_three(&a, &b, &e).unwrap();
        let (ta, tb): (Vec<u8>, Vec<u8>) = t.iter().map(|x| (x.0, x.1)).unzip();
        assert!(akr <= key_agreement_rate(&ta, &tb).unwrap());
    }

    #[test]
    fn alternating_features() {
        let f: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let k = quantize(&f, &QuantizerConfig::default()).unwrap();
        assert_eq!(k.bits, vec![0, 1, 0, 1, 0, 1, 0, 1]);
        assert!(k.retained.iter().all(|&r| r));
    }

    #[test]
    fn guard_band_by_mode() {
        let f = [0.95, -0.95, 0.01];
        let mu: f64 = 0.01 / 3.0;
        let var = ((0.95 - mu).powi(2) + (-0.95 - mu).powi(2) + (0.01 - mu).powi(2)) / 3.0;
        // Variance mode: band mu +/- 0.1*var ~ [-0.057, 0.064]; 0.01 dropped.
        let kv = quantize(&f, &QuantizerConfig::default()).unwrap();
        assert_eq!(kv.retained, vec![true, true, false]);
        assert_eq!(kv.bits, vec![1, 0]);
        assert!(0.01 < mu + 0.1 * var && 0.01 > mu - 0.1 * var);
        // Std mode: band mu +/- 0.1*sd ~ [-0.074, 0.081]; 0.01 dropped too.
        let ks = quantize(&f, &QuantizerConfig { gamma: 0.1, spread_mode: SpreadMode::StdDev }).unwrap();
        assert_eq!(ks.retained, vec![true, true, false]);
    }

    #[test]
    fn zero_gamma_keeps_everything_and_ties_go_up() {
        let f = [-1.0, 0.0, 1.0];
        let k = quantize(&f, &QuantizerConfig { gamma: 0.0, ..Default::default() }).unwrap();
        assert_eq!(k.bits, vec![0, 1, 1]);
    }

    #[test]
    fn too_few_features() {
        assert!(quantize(&[1.0], &QuantizerConfig::default()).is_err());
    }

    #[test]
    fn alignment_cases() {
        let a = KeyStream { bits: vec![1, 0], retained: vec![true, false, true] };
        let b = KeyStream { bits: vec![0, 1], retained: vec![true, true, false] };
        assert_eq!(align_streams(&a, &b).unwrap(), (vec![1], vec![0]));
        let c = KeyStream { bits: vec![1], retained: vec![false, true, false] };
        let d = KeyStream { bits: vec![1], retained: vec![true, false, false] };
        assert_eq!(align_streams(&c, &d).unwrap(), (vec![], vec![]));
        assert_eq!(align_streams(&a, &a).unwrap(), (vec![1, 0], vec![1, 0]));
        let short = KeyStream { bits: vec![], retained: vec![false] };
        assert!(align_streams(&a, &short).is_err());
    }

    #[test]
    fn agreement_extremes() {
        let a = vec![0, 1, 1, 0];
        let comp: Vec<u8> = a.iter().map(|b| 1 - b).collect();
        assert_eq!(key_agreement_rate(&a, &a).unwrap(), 1.0);
        assert_eq!(key_agreement_rate(&a, &comp).unwrap(), 0.0);
        assert_eq!(key_agreement_rate(&[], &[]), Err(KeyError::EmptyAlignment));
    }

    #[test]
    fn akr_all_equal_is_zero() {
        let k = KeyStream { bits: vec![0, 1, 1], retained: vec![true; 3] };
        assert_eq!(available_key_rate(&k, &k, &k).unwrap(), 0.0);
    }
}
