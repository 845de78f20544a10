//! Experiment stages shared by the subcommands.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use ris_skg_core::attacks::{attack_correlations, scheme_triplet, Scheme};
use ris_skg_core::chansim::{generate_dataset, read_dataset, write_dataset, Dataset, ProbeRound, Split, SystemParams};
use ris_skg_core::featgen::{distill_network, term_frequency, DistillConfig, PolyScheme, TermCategory, TermLibrary};
use ris_skg_core::keys::key_metrics;
use ris_skg_core::neural::{
    alice_inputs, eve_features, evaluate, mse, train_adversarial, train_eve, FeatureNets, FeatureScheme, LossKind, Mlp,
    NeuralScheme,
};
use ris_skg_core::rng::derive_seed;
use ris_skg_core::skr::{estimate_sigma_g2, positivity_condition, skr_gap, upa_covariance, CovarianceModel};
use ris_skg_core::stats::pearson;
use ris_skg_core::C64;

use crate::config::{linspace, ExperimentConfig, SchemeKind};
use crate::manifest::{fmt, read_csv, RunManifest};

/// Seed of the training dataset for a run seed.
pub fn data_seed(seed: u64) -> u64 {
    derive_seed(seed, "train-data")
}

fn eval_seed(seed: u64) -> u64 {
    derive_seed(seed, "eval")
}

pub fn training_dataset(cfg: &ExperimentConfig, seed: u64) -> Result<Dataset> {
    Ok(generate_dataset(&cfg.params, &cfg.data.training(), data_seed(seed))?)
}

/// Held-out rounds at noise `sigma2_dbw`. Every noise level reuses the same
/// geometry and noise draws, scaled.
pub fn evaluation_rounds(cfg: &ExperimentConfig, seed: u64, sigma2_dbw: f64) -> Result<(SystemParams, Vec<ProbeRound>)> {
    let params = cfg.params.clone().with_sigma2_dbw(sigma2_dbw);
    let ds = generate_dataset(&params, &cfg.data.evaluation(), eval_seed(seed))?;
    Ok((params, ds.rounds))
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_dataset(&mut BufReader::new(f))?)
}

fn dataset_for(cfg: &ExperimentConfig, seed: u64, data: Option<&Path>, m: &mut RunManifest) -> Result<Dataset> {
    match data {
        Some(p) => {
            m.add_input(p)?;
            let ds = load_dataset(p)?;
            if ds.params != cfg.params {
                bail!("dataset {} was generated with different system parameters", p.display());
            }
            Ok(ds)
        }
        None => training_dataset(cfg, seed),
    }
}

pub fn gen_data(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<RunManifest> {
    let mut m = RunManifest::new("gen-data", seed, cfg.snapshot());
    let ds = m.stage("generate", |_| training_dataset(cfg, seed))?;
    m.stage("write", |m| {
        if let Some(dir) = out.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let f = File::create(out).with_context(|| format!("creating {}", out.display()))?;
        write_dataset(&mut BufWriter::new(f), &ds)?;
        m.outputs.push(out.display().to_string());
        Ok(())
    })?;
    m.write(&sibling(out, "manifest.json"))?;
    Ok(m)
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{name}"))
}

fn write_text(m: &mut RunManifest, path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    m.outputs.push(path.display().to_string());
    Ok(())
}

fn read_mlp(path: &Path) -> Result<Mlp> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Mlp::from_text(&text)?)
}

pub fn save_nets(m: &mut RunManifest, nets: &FeatureNets, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_text(m, &dir.join("alice.mlp"), &nets.alice.to_text())?;
    write_text(m, &dir.join("bob.mlp"), &nets.bob.to_text())?;
    write_text(m, &dir.join("mallory.mlp"), &nets.mallory.to_text())
}

pub fn load_nets(dir: &Path, m: &mut RunManifest) -> Result<FeatureNets> {
    let mut get = |name: &str| {
        let p = dir.join(name);
        m.add_input(&p)?;
        read_mlp(&p)
    };
    Ok(FeatureNets { alice: get("alice.mlp")?, bob: get("bob.mlp")?, mallory: get("mallory.mlp")? })
}

/// Summary of one adversarial training run on held-out rounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSummary {
    pub lambda: f64,
    pub loss: LossKind,
    pub seed: u64,
    pub selected_epoch: usize,
    pub rho_ab: f64,
    pub rho_am: f64,
    pub rho_bm: f64,
    pub mse_ab: f64,
}

/// Trains one generator pair and scores it on the evaluation rounds at the
/// training noise level.
pub fn train_once(
    cfg: &ExperimentConfig,
    seed: u64,
    ds: &Dataset,
    m: &mut RunManifest,
    out_dir: &Path,
) -> Result<(FeatureNets, TrainSummary)> {
    let tc = cfg.train_for(seed);
    let outcome = m.stage("train", |_| Ok(train_adversarial(ds, &tc)?))?;
    std::fs::create_dir_all(out_dir)?;
    write_text(m, &out_dir.join("train_log.csv"), &outcome.log_csv())?;
    let mut v = m.csv(&out_dir.join("validation.csv"))?;
    v.row(["epoch", "rho_ab", "rho_am", "rho_bm", "mse_ab", "objective"])?;
    for r in &outcome.validation {
        v.row([r.epoch.to_string(), fmt(r.rho_ab), fmt(r.rho_am), fmt(r.rho_bm), fmt(r.mse_ab), fmt(r.objective)])?;
    }
    v.finish()?;
    save_nets(m, &outcome.selected, out_dir)?;

    let (params, rounds) = evaluation_rounds(cfg, seed, ris_skg_core::chansim::linear_to_db(cfg.params.sigma2))?;
    let refs: Vec<&ProbeRound> = rounds.iter().collect();
    let fb = outcome.selected.features(&refs, &params, tc.adversary_input)?;
    let c = evaluate(&outcome.selected, &rounds, &params, tc.adversary_input)?;
    let summary = TrainSummary {
        lambda: tc.lambda,
        loss: tc.loss_kind,
        seed,
        selected_epoch: outcome.selected_epoch,
        rho_ab: c.rho_ab,
        rho_am: c.rho_am,
        rho_bm: c.rho_bm,
        mse_ab: mse(&fb.f_a, &fb.f_b),
    };
    Ok((outcome.selected, summary))
}

const SUMMARY_HEADER: [&str; 8] = ["loss", "lambda", "seed", "selected_epoch", "rho_ab", "rho_am", "rho_bm", "mse_ab"];

fn summary_row(s: &TrainSummary) -> Vec<String> {
    vec![
        s.loss.name().to_string(),
        fmt(s.lambda),
        s.seed.to_string(),
        s.selected_epoch.to_string(),
        fmt(s.rho_ab),
        fmt(s.rho_am),
        fmt(s.rho_bm),
        fmt(s.mse_ab),
    ]
}

pub fn train(cfg: &ExperimentConfig, seed: u64, data: Option<&Path>, out_dir: &Path) -> Result<RunManifest> {
    let mut m = RunManifest::new("train", seed, cfg.snapshot());
    let ds = m.stage("data", |m| dataset_for(cfg, seed, data, m))?;
    let (_, s) = train_once(cfg, seed, &ds, &mut m, out_dir)?;
    let mut w = m.csv(&out_dir.join("heldout.csv"))?;
    w.row(SUMMARY_HEADER)?;
    w.row(summary_row(&s))?;
    w.finish()?;
    m.write(&out_dir.join("manifest.json"))?;
    Ok(m)
}

/// Per-scheme feature source for Alice, Bob and (optionally) Eve.
pub enum Evaluator {
    Legacy(Scheme),
    Learned { scheme: Box<dyn FeatureScheme>, eve: Option<Mlp> },
}

fn unit_re(z: C64) -> f64 {
    let r = z.norm();
    if r > 0.0 {
        z.re / r
    } else {
        0.0
    }
}

pub struct Triplet {
    pub f_a: Vec<f64>,
    pub f_b: Vec<f64>,
    pub f_e: Option<Vec<f64>>,
}

impl Evaluator {
    /// Real features: the legacy schemes use the cosine of their complex
    /// feature's phase, Eve the same of her reconstruction.
    pub fn triplet(&self, cfg: &ExperimentConfig, rounds: &[ProbeRound], params: &SystemParams) -> Result<Triplet> {
        match self {
            Evaluator::Legacy(s) => {
                let (mut f_a, mut f_b, mut f_e) = (Vec::new(), Vec::new(), Vec::new());
                for r in rounds {
                    let (pair, eve) = scheme_triplet(*s, r, params)?;
                    f_a.push(unit_re(pair.f_alice));
                    f_b.push(unit_re(pair.f_bob));
                    f_e.push(unit_re(eve.f_eve));
                }
                Ok(Triplet { f_a, f_b, f_e: Some(f_e) })
            }
            Evaluator::Learned { scheme, eve } => {
                let refs: Vec<&ProbeRound> = rounds.iter().collect();
                let (f_a, f_b) = scheme.features(&refs, params)?;
                let f_e = match eve {
                    Some(e) => Some(eve_features(e, &refs, params, cfg.train.adversary_input)?),
                    None => None,
                };
                Ok(Triplet { f_a, f_b, f_e })
            }
        }
    }
}

fn corr(x: &[f64], y: &[f64]) -> f64 {
    pearson(x, y).unwrap_or(0.0)
}

/// Trains Eve against `scheme` on her own dataset.
fn fit_eve(cfg: &ExperimentConfig, seed: u64, scheme: &dyn FeatureScheme) -> Result<Mlp> {
    let ec = cfg.eve_for(derive_seed(seed, &format!("eve:{}", scheme.name())));
    Ok(train_eve(scheme, &cfg.params, &cfg.data.eve(), &ec)?.eve)
}

pub fn distill_scheme(cfg: &ExperimentConfig, nets: &FeatureNets, ds: &Dataset) -> Result<PolyScheme> {
    let refs: Vec<&ProbeRound> = ds.split(Split::Train).iter().collect();
    Ok(PolyScheme::distill(&nets.alice, &nets.bob, &refs, &cfg.params)?)
}

pub fn train_eve_cmd(
    cfg: &ExperimentConfig,
    seed: u64,
    scheme: SchemeKind,
    model_dir: Option<&Path>,
    out_dir: &Path,
) -> Result<RunManifest> {
    let mut m = RunManifest::new("train-eve", seed, cfg.snapshot());
    let target: Box<dyn FeatureScheme> = match scheme {
        SchemeKind::CrossMult => Box::new(ris_skg_core::neural::CrossMultPhase),
        SchemeKind::Csi => bail!("train-eve supports crossmult, nn and poly"),
        SchemeKind::Nn | SchemeKind::Poly => {
            let dir = model_dir.ok_or_else(|| anyhow!("--model is required for scheme {}", scheme.name()))?;
            let nets = load_nets(dir, &mut m)?;
            if scheme == SchemeKind::Nn {
                Box::new(NeuralScheme::from(&nets))
            } else {
                let ds = m.stage("data", |_| training_dataset(cfg, seed))?;
                Box::new(distill_scheme(cfg, &nets, &ds)?)
            }
        }
    };
    let ec = cfg.eve_for(seed);
    let out = m.stage("train-eve", |_| Ok(train_eve(target.as_ref(), &cfg.params, &cfg.data.eve(), &ec)?))?;
    std::fs::create_dir_all(out_dir)?;
    write_text(&mut m, &out_dir.join("eve.mlp"), &out.eve.to_text())?;
    let mut v = m.csv(&out_dir.join("eve_validation.csv"))?;
    v.row(["epoch", "mean_abs_rho"])?;
    for (e, s) in &out.validation {
        v.row([e.to_string(), fmt(*s)])?;
    }
    v.finish()?;
    let mut w = m.csv(&out_dir.join("eve_heldout.csv"))?;
    w.row(["scheme", "selected_epoch", "rho_ea", "rho_eb", "rho_ab"])?;
    w.row([
        scheme.name().to_string(),
        out.selected_epoch.to_string(),
        fmt(out.rho_ea),
        fmt(out.rho_eb),
        fmt(out.rho_ab),
    ])?;
    w.finish()?;
    m.write(&out_dir.join("manifest.json"))?;
    Ok(m)
}

/// Correlations of the legacy schemes and their RIS reconstructions over the
/// noise sweep; each complex feature is scored on its real and imaginary parts.
pub fn attack_report(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<RunManifest> {
    let mut m = RunManifest::new("attack-report", seed, cfg.snapshot());
    let mut w = m.csv(out)?;
    w.row(["scheme", "sigma2_dbw", "part", "rho_ab", "rho_ea", "rho_eb"])?;
    for s2 in cfg.sweep.sigma2_points() {
        let (params, rounds) = evaluation_rounds(cfg, seed, s2)?;
        for scheme in [Scheme::Csi, Scheme::CrossMult] {
            let c = attack_correlations(scheme, &rounds, &params)?
                .ok_or_else(|| anyhow!("degenerate features for {}", scheme.name()))?;
            for (part, ab, ea, eb) in [
                ("re", c.alice_bob.re, c.eve_alice.re, c.eve_bob.re),
                ("im", c.alice_bob.im, c.eve_alice.im, c.eve_bob.im),
            ] {
                w.row([scheme.name().to_string(), fmt(s2), part.to_string(), fmt(ab), fmt(ea), fmt(eb)])?;
            }
        }
    }
    w.finish()?;
    m.write(&sibling(out, "manifest.json"))?;
    Ok(m)
}

/// Parses `sigma2=<lo>:<hi>:<steps>`.
pub fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let body = spec.strip_prefix("sigma2=").ok_or_else(|| anyhow!("sweep must look like sigma2=<lo>:<hi>:<steps>"))?;
    let parts: Vec<&str> = body.split(':').collect();
    let [lo, hi, steps] = parts.as_slice() else { bail!("sweep must have three fields lo:hi:steps") };
    let steps: usize = steps.parse().context("steps")?;
    if steps == 0 {
        bail!("sweep needs at least one step");
    }
    Ok(linspace(lo.parse().context("lo")?, hi.parse().context("hi")?, steps))
}

pub fn skr_sweep(cfg: &ExperimentConfig, seed: u64, sigma2_dbw: &[f64], out: &Path) -> Result<RunManifest> {
    let mut m = RunManifest::new("skr", seed, cfg.snapshot());
    let d = cfg.skr_d_ar;
    let model = m.stage("covariance", |_| {
        let cov = upa_covariance(&cfg.params, d)?;
        let sg2 = estimate_sigma_g2(&cfg.params, d, d, 4000, derive_seed(seed, "sigma_g2"))?;
        Ok(CovarianceModel::from_matrix(cov, sg2, d)?)
    })?;
    let cond = positivity_condition(&cfg.params, d, cfg.skr_d_ab)?;
    let mut w = m.csv(out)?;
    w.row(["sigma2_dbw", "h_yb", "h_yra", "h_cond_joint", "h_cond_pair", "gap_bits", "condition_ok"])?;
    for &s2 in sigma2_dbw {
        let b = skr_gap(&model, &cfg.params.clone().with_sigma2_dbw(s2), d)?;
        w.row([
            fmt(s2),
            fmt(b.h_yb),
            fmt(b.h_yra),
            fmt(b.h_cond_joint),
            fmt(b.h_cond_pair),
            fmt(b.gap),
            cond.holds.to_string(),
        ])?;
    }
    w.finish()?;
    m.write(&sibling(out, "manifest.json"))?;
    Ok(m)
}

pub fn distill_cmd(cfg: &ExperimentConfig, seed: u64, model_dir: &Path, out_dir: &Path) -> Result<RunManifest> {
    let mut m = RunManifest::new("distill", seed, cfg.snapshot());
    let nets = load_nets(model_dir, &mut m)?;
    let ds = m.stage("data", |_| training_dataset(cfg, seed))?;
    let poly = m.stage("polynomial", |_| distill_scheme(cfg, &nets, &ds))?;
    std::fs::create_dir_all(out_dir)?;
    write_text(&mut m, &out_dir.join("alice.poly"), &poly.alice.to_text())?;
    write_text(&mut m, &out_dir.join("bob.poly"), &poly.bob.to_text())?;

    let reports = m.stage("terms", |_| {
        let refs: Vec<&ProbeRound> = ds.split(Split::Train).iter().take(2000).collect();
        let xa = alice_inputs(&refs, &cfg.params);
        let xb = ris_skg_core::neural::bob_inputs(&refs, &cfg.params);
        let lib = TermLibrary::default();
        let dc = DistillConfig::default();
        Ok([distill_network(&nets.alice, &xa, &lib, &dc)?, distill_network(&nets.bob, &xb, &lib, &dc)?])
    })?;
    for (name, r) in ["alice", "bob"].iter().zip(&reports) {
        write_text(&mut m, &out_dir.join(format!("terms_{name}.csv")), &r.to_csv())?;
    }
    let h = term_frequency(&[&reports[0], &reports[1]])?;
    let mut w = m.csv(&out_dir.join("term_histogram.csv"))?;
    w.row(["category", "count", "fraction"])?;
    for cat in TermCategory::ALL {
        w.row([cat.name().to_string(), h.count(cat).to_string(), fmt(h.fraction(cat))])?;
    }
    w.finish()?;
    m.write(&out_dir.join("manifest.json"))?;
    Ok(m)
}

/// Reads `scheme,sigma2_dbw,f_a,f_b,f_e` rows and scores keys per group.
pub fn keys_cmd(cfg: &ExperimentConfig, features: &Path, out: &Path) -> Result<RunManifest> {
    let mut m = RunManifest::new("keys", 0, cfg.snapshot());
    m.add_input(features)?;
    let (header, rows) = read_csv(features)?;
    let col = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| anyhow!("{} has no column {name}", features.display()))
    };
    let (cs, cn, ca, cb, ce) = (col("scheme")?, col("sigma2_dbw")?, col("f_a")?, col("f_b")?, col("f_e")?);
    let mut groups: Vec<((String, String), [Vec<f64>; 3])> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let key = (r[cs].clone(), r[cn].clone());
        let parse = |c: usize| r[c].parse::<f64>().with_context(|| format!("row {} column {}", i + 1, header[c]));
        let vals = [parse(ca)?, parse(cb)?, parse(ce)?];
        let idx = match groups.iter().position(|(k, _)| *k == key) {
            Some(j) => j,
            None => {
                groups.push((key, Default::default()));
                groups.len() - 1
            }
        };
        for (dst, v) in groups[idx].1.iter_mut().zip(vals) {
            dst.push(v);
        }
    }
    let mut w = m.csv(out)?;
    w.row(["scheme", "sigma2_dbw", "kar_ab", "kar_ae", "kar_be", "akr"])?;
    for ((scheme, s2), [fa, fb, fe]) in &groups {
        let k = key_metrics(fa, fb, fe, &cfg.quant).with_context(|| format!("{scheme} at {s2} dBW"))?;
        w.row([scheme.clone(), s2.clone(), fmt(k.kar_ab), fmt(k.kar_ae), fmt(k.kar_be), fmt(k.akr)])?;
    }
    w.finish()?;
    m.write(&sibling(out, "manifest.json"))?;
    Ok(m)
}

/// Caps rayon's global pool from `RIS_SKG_WORKERS`.
pub fn init_workers() -> Result<()> {
    if let Ok(v) = std::env::var("RIS_SKG_WORKERS") {
        let n: usize = v.parse().with_context(|| format!("RIS_SKG_WORKERS={v:?}"))?;
        if n == 0 {
            bail!("RIS_SKG_WORKERS must be positive");
        }
        // A pool already built by an earlier call keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Independent training runs per lambda and seed (plus the MSE variant when
/// enabled). Failed runs are reported in the summary and the sweep continues.
pub fn sweep_cmd(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    let mut m = RunManifest::new("sweep", cfg.seeds[0], cfg.snapshot());
    let mut jobs: Vec<(LossKind, f64, u64)> = Vec::new();
    for &seed in &cfg.seeds {
        for &l in &cfg.sweep.lambdas {
            jobs.push((cfg.train.loss_kind, l, seed));
        }
        if cfg.sweep.mse_ablation {
            jobs.push((LossKind::MseAdversarial, cfg.train.lambda, seed));
        }
    }
    let results: Vec<Result<TrainSummary>> = jobs
        .par_iter()
        .map(|&(loss, lambda, seed)| {
            let mut c = cfg.clone();
            c.train.loss_kind = loss;
            c.train.lambda = lambda;
            let dir = out_dir.join(format!("{}_lambda{}_seed{}", loss.name(), lambda, seed));
            let mut sub = RunManifest::new("sweep-run", seed, c.snapshot());
            let ds = training_dataset(&c, seed)?;
            let (_, s) = train_once(&c, seed, &ds, &mut sub, &dir)?;
            sub.write(&dir.join("manifest.json"))?;
            Ok(s)
        })
        .collect();
    let mut w = m.csv(&out_dir.join("sweep_summary.csv"))?;
    let mut header: Vec<&str> = SUMMARY_HEADER.to_vec();
    header.push("error");
    w.row(header)?;
    let mut failures = 0;
    for ((loss, lambda, seed), r) in jobs.iter().zip(&results) {
        match r {
            Ok(s) => {
                let mut row = summary_row(s);
                row.push(String::new());
                w.row(row)?;
            }
            Err(e) => {
                failures += 1;
                eprintln!("sweep run {} lambda={lambda} seed={seed} failed: {e:#}", loss.name());
                let mut row = vec![loss.name().to_string(), fmt(*lambda), seed.to_string()];
                row.extend(std::iter::repeat(String::new()).take(5));
                row.push(format!("{e:#}"));
                w.row(row)?;
            }
        }
    }
    w.finish()?;
    m.write(&out_dir.join("manifest.json"))?;
    if failures > 0 {
        bail!("{failures} of {} sweep runs failed", jobs.len());
    }
    Ok(m)
}

/// Data generation, training (when a learned scheme is requested), feature
/// evaluation across the noise sweep and key metrics, for each seed.
pub fn run_scenario(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<RunManifest>> {
    cfg.seeds.par_iter().map(|&seed| run_seed(cfg, seed, &out_dir.join(format!("seed-{seed}")))).collect()
}

fn run_seed(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<RunManifest> {
    let mut m = RunManifest::new("run", seed, cfg.snapshot());
    std::fs::create_dir_all(dir)?;
    let mut evaluators: Vec<(SchemeKind, Evaluator)> = Vec::new();
    let learned = cfg.schemes.iter().any(|s| s.needs_training());
    let trained = if learned {
        let ds = m.stage("gen-data", |_| training_dataset(cfg, seed))?;
        let (nets, s) = train_once(cfg, seed, &ds, &mut m, &dir.join("model"))?;
        let mut w = m.csv(&dir.join("heldout.csv"))?;
        w.row(SUMMARY_HEADER)?;
        w.row(summary_row(&s))?;
        w.finish()?;
        Some((nets, ds))
    } else {
        None
    };
    for &kind in &cfg.schemes {
        let ev = match kind {
            SchemeKind::Csi => Evaluator::Legacy(Scheme::Csi),
            SchemeKind::CrossMult => Evaluator::Legacy(Scheme::CrossMult),
            SchemeKind::Nn | SchemeKind::Poly => {
                let (nets, ds) = trained.as_ref().expect("trained when a learned scheme is requested");
                let scheme: Box<dyn FeatureScheme> = if kind == SchemeKind::Nn {
                    Box::new(NeuralScheme::from(nets))
                } else {
                    let p = m.stage("distill", |_| distill_scheme(cfg, nets, ds))?;
                    write_text(&mut m, &dir.join("model").join("alice.poly"), &p.alice.to_text())?;
                    write_text(&mut m, &dir.join("model").join("bob.poly"), &p.bob.to_text())?;
                    Box::new(p)
                };
                let eve = if cfg.eve_enabled {
                    let e = m.stage(&format!("train-eve-{}", kind.name()), |_| fit_eve(cfg, seed, scheme.as_ref()))?;
                    write_text(&mut m, &dir.join("model").join(format!("eve_{}.mlp", kind.name())), &e.to_text())?;
                    Some(e)
                } else {
                    None
                };
                Evaluator::Learned { scheme, eve }
            }
        };
        evaluators.push((kind, ev));
    }

    let mut feats = m.csv(&dir.join("features.csv"))?;
    feats.row(["scheme", "sigma2_dbw", "index", "f_a", "f_b", "f_e"])?;
    let mut rho = m.csv(&dir.join("rho_vs_sigma2.csv"))?;
    rho.row(["scheme", "sigma2_dbw", "rho_ab", "rho_ae", "rho_be"])?;
    let mut keys = m.csv(&dir.join("keys.csv"))?;
    keys.row(["scheme", "sigma2_dbw", "kar_ab", "kar_ae", "kar_be", "akr"])?;
    m.stage("evaluate", |_| {
        for s2 in cfg.sweep.sigma2_points() {
            let (params, rounds) = evaluation_rounds(cfg, seed, s2)?;
            for (kind, ev) in &evaluators {
                let t = ev.triplet(cfg, &rounds, &params)?;
                let name = kind.name().to_string();
                for i in 0..t.f_a.len() {
                    let fe = t.f_e.as_ref().map(|e| fmt(e[i])).unwrap_or_default();
                    feats.row([name.clone(), fmt(s2), i.to_string(), fmt(t.f_a[i]), fmt(t.f_b[i]), fe])?;
                }
                let (ae, be) = match &t.f_e {
                    Some(e) => (fmt(corr(&t.f_a, e)), fmt(corr(&t.f_b, e))),
                    None => (String::new(), String::new()),
                };
                rho.row([name.clone(), fmt(s2), fmt(corr(&t.f_a, &t.f_b)), ae, be])?;
                if let Some(e) = &t.f_e {
                    let k = key_metrics(&t.f_a, &t.f_b, e, &cfg.quant)?;
                    keys.row([name, fmt(s2), fmt(k.kar_ab), fmt(k.kar_ae), fmt(k.kar_be), fmt(k.akr)])?;
                }
            }
        }
        Ok(())
    })?;
    feats.finish()?;
    rho.finish()?;
    keys.finish()?;
    m.write(&dir.join("manifest.json"))?;
    Ok(m)
}
