//! One pipeline per command. Each writes its CSV/JSON artifacts under the
//! output directory and returns a summary for the manifest.

use crate::config::{Command, RunConfig, SourceKind};
use critfield::construction_lab::construction_sweep;
use critfield::covering_lab::{covering_report, write_gauge_csv, CoverConfig, HeavyBallConfig, Thresholds};
use critfield::hitting_mc::{
    calibrate_slnd_constant, default_mu_ladder, default_target_norm, hit_probability, mu_n_second_moment_bound,
    mu_n_study, mu_spacing_limit, second_moment_prefactor, weak_limit_witness, write_hit_csv, write_mu_csv,
    HitExperiment,
};
use critfield::rng::split_seed;
use critfield::sojourn_lab::{mc_moments, sojourn_samples, tail_probability, write_moments_csv, write_tail_csv, SojournConfig};
use critfield::spectral_field::{empirical_variogram, synthesize, Band, FieldSource, Lattice, SpectralModel};
use critfield::variance_model::{classify_polarity, describe_verdict, integral_criterion};
use critfield::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Result of a successful pipeline.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub summary: Value,
    /// Artifact file names relative to the output directory.
    pub files: Vec<String>,
    /// Seed streams used, one entry per stream index.
    pub streams: Vec<Value>,
    pub inconclusive: bool,
}

impl Outcome {
    fn stream(&mut self, cfg: &RunConfig, index: u64, purpose: &str) -> u64 {
        let seed = split_seed(cfg.seed, index);
        self.streams.push(json!({ "stream": index, "purpose": purpose, "seed": seed }));
        seed
    }

    fn csv(&mut self, dir: &Path, name: &str, write: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let mut w = BufWriter::new(File::create(dir.join(name))?);
        write(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(dir.join(name), text + "\n")?;
        self.files.push(name.to_string());
        Ok(())
    }
}

pub fn dispatch(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.command {
        Command::Criteria => criteria(cfg),
        Command::Simulate => simulate(cfg),
        Command::Sojourn => sojourn(cfg),
        Command::Construct => construct(cfg),
        Command::Cover => cover(cfg),
        Command::Hit => hit(cfg),
    }
}

/// Reference lag at which spectral models are calibrated to `σ²`.
const SPECTRAL_REFERENCE_LAG: f64 = 0.25;

fn field_source(cfg: &RunConfig) -> Result<FieldSource> {
    let p = cfg.params;
    let exact_ok = p.n() == 1 && p.gamma() == 0.0;
    match cfg.source {
        Some(SourceKind::Exact) if !exact_ok => {
            Err(Error::Domain("source = exact requires N = 1 and gamma = 0".into()))
        }
        Some(SourceKind::Exact) => Ok(FieldSource::ExactFbm(p)),
        None if exact_ok => Ok(FieldSource::ExactFbm(p)),
        _ => Ok(FieldSource::Spectral(SpectralModel::calibrated(p, SPECTRAL_REFERENCE_LAG)?)),
    }
}

fn box_bounds(cfg: &RunConfig, lo: Option<Vec<f64>>, hi: Option<Vec<f64>>, lo0: f64, hi0: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = cfg.params.n();
    let lo = lo.unwrap_or_else(|| vec![lo0; n]);
    let hi = hi.unwrap_or_else(|| vec![hi0; n]);
    if lo.len() != n || hi.len() != n {
        return Err(Error::Domain(format!("box bounds need N = {n} coordinates")));
    }
    Ok((lo, hi))
}

fn criteria(cfg: &RunConfig) -> Result<Outcome> {
    let p = &cfg.params;
    let verdict = classify_polarity(p);
    let text = describe_verdict(p, &verdict);
    println!("{text}");
    let r_min = cfg.section().real("r_min", 1e-8)?;
    let integral = integral_criterion(p, r_min)?;
    let mut o = Outcome::default();
    let summary = json!({ "params": p, "verdict": verdict, "description": text, "r_min": r_min, "truncated_integral": integral });
    o.json(&cfg.out, "criteria.json", &summary)?;
    o.summary = summary;
    Ok(o)
}

fn simulate(cfg: &RunConfig) -> Result<Outcome> {
    let s = cfg.section();
    let n = cfg.params.n();
    let (lo, hi) = box_bounds(cfg, s.reals("lo")?, s.reals("hi")?, 0.0, 1.0)?;
    let spacing = s.real("spacing", if n == 1 { 2f64.powi(-10) } else { 2f64.powi(-5) })?;
    let lattice = Lattice::new(lo, hi, spacing)?;
    let reps = cfg.replications.unwrap_or(200);
    let band = match (s.opt_real("band_lo")?, s.opt_real("band_hi")?) {
        (None, None) => None,
        (a, b) => Some(Band::new(a.unwrap_or(0.0), b.unwrap_or(f64::INFINITY))?),
    };
    let mut o = Outcome::default();
    let seed = o.stream(cfg, 0, "field paths");
    let samples = match band {
        None => {
            let prepared = field_source(cfg)?.prepare(&lattice)?;
            (0..reps as u64).map(|r| prepared.sample(split_seed(seed, r))).collect::<Result<Vec<_>>>()?
        }
        Some(b) => {
            let model = SpectralModel::calibrated(cfg.params, SPECTRAL_REFERENCE_LAG)?;
            (0..reps as u64).map(|r| synthesize(&lattice, &model, split_seed(seed, r), Some(b))).collect::<Result<Vec<_>>>()?
        }
    };
    o.csv(&cfg.out, "sample.csv", |w| samples[0].write_csv(w))?;
    let axis = lattice.counts()[0];
    let lags: Vec<usize> = std::iter::successors(Some(1usize), |l| Some(l * 2)).take_while(|&l| 2 * l < axis).collect();
    let reference_lag = s.real("reference_lag", SPECTRAL_REFERENCE_LAG)?;
    let reference = lags
        .iter()
        .enumerate()
        .min_by(|a, b| {
            let da = (*a.1 as f64 * spacing - reference_lag).abs();
            let db = (*b.1 as f64 * spacing - reference_lag).abs();
            da.total_cmp(&db)
        })
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Domain("lattice too small for a variogram".into()))?;
    let v = empirical_variogram(&samples, &lags, reference)?;
    o.csv(&cfg.out, "variogram.csv", |w| {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(["lag", "mean_sq_increment", "ratio", "calibrated_ratio"])?;
        for i in 0..v.lags.len() {
            out.write_record([v.lags[i], v.mean_sq_increment[i], v.ratio[i], v.calibrated_ratio[i]].map(|x| x.to_string()))?;
        }
        out.flush()?;
        Ok(())
    })?;
    o.summary = json!({ "sites": lattice.len(), "spacing": spacing, "replications": reps, "kappa": v.kappa });
    Ok(o)
}

fn sojourn(cfg: &RunConfig) -> Result<Outcome> {
    let s = cfg.section();
    let p = &cfg.params;
    let eps_list = s.reals("eps")?.unwrap_or_else(|| (4..=8).map(|k| 2f64.powi(-k)).collect());
    let beta = s.real("beta", 1.2)?;
    let n_max: u32 = s.uint("n_max", 2)?;
    let u_grid = s.reals("u_grid")?.unwrap_or_else(|| (0..=16).map(|i| 1.0 + 0.25 * i as f64).collect());
    let reps = cfg.replications.unwrap_or(1000);
    let source = field_source(cfg)?;
    let mut o = Outcome::default();
    let mut runs = Vec::with_capacity(eps_list.len());
    for (k, &eps) in eps_list.iter().enumerate() {
        let sc = SojournConfig::new(p, eps, beta, reps)?;
        let seed = o.stream(cfg, k as u64, &format!("sojourn paths at eps = {eps}"));
        runs.push(sojourn_samples(&source, &sc, seed)?);
    }
    let boot = o.stream(cfg, eps_list.len() as u64, "bootstrap");
    let stats = mc_moments(&runs, p, n_max, boot)?;
    let tails = runs.iter().map(|r| tail_probability(&r.t_values, r.eps, p, &u_grid)).collect::<Result<Vec<_>>>()?;
    o.csv(&cfg.out, "moments.csv", |w| write_moments_csv(w, &stats.moments))?;
    o.csv(&cfg.out, "tail.csv", |w| write_tail_csv(w, &tails))?;
    o.inconclusive = stats.moments.iter().any(|m| m.inconclusive);
    let summary = json!({
        "source": source.label(),
        "normalization": stats.summaries,
        "normalization_pass": stats.pass,
        "inconclusive": o.inconclusive,
        "tails": tails.iter().map(|t| json!({
            "eps": t.eps, "k1_hat": t.k1_hat, "r_squared": t.fit.r_squared,
            "above_quarter_law": t.above_quarter_law, "pass": t.pass,
            "outside_proven_window": t.outside_proven_window,
        })).collect::<Vec<_>>(),
    });
    o.json(&cfg.out, "sojourn.json", &summary)?;
    o.summary = summary;
    Ok(o)
}

fn construct(cfg: &RunConfig) -> Result<Outcome> {
    let s = cfg.section();
    let count: usize = s.uint("count", 100)?;
    let identity_p: u32 = s.uint("identity_p", 20)?;
    let mut o = Outcome::default();
    let seed = o.stream(cfg, 0, "ladder draws");
    let report = construction_sweep(seed, count, identity_p)?;
    o.csv(&cfg.out, "ladders.csv", |w| {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record([
            "index", "case", "N", "d", "H", "gamma", "ln_lambda", "p", "beta", "constant", "p1", "p2", "p3", "p4",
            "p4_constant", "p4_required",
        ])?;
        for l in &report.ladders {
            let v = &l.verdicts;
            let flag = |b: bool| if b { "1" } else { "0" }.to_string();
            let case = match l.spec.case {
                critfield::construction_lab::LadderCase::SubcriticalGamma => "subcritical_gamma",
                critfield::construction_lab::LadderCase::CriticalGamma => "critical_gamma",
            };
            out.write_record([
                l.index.to_string(),
                case.to_string(),
                l.n.to_string(),
                l.d.to_string(),
                l.hurst.to_string(),
                l.gamma.to_string(),
                l.spec.ln_lambda.to_string(),
                l.spec.p.to_string(),
                l.spec.beta.to_string(),
                l.spec.constant.to_string(),
                flag(v.p1.holds),
                flag(v.p2.holds),
                flag(v.p3.holds),
                flag(v.p4.holds),
                v.p4_constant.to_string(),
                v.p4_required.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    })?;
    o.json(&cfg.out, "identities.json", &report.identities)?;
    let all_hold = report.ladders.iter().all(|l| l.verdicts.all_hold());
    let identities_hold = report.identities.iter().all(|i| i.chain_holds && i.sum_k_2k == i.sum_closed_form);
    o.summary = json!({ "ladders": count, "all_ladders_hold": all_hold, "identities_hold": identities_hold });
    Ok(o)
}

fn cover(cfg: &RunConfig) -> Result<Outcome> {
    let s = cfg.section();
    let defaults = CoverConfig::default();
    let (lo, hi) = box_bounds(cfg, s.reals("region_lo")?, s.reals("region_hi")?, defaults.region_lo[0], defaults.region_hi[0])?;
    let spacing = s.real("spacing", 2f64.powi(-12))?;
    let families = HeavyBallConfig {
        net_order: s.uint("net_order", defaults.families.net_order)?,
        thresholds: Thresholds {
            c1: s.real("c1", defaults.families.thresholds.c1)?,
            c2: s.real("c2", defaults.families.thresholds.c2)?,
            n0: s.real("n0", defaults.families.thresholds.n0)?,
        },
        ..defaults.families
    };
    let cc = CoverConfig {
        region_lo: lo.clone(),
        region_hi: hi.clone(),
        families,
        residual_order: s.uint("residual_order", defaults.residual_order)?,
    };
    let lattice = Lattice::new(lo, hi, spacing)?;
    let reps = cfg.replications.unwrap_or(1);
    let mut o = Outcome::default();
    let seed = o.stream(cfg, 0, "field paths");
    let prepared = field_source(cfg)?.prepare(&lattice)?;
    let mut rows = Vec::with_capacity(reps);
    let mut first = None;
    for r in 0..reps as u64 {
        let field = prepared.sample(split_seed(seed, r))?;
        let rep = covering_report(&field, &cc)?;
        rows.push([
            r as usize,
            rep.families.candidates,
            rep.families.f1_selected().len(),
            rep.families.f2_selected().len(),
            rep.residual.cubes.len(),
            rep.cover_check.net_points,
            rep.cover_check.uncovered,
        ]);
        if first.is_none() {
            first = Some(rep);
        }
    }
    let first = first.expect("at least one replication");
    o.csv(&cfg.out, "cover.csv", |w| {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(["replication", "candidates", "f1_selected", "f2_selected", "residual_cubes", "net_points", "uncovered"])?;
        for row in &rows {
            out.write_record(row.map(|x| x.to_string()))?;
        }
        out.flush()?;
        Ok(())
    })?;
    o.csv(&cfg.out, "gauge.csv", |w| write_gauge_csv(w, &first.gauge_families, &cfg.params))?;
    let summary = json!({
        "note": first.note,
        "cover_holds": rows.iter().all(|r| r[6] == 0),
        "gauge_total_first_path": first.gauge.as_ref().map(|g| g.total),
        "gauge_violations_first_path": first.gauge_violations.len(),
        "budget_first_path": first.families.budget,
    });
    o.json(&cfg.out, "cover.json", &summary)?;
    o.summary = summary;
    Ok(o)
}

fn hit(cfg: &RunConfig) -> Result<Outcome> {
    let s = cfg.section();
    let p = &cfg.params;
    let (lo, hi) = box_bounds(cfg, s.reals("lo")?, s.reals("hi")?, 0.5, 1.0)?;
    let deltas = s.reals("deltas")?.unwrap_or_else(|| (4..=9).map(|k| 2f64.powi(-k)).collect());
    let reps = cfg.replications.unwrap_or(1000);
    let source = field_source(cfg)?;
    let mut o = Outcome::default();
    let z = match s.reals("z")? {
        Some(z) => z,
        None => {
            let seed = o.stream(cfg, 2, "default target norm");
            let coarse = Lattice::new(lo.clone(), hi.clone(), 2f64.powi(if p.n() == 1 { -10 } else { -5 }))?;
            let mut z = vec![0.0; p.d()];
            z[0] = default_target_norm(&source, &coarse, 200, seed)?;
            z
        }
    };
    let exp = HitExperiment::new(source.clone(), lo.clone(), hi.clone(), z.clone(), deltas, reps)?;
    let seed = o.stream(cfg, 0, "hitting paths");
    let report = hit_probability(&exp, seed)?;
    o.csv(&cfg.out, "hit.csv", |w| write_hit_csv(w, &report))?;
    let mut summary = json!({ "hitting": report });
    let mu_reps: usize = s.uint("mu_replications", 0)?;
    if mu_reps > 0 {
        let ladder = s.uints("mu_ladder")?.unwrap_or_else(default_mu_ladder);
        let n_max = ladder.iter().copied().max().unwrap_or(1);
        let h = mu_spacing_limit(p, n_max)?.log2().floor().exp2();
        let lattice = Lattice::new(lo.clone(), hi.clone(), h)?;
        let mseed = o.stream(cfg, 1, "level-set measure paths");
        let study = mu_n_study(&source, &lattice, &z, &lo, &hi, &ladder, mu_reps, mseed)?;
        let second = mu_n_second_moment_bound(p, &lo, &hi)?;
        let bound = if second.diverges {
            None
        } else {
            let cal = calibrate_slnd_constant(&source, &lo, &hi, 21)?;
            second.bound(second_moment_prefactor(&source, &lo, &hi, cal.c_hat)?)
        };
        o.csv(&cfg.out, "mu.csv", |w| write_mu_csv(w, &study, bound))?;
        let weak = if ladder.len() >= 4 { Some(weak_limit_witness(&ladder, &study.values)?) } else { None };
        summary["level_set"] = json!({ "second_moment": second, "bound": bound, "weak_limit": weak });
    }
    o.json(&cfg.out, "hit.json", &summary)?;
    o.summary = summary;
    Ok(o)
}
