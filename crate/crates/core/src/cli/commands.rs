use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::anomaly::{compare_pooling, posterior_predictive, write_scores_csv, AnomalyScore, PredictiveDistribution};
use crate::fem::{self, FoundationModel, StructureTemplate};
use crate::hiermc::{fit_no_pooling, fit_partial, Pooling, PosteriorChains};
use crate::meta::Metadata;
use crate::popgen::{generate, read_observations, Candidate, PopulationDataset, StructureData};
use crate::signals::{estimate_peak_frequency, synthesize_response, SeriesFormat};
use crate::surrogate::{log_grid, tune_stiffness, FeModel, Surrogate, TuneOptions};

use super::config::Loaded;
use super::CliError;

const SURROGATE_FILE: &str = "surrogate.json";
const DATASET_FILE: &str = "dataset.csv";
const PARTIAL_CHAINS: &str = "chains_partial";

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", parent.display())))?;
    }
    let f = File::create(&path).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, meta: &Metadata, body: &T) -> Result<(), CliError> {
    let mut value = serde_json::to_value(body).map_err(|e| CliError::Failed(e.to_string()))?;
    let obj = value.as_object_mut().expect("JSON body is an object");
    obj.insert("metadata".into(), serde_json::to_value(meta).expect("metadata serialises"));
    let mut w = create(dir, name)?;
    let text = serde_json::to_string_pretty(&value).expect("value serialises");
    writeln!(w, "{text}")?;
    w.flush()?;
    Ok(())
}

fn open(path: &Path, what: &str) -> Result<File, CliError> {
    File::open(path)
        .map_err(|e| CliError::Usage(format!("missing upstream artifact: {what} ({}): {e}", path.display())))
}

fn file_stem_id(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

fn nopool_file(id: &str) -> String {
    format!("chains_nopool_{}", file_stem_id(id))
}

fn fe_model(l: &Loaded) -> Result<FeModel, CliError> {
    let template = l.template()?;
    let mut m = FeModel::new(template, l.domain()?);
    let f = &l.config.foundation;
    m.foundation = FoundationModel { springs: f.springs, scour: f.scour, ..m.foundation };
    m.n_elements = f.n_elements;
    if let Some(rho) = f.water_density {
        m.water_density = rho;
    }
    Ok(m)
}

fn load_surrogate(l: &Loaded) -> Result<Surrogate, CliError> {
    let path = l.resolve_or(&l.config.surrogate.path, SURROGATE_FILE);
    let text = std::io::read_to_string(open(&path, "surrogate")?)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let body = value.get("surrogate").cloned().unwrap_or(value);
    serde_json::from_value(body).map_err(|e| CliError::Usage(format!("{}: not a surrogate: {e}", path.display())))
}

fn load_dataset(path: &Path) -> Result<PopulationDataset, CliError> {
    let ing = crate::popgen::ingest_reader(open(path, "dataset")?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok(ing.dataset)
}

fn load_chains(dir: &Path, stem: &str) -> Result<PosteriorChains, CliError> {
    let path = dir.join(format!("{stem}.csv"));
    PosteriorChains::read_csv(open(&path, "posterior chains")?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Serialize)]
struct ValidationRow {
    scenario: &'static str,
    mode: usize,
    computed_hz: f64,
    reference_hz: f64,
    deviation_pct: f64,
    tolerance_pct: f64,
    pass: bool,
}

pub fn validate_fe(l: &Loaded) -> Result<(), CliError> {
    let v = &l.config.validation;
    let f = &l.config.foundation;
    let with_density = |mut t: StructureTemplate| {
        if let Some(rho) = v.density {
            t.segments.iter_mut().for_each(|s| s.density = rho);
        }
        t
    };
    let tower = with_density(fem::nrel5mw_tower());
    let full = with_density(fem::nrel5mw());
    let rho_w = f.water_density.unwrap_or(fem::DEFAULT_SEAWATER_DENSITY);
    let n = f.n_elements;
    let soil = |s: f64| FoundationModel { springs: f.springs, scour: f.scour, ..FoundationModel::winkler(s, 0.0) };

    let target = 0.1555;
    let mut model = FeModel::new(full.clone(), (1e5, 1e8));
    model.foundation = soil(0.0);
    model.n_elements = n;
    model.water_density = rho_w;
    let tuned = tune_stiffness(&model, target, (1e5, 1e8), TuneOptions::default());

    let mut rows = Vec::new();
    let mut push = |scenario, freqs: &[f64], refs: &[f64], tols: &[f64]| {
        for (i, ((&c, &r), &t)) in freqs.iter().zip(refs).zip(tols).enumerate() {
            let dev = 100.0 * (c - r) / r;
            rows.push(ValidationRow {
                scenario,
                mode: i + 1,
                computed_hz: c,
                reference_hz: r,
                deviation_pct: dev,
                tolerance_pct: t,
                pass: dev.abs() <= t,
            });
        }
    };
    let tol = v.tolerance_pct;
    let tower_f = fem::frequencies(&tower, &soil(0.0), n, rho_w, 2)?;
    push("tower-only", &tower_f, &[0.3208, 2.8280], &[tol, tol]);
    let rigid_f =
        fem::frequencies(&full, &FoundationModel { support: fem::SoilSupport::Rigid, ..soil(0.0) }, n, rho_w, 2)?;
    push("monopile-no-ssi", &rigid_f, &[0.2150, 1.5536], &[tol, tol]);
    let stiffness = match tuned {
        Ok(s) => {
            let f = fem::frequencies(&full, &soil(s), n, rho_w, 2)?;
            push(
                "monopile-ssi-tuned",
                &f,
                &[target, 1.0481],
                &[v.tuned_tolerance_pct, v.tuned_second_mode_tolerance_pct],
            );
            Some(s)
        }
        Err(e) => {
            eprintln!("stiffness tuning failed: {e}");
            None
        }
    };

    let meta = Metadata::new(&l.bytes, None);
    let mut w = create(&l.out_dir, "validate_fe.csv")?;
    meta.write_comment(&mut w)?;
    let mut out = csv::Writer::from_writer(w);
    for r in &rows {
        out.serialize(r)?;
    }
    out.flush()?;
    let all_pass = stiffness.is_some() && rows.iter().all(|r| r.pass);
    write_json(
        &l.out_dir,
        "validate_fe.json",
        &meta,
        &json!({ "rows": rows, "tuned_stiffness": stiffness, "pass": all_pass }),
    )?;

    println!("{:<20} {:>4} {:>10} {:>10} {:>8} {:>6}", "scenario", "mode", "computed", "reference", "dev %", "ok");
    for r in &rows {
        println!(
            "{:<20} {:>4} {:>10.4} {:>10.4} {:>8.2} {:>6}",
            r.scenario,
            r.mode,
            r.computed_hz,
            r.reference_hz,
            r.deviation_pct,
            if r.pass { "yes" } else { "NO" }
        );
    }
    if let Some(s) = stiffness {
        println!("tuned stiffness: {s:.4e} N/m^2");
    }
    if all_pass {
        Ok(())
    } else {
        Err(CliError::Validation("FE frequencies outside tolerance".into()))
    }
}

pub fn fit_surrogate(l: &Loaded) -> Result<(), CliError> {
    let s = &l.config.surrogate;
    let model = fe_model(l)?;
    let grid = model.training_grid(s.grid);
    let samples = model.samples(&grid)?;
    let sur = Surrogate::fit(&samples, s.degree)?;
    let holdout = model.holdout_error(&sur, s.holdout)?;
    let meta = Metadata::new(&l.bytes, None);
    write_json(
        &l.out_dir,
        SURROGATE_FILE,
        &meta,
        &json!({ "template": model.template.name, "surrogate": sur, "holdout_points": s.holdout, "holdout_max_rel_error": holdout }),
    )?;
    let mut w = create(&l.out_dir, "surrogate_training.csv")?;
    meta.write_comment(&mut w)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["stiffness_n_per_m2", "fe_hz", "surrogate_hz"])?;
    for (st, f) in &samples {
        out.write_record([st.to_string(), f.to_string(), sur.eval(*st)?.to_string()])?;
    }
    out.flush()?;
    println!(
        "surrogate degree {} on [{:e}, {:e}] N/m^2: {:.4}-{:.4} Hz, hold-out max relative error {:.3e}",
        s.degree,
        sur.domain[0],
        sur.domain[1],
        sur.eval(sur.domain[0])?,
        sur.eval(sur.domain[1])?,
        holdout
    );
    if holdout > s.max_holdout_error {
        return Err(CliError::Validation(format!("hold-out error {holdout:.3e} exceeds {:.3e}", s.max_holdout_error)));
    }
    Ok(())
}

pub fn generate_cmd(l: &Loaded) -> Result<(), CliError> {
    let g = l.section(&l.config.generation, "generation")?;
    let sur = load_surrogate(l)?;
    let out = generate(&g.truth, &g.n_per, &sur, g.seed)?;
    let meta = Metadata::new(&l.bytes, Some(g.seed));
    let mut w = create(&l.out_dir, DATASET_FILE)?;
    out.dataset.write_csv(&mut w, Some(&meta))?;
    w.flush()?;
    write_json(&l.out_dir, "truth.json", &meta, &json!({ "population": g.truth, "structures": out.truth }))?;
    println!("{} structures, {} observations", out.dataset.n_structures(), out.dataset.n_observations());
    Ok(())
}

pub fn synthesize(l: &Loaded) -> Result<(), CliError> {
    let s = l.section(&l.config.signals, "signals")?;
    let (targets, dataset) = match &s.frequencies {
        Some(f) => (f.iter().enumerate().map(|(i, &f)| ((i + 1).to_string(), 1, f)).collect::<Vec<_>>(), None),
        None => {
            let d = load_dataset(&l.resolve_or(&s.dataset, DATASET_FILE))?;
            let t = d
                .structures
                .iter()
                .flat_map(|st| st.observations.iter().enumerate().map(|(j, o)| (st.id.clone(), j + 1, o.frequency_hz)))
                .collect();
            (t, Some(d))
        }
    };
    let meta = Metadata::new(&l.bytes, Some(s.seed));
    let mut estimates = Vec::with_capacity(targets.len());
    for (i, (id, j, f)) in targets.iter().enumerate() {
        let ts =
            synthesize_response(&s.jonswap, *f, s.damping, s.duration, s.sample_rate, s.seed.wrapping_add(i as u64))?;
        if s.save_series {
            let ext = match s.format {
                SeriesFormat::Csv => "csv",
                SeriesFormat::Binary => "bin",
            };
            let mut w = create(&l.out_dir, &format!("series/{}_{j}.{ext}", file_stem_id(id)))?;
            ts.write(&mut w, s.format, Some(&meta))?;
        }
        let est = estimate_peak_frequency(&ts, &s.psd)?;
        if est.low_prominence {
            eprintln!("warning: structure {id} record {j}: weak spectral peak (prominence {:.1})", est.prominence);
        }
        estimates.push(est);
    }

    let mut w = create(&l.out_dir, "extracted_frequencies.csv")?;
    meta.write_comment(&mut w)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["structure_id", "record", "input_hz", "extracted_hz", "prominence", "low_prominence"])?;
    for ((id, j, f), e) in targets.iter().zip(&estimates) {
        out.write_record([
            id.clone(),
            j.to_string(),
            f.to_string(),
            e.frequency_hz.to_string(),
            e.prominence.to_string(),
            e.low_prominence.to_string(),
        ])?;
    }
    out.flush()?;

    if let Some(d) = dataset {
        let mut it = estimates.iter();
        let structures = d
            .structures
            .iter()
            .map(|st| StructureData {
                id: st.id.clone(),
                observations: st
                    .observations
                    .iter()
                    .map(|o| crate::popgen::Observation {
                        frequency_hz: it.next().expect("one estimate per record").frequency_hz,
                        ..*o
                    })
                    .collect(),
            })
            .collect();
        let mut w = create(&l.out_dir, "dataset_extracted.csv")?;
        PopulationDataset { structures }.write_csv(&mut w, Some(&meta))?;
        w.flush()?;
    }
    let worst = targets.iter().zip(&estimates).map(|((_, _, f), e)| (e.frequency_hz - f).abs()).fold(0.0, f64::max);
    println!("{} records synthesised; largest |extracted - input| = {worst:.4} Hz", targets.len());
    Ok(())
}

pub fn sample_cmd(l: &Loaded) -> Result<(), CliError> {
    let s = l.section(&l.config.sampler, "sampler")?;
    let data = load_dataset(&l.resolve_or(&s.dataset, DATASET_FILE))?;
    let sur = load_surrogate(l)?;
    let priors = l.hyper_priors(s)?;
    let cfg = s.sampler_config();
    let meta = Metadata::new(&l.bytes, Some(s.seed));

    let mut runs: Vec<(String, Option<String>, PosteriorChains)> = Vec::new();
    for regime in &s.regimes {
        match regime {
            Pooling::Partial => runs.push((PARTIAL_CHAINS.into(), None, fit_partial(&data, &sur, priors, &cfg)?)),
            Pooling::None => {
                let ids: Vec<String> = match &s.structures {
                    Some(ids) => ids.clone(),
                    None => data.structures.iter().map(|st| st.id.clone()).collect(),
                };
                for id in ids {
                    let k = data
                        .index_of(&id)
                        .ok_or_else(|| CliError::Usage(format!("structure '{id}' is not in the dataset")))?;
                    runs.push((nopool_file(&id), Some(id), fit_no_pooling(&data, k, &sur, priors, &cfg)?));
                }
            }
        }
    }
    for (stem, id, post) in &runs {
        let mut w = create(&l.out_dir, &format!("{stem}.csv"))?;
        post.write_csv(&mut w, Some(&meta))?;
        let report = post.report();
        let regime = if id.is_some() { Pooling::None } else { Pooling::Partial };
        write_json(
            &l.out_dir,
            &format!("{stem}.json"),
            &meta,
            &json!({ "regime": regime, "structure": id, "priors": priors, "report": report }),
        )?;
        println!(
            "{stem}: max R-hat {}, min bulk ESS {}, {} divergent",
            report.max_rhat.map_or("undefined".into(), |r| format!("{r:.4}")),
            report.min_ess_bulk.map_or("undefined".into(), |e| format!("{e:.0}")),
            report.divergences
        );
        for w in &report.warnings {
            eprintln!("warning: {stem}: {w}");
        }
    }
    Ok(())
}

fn chains_dir(l: &Loaded) -> Option<PathBuf> {
    l.config.anomaly.as_ref().map(|a| l.resolve_or(&a.chains_dir, ""))
}

pub fn detect(l: &Loaded) -> Result<(), CliError> {
    let a = l.section(&l.config.anomaly, "anomaly")?;
    let obs_path = l.resolve(&a.observations);
    let observations = read_observations(open(&obs_path, "observations")?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", obs_path.display())))?;
    let dir = chains_dir(l).unwrap_or_else(|| l.out_dir.clone());
    let sur = load_surrogate(l)?;
    let partial = load_chains(&dir, PARTIAL_CHAINS)?;

    let mut nopool: BTreeMap<String, PosteriorChains> = BTreeMap::new();
    let mut scores: Vec<AnomalyScore> = Vec::with_capacity(observations.len());
    let mut predictive = BTreeMap::new();
    for (i, c) in observations.iter().enumerate() {
        if !nopool.contains_key(&c.structure_id) {
            let np = load_chains(&dir, &nopool_file(&c.structure_id))?;
            let pp = posterior_predictive(&partial, &sur, &c.structure_id, a.seed)?;
            let pn = posterior_predictive(&np, &sur, &c.structure_id, a.seed)?;
            for w in pp.warnings.iter().chain(&pn.warnings) {
                eprintln!("warning: structure {}: {w}", c.structure_id);
            }
            let summary = |p: &PredictiveDistribution| json!({ "mean_hz": p.mean(), "sd_hz": p.variance().sqrt(), "draws": p.samples.len() });
            predictive.insert(c.structure_id.clone(), json!({ "partial": summary(&pp), "nopool": summary(&pn) }));
            nopool.insert(c.structure_id.clone(), np);
        }
        let mut s =
            compare_pooling(&partial, &nopool[&c.structure_id], &sur, std::slice::from_ref(c), a.threshold, a.seed)?
                .pop()
                .expect("one score per observation");
        s.obs = i + 1;
        scores.push(s);
    }

    let meta = Metadata::new(&l.bytes, Some(a.seed));
    let mut w = create(&l.out_dir, "scores.csv")?;
    write_scores_csv(&mut w, &scores, Some(&meta))?;
    write_json(
        &l.out_dir,
        "detect.json",
        &meta,
        &json!({ "threshold": a.threshold, "predictive": predictive, "scores": scores }),
    )?;

    println!("{:>4} {:>9} {:>8} {:>10} {:>10} {:>6}", "obs", "scour_mm", "hz", "p_nopool", "p_partial", "flag");
    for s in &scores {
        println!(
            "{:>4} {:>9} {:>8.4} {:>10.4} {:>10.4} {:>6}",
            s.obs,
            s.scour_depth_mm.map_or("-".into(), |v| v.to_string()),
            s.frequency_hz,
            s.p_no_pooling,
            s.p_partial,
            if s.flag_partial { "yes" } else { "" }
        );
    }
    Ok(())
}

/// Shared-bin densities, one column per group.
fn histogram(groups: &[Vec<f64>], bins: usize) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
    let all = groups.iter().flatten();
    let lo = all.clone().cloned().fold(f64::INFINITY, f64::min);
    let hi = all.cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) || bins == 0 {
        return None;
    }
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5 * lo.abs().max(1e-12), hi + 0.5 * hi.abs().max(1e-12)) };
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
    let dens = groups
        .iter()
        .map(|g| {
            let mut counts = vec![0.0; bins];
            for v in g {
                let b = (((v - lo) / width) as usize).min(bins - 1);
                counts[b] += 1.0;
            }
            counts.iter().map(|c| c / (g.len() as f64 * width)).collect()
        })
        .collect();
    Some((edges, dens))
}

pub fn plot_data(l: &Loaded) -> Result<(), CliError> {
    let p = &l.config.plot;
    let dir = l.out_dir.join("plot");
    let meta = Metadata::new(&l.bytes, None);
    let sur = load_surrogate(l)?;
    let mut written = Vec::new();

    let mut w = create(&dir, "surrogate_curve.csv")?;
    meta.write_comment(&mut w)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["stiffness_n_per_m2", "frequency_hz"])?;
    for s in log_grid(sur.domain[0], sur.domain[1], p.curve_points) {
        out.write_record([s.to_string(), sur.eval(s)?.to_string()])?;
    }
    out.flush()?;
    written.push("surrogate_curve.csv");

    let dataset_path = l.resolve_or(&l.config.sampler.as_ref().and_then(|s| s.dataset.clone()), DATASET_FILE);
    match load_dataset(&dataset_path) {
        Ok(d) => {
            let mut w = create(&dir, "observations.csv")?;
            meta.write_comment(&mut w)?;
            let mut out = csv::Writer::from_writer(w);
            out.write_record(["structure_id", "index", "frequency_hz"])?;
            for st in &d.structures {
                for (j, o) in st.observations.iter().enumerate() {
                    out.write_record([st.id.clone(), (j + 1).to_string(), o.frequency_hz.to_string()])?;
                }
            }
            out.flush()?;
            written.push("observations.csv");
        }
        Err(e) => eprintln!("skipping observation scatter: {e}"),
    }

    let cdir = chains_dir(l).unwrap_or_else(|| l.out_dir.clone());
    let mut stems: Vec<String> = std::fs::read_dir(&cdir)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .filter_map(|e| e.file_name().into_string().ok())
                .filter(|n| n.starts_with("chains_") && n.ends_with(".csv"))
                .map(|n| n.trim_end_matches(".csv").to_string())
                .collect()
        })
        .unwrap_or_default();
    stems.sort();
    if stems.is_empty() {
        eprintln!("skipping posterior histograms: no chains_*.csv in {}", cdir.display());
    }
    let mut chains = BTreeMap::new();
    for stem in &stems {
        let post = load_chains(&cdir, stem)?;
        let name = format!("posterior_{}.csv", stem.trim_start_matches("chains_"));
        let mut w = create(&dir, &name)?;
        meta.write_comment(&mut w)?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["parameter", "chain", "bin_lower", "bin_upper", "density"])?;
        for param in post.names.iter().filter(|n| !n.starts_with("s.")) {
            let Some((edges, dens)) = histogram(&post.param(param)?, p.bins) else { continue };
            for (c, d) in dens.iter().enumerate() {
                for (b, v) in d.iter().enumerate() {
                    out.write_record([
                        param.clone(),
                        (c + 1).to_string(),
                        edges[b].to_string(),
                        edges[b + 1].to_string(),
                        v.to_string(),
                    ])?;
                }
            }
        }
        out.flush()?;
        chains.insert(stem.clone(), post);
    }

    if let Some(a) = &l.config.anomaly {
        let obs_path = l.resolve(&a.observations);
        let observations: Vec<Candidate> = read_observations(open(&obs_path, "observations")?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", obs_path.display())))?;
        let meta = Metadata::new(&l.bytes, Some(a.seed));
        let mut w = create(&dir, "observation_lines.csv")?;
        meta.write_comment(&mut w)?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["obs", "structure_id", "frequency_hz", "scour_depth_mm"])?;
        for (i, c) in observations.iter().enumerate() {
            out.write_record([
                (i + 1).to_string(),
                c.structure_id.clone(),
                c.observation.frequency_hz.to_string(),
                c.observation.scour_mm.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        out.flush()?;

        let mut ids: Vec<&String> = observations.iter().map(|c| &c.structure_id).collect();
        ids.sort();
        ids.dedup();
        let mut w = create(&dir, "predictive.csv")?;
        meta.write_comment(&mut w)?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["structure_id", "regime", "bin_lower", "bin_upper", "density"])?;
        for id in ids {
            let mut preds = Vec::new();
            for (stem, regime) in [(PARTIAL_CHAINS.to_string(), "partial"), (nopool_file(id), "nopool")] {
                if let Some(post) = chains.get(&stem) {
                    preds.push((regime, posterior_predictive(post, &sur, id, a.seed)?.samples));
                }
            }
            let groups: Vec<Vec<f64>> = preds.iter().map(|(_, s)| s.clone()).collect();
            let Some((edges, dens)) = histogram(&groups, p.bins) else { continue };
            for ((regime, _), d) in preds.iter().zip(&dens) {
                for (b, v) in d.iter().enumerate() {
                    out.write_record([
                        id.clone(),
                        regime.to_string(),
                        edges[b].to_string(),
                        edges[b + 1].to_string(),
                        v.to_string(),
                    ])?;
                }
            }
        }
        out.flush()?;
    }
    println!("plot data written to {}", dir.display());
    Ok(())
}
