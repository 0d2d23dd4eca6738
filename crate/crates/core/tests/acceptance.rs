//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use shm_core::anomaly::{compare_pooling, posterior_predictive};
use shm_core::fem::{self, frequencies, FoundationModel};
use shm_core::hiermc::{sample, SamplerConfig, Target};
use shm_core::popgen::{Candidate, GroundTruth, Observation};
use shm_core::signals::{
    estimate_peak_frequency, synthesize_response, JonswapConfig, PsdConfig, TimeSeries, DEFAULT_DAMPING,
};
use shm_core::surrogate::{tune_stiffness, FeModel, TuneOptions, NREL_DOMAIN, WAVETANK_DOMAIN};

type Check = Result<String, String>;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn ac1() -> Check {
    let tol = |f: &[f64], r: [f64; 2], t: [f64; 2], what: &str| -> Result<String, String> {
        let d = [rel(f[0], r[0]), rel(f[1], r[1])];
        let s = format!(
            "{what} {:.4}/{:.4} Hz ({:+.2}%/{:+.2}%)",
            f[0],
            f[1],
            100.0 * (f[0] - r[0]) / r[0],
            100.0 * (f[1] - r[1]) / r[1]
        );
        if d[0] <= t[0] && d[1] <= t[1] {
            Ok(s)
        } else {
            Err(s)
        }
    };
    let tower = frequencies(&fem::nrel5mw_tower(), &FoundationModel::winkler(0.0, 0.0), 100, 1030.0, 2)
        .map_err(|e| e.to_string())?;
    let rigid = frequencies(&fem::nrel5mw(), &FoundationModel::rigid(), 100, 1030.0, 2).map_err(|e| e.to_string())?;
    let model = FeModel::new(fem::nrel5mw(), NREL_DOMAIN);
    let s = tune_stiffness(&model, 0.1555, NREL_DOMAIN, TuneOptions::default()).map_err(|e| e.to_string())?;
    let tuned =
        frequencies(&model.template, &FoundationModel::winkler(s, 0.0), 100, 1030.0, 2).map_err(|e| e.to_string())?;
    let parts = [
        tol(&tower, [0.3208, 2.8280], [0.02, 0.02], "tower"),
        tol(&rigid, [0.2150, 1.5536], [0.02, 0.02], "no-SSI"),
        tol(&tuned, [0.1555, 1.0481], [0.01, 0.07], "tuned"),
    ];
    let msg = parts.iter().map(|p| p.clone().unwrap_or_else(|e| e)).collect::<Vec<_>>().join("; ");
    let msg = format!("{msg}; stiffness {s:.4e} N/m^2");
    if parts.iter().all(Result::is_ok) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac2() -> Check {
    let mut worst_err: f64 = 0.0;
    let mut worst_grad: f64 = 0.0;
    for (t, d) in [(fem::nrel5mw(), NREL_DOMAIN), (fem::wavetank(), WAVETANK_DOMAIN)] {
        let model = FeModel::new(t, d);
        let sur = model.fit_surrogate(30, 5).map_err(|e| e.to_string())?;
        worst_err = worst_err.max(model.holdout_error(&sur, 200).map_err(|e| e.to_string())?);
        for i in 1..200 {
            let s = d.0 + (d.1 - d.0) * i as f64 / 200.0;
            let h = 1e-4 * s;
            let fd = (sur.eval(s + h).unwrap() - sur.eval(s - h).unwrap()) / (2.0 * h);
            worst_grad = worst_grad.max(rel(sur.eval_grad(s).unwrap(), fd));
        }
    }
    let msg = format!(
        "hold-out max rel error {worst_err:.2e} (< 1e-3), gradient vs central difference {worst_grad:.1e} (< 1e-5)"
    );
    if worst_err < 1e-3 && worst_grad < 1e-5 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

struct Correlated;

const COV: [[f64; 3]; 3] = [[1.0, 0.6, 0.0], [0.6, 2.0, 0.0], [0.0, 0.0, 0.25]];

impl Target for Correlated {
    fn dim(&self) -> usize {
        3
    }
    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let det = 2.0 - 0.36;
        grad[0] = -(2.0 * x[0] - 0.6 * x[1]) / det;
        grad[1] = -(-0.6 * x[0] + x[1]) / det;
        grad[2] = -x[2] / 0.25;
        0.5 * (x[0] * grad[0] + x[1] * grad[1] + x[2] * grad[2])
    }
    fn param_names(&self) -> Vec<String> {
        vec!["a".into(), "b".into(), "c".into()]
    }
    fn initial_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()
    }
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0))
}

fn ac3() -> Check {
    let post = sample(&Correlated, &SamplerConfig { warmup: 1000, draws: 2000, seed: 21, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let cols: Vec<Vec<f64>> = ["a", "b", "c"].iter().map(|n| post.pooled(n).unwrap()).collect();
    let n = cols[0].len() as f64;
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        worst = worst.max(means[i].abs() / COV[i][i].sqrt());
        for j in 0..3 {
            let c = cols[i].iter().zip(&cols[j]).map(|(x, y)| (x - means[i]) * (y - means[j])).sum::<f64>() / (n - 1.0);
            worst = worst.max((c - COV[i][j]).abs() / (COV[i][i] * COV[j][j]).sqrt());
        }
    }
    let s = common::synthetic();
    let report = s.partial.report();
    let max_rhat = report.max_rhat.unwrap_or(f64::INFINITY);
    let e_mu = s.partial.summary("E_mu").map_err(|e| e.to_string())?;
    let truth = GroundTruth::nrel_default().e_mu;
    let covered = e_mu.q2_5 < truth && truth < e_mu.q97_5;
    let msg = format!(
        "MVN worst moment error {:.1}% of scale at {} draws; synthetic K=5 max R-hat {max_rhat:.4}, E_mu 95% CI [{:.3e}, {:.3e}] vs {truth:.1e}, {} divergent",
        100.0 * worst,
        n,
        e_mu.q2_5,
        e_mu.q97_5,
        report.divergences
    );
    if worst < 0.05 && max_rhat < 1.01 && covered {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac4() -> Check {
    let s = common::synthetic();
    let (pp, vp) = mean_var(&s.partial.pooled("E_s.5").unwrap());
    let (np, vn) = mean_var(&s.nopool.pooled("E_s.5").unwrap());
    let (mu, _) = mean_var(&s.partial.pooled("E_mu").unwrap());
    let between = np.min(mu) < pp && pp < np.max(mu);
    let msg = format!(
        "structure 5 mean: no pooling {np:.4e}, partial {pp:.4e}, E_mu {mu:.4e}; sd {:.3e} -> {:.3e}",
        vn.sqrt(),
        vp.sqrt()
    );
    if between && vp < vn {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac5() -> Check {
    let fs = 2048.0;
    let n = (1200.0 * fs) as usize;
    let tone =
        TimeSeries { sample_rate: fs, samples: (0..n).map(|i| (2.0 * PI * 1.4 * i as f64 / fs).sin()).collect() };
    let cfg = PsdConfig::default();
    let a = estimate_peak_frequency(&tone, &cfg).map_err(|e| e.to_string())?.frequency_hz;
    let ts = synthesize_response(&JonswapConfig::default(), 1.45, DEFAULT_DAMPING, 1200.0, fs, 1)
        .map_err(|e| e.to_string())?;
    let b = estimate_peak_frequency(&ts, &cfg).map_err(|e| e.to_string())?.frequency_hz;
    let msg = format!("tone 1.400 -> {a:.4} Hz; JONSWAP resonator 1.45 -> {b:.4} Hz");
    if (a - 1.4).abs() <= 0.002 && (b - 1.45).abs() <= 0.005 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac6() -> Check {
    // The tank population's healthy records are not published, so the
    // synthetic analogue is used.
    let s = common::synthetic();
    let sur = common::nrel_surrogate();
    let np = posterior_predictive(&s.nopool, sur, "5", 3).map_err(|e| e.to_string())?;
    let w = sur.eval(s.data.truth[4].e_s).unwrap() - 2.5 * np.variance().sqrt();
    let c = Candidate {
        structure_id: "5".into(),
        observation: Observation { frequency_hz: w, top_mass_kg: None, scour_mm: None },
    };
    let sc = compare_pooling(&s.partial, &s.nopool, sur, &[c], 0.05, 3).map_err(|e| e.to_string())?.remove(0);
    let msg = format!(
        "synthetic analogue: observation {w:.5} Hz on structure 5, p_partial {:.4} < p_nopool {:.4} < 0.1",
        sc.p_partial, sc.p_no_pooling
    );
    if sc.p_partial < sc.p_no_pooling && sc.p_no_pooling < 0.1 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn shm(cmd: &str, config: &Path, out: &Path) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_shm"))
        .args([cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!("{cmd} exited {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr).trim()))
    }
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn ac7() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    fs::write(root.join("obs.csv"), "structure_id,frequency_hz,scour_mm\n3,1.40,15\n3,1.37,25\n").unwrap();
    let tank = json!({
        "template": "wavetank",
        "generation": { "n_per": [4, 4, 2], "seed": 5, "truth": { "e_mu": 8.3e5, "v_mu": 2.25e10, "e_sigma": 2.5e9, "v_sigma": 1e18, "noise_sd": 2e-3 } },
        "signals": { "seed": 2, "duration": 300.0, "save_series": true },
        "sampler": { "seed": 3, "chains": 2, "warmup": 300, "draws": 300, "structures": ["3"],
                     "dataset": "{out}/dataset_extracted.csv" },
        "anomaly": { "seed": 4, "observations": "obs.csv" }
    });
    let nrel = json!({ "template": "nrel5mw" });
    fs::write(root.join("tank.json"), serde_json::to_vec_pretty(&tank).unwrap()).unwrap();
    fs::write(root.join("nrel.json"), serde_json::to_vec_pretty(&nrel).unwrap()).unwrap();

    let stages = ["validate-fe", "fit-surrogate", "generate", "synthesize", "sample", "detect", "plot-data"];
    let mut runs = Vec::new();
    for rep in 0..2 {
        let out = root.join(format!("run{rep}"));
        for st in stages {
            let cfg = if st == "validate-fe" { root.join("nrel.json") } else { root.join("tank.json") };
            shm(st, &cfg, &out)?;
        }
        runs.push(tree(&out));
    }
    let differing: Vec<&str> =
        runs[0].iter().zip(&runs[1]).filter(|(a, b)| a != b).map(|(a, _)| a.0.as_str()).collect();
    let msg = format!(
        "{} stages x 2 runs, {} files compared, {} differ {:?}",
        stages.len(),
        runs[0].len(),
        differing.len(),
        differing
    );
    if runs[0].len() == runs[1].len() && differing.is_empty() {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() {
    // Plain `cargo test` filters and flags are accepted and ignored, except
    // --list which must print nothing for a harness-less target.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [(&str, &str, fn() -> Check); 7] = [
        ("AC1", "FE validation", ac1),
        ("AC2", "surrogate fidelity", ac2),
        ("AC3", "sampler correctness", ac3),
        ("AC4", "shrinkage", ac4),
        ("AC5", "signal chain", ac5),
        ("AC6", "scour detection", ac6),
        ("AC7", "determinism", ac7),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        let t = Instant::now();
        let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(m) => println!("{id} PASS {name} [{secs:.1}s]: {m}"),
            Err(m) => {
                failed += 1;
                println!("{id} FAIL {name} [{secs:.1}s]: {m}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
