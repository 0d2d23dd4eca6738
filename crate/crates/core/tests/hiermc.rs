mod common;

use common::{nrel_surrogate, synthetic};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use shm_core::hiermc::{
    fit_no_pooling, fit_partial, sample, Group, HierModel, HyperPriorConfig, Pooling, PosteriorChains, SamplerConfig,
    Target,
};
use shm_core::popgen::{generate, GroundTruth};

/// Zero-mean Gaussian with covariance [[1, .6, 0], [.6, 2, 0], [0, 0, .25]].
struct Correlated;

const COV: [[f64; 3]; 3] = [[1.0, 0.6, 0.0], [0.6, 2.0, 0.0], [0.0, 0.0, 0.25]];

impl Target for Correlated {
    fn dim(&self) -> usize {
        3
    }
    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        // Precision of the leading 2x2 block.
        let det = 1.0 * 2.0 - 0.36;
        let p = [[2.0 / det, -0.6 / det], [-0.6 / det, 1.0 / det]];
        grad[0] = -(p[0][0] * x[0] + p[0][1] * x[1]);
        grad[1] = -(p[1][0] * x[0] + p[1][1] * x[1]);
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

#[test]
fn multivariate_normal_moments() {
    let post =
        sample(&Correlated, &SamplerConfig { warmup: 1000, draws: 2000, seed: 21, ..Default::default() }).unwrap();
    assert_eq!(post.n_draws(), 8000);
    let cols: Vec<Vec<f64>> = ["a", "b", "c"].iter().map(|n| post.pooled(n).unwrap()).collect();
    let n = 8000.0;
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    for i in 0..3 {
        assert!(means[i].abs() < 0.05 * COV[i][i].sqrt(), "mean {i}: {}", means[i]);
        for j in 0..3 {
            let c: f64 =
                cols[i].iter().zip(&cols[j]).map(|(x, y)| (x - means[i]) * (y - means[j])).sum::<f64>() / (n - 1.0);
            let scale = (COV[i][i] * COV[j][j]).sqrt();
            assert!((c - COV[i][j]).abs() < 0.05 * scale, "cov {i}{j}: {c}");
        }
    }
}

#[test]
fn synthetic_population_converges() {
    let s = synthetic();
    let report = s.partial.report();
    for p in &report.summaries {
        let r = p.rhat.expect("defined R-hat");
        assert!(r < 1.01, "{} R-hat {r}", p.name);
    }
    let rate = report.divergences as f64 / s.partial.n_draws() as f64;
    assert!(rate < 0.01, "divergence rate {rate}");
    let e_mu = s.partial.summary("E_mu").unwrap();
    let truth = GroundTruth::nrel_default().e_mu;
    assert!(e_mu.q2_5 < truth && truth < e_mu.q97_5, "{e_mu:?}");
}

#[test]
fn constrained_draws_are_positive() {
    let s = synthetic();
    for (i, name) in s.partial.names.iter().enumerate() {
        if name.starts_with("E_s.") {
            continue;
        }
        for c in &s.partial.chains {
            assert!(c.draws.iter().all(|d| d[i] > 0.0), "{name}");
        }
    }
    let [lo, hi] = nrel_surrogate().domain;
    for name in s.partial.names.iter().filter(|n| n.starts_with("s.")) {
        assert!(s.partial.pooled(name).unwrap().iter().all(|v| (lo..=hi).contains(v)));
    }
}

#[test]
fn data_poor_structure_is_shrunk() {
    let s = synthetic();
    let mean_var = |p: &PosteriorChains, name: &str| {
        let x = p.pooled(name).unwrap();
        let m = x.iter().sum::<f64>() / x.len() as f64;
        (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0))
    };
    let (pp, vp) = mean_var(&s.partial, "E_s.5");
    let (np, vn) = mean_var(&s.nopool, "E_s.5");
    let (mu, _) = mean_var(&s.partial, "E_mu");
    assert!(np.min(mu) < pp && pp < np.max(mu), "nopool {np} partial {pp} E_mu {mu}");
    assert!(vp < vn, "{vp} vs {vn}");
}

#[test]
fn well_observed_structure_agrees_across_regimes() {
    let sur = nrel_surrogate();
    let data = generate(&GroundTruth::nrel_default(), &[100, 100, 100], sur, 3).unwrap();
    let cfg = SamplerConfig { warmup: 1000, draws: 1000, seed: 2, ..Default::default() };
    let partial = fit_partial(&data.dataset, sur, HyperPriorConfig::nrel_default(), &cfg).unwrap();
    let nopool = fit_no_pooling(&data.dataset, 0, sur, HyperPriorConfig::nrel_default(), &cfg).unwrap();
    let a = partial.summary("E_s.1").unwrap();
    let b = nopool.summary("E_s.1").unwrap();
    assert!(a.q2_5 < b.q97_5 && b.q2_5 < a.q97_5, "{a:?} {b:?}");
    assert!(fit_no_pooling(&data.dataset, 3, sur, HyperPriorConfig::nrel_default(), &cfg).is_err());
}

#[test]
fn same_seed_same_chains() {
    let sur = nrel_surrogate();
    let data = generate(&GroundTruth::nrel_default(), &[5, 3], sur, 4).unwrap();
    let cfg = SamplerConfig { warmup: 200, draws: 100, seed: 11, ..Default::default() };
    let csv = |p: PosteriorChains| {
        let mut buf = Vec::new();
        p.write_csv(&mut buf, None).unwrap();
        buf
    };
    let a = csv(fit_partial(&data.dataset, sur, HyperPriorConfig::nrel_default(), &cfg).unwrap());
    let b = csv(fit_partial(&data.dataset, sur, HyperPriorConfig::nrel_default(), &cfg).unwrap());
    assert_eq!(a, b);
    let c =
        csv(fit_partial(&data.dataset, sur, HyperPriorConfig::nrel_default(), &SamplerConfig { seed: 12, ..cfg })
            .unwrap());
    assert_ne!(a, c);
}

/// Two-sample Kolmogorov-Smirnov p-value (asymptotic).
fn ks_p_value(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    let lambda = (ne + 0.12 + 0.11 / ne) * d;
    let p: f64 = (1..=100).map(|k| 2.0 * (-1f64).powi(k - 1) * (-2.0 * (k * k) as f64 * lambda * lambda).exp()).sum();
    p.clamp(0.0, 1.0)
}

#[test]
fn without_data_the_hyper_priors_are_recovered() {
    let priors = HyperPriorConfig::nrel_default();
    let groups = vec![Group { id: "1".into(), frequencies: vec![] }];
    let model = HierModel::from_groups(groups, nrel_surrogate().clone(), priors, Pooling::Partial).unwrap();
    let post = sample(&model, &SamplerConfig { warmup: 1000, draws: 5000, seed: 5, ..Default::default() }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (name, prior) in [
        ("E_mu", priors.e_mu),
        ("V_mu", priors.v_mu),
        ("E_sigma", priors.e_sigma),
        ("V_sigma", priors.v_sigma),
        ("gamma", priors.gamma),
    ] {
        // Thin to roughly independent draws.
        let draws: Vec<f64> = post.pooled(name).unwrap().into_iter().step_by(25).collect();
        let g = rand_distr::Gamma::new(prior.shape, 1.0 / prior.rate).unwrap();
        let direct: Vec<f64> = (0..2000).map(|_| g.sample(&mut rng)).collect();
        let p = ks_p_value(draws, direct);
        assert!(p > 0.01, "{name}: KS p = {p}");
    }
}
