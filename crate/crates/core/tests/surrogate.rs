use shm_core::fem::{self, FoundationModel};
use shm_core::surrogate::{
    tune_stiffness, FeModel, FrequencyModel, SurrogateError, TuneOptions, DEFAULT_DEGREE, DEFAULT_TRAINING_POINTS,
    NREL_DOMAIN, WAVETANK_DOMAIN,
};

#[test]
fn nrel_surrogate_tracks_fe_on_holdout() {
    let model = FeModel::new(fem::nrel5mw(), NREL_DOMAIN);
    let sur = model.fit_surrogate(DEFAULT_TRAINING_POINTS, DEFAULT_DEGREE).unwrap();
    let err = model.holdout_error(&sur, 200).unwrap();
    assert!(err < 1e-3, "holdout error {err}");
    assert!(sur.max_rel_residual < 1e-3);
    assert_eq!(sur.domain(), NREL_DOMAIN);
    // Endpoints are training samples.
    for s in [NREL_DOMAIN.0, NREL_DOMAIN.1] {
        let fe = model.fe_frequency(s).unwrap();
        assert!((sur.eval(s).unwrap() - fe).abs() <= sur.max_abs_residual + 1e-15);
    }
    for i in 0..=200 {
        let s = NREL_DOMAIN.0 + (NREL_DOMAIN.1 - NREL_DOMAIN.0) * i as f64 / 200.0;
        assert!(sur.eval_grad(s).unwrap() > 0.0);
    }
}

#[test]
fn tank_surrogate_tracks_fe_on_holdout() {
    let model = FeModel::new(fem::wavetank(), WAVETANK_DOMAIN);
    let sur = model.fit_surrogate(DEFAULT_TRAINING_POINTS, DEFAULT_DEGREE).unwrap();
    let err = model.holdout_error(&sur, 200).unwrap();
    assert!(err < 1e-3, "holdout error {err}");
}

#[test]
fn tuning_round_trips_through_fe() {
    let model = FeModel::new(fem::nrel5mw(), NREL_DOMAIN);
    let s = tune_stiffness(&model, 0.1555, NREL_DOMAIN, TuneOptions::default()).unwrap();
    assert!(NREL_DOMAIN.0 < s && s < NREL_DOMAIN.1);
    let f = fem::first_frequency(&model.template, &FoundationModel::winkler(s, 0.0), 100, 1030.0).unwrap();
    assert!((f - 0.1555).abs() < 1e-4);
}

#[test]
fn tank_target_lands_in_tank_domain() {
    let domain = WAVETANK_DOMAIN;
    let model = FeModel::new(fem::wavetank(), domain);
    let s = tune_stiffness(&model, 1.45, domain, TuneOptions::default()).unwrap();
    assert!(domain.0 < s && s < domain.1, "{s:e}");
    assert!((model.fe_frequency(s).unwrap() - 1.45).abs() < 1e-4);
}

#[test]
fn target_at_lower_bracket_returns_lower_bound() {
    // A clamped toe keeps the structure stable with no soil at all.
    let mut t = fem::nrel5mw();
    t.base = fem::BaseFixity::Clamped;
    let model = FeModel::new(t, (0.0, 1e7));
    let f0 = model.fe_frequency(0.0).unwrap();
    let s = tune_stiffness(&model, f0, (0.0, 1e7), TuneOptions::default()).unwrap();
    assert_eq!(s, 0.0);
}

#[test]
fn unbracketed_target_is_an_error() {
    let model = FeModel::new(fem::nrel5mw(), NREL_DOMAIN);
    let r = tune_stiffness(&model, 0.5, NREL_DOMAIN, TuneOptions::default());
    assert!(matches!(r, Err(SurrogateError::NotBracketed { .. })), "{r:?}");
    let r = tune_stiffness(&model, 0.15, (2e6, 1e6), TuneOptions::default());
    assert!(matches!(r, Err(SurrogateError::InvalidBracket(..))));
}

#[test]
fn fe_model_rejects_out_of_domain() {
    let model = FeModel::new(fem::nrel5mw(), NREL_DOMAIN);
    assert!(matches!(model.frequency(1e5), Err(SurrogateError::OutOfDomain { .. })));
}
