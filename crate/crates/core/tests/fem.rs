use std::f64::consts::PI;

use shm_core::fem::{
    self, build_system, cantilever_estimate, first_frequency, frequencies, BaseFixity, BeamSegment, FoundationModel,
    Section, StructureTemplate,
};
use shm_core::surrogate::{tune_stiffness, FeModel, TuneOptions};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn uniform_cantilever(length: f64, d: f64, t: f64) -> StructureTemplate {
    StructureTemplate {
        name: "uniform".into(),
        segments: vec![BeamSegment {
            length,
            outer_diameter_base: d,
            outer_diameter_top: d,
            wall_thickness_base: t,
            wall_thickness_top: t,
            density: 7850.0,
            youngs_modulus: 210e9,
            poisson_ratio: 0.3,
            shear_correction_factor: 0.53,
        }],
        top_mass: 0.0,
        embedded_length: 0.0,
        submerged_length: 0.0,
        base: BaseFixity::Clamped,
        added_mass: Default::default(),
    }
}

fn euler_bernoulli(length: f64, d: f64, t: f64) -> f64 {
    let s = Section::tube(d, t);
    1.875_104_068_711_961f64.powi(2) / (2.0 * PI)
        * (210e9 * s.second_moment / (7850.0 * s.area * length.powi(4))).sqrt()
}

#[test]
fn tower_only_matches_reference() {
    let f = frequencies(&fem::nrel5mw_tower(), &FoundationModel::winkler(0.0, 0.0), 100, 1030.0, 2).unwrap();
    assert!(rel(f[0], 0.3208) < 0.02, "{f:?}");
    assert!(rel(f[1], 2.8280) < 0.02, "{f:?}");
}

#[test]
fn tower_and_monopile_without_soil_matches_reference() {
    let f = frequencies(&fem::nrel5mw(), &FoundationModel::rigid(), 100, 1030.0, 2).unwrap();
    assert!(rel(f[0], 0.2150) < 0.02, "{f:?}");
    assert!(rel(f[1], 1.5536) < 0.02, "{f:?}");
}

#[test]
fn tuned_soil_stiffness_reproduces_second_mode() {
    let model = FeModel::new(fem::nrel5mw(), (1e5, 1e8));
    let s = tune_stiffness(&model, 0.1555, (1e5, 1e8), TuneOptions::default()).unwrap();
    let f = frequencies(&model.template, &FoundationModel::winkler(s, 0.0), 100, 1030.0, 2).unwrap();
    assert!((f[0] - 0.1555).abs() < 1e-4, "{f:?}");
    assert!(rel(f[1], 1.0481) < 0.07, "{f:?} at s = {s:e}");
}

#[test]
fn slender_cantilever_matches_euler_bernoulli() {
    let (l, d, t) = (20.0, 0.4, 0.02);
    let fe = first_frequency(&uniform_cantilever(l, d, t), &FoundationModel::rigid(), 100, 0.0).unwrap();
    let eb = euler_bernoulli(l, d, t);
    assert!(rel(fe, eb) < 0.005, "fe {fe} eb {eb}");
    // Shear flexibility only softens the beam.
    assert!(fe <= eb);
    let (l, d, t) = (2.0, 0.4, 0.02);
    let fe = first_frequency(&uniform_cantilever(l, d, t), &FoundationModel::rigid(), 100, 0.0).unwrap();
    assert!(fe < euler_bernoulli(l, d, t) * 0.97);
}

#[test]
fn h_refinement_converges() {
    for (template, foundation) in [
        (fem::nrel5mw(), FoundationModel::winkler(3.9e6, 0.0)),
        (fem::nrel5mw(), FoundationModel::winkler(3.9e6, 5.0)),
        (fem::nrel5mw(), FoundationModel::rigid()),
        (fem::nrel5mw_tower(), FoundationModel::rigid()),
        (fem::wavetank(), FoundationModel::winkler(1e4, 0.0)),
    ] {
        let rho = fem::default_water_density(&template);
        let a = first_frequency(&template, &foundation, 50, rho).unwrap();
        let b = first_frequency(&template, &foundation, 100, rho).unwrap();
        assert!(rel(a, b) < 1e-3, "{} {a} {b}", template.name);
    }
}

#[test]
fn frequency_monotone_in_stiffness_and_scour() {
    let t = fem::nrel5mw();
    let stiff: Vec<f64> = [1e6, 2e6, 4e6, 7e6, 1e7]
        .iter()
        .map(|&k| first_frequency(&t, &FoundationModel::winkler(k, 0.0), 60, 1030.0).unwrap())
        .collect();
    assert!(stiff.windows(2).all(|w| w[1] > w[0]), "{stiff:?}");
    let scour: Vec<f64> = [0.0, 1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|&s| first_frequency(&t, &FoundationModel::winkler(4e6, s), 60, 1030.0).unwrap())
        .collect();
    assert!(scour.windows(2).all(|w| w[1] < w[0]), "{scour:?}");
}

#[test]
fn added_mass_lowers_every_frequency() {
    let t = fem::nrel5mw();
    let f = FoundationModel::winkler(4e6, 0.0);
    let dry = frequencies(&t, &f, 60, 0.0, 4).unwrap();
    let wet = frequencies(&t, &f, 60, 1030.0, 4).unwrap();
    for (d, w) in dry.iter().zip(&wet) {
        assert!(w < d);
    }
}

#[test]
fn doubling_density_scales_by_inverse_root_two() {
    let mut t = fem::nrel5mw();
    let f = FoundationModel::winkler(4e6, 0.0);
    let base = frequencies(&t, &f, 40, 0.0, 3).unwrap();
    for s in &mut t.segments {
        s.density *= 2.0;
    }
    let heavy = frequencies(&t, &f, 40, 0.0, 3).unwrap();
    for (b, h) in base.iter().zip(&heavy) {
        assert!(rel(*h, b / 2f64.sqrt()) < 1e-9);
    }
}

#[test]
fn zero_springs_only_touch_spring_entries() {
    let t = fem::nrel5mw();
    let a = build_system(&t, &FoundationModel::winkler(0.0, 0.0), 50, 1030.0).unwrap();
    let b = build_system(&t, &FoundationModel::winkler(1e6, 0.0), 50, 1030.0).unwrap();
    assert_eq!(a.mass, b.mass);
    assert_eq!(a.free_dofs, b.free_dofs);
}

#[test]
fn cantilever_estimate_agrees_with_clamped_tank_model() {
    let t = fem::wavetank();
    let s = &t.segments[0];
    let sec = Section::tube(s.outer_diameter_base, s.wall_thickness_base);
    let est = cantilever_estimate(s.youngs_modulus, sec.second_moment, t.total_length(), t.top_mass, s.mass()).unwrap();
    let fe = first_frequency(&t.clamped_cantilever(), &FoundationModel::rigid(), 100, 0.0).unwrap();
    assert!(rel(est, fe) < 0.15, "estimate {est} fe {fe}");
}

#[test]
fn tank_model_tunes_into_measured_band() {
    let model = FeModel::new(fem::wavetank(), (1e2, 1e8));
    let s = tune_stiffness(&model, 1.45, (1e2, 1e8), TuneOptions::default()).unwrap();
    let f = model.fe_frequency(s).unwrap();
    assert!((1.40..=1.48).contains(&f), "{f} at {s:e}");
}

#[test]
fn template_json_round_trip() {
    for name in StructureTemplate::builtin_names() {
        let t = StructureTemplate::builtin(name).unwrap();
        let back: StructureTemplate = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(back, t);
    }
}
