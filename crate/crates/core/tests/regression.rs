//! Self-generated reference values. Set TWISTCHAN_REGEN_FIXTURES=1 to rewrite
//! tests/fixtures/regression.json after a validated change.

use std::path::PathBuf;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use twistchan::config::RunConfig;
use twistchan::constants::{kev_to_omega, HBAR_EV_S};
use twistchan::kinematics::{Helicity, PhotonMode};
use twistchan::model::ChannelingModel;
use twistchan::radiation::{amplitude_estimates, emission_amplitude, Transition};
use twistchan::scan::{point_intensity, tam_spectrum, Axis};

#[derive(Debug, Serialize, Deserialize)]
struct Fixtures {
    populations: Vec<f64>,
    amplitude: [f64; 2],
    amplitude_n_phi: usize,
    tam_m: Vec<f64>,
    tam_intensity: Vec<f64>,
}

fn path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/regression.json")
}

fn model() -> &'static (RunConfig, ChannelingModel) {
    static M: OnceLock<(RunConfig, ChannelingModel)> = OnceLock::new();
    M.get_or_init(|| {
        let cfg = RunConfig::default();
        let (model, _) = ChannelingModel::build(&cfg, None).unwrap();
        (cfg, model)
    })
}

/// Lowest-frequency transition into the deepest band, skipping degenerate partners.
fn lowest_transition(model: &ChannelingModel) -> Transition {
    *model
        .transitions
        .iter()
        .filter(|t| t.f == 0 && t.omega_fi * HBAR_EV_S > 1e-3)
        .min_by(|a, b| a.omega_fi.total_cmp(&b.omega_fi))
        .unwrap()
}

fn reference_mode() -> PhotonMode {
    let a = 30f64.to_radians();
    PhotonMode::new(kev_to_omega(20.0), a, 6, Helicity::Plus, a, 0.0).unwrap()
}

fn computed() -> &'static Fixtures {
    static F: OnceLock<Fixtures> = OnceLock::new();
    F.get_or_init(compute)
}

fn compute() -> Fixtures {
    let (cfg, model) = model();
    let tr = lowest_transition(model);
    let amp = emission_amplitude(&tr, &reference_mode(), model.beam.beta, &cfg.scan_settings().quadrature)
        .unwrap();
    let mut small = cfg.clone();
    small.photon.theta_k_deg = 60.0;
    let ms: Vec<i32> = (5..=11).step_by(2).flat_map(|m| [m, -m]).collect();
    let tam = tam_spectrum(
        &model.weighted(cfg.numerics.weight_floor),
        model.beam.beta,
        &Axis::linspace("omega_keV", 15.0, 35.0, 5),
        &Axis::linspace("Theta_deg", 50.0, 70.0, 5),
        small.theta_k(),
        &ms,
        &small.scan_settings(),
    )
    .unwrap();
    Fixtures {
        populations: model.populations.clone(),
        amplitude: [amp.value.re, amp.value.im],
        amplitude_n_phi: amp.n_phi,
        tam_m: tam.axes[0].values.clone(),
        tam_intensity: tam.values,
    }
}

fn close(a: f64, b: f64, tol: f64, scale: f64) -> bool {
    (a - b).abs() <= tol * scale
}

#[test]
fn values_match_frozen_fixtures() {
    let now = computed();
    if std::env::var_os("TWISTCHAN_REGEN_FIXTURES").is_some() {
        std::fs::create_dir_all(path().parent().unwrap()).unwrap();
        std::fs::write(path(), serde_json::to_string_pretty(&now).unwrap()).unwrap();
    }
    let frozen: Fixtures = serde_json::from_str(&std::fs::read_to_string(path()).unwrap()).unwrap();

    assert_eq!(now.populations.len(), frozen.populations.len());
    for (a, b) in now.populations.iter().zip(&frozen.populations) {
        assert!(close(*a, *b, 1e-8, 1.0), "population {a} vs {b}");
    }
    let amp = Complex64::new(now.amplitude[0], now.amplitude[1]);
    let old = Complex64::new(frozen.amplitude[0], frozen.amplitude[1]);
    assert!((amp - old).norm() <= 1e-6 * old.norm(), "amplitude {amp} vs {old}");
    assert_eq!(now.tam_m, frozen.tam_m);
    let scale = frozen.tam_intensity.iter().cloned().fold(0.0, f64::max);
    for (a, b) in now.tam_intensity.iter().zip(&frozen.tam_intensity) {
        assert!(close(*a, *b, 1e-6, scale), "TAM {a} vs {b}");
    }
}

#[test]
fn populations_form_a_sub_probability() {
    let (_, model) = model();
    let p = &model.populations;
    assert!(p.iter().all(|&x| x >= 0.0));
    let total: f64 = p.iter().sum();
    assert!(total > 0.5 && total <= 1.0 + 1e-12, "{total}");
    // a near-parallel beam fills the cell evenly, so the weakly bound half dominates
    let half = p.len() / 2;
    let deep: f64 = p[..half].iter().sum();
    assert!(deep < total - deep, "{deep} of {total}");
}

#[test]
fn reference_amplitude_is_self_converged() {
    let (cfg, model) = model();
    let tr = lowest_transition(model);
    let q = cfg.scan_settings().quadrature;
    let mode = reference_mode();
    let adaptive = emission_amplitude(&tr, &mode, model.beam.beta, &q).unwrap();
    // two further doublings beyond the accepted node count
    let est = amplitude_estimates(&tr, &mode, model.beam.beta, &q, adaptive.n_phi, 3);
    let finest = est.last().unwrap().1;
    assert!((adaptive.value - finest).norm() <= 1e-5 * finest.norm());
    // 2^14 nodes do not resolve the ring at this coherence length
    let b = 0.5 * mode.kappa_perp() * mode.theta.sin() * q.l_coh;
    assert!(b > (1 << 14) as f64, "ring bandwidth {b}");
    assert!(adaptive.n_phi > 1 << 14);
}

#[test]
fn tam_spectrum_decays_toward_large_m() {
    let now = computed();
    let value = |m: f64| now.tam_intensity[now.tam_m.iter().position(|&x| x == m).unwrap()];
    for sign in [1.0, -1.0] {
        let ends = (value(sign * 5.0), value(sign * 11.0));
        assert!(ends.1 < ends.0, "m = {sign}: {ends:?}");
    }
}

#[test]
fn eight_azimuths_resolve_the_phi_average() {
    let (cfg, model) = model();
    let tr = model.weighted(cfg.numerics.weight_floor);
    let eval = |n| {
        let mut s = cfg.scan_settings();
        s.n_phi_avg = n;
        point_intensity(
            &tr,
            model.beam.beta,
            kev_to_omega(26.47),
            30f64.to_radians(),
            28.15f64.to_radians(),
            &[6],
            &s,
        )
        .unwrap()[0]
    };
    let (i8, i16) = (eval(8), eval(16));
    assert!((i8 - i16).abs() <= 1e-3 * i16, "{i8} vs {i16}");
}
