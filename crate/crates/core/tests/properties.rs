mod common;

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use proptest::prelude::*;
use twistchan::bands::{
    central_equation, incidence_points, populations, solve_bands, BandSelection, BandSet, Basis,
    BeamModel,
};
use twistchan::config::RunConfig;
use twistchan::constants::kev_to_omega;
use twistchan::eigen::{eigh, HermitianMatrix};
use twistchan::kinematics::{
    polarization_vector, rotate_wavevector, wigner_d1, Helicity, PhotonMode,
};
use twistchan::potential::{CrystalModel, PotentialTable};
use twistchan::radiation::{build_transitions, spectral_probability, QuadratureSettings};
use twistchan::scan::{
    point_intensity, weight_transitions, HelicityPolicy, PhiAverage, ScanSettings,
};

struct Fixture {
    beam: BeamModel,
    sets: Vec<BandSet>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let si = CrystalModel::silicon_100();
        let beam = BeamModel::from_energy(10.0, false)
            .unwrap()
            .with_angles(4.3e-3, 2.0 / 15.0)
            .unwrap();
        let sets = incidence_points(&beam, si.a_p, 8)
            .iter()
            .map(|p| BandSet {
                k_perp: p.k_bar,
                cutoff: 8,
                states: solve_bands(&si, &beam, p.k_bar, 8, BandSelection::Lowest(8)).unwrap(),
            })
            .collect();
        Fixture { beam, sets }
    })
}

fn settings() -> ScanSettings {
    ScanSettings {
        quadrature: QuadratureSettings::with_string_spacing(5.431),
        n_phi_avg: 8,
        phi_average: PhiAverage::Probability,
        helicity: HelicityPolicy::Sum,
    }
}

fn rephase(sets: &[BandSet], phases: &[f64]) -> Vec<BandSet> {
    sets.iter()
        .enumerate()
        .map(|(b, set)| {
            let mut set = set.clone();
            for (i, s) in set.states.iter_mut().enumerate() {
                let p = Complex64::from_polar(1.0, phases[(b * 31 + i * 7) % phases.len()]);
                for c in &mut s.coeffs {
                    *c *= p;
                }
            }
            set
        })
        .collect()
}

fn observables(sets: &[BandSet], beam: &BeamModel) -> (Vec<f64>, Vec<f64>, f64) {
    let a_p = 2.7155;
    let tr = build_transitions(&sets[0].states, a_p).unwrap();
    let pops = populations(sets, beam, a_p, 8).unwrap();
    let xy2 = tr.iter().map(|t| t.xy.norm_sqr()).collect();
    let w = weight_transitions(&tr, &pops, 0.0);
    let intensity = point_intensity(
        &w,
        beam.beta,
        kev_to_omega(20.0),
        30f64.to_radians(),
        29f64.to_radians(),
        &[6],
        &settings(),
    )
    .unwrap()[0];
    (xy2, pops, intensity)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-300
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rotation_preserves_norm(
        theta_k in 0.01f64..1.55,
        theta in 0.0f64..PI,
        phi in -PI..PI,
        phi_k in -PI..PI,
        kev in 1.0f64..100.0,
    ) {
        let mode = PhotonMode::new(kev_to_omega(kev), theta_k, 4, Helicity::Minus, theta, phi).unwrap();
        let k = rotate_wavevector(&mode, phi_k);
        prop_assert!((k.norm() - mode.kappa()).abs() <= 1e-12 * mode.kappa());
    }

    #[test]
    fn zero_tilt_gives_photon_frame_cone(theta_k in 0.01f64..1.55, phi in -PI..PI, phi_k in -PI..PI) {
        let mode = PhotonMode::new(kev_to_omega(10.0), theta_k, 4, Helicity::Plus, 0.0, phi).unwrap();
        let k = rotate_wavevector(&mode, phi_k);
        let s = 1e-12 * mode.kappa();
        prop_assert!((k.kx - mode.kappa_perp() * phi_k.cos()).abs() <= s);
        prop_assert!((k.ky - mode.kappa_perp() * phi_k.sin()).abs() <= s);
        prop_assert!((k.kz - mode.kappa_z()).abs() <= s);
    }

    #[test]
    fn wigner_orthogonal_and_composes(t1 in -10.0f64..10.0, t2 in -10.0f64..10.0) {
        let d = wigner_d1(t1);
        let p = d.transpose().matmul(&d);
        let c = d.matmul(&wigner_d1(t2));
        let s = wigner_d1(t1 + t2);
        for a in [1, 0, -1] {
            for b in [1, 0, -1] {
                let id = if a == b { 1.0 } else { 0.0 };
                prop_assert!((p.get(a, b) - id).abs() <= 1e-12);
                prop_assert!((c.get(a, b) - s.get(a, b)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn polarization_triple_is_complete(theta in 0.0f64..PI, phi in -PI..PI) {
        let e: Vec<_> = [1, 0, -1].iter().map(|&m| polarization_vector(m, theta, phi).unwrap()).collect();
        for i in 0..3 {
            for j in 0..3 {
                let sum: Complex64 = e.iter().map(|v| v[i] * v[j].conj()).sum();
                let id = if i == j { 1.0 } else { 0.0 };
                prop_assert!((sum - id).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn observables_ignore_eigenvector_phases(phases in prop::collection::vec(-PI..PI, 37)) {
        let f = fixture();
        let (xy0, p0, i0) = observables(&f.sets, &f.beam);
        let (xy1, p1, i1) = observables(&rephase(&f.sets, &phases), &f.beam);
        let xy_scale = xy0.iter().fold(0.0f64, |m, v| m.max(*v));
        for (a, b) in xy0.iter().zip(&xy1) {
            prop_assert!((a - b).abs() <= 1e-10 * xy_scale, "xy {a} vs {b}");
        }
        for (a, b) in p0.iter().zip(&p1) {
            prop_assert!((a - b).abs() <= 1e-12, "population {a} vs {b}");
        }
        prop_assert!(close(i0, i1, 1e-10));
    }

    #[test]
    fn intensity_is_linear_in_populations(
        p in prop::collection::vec(0.0f64..1.0, 8),
        q in prop::collection::vec(0.0f64..1.0, 8),
        t in 0.0f64..1.0,
    ) {
        let f = fixture();
        let tr = build_transitions(&f.sets[0].states, 2.7155).unwrap();
        let eval = |pops: &[f64]| {
            let w = weight_transitions(&tr, pops, 0.0);
            point_intensity(&w, f.beam.beta, kev_to_omega(25.0), 0.5236, 0.52, &[3, 9], &settings()).unwrap()
        };
        let mix: Vec<f64> = p.iter().zip(&q).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let (lhs, a, b) = (eval(&mix), eval(&p), eval(&q));
        for k in 0..2 {
            prop_assert!(close(lhs[k], t * a[k] + (1.0 - t) * b[k], 1e-10));
        }
    }

    #[test]
    fn probability_is_non_negative(re in -1e3f64..1e3, im in -1e3f64..1e3, kev in 1.0f64..50.0) {
        let f = fixture();
        let tr = build_transitions(&f.sets[0].states, 2.7155).unwrap();
        let mode = PhotonMode::new(kev_to_omega(kev), 0.5, 6, Helicity::Plus, 0.5, 0.1).unwrap();
        prop_assert!(spectral_probability(&tr[0], &mode, f.beam.beta, Complex64::new(re, im)) >= 0.0);
    }

    #[test]
    fn config_round_trips(
        energy in 1.0f64..100.0,
        theta_k in 1.0f64..89.0,
        ms in prop::collection::vec(prop_oneof![-20i32..=-3, 3i32..=20], 1..5),
        ratio in 0.0f64..2.0,
        offset in 0.0f64..1.0,
        kinetic in any::<bool>(),
    ) {
        let mut cfg = RunConfig::default();
        cfg.beam.energy_mev = energy;
        cfg.beam.energy_is_kinetic = kinetic;
        cfg.beam.theta0_over_thetac = ratio;
        cfg.photon.theta_k_deg = theta_k;
        cfg.photon.m = ms;
        cfg.crystal.string_offsets = vec![[0.0, 0.0], [offset, 1.0 - offset.max(1e-3)]];
        cfg.validate().unwrap();
        prop_assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}

#[test]
fn eigenvalues_ignore_basis_order() {
    let si = CrystalModel::silicon_100();
    let beam = BeamModel::from_energy(10.0, false).unwrap();
    let basis = Basis { cutoff: 8 };
    let table = PotentialTable::new(&si, 16);
    let h = central_equation(&table, beam.kinetic_coefficient(), si.a_p, [0.11, -0.07], basis);
    let n = h.size();
    // deterministic shuffle
    let mut perm: Vec<usize> = (0..n).collect();
    let mut state = 0x9e3779b97f4a7c15u64;
    for i in (1..n).rev() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        perm.swap(i, (state % (i as u64 + 1)) as usize);
    }
    let hp = HermitianMatrix::from_fn(n, |i, j| h.get(perm[i], perm[j]));
    let a = eigh(&h).unwrap().values;
    let b = eigh(&hp).unwrap().values;
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-10 * scale, "{x} vs {y}");
    }
}
