//! Simulation-level checks of the localization observables.

use qpkr_core::anderson::{onsite_ks_between, OnsiteField};
use qpkr_core::analysis::{fit_exponential, kinetic_energy, pi0_proxy};
use qpkr_core::params::DEFAULT_OMEGA2;
use qpkr_core::{run_ensemble_adaptive, EnsembleSpec, SimParams};

fn ensemble(eps: f64, kicks: usize, times: &[usize]) -> qpkr_core::EnsembleRun {
    let p = SimParams::new(5.34, 2.89, eps)
        .with_kicks(kicks)
        .with_grid(1024)
        .validate()
        .unwrap();
    run_ensemble_adaptive(&p, &EnsembleSpec::uniform(100, 3), times, 8192).unwrap()
}

#[test]
fn modulated_profile_is_exponential_not_gaussian() {
    let run = ensemble(0.36, 200, &[200]);
    let fit = fit_exponential(&run.distributions[0]).unwrap();
    assert!(fit.exponential_preferred(), "{fit:?}");
    assert!(fit.p_loc > 1.0);
}

#[test]
fn pi0_proxy_tracks_energy_in_one_dimension() {
    // ε = 0 gives 6% at t = 200 and 14% at t = 1000 with this ensemble
    let run = ensemble(0.0, 1000, &[200, 1000]);
    for d in &run.distributions {
        let e = kinetic_energy(d, 0.0);
        let proxy = pi0_proxy(d.prob(0)).unwrap();
        assert!((proxy / e - 1.0).abs() < 0.2, "t={}: proxy {proxy}, E {e}", d.time);
    }
}

#[test]
fn onsite_disorder_statistics_do_not_depend_on_energy() {
    let a = OnsiteField::centered(256, 0.0, 2.89, DEFAULT_OMEGA2).unwrap();
    let b = OnsiteField::centered(256, 1.0, 2.89, DEFAULT_OMEGA2).unwrap();
    assert!(onsite_ks_between(&a, &b) < 0.02);
    let st = a.statistics();
    assert!(st.ks_cauchy < 0.02, "{st:?}");
    assert!(st.corr_10.abs() < 0.05 && st.corr_01.abs() < 0.05, "{st:?}");
}
