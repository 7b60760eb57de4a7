mod common;

use approx::assert_abs_diff_eq;
use common::{c, exp_photon, fine_grid_arm_state, rk4_solve};
use ndarray::Array1;
use num_complex::Complex64 as C64;
use optomech_core::dynamics::*;
use optomech_core::fock::{coherent_state, FockVector, TruncationPolicy};
use optomech_core::quadrature::IntegrationMethod;
use optomech_core::waveform::PhotonWaveform;
use optomech_core::Error;
use proptest::prelude::*;
use std::f64::consts::PI;

fn vacuum() -> FockVector {
    FockVector::basis(0, 1)
}

fn dist(v: &FockVector, oracle: &Array1<C64>) -> f64 {
    let n = oracle.len().max(v.dim());
    (0..n)
        .map(|k| {
            let o = oracle.get(k).copied().unwrap_or(c(0.0, 0.0));
            (v.amplitude(k) - o).norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

fn evolution(beta: f64, gamma: f64, big_gamma: f64) -> CavityEvolution {
    let w = PhotonWaveform::exponential(big_gamma).unwrap();
    let p = SystemParams::new(beta, gamma, big_gamma).unwrap();
    CavityEvolution::new(&w, &p, &vacuum()).unwrap()
}

#[test]
fn green_function_values() {
    let g = green_prompt_and_tail(0.0, 1.0).unwrap();
    assert_eq!(g.prompt_weight, 1.0);
    assert_abs_diff_eq!(g.tail, -1.0, epsilon = 1e-15);
    for gamma in [0.3, 1.0, 2.5] {
        let g = green_prompt_and_tail(2.0 / gamma, gamma).unwrap();
        assert_abs_diff_eq!(g.tail, -gamma / std::f64::consts::E, epsilon = 1e-14);
    }
    let area = common::simpson_scalar(
        |s| green_prompt_and_tail(s, 1.0).unwrap().tail,
        0.0,
        80.0,
        4000,
    );
    assert_abs_diff_eq!(area, -2.0, epsilon = 1e-9);
    assert!(matches!(
        green_prompt_and_tail(-0.1, 1.0),
        Err(Error::Domain(_))
    ));
}

#[test]
fn unshifted_mirror_closed_forms() {
    let (gamma, big_gamma) = (1.0, 2.0);
    let evo = evolution(0.0, gamma, big_gamma);
    for t in [0.5, 1.0, PI, 2.0 * PI] {
        let shape = ((-big_gamma * t).exp() - (-0.5 * gamma * t).exp()) / (0.5 * gamma - big_gamma);
        let amp = (2.0 * big_gamma).sqrt() * shape;
        let phase = C64::from_polar(1.0, -0.5 * t);
        let psi2 = evo.in_cavity(t).unwrap();
        assert!((psi2.amplitude(0) - phase * gamma.sqrt() * amp).norm() < 1e-12);
        let out = evo.boundary_out(t).unwrap();
        let expect = phase * ((2.0 * big_gamma).sqrt() * (-big_gamma * t).exp() - gamma * amp);
        assert!((out.amplitude(0) - expect).norm() < 1e-12);
        assert!(out.norm_sqr() - out.amplitude(0).norm_sqr() < 1e-24);
    }
}

#[test]
fn detection_just_behind_the_front_is_prompt_only() {
    let evo = evolution(1.0, 1.0, 1.0);
    let parts = evo.out_state_parts(1.0 + 1e-12, 1.0).unwrap();
    assert!(parts.tail.norm_sqr() < 1e-20);
    assert_abs_diff_eq!(
        parts.prompt.amplitude(0).norm(),
        2f64.sqrt(),
        epsilon = 1e-9
    );
    assert!(matches!(evo.out_state(1.0, 1.0), Err(Error::Domain(_))));
    assert!(matches!(evo.out_state(1.0, -0.5), Err(Error::Domain(_))));
}

#[test]
fn boundary_state_matches_time_stepping() {
    let f = exp_photon(1.0);
    let phi0 = Array1::from_vec(vec![c(1.0, 0.0)]);
    let sol = rk4_solve(PI, &f, 1.0, 1.0, &phi0, 40, 4000);
    let evo = evolution(1.0, 1.0, 1.0);
    assert!(dist(&evo.boundary_out(PI).unwrap(), &sol.boundary) < 1e-6);
    assert!(dist(&evo.in_cavity(PI).unwrap(), &sol.psi2) < 1e-6);
}

#[test]
fn in_cavity_state_matches_time_stepping() {
    let f = exp_photon(2.0);
    let phi0 = Array1::from_vec(vec![c(1.0, 0.0)]);
    let sol = rk4_solve(2.0, &f, 1.2, 1.0, &phi0, 45, 4000);
    let evo = evolution(1.2, 1.0, 2.0);
    assert!(dist(&evo.in_cavity(2.0).unwrap(), &sol.psi2) < 1e-6);
}

#[test]
fn coherent_start_matches_time_stepping() {
    let policy = TruncationPolicy::fixed(40);
    let phi0 = coherent_state(c(0.4, 0.2), &policy).unwrap();
    let arr = Array1::from_shape_fn(40, |n| phi0.amplitude(n));
    let f = exp_photon(1.5);
    let sol = rk4_solve(2.5, &f, 0.8, 0.7, &arr, 50, 4000);
    let w = PhotonWaveform::exponential(1.5).unwrap();
    let p = SystemParams::new(0.8, 0.7, 1.5).unwrap();
    let evo = CavityEvolution::new(&w, &p, &phi0).unwrap();
    assert!(dist(&evo.boundary_out(2.5).unwrap(), &sol.boundary) < 1e-6);
}

#[test]
fn boundary_state_matches_direct_quadrature() {
    let f = exp_photon(2.0);
    let evo = evolution(2.0, 1.0, 2.0);
    for t in [1.0, PI, 2.0 * PI] {
        let oracle = fine_grid_arm_state(t, &f, 2.0, 1.0, 60, 4000);
        assert!(
            dist(&evo.boundary_out(t).unwrap(), &oracle) < 1e-7,
            "t = {t}"
        );
    }
}

#[test]
fn closed_form_and_quadrature_agree() {
    let w = PhotonWaveform::exponential(0.7).unwrap();
    let p = SystemParams::new(1.3, 0.9, 0.7).unwrap();
    let a =
        CavityEvolution::new(&w, &p.with_method(IntegrationMethod::ClosedForm), &vacuum()).unwrap();
    let b =
        CavityEvolution::new(&w, &p.with_method(IntegrationMethod::Quadrature), &vacuum()).unwrap();
    for t in [0.3, 2.0, 5.5] {
        let d = a
            .cavity_kernel(t)
            .unwrap()
            .max_abs_diff(&b.cavity_kernel(t).unwrap());
        assert!(d < 1e-8, "t = {t}: {d}");
    }
}

#[test]
fn probability_is_conserved_on_grid() {
    for beta in [0.0, 0.5, 1.2, 2.0] {
        for big_gamma in [0.2, 1.0, 2.0] {
            let evo = evolution(beta, 1.0, big_gamma);
            for t in [1.0, PI, 2.0 * PI] {
                let total = evo.probability_budget(t).unwrap().total();
                assert!(
                    (total - 1.0).abs() < 1e-6,
                    "beta {beta} Gamma {big_gamma} t {t}: {total}"
                );
            }
        }
    }
}

#[test]
fn outgoing_mass_matches_time_stepping() {
    let f = exp_photon(2.0);
    let phi0 = Array1::from_vec(vec![c(1.0, 0.0)]);
    let sol = rk4_solve(3.0, &f, 2.0, 1.0, &phi0, 60, 6000);
    let budget = evolution(2.0, 1.0, 2.0).probability_budget(3.0).unwrap();
    assert_abs_diff_eq!(budget.outgoing, sol.outgoing, epsilon = 1e-6);
    assert_abs_diff_eq!(budget.ingoing, (-12.0f64).exp(), epsilon = 1e-14);
}

#[test]
fn sampled_waveform_tracks_exponential() {
    let n = 8001;
    let x: Vec<f64> = (0..n)
        .map(|k| -20.0 + 20.0 * k as f64 / (n - 1) as f64)
        .collect();
    let f = exp_photon(1.0);
    let mut values: Vec<C64> = x.iter().map(|&xi| f(xi)).collect();
    // exact norm of the piecewise-linear interpolant
    let mass: f64 = (1..n)
        .map(|k| {
            let (a, b) = (values[k - 1].re, values[k].re);
            (x[k] - x[k - 1]) * (a * a + a * b + b * b) / 3.0
        })
        .sum();
    values.iter_mut().for_each(|v| *v /= mass.sqrt());
    let sampled = PhotonWaveform::sampled(x, values).unwrap();
    let p = SystemParams::new(1.0, 1.0, 1.0).unwrap();
    let a = CavityEvolution::new(&sampled, &p, &vacuum()).unwrap();
    let b = evolution(1.0, 1.0, 1.0);
    let d = a
        .boundary_out(2.0)
        .unwrap()
        .max_abs_diff(&b.boundary_out(2.0).unwrap());
    assert!(d < 1e-4, "{d}");
}

#[test]
fn sampled_waveform_with_forward_support_is_rejected() {
    let x = vec![-1.0, 0.0, 1.0];
    let v = vec![c(1.0, 0.0), c(1.0, 0.0), c(0.5, 0.0)];
    assert!(matches!(
        PhotonWaveform::sampled(x, v),
        Err(Error::InvalidParameter(_))
    ));
}

#[test]
fn parameter_validation() {
    assert!(SystemParams::new(1.0, 0.0, 1.0).is_err());
    assert!(SystemParams::new(1.0, 1.0, -1.0).is_err());
    assert!(SystemParams::new(f64::NAN, 1.0, 1.0).is_err());
    assert!(PhotonWaveform::exponential(0.0).is_err());
    let w = PhotonWaveform::exponential(1.0).unwrap();
    let p = SystemParams::new(1.0, 1.0, 1.0).unwrap();
    let bad = FockVector::from_amplitudes(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
    assert!(CavityEvolution::new(&w, &p, &bad).is_err());
}

#[test]
fn free_functions_agree_with_struct() {
    let w = PhotonWaveform::exponential(1.0).unwrap();
    let p = SystemParams::new(0.9, 1.1, 1.0).unwrap();
    let evo = CavityEvolution::new(&w, &p, &vacuum()).unwrap();
    assert_eq!(
        out_state(2.0, 0.5, &w, &p, &vacuum()).unwrap(),
        evo.out_state(2.0, 0.5).unwrap()
    );
    assert_eq!(
        in_cavity_state(2.0, &w, &p, &vacuum()).unwrap(),
        evo.in_cavity(2.0).unwrap()
    );
    let audit = probability_audit(2.0, &w, &p, &vacuum()).unwrap();
    assert_abs_diff_eq!(audit, 1.0, epsilon = 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn audit_is_unity(beta in 0.0f64..2.0, gamma in 0.2f64..2.0, big_gamma in 0.2f64..3.0, t in 0.1f64..8.0) {
        let evo = evolution(beta, gamma, big_gamma);
        let total = evo.probability_budget(t).unwrap().total();
        prop_assert!((total - 1.0).abs() < 1e-6, "{}", total);
    }

    #[test]
    fn outgoing_state_is_prompt_plus_tail(beta in 0.0f64..2.0, t in 0.2f64..6.0, frac in 0.0f64..0.9) {
        let evo = evolution(beta, 1.0, 1.0);
        let x = frac * t;
        let parts = evo.out_state_parts(t, x).unwrap();
        let whole = evo.out_state(t, x).unwrap();
        prop_assert!(whole.max_abs_diff(&parts.total()) < 1e-15);
        // the outgoing norm does not depend on how far the photon has travelled
        let at_front = evo.boundary_out(t - x).unwrap();
        prop_assert!((whole.norm_sqr() - at_front.norm_sqr()).abs() < 1e-12);
    }
}
