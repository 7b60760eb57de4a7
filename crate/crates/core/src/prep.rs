//! Conditional preparation of mirror states by shaping the ingoing photon and
//! post-selecting its arrival time at the dark port.
//!
//! Targets are expanded in displaced number states `|n~> = D(beta)|n>`. With the
//! mirror starting in its ground state, the waveform
//! `F(x) = sqrt(gamma) e^{(gamma/2 - i beta^2 + i n) x}` heralds `|n~>` at `tau = 2 pi`.

use std::cell::Cell;
use std::f64::consts::PI;

use argmin::core::{CostFunction, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::neldermead::NelderMead;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{CavityEvolution, SystemParams};
use crate::error::{Error, Result};
use crate::fock::{
    coherent_amplitudes, displacement_operator, vacuum_shift_overlap, FockVector, TruncationPolicy,
};
use crate::quadrature::{integrate, IntegrationMethod, QuadratureConfig};
use crate::waveform::PhotonWaveform;

/// Cavity bandwidth `gamma / omega_m` that maximizes the heralding probability.
pub const OPTIMAL_GAMMA: f64 = 3.0 / (2.0 * PI);

/// Normalization tolerance for target coefficients.
pub const TARGET_NORM_TOL: f64 = 1e-10;

/// `|sum c~| <= GENERIC_TOL` marks a target whose window diverges.
pub const GENERIC_TOL: f64 = 1e-8;

/// `sum_n c_n |n~>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub coeffs: Vec<C64>,
    pub beta: f64,
}

impl TargetState {
    pub fn new(coeffs: Vec<C64>, beta: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("target needs at least one coefficient"));
        }
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::invalid(format!(
                "beta = {beta} must be finite and >= 0"
            )));
        }
        if coeffs
            .iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::invalid("target coefficients must be finite"));
        }
        let n: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        if (n - 1.0).abs() > TARGET_NORM_TOL {
            return Err(Error::invalid(format!("target norm^2 = {n}, expected 1")));
        }
        Ok(Self { coeffs, beta })
    }

    /// Normalizes `coeffs` first.
    pub fn normalized(coeffs: Vec<C64>, beta: f64) -> Result<Self> {
        let n: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::invalid("target coefficients vanish"));
        }
        Self::new(coeffs.into_iter().map(|c| c / n).collect(), beta)
    }

    pub fn fock(n: usize, beta: f64) -> Result<Self> {
        let mut coeffs = vec![C64::new(0.0, 0.0); n + 1];
        coeffs[n] = C64::new(1.0, 0.0);
        Self::new(coeffs, beta)
    }

    /// `c~_n = c_n / <-beta|n>`.
    pub fn tilde_coeffs(&self) -> Result<Vec<C64>> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(n, &c)| {
                if c.norm_sqr() == 0.0 {
                    return Ok(C64::new(0.0, 0.0));
                }
                let o = vacuum_shift_overlap(self.beta, n);
                let t = c / o;
                if o == 0.0 || !t.re.is_finite() || !t.im.is_finite() {
                    return Err(Error::DivergentCoefficients(format!(
                        "c~_{n} = c_{n} / <-beta|{n}> overflows at beta = {}",
                        self.beta
                    )));
                }
                Ok(t)
            })
            .collect()
    }

    /// `<psi_tg|-beta>` in the displaced frame, `sum conj(c_n) <n|-beta>`.
    pub fn vacuum_overlap(&self) -> C64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| c.conj() * vacuum_shift_overlap(self.beta, n))
            .sum()
    }

    /// The target in the undisplaced number basis.
    pub fn to_fock(&self, policy: &TruncationPolicy) -> Result<FockVector> {
        let top = self.coeffs.len() - 1;
        let dim = policy
            .dim_for_radius(2.0 * self.beta + (top as f64).sqrt())?
            .max(self.coeffs.len());
        let v = FockVector::from_amplitudes(
            (0..dim)
                .map(|n| self.coeffs.get(n).copied().unwrap_or_default())
                .collect::<Vec<_>>(),
        )?;
        Ok(displacement_operator(C64::new(self.beta, 0.0), dim).apply(&v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrepReport {
    pub window_delta_tau: f64,
    pub success_probability: f64,
    /// Worst overlap `|<target|psi>| / |psi|` at the window edges `2 pi +- delta_tau`.
    pub achieved_overlap: f64,
    pub normalization_z: f64,
}

/// Heralding probability; `exceeds_unity` flags the regime where the small-window
/// expansion behind it no longer holds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessProbability {
    pub value: f64,
    pub exceeds_unity: bool,
}

impl SuccessProbability {
    fn new(value: f64) -> Self {
        Self {
            value,
            exceeds_unity: value > 1.0,
        }
    }
}

/// Unnormalized conditional mirror state and its squared norm (the detection density).
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalResult {
    pub state: FockVector,
    pub density: f64,
}

/// Waveform heralding `|n~>`.
pub fn fock_prep_waveform(n: usize, beta: f64, gamma: f64) -> Result<PhotonWaveform> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid(format!("gamma = {gamma} must be > 0")));
    }
    if !beta.is_finite() {
        return Err(Error::invalid("beta must be finite"));
    }
    Ok(PhotonWaveform::FockPrep { n, beta, gamma })
}

/// Dark-port conditional state `(gamma / 2) K(t)`; prompt reflections cancel at this port.
pub fn conditional_state(
    t: f64,
    waveform: &PhotonWaveform,
    params: &SystemParams,
    phi0: &FockVector,
) -> Result<ConditionalResult> {
    conditional_state_with(&CavityEvolution::new(waveform, params, phi0)?, t)
}

pub fn conditional_state_with(evo: &CavityEvolution, t: f64) -> Result<ConditionalResult> {
    let k = evo.cavity_kernel(t)?;
    let state = k.scaled(C64::new(0.5 * evo.params().gamma, 0.0));
    let density = state.norm_sqr();
    Ok(ConditionalResult { state, density })
}

/// `int_0^upper e^{-i n phi} |-beta e^{i phi}> d phi`.
pub fn circle_integral(
    n: usize,
    beta: f64,
    upper_phi: f64,
    policy: &TruncationPolicy,
) -> Result<FockVector> {
    if !(0.0..=2.0 * PI).contains(&upper_phi) {
        return Err(Error::Domain(format!(
            "upper limit {upper_phi} outside [0, 2 pi]"
        )));
    }
    let dim = policy.dim_for_radius(beta.abs())?.max(n + 1);
    if upper_phi == 0.0 {
        return Ok(FockVector::zeros(dim));
    }
    let cfg = QuadratureConfig {
        base_step: 2.0 * PI / 64.0,
        refine_factor: 2,
        tolerance: 1e-12,
        max_refinements: 12,
        method: IntegrationMethod::Quadrature,
    };
    let amps = integrate(
        |phi: f64| {
            let alpha = C64::from_polar(-beta, phi);
            coherent_amplitudes(alpha, dim) * C64::from_polar(1.0, -(n as f64) * phi)
        },
        0.0,
        upper_phi,
        &cfg,
    )?;
    FockVector::from_amplitudes(amps)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::invalid(format!(
            "epsilon = {epsilon} outside (0, 0.5)"
        )));
    }
    Ok(())
}

fn fock_overlap(n: usize, beta: f64) -> Result<f64> {
    let o = vacuum_shift_overlap(beta, n).abs();
    if o >= 1.0 - 1e-12 {
        return Err(Error::DegenerateTarget { overlap: o });
    }
    Ok(o)
}

/// Arrival-time window `delta_tau` around `2 pi` keeping the overlap with `|n~>` above `1 - epsilon`.
pub fn fidelity_window_fock(n: usize, beta: f64, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let o = fock_overlap(n, beta)?;
    Ok((8.0 * PI * PI * epsilon).sqrt() * o / (1.0 - o * o).sqrt())
}

/// `(pi x)^3 e^{-2 pi x}`, the bandwidth dependence of the heralding probability.
pub fn bandwidth_factor(gamma_over_omega: f64) -> f64 {
    (PI * gamma_over_omega).powi(3) * (-2.0 * PI * gamma_over_omega).exp()
}

/// Probability of heralding `|n~>` with overlap at least `1 - epsilon`.
pub fn success_probability_fock(
    n: usize,
    beta: f64,
    epsilon: f64,
    gamma_over_omega: f64,
) -> Result<SuccessProbability> {
    check_epsilon(epsilon)?;
    if !(gamma_over_omega > 0.0) {
        return Err(Error::invalid("gamma / omega_m must be > 0"));
    }
    let o = fock_overlap(n, beta)?;
    let p = 2.0 * (8.0 * epsilon).sqrt() * bandwidth_factor(gamma_over_omega) * o.powi(3)
        / (1.0 - o * o).sqrt();
    Ok(SuccessProbability::new(p))
}

/// `Z^2 = sum_{j,k} c~_j conj(c~_k) / (1 + i (j - k) / gamma)`.
fn z_squared(tilde: &[C64], gamma: f64) -> Result<f64> {
    let mut acc = C64::new(0.0, 0.0);
    for (j, cj) in tilde.iter().enumerate() {
        for (k, ck) in tilde.iter().enumerate() {
            acc += cj * ck.conj() / C64::new(1.0, (j as f64 - k as f64) / gamma);
        }
    }
    if !acc.re.is_finite() || !(acc.re > 0.0) {
        return Err(Error::DivergentCoefficients(format!(
            "normalization sum Z^2 = {acc}"
        )));
    }
    Ok(acc.re)
}

/// Modulated waveform heralding `target` at `tau = 2 pi`, with its normalization `Z`.
pub fn arbitrary_prep_waveform(target: &TargetState, gamma: f64) -> Result<(PhotonWaveform, f64)> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid(format!("gamma = {gamma} must be > 0")));
    }
    let tilde = target.tilde_coeffs()?;
    let z = z_squared(&tilde, gamma)?.sqrt();
    let w = PhotonWaveform::ModulatedPrep {
        coeffs: tilde,
        beta: target.beta,
        gamma,
        z,
    };
    w.validate()
        .map_err(|e| Error::DivergentCoefficients(e.to_string()))?;
    Ok((w, z))
}

/// Heralding probability, window and edge overlap for an arbitrary target at `gamma = 3 / (2 pi)`.
pub fn success_probability_state(target: &TargetState, epsilon: f64) -> Result<PrepReport> {
    check_epsilon(epsilon)?;
    let tilde = target.tilde_coeffs()?;
    let s: C64 = tilde.iter().sum();
    if s.norm() <= GENERIC_TOL {
        return Err(Error::NongenericTarget { sum: s.norm() });
    }
    let w = target.vacuum_overlap();
    let one_minus = 1.0 - w.norm_sqr();
    if !(one_minus > 1e-24) {
        return Err(Error::DegenerateTarget { overlap: w.norm() });
    }
    let z2 = z_squared(&tilde, OPTIMAL_GAMMA)?;
    let window = (8.0 * PI * PI * epsilon).sqrt() / (s.norm() * one_minus.sqrt());
    let p = 2.0 * (8.0 * epsilon).sqrt() * bandwidth_factor(OPTIMAL_GAMMA)
        / (one_minus.sqrt() * s.norm() * z2);
    // the state at 2 pi + delta is proportional to target + (delta S / 2 pi) |-beta>
    let edge = |delta: f64| {
        let u = s * (delta / (2.0 * PI));
        let num = (C64::new(1.0, 0.0) + u * w).norm();
        let den = (1.0 + 2.0 * (u * w).re + u.norm_sqr()).sqrt();
        num / den
    };
    let achieved = edge(window).min(edge(-window)).min(1.0);
    Ok(PrepReport {
        window_delta_tau: window,
        success_probability: p,
        achieved_overlap: achieved,
        normalization_z: z2.sqrt(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub seed: u64,
    /// Random starts on the unit sphere; the `j + 1` basis states are always tried as well.
    pub starts: usize,
    /// Simplex spread of `ln P` at which a local search counts as converged.
    pub tolerance: f64,
    pub max_iters: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            seed: 0x5eed,
            starts: 32,
            tolerance: 1e-6,
            max_iters: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceMinimum {
    pub probability: f64,
    /// Minimizing coefficients over `|0~> .. |j~>`, first nonzero entry real and nonnegative.
    pub coeffs: Vec<C64>,
    pub converged_starts: usize,
}

const PENALTY: f64 = 1e6;

/// `ln P` over unnormalized real parameters `(a_0, re a_1, im a_1, ...)`.
struct LogSuccess {
    j: usize,
    beta: f64,
    epsilon: f64,
    evals: Cell<u64>,
}

impl LogSuccess {
    fn coeffs(&self, x: &[f64]) -> Vec<C64> {
        let mut c = Vec::with_capacity(self.j + 1);
        c.push(C64::new(x[0], 0.0));
        for l in 1..=self.j {
            c.push(C64::new(x[2 * l - 1], x[2 * l]));
        }
        c
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.evals.set(self.evals.get() + 1);
        TargetState::normalized(self.coeffs(x), self.beta)
            .and_then(|t| success_probability_state(&t, self.epsilon))
            .map(|r| r.success_probability.ln())
            .ok()
            .filter(|v| v.is_finite())
            .unwrap_or(PENALTY)
    }
}

impl CostFunction for LogSuccess {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.value(x))
    }
}

fn gauge_fix(mut c: Vec<C64>) -> Vec<C64> {
    if let Some(first) = c.iter().find(|z| z.norm() > 1e-14).copied() {
        let ph = first.conj() / first.norm();
        for z in c.iter_mut() {
            *z *= ph;
        }
    }
    c
}

fn to_params(c: &[C64]) -> Vec<f64> {
    let c = gauge_fix(c.to_vec());
    let mut x = vec![c[0].re];
    for z in &c[1..] {
        x.push(z.re);
        x.push(z.im);
    }
    x
}

struct LocalResult {
    log_p: f64,
    x: Vec<f64>,
    converged: bool,
}

fn local_search(
    problem: LogSuccess,
    start: Vec<f64>,
    cfg: &OptimizerConfig,
) -> Result<LocalResult> {
    let dim = start.len();
    let step = 0.25;
    let mut simplex = vec![start.clone()];
    for i in 0..dim {
        let mut v = start.clone();
        v[i] += if v[i] >= 0.0 { step } else { -step };
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(cfg.tolerance)
        .map_err(|e| Error::OptimizerNonconvergence(e.to_string()))?;
    let res = Executor::new(problem, solver)
        .configure(|s| s.max_iters(cfg.max_iters))
        .run()
        .map_err(|e| Error::OptimizerNonconvergence(e.to_string()))?;
    let state = res.state();
    let converged = matches!(
        state.get_termination_status(),
        TerminationStatus::Terminated(TerminationReason::SolverConverged)
    );
    let x = state
        .get_best_param()
        .cloned()
        .ok_or_else(|| Error::OptimizerNonconvergence("no iterate recorded".into()))?;
    Ok(LocalResult {
        log_p: state.get_best_cost(),
        x,
        converged,
    })
}

/// Smallest heralding probability over all states in `span{|0~>, .., |j~>}`.
pub fn min_success_over_subspace(
    j: usize,
    beta: f64,
    epsilon: f64,
    opt: &OptimizerConfig,
) -> Result<SubspaceMinimum> {
    if j < 1 {
        return Err(Error::invalid("subspace index j must be >= 1"));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::invalid(format!("beta = {beta} must be > 0")));
    }
    check_epsilon(epsilon)?;
    if !(opt.tolerance > 0.0) || opt.max_iters == 0 {
        return Err(Error::invalid(
            "optimizer tolerance and iteration budget must be positive",
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
    let mut starts: Vec<Vec<C64>> = (0..=j)
        .map(|l| {
            let mut c = vec![C64::new(0.0, 0.0); j + 1];
            c[l] = C64::new(1.0, 0.0);
            c
        })
        .collect();
    for _ in 0..opt.starts {
        let c: Vec<C64> = (0..=j)
            .map(|_| {
                C64::new(
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                )
            })
            .collect();
        let n = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        starts.push(c.into_iter().map(|z| z / n).collect());
    }

    let results: Vec<Result<LocalResult>> = starts
        .par_iter()
        .map(|c| {
            let problem = LogSuccess {
                j,
                beta,
                epsilon,
                evals: Cell::new(0),
            };
            local_search(problem, to_params(c), opt)
        })
        .collect();

    let mut best: Option<LocalResult> = None;
    let mut converged_starts = 0;
    for r in results {
        let r = r?;
        converged_starts += usize::from(r.converged);
        if best.as_ref().is_none_or(|b| r.log_p < b.log_p) {
            best = Some(r);
        }
    }
    let best = best.expect("at least one start");
    if converged_starts == 0 {
        return Err(Error::OptimizerNonconvergence(format!(
            "no local search reached tolerance {} within {} iterations",
            opt.tolerance, opt.max_iters
        )));
    }
    if best.log_p >= PENALTY {
        return Err(Error::OptimizerNonconvergence(
            "every iterate hit the nongeneric boundary".into(),
        ));
    }
    let probe = LogSuccess {
        j,
        beta,
        epsilon,
        evals: Cell::new(0),
    };
    let target = TargetState::normalized(probe.coeffs(&best.x), beta)?;
    Ok(SubspaceMinimum {
        probability: best.log_p.exp(),
        coeffs: gauge_fix(target.coeffs),
        converged_starts,
    })
}
