//! Exact single-photon open dynamics of one cavity with a movable end mirror.
//!
//! Times are in units of `1/omega_m` and rates in units of `omega_m`. The mirror
//! state entangled with an outgoing photon at the front mirror is
//!
//! ```text
//! psi_1(0+, t) = F(-t) U_m(t) phi_0 - gamma * K(t)
//! psi_2(t)     = sqrt(gamma) * K(t)
//! K(t)         = int_0^t e^{-gamma (t - s)/2} F(-s) U_gamma(t - s) U_m(s) phi_0 ds
//! ```
//!
//! and `psi_1(x, t) = U_m(x) psi_1(0+, t - x)` further out. The prompt term is
//! always added analytically; only `K(t)` is integrated. `K` is evaluated in the
//! displaced number basis, where `U_gamma` is diagonal.

use ndarray::Array1;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{displacement_operator, free_evolve, FockVector, Operator, TruncationPolicy};
use crate::quadrature::{integrate, IntegrationMethod, QuadratureConfig};
use crate::waveform::{ExpTerm, PhotonWaveform};

/// Dimensionless system description (`omega_m = 1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Optomechanical coupling `beta`.
    pub beta: f64,
    /// Cavity bandwidth `gamma / omega_m`.
    pub gamma: f64,
    /// Photon frequency width `Gamma / omega_m`.
    pub big_gamma: f64,
    /// Detuning phase between the interferometer arms, radians.
    pub phi: f64,
    pub policy: TruncationPolicy,
    pub quad: QuadratureConfig,
}

impl SystemParams {
    pub fn new(beta: f64, gamma: f64, big_gamma: f64) -> Result<Self> {
        let p = Self {
            beta,
            gamma,
            big_gamma,
            phi: 0.0,
            policy: TruncationPolicy::default(),
            quad: QuadratureConfig::for_gamma(if gamma > 0.0 { gamma } else { 1.0 }),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        Self {
            beta,
            ..self.clone()
        }
    }

    pub fn with_method(&self, method: IntegrationMethod) -> Self {
        let mut p = self.clone();
        p.quad.method = method;
        p
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("big_gamma", self.big_gamma),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(format!(
                    "{name} = {v} must be finite and >= 0"
                )));
            }
        }
        if !(self.gamma > 0.0) {
            return Err(Error::invalid("cavity bandwidth gamma must be > 0"));
        }
        if !self.phi.is_finite() {
            return Err(Error::invalid("detuning phase must be finite"));
        }
        self.policy.validate()?;
        self.quad.validate(self.gamma)
    }
}

/// The two pieces of the cavity Green function `G(dt) = delta_+(dt) - gamma e^{-gamma dt/2}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreenFunction {
    /// Weight of the prompt-reflection delta, always handled analytically.
    pub prompt_weight: f64,
    /// Smooth part leaking back out of the cavity.
    pub tail: f64,
}

pub fn green_prompt_and_tail(dt: f64, gamma: f64) -> Result<GreenFunction> {
    if !(dt >= 0.0) {
        return Err(Error::Domain(format!(
            "Green function delay {dt} must be >= 0"
        )));
    }
    Ok(GreenFunction {
        prompt_weight: 1.0,
        tail: -gamma * (-0.5 * gamma * dt).exp(),
    })
}

/// Prompt-reflection and cavity-emission parts of an outgoing mirror state.
#[derive(Clone, Debug, PartialEq)]
pub struct OutStateParts {
    pub prompt: FockVector,
    pub tail: FockVector,
}

impl OutStateParts {
    pub fn total(&self) -> FockVector {
        &self.prompt + &self.tail
    }
}

/// Joint photon-mirror state at time `t`, sampled on an outgoing `x` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct JointStateSnapshot {
    pub t: f64,
    /// `(x, psi_1(x, t))` for `0 <= x < t`.
    pub psi1: Vec<(f64, FockVector)>,
    pub psi2: FockVector,
}

/// Probability budget of the joint state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityBudget {
    /// Photon still travelling towards the cavity.
    pub ingoing: f64,
    /// Photon already reflected or emitted.
    pub outgoing: f64,
    /// Photon stored in the cavity.
    pub in_cavity: f64,
}

impl ProbabilityBudget {
    pub fn total(&self) -> f64 {
        self.ingoing + self.outgoing + self.in_cavity
    }
}

/// `(e^{z} - 1) / z`, accurate near `z = 0`.
fn phi1(z: C64) -> C64 {
    if z.norm() < 1e-3 {
        // 1 + z/2 + z^2/6 + z^3/24 + z^4/120
        C64::new(1.0, 0.0) + z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0)))
    } else {
        (z.exp() - 1.0) / z
    }
}

/// `int_0^t e^{-a (t - s)} e^{-c s} ds`, finite for `Re a, Re c >= 0`.
fn decay_convolution(a: C64, c: C64, t: f64) -> C64 {
    // = e^{-a t} t phi1((a - c) t)
    let b = a - c;
    if (b * t).norm() < 1e-3 {
        (-a * t).exp() * t * phi1(b * t)
    } else {
        ((-c * t).exp() - (-a * t).exp()) / b
    }
}

/// Single-cavity evolution for a fixed waveform, parameter set and initial mirror state.
///
/// Holds the displacement matrix so that repeated evaluations at different times are cheap.
#[derive(Clone, Debug)]
pub struct CavityEvolution {
    waveform: PhotonWaveform,
    params: SystemParams,
    phi0: FockVector,
    dim: usize,
    /// `D(beta)`, or `None` when `beta = 0`.
    displacement: Option<Operator>,
    /// Columns `D(beta)^dag |m> phi0_m` for the occupied `m`.
    sources: Vec<(usize, Array1<C64>)>,
    terms: Option<Vec<ExpTerm>>,
}

impl CavityEvolution {
    pub fn new(
        waveform: &PhotonWaveform,
        params: &SystemParams,
        phi0: &FockVector,
    ) -> Result<Self> {
        params.validate()?;
        if !phi0.is_normalized() || !phi0.is_finite() {
            return Err(Error::invalid(
                "initial mirror state must be finite and normalized",
            ));
        }
        let top = phi0.highest_occupied().unwrap_or(0);
        let radius = 2.0 * params.beta + (top as f64).sqrt();
        let dim = params.policy.dim_for_radius(radius)?.max(phi0.dim());
        let phi0 = phi0.resized(dim);
        let displacement = if params.beta == 0.0 {
            None
        } else {
            Some(displacement_operator(C64::new(params.beta, 0.0), dim))
        };
        let adj = displacement.as_ref().map(Operator::adjoint);
        let sources = phi0
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() > 0.0)
            .map(|(m, &a)| {
                let col = match &adj {
                    Some(dd) => dd.matrix().column(m).mapv(|v| v * a),
                    None => {
                        let mut e = Array1::zeros(dim);
                        e[m] = a;
                        e
                    }
                };
                (m, col)
            })
            .collect();
        let terms = match params.quad.method {
            IntegrationMethod::Quadrature => None,
            IntegrationMethod::Auto => waveform.exp_terms(),
            IntegrationMethod::ClosedForm => Some(waveform.exp_terms().ok_or_else(|| {
                Error::invalid("closed-form integration needs an exponential-sum waveform")
            })?),
        };
        Ok(Self {
            waveform: waveform.clone(),
            params: params.clone(),
            phi0,
            dim,
            displacement,
            sources,
            terms,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn waveform(&self) -> &PhotonWaveform {
        &self.waveform
    }

    /// Decay-plus-phase rate `gamma/2 + i(n + 1/2 - beta^2)` of displaced level `n`.
    fn level_rate(&self, n: usize) -> C64 {
        let b2 = self.params.beta * self.params.beta;
        C64::new(0.5 * self.params.gamma, n as f64 + 0.5 - b2)
    }

    /// `K(t)` expressed in the displaced number basis.
    fn kernel_displaced(&self, t: f64) -> Result<Array1<C64>> {
        let dim = self.dim;
        if t == 0.0 {
            return Ok(Array1::zeros(dim));
        }
        match &self.terms {
            Some(terms) => {
                let mut out = Array1::<C64>::zeros(dim);
                for (m, col) in &self.sources {
                    let free = C64::new(0.0, *m as f64 + 0.5);
                    for (n, o) in out.iter_mut().enumerate() {
                        let a = self.level_rate(n);
                        let k: C64 = terms
                            .iter()
                            .map(|term| term.amplitude * decay_convolution(a, term.rate + free, t))
                            .sum();
                        *o += col[n] * k;
                    }
                }
                Ok(out)
            }
            None => {
                let rates: Array1<C64> = (0..dim).map(|n| self.level_rate(n)).collect();
                let f = |s: f64| -> Array1<C64> {
                    let amp = self.waveform.eval(-s);
                    let mut v = Array1::<C64>::zeros(dim);
                    if amp.norm_sqr() == 0.0 {
                        return v;
                    }
                    for (m, col) in &self.sources {
                        let ph = C64::from_polar(1.0, -(*m as f64 + 0.5) * s) * amp;
                        v.scaled_add(ph, col);
                    }
                    for (vi, r) in v.iter_mut().zip(rates.iter()) {
                        *vi *= (-r * (t - s)).exp();
                    }
                    v
                };
                integrate(f, 0.0, t, &self.params.quad)
            }
        }
    }

    /// `K(t) = int_0^t e^{-gamma(t-s)/2} F(-s) U_gamma(t-s) U_m(s) phi0 ds` in the number basis.
    pub fn cavity_kernel(&self, t: f64) -> Result<FockVector> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("time {t} must be >= 0")));
        }
        let c = self.kernel_displaced(t)?;
        Ok(match &self.displacement {
            Some(d) => FockVector::from_array(d.matrix().dot(&c)),
            None => FockVector::from_array(c),
        })
    }

    /// Prompt reflection `F(-t) U_m(t) phi0`.
    pub fn prompt(&self, t: f64) -> FockVector {
        free_evolve(&self.phi0, t).scaled(self.waveform.eval(-t))
    }

    /// `psi_1(0+, t)` split into prompt and cavity-emitted parts.
    pub fn boundary_parts(&self, t: f64) -> Result<OutStateParts> {
        let tail = self
            .cavity_kernel(t)?
            .scaled(C64::new(-self.params.gamma, 0.0));
        Ok(OutStateParts {
            prompt: self.prompt(t),
            tail,
        })
    }

    /// Outgoing mirror state at the front mirror, `psi_1(0+, t)`.
    pub fn boundary_out(&self, t: f64) -> Result<FockVector> {
        Ok(self.boundary_parts(t)?.total())
    }

    /// `psi_1(x, t)` for a photon at `x > 0` at time `t > x`.
    pub fn out_state_parts(&self, t: f64, x: f64) -> Result<OutStateParts> {
        if !(x >= 0.0) || !(t > x) || !t.is_finite() {
            return Err(Error::Domain(format!(
                "outgoing state needs t > x >= 0, got t = {t}, x = {x}"
            )));
        }
        let parts = self.boundary_parts(t - x)?;
        Ok(OutStateParts {
            prompt: free_evolve(&parts.prompt, x),
            tail: free_evolve(&parts.tail, x),
        })
    }

    pub fn out_state(&self, t: f64, x: f64) -> Result<FockVector> {
        Ok(self.out_state_parts(t, x)?.total())
    }

    /// In-cavity component `psi_2(t)`.
    pub fn in_cavity(&self, t: f64) -> Result<FockVector> {
        Ok(self
            .cavity_kernel(t)?
            .scaled(C64::new(self.params.gamma.sqrt(), 0.0)))
    }

    /// Decomposes the total probability at time `t`.
    pub fn probability_budget(&self, t: f64) -> Result<ProbabilityBudget> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("time {t} must be >= 0")));
        }
        let ingoing = self.waveform.ingoing_mass(t);
        // int_0^t |psi_1(x, t)|^2 dx = int_0^t |psi_1(0+, s)|^2 ds since U_m(x) is unitary
        let outgoing = if t == 0.0 {
            0.0
        } else {
            integrate(
                |s: f64| {
                    self.boundary_out(s)
                        .map(|v| v.norm_sqr())
                        .unwrap_or(f64::NAN)
                },
                0.0,
                t,
                &self.params.quad,
            )?
        };
        if !outgoing.is_finite() {
            return Err(Error::QuadratureNonconvergence {
                change: f64::NAN,
                tolerance: self.params.quad.tolerance,
            });
        }
        let in_cavity = self.in_cavity(t)?.norm_sqr();
        Ok(ProbabilityBudget {
            ingoing,
            outgoing,
            in_cavity,
        })
    }

    /// Samples `psi_1` on `x = 0, dx, 2dx, ... < t` together with `psi_2(t)`.
    pub fn snapshot(&self, t: f64) -> Result<JointStateSnapshot> {
        let dx = self.params.quad.base_step;
        let mut psi1 = Vec::new();
        let mut k = 0usize;
        loop {
            let x = k as f64 * dx;
            if x >= t {
                break;
            }
            psi1.push((x, self.out_state(t, x)?));
            k += 1;
        }
        Ok(JointStateSnapshot {
            t,
            psi1,
            psi2: self.in_cavity(t)?,
        })
    }
}

/// `|psi_1(x, t)> = M |phi0>` for an outgoing photon detected at `x` at time `t > x`.
pub fn out_state(
    t: f64,
    x: f64,
    waveform: &PhotonWaveform,
    params: &SystemParams,
    phi0: &FockVector,
) -> Result<FockVector> {
    CavityEvolution::new(waveform, params, phi0)?.out_state(t, x)
}

/// In-cavity component `|psi_2(t)>`.
pub fn in_cavity_state(
    t: f64,
    waveform: &PhotonWaveform,
    params: &SystemParams,
    phi0: &FockVector,
) -> Result<FockVector> {
    CavityEvolution::new(waveform, params, phi0)?.in_cavity(t)
}

/// Total probability `int |psi_1|^2 dx + |psi_2|^2`; equals one for a correct solution.
pub fn probability_audit(
    t: f64,
    waveform: &PhotonWaveform,
    params: &SystemParams,
    phi0: &FockVector,
) -> Result<f64> {
    Ok(CavityEvolution::new(waveform, params, phi0)?
        .probability_budget(t)?
        .total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn vacuum() -> FockVector {
        FockVector::basis(0, 1)
    }

    #[test]
    fn green_function_values() {
        let g = green_prompt_and_tail(0.0, 1.0).unwrap();
        assert_eq!(g.prompt_weight, 1.0);
        assert_abs_diff_eq!(g.tail, -1.0, epsilon = 1e-15);
        let g = green_prompt_and_tail(2.0 / 3.0, 3.0).unwrap();
        assert_abs_diff_eq!(g.tail, -3.0 / std::f64::consts::E, epsilon = 1e-14);
        assert!(green_prompt_and_tail(-1.0, 1.0).is_err());
    }

    #[test]
    fn phi1_series_matches_direct() {
        for z in [C64::new(2e-3, 1e-3), C64::new(-1e-3, 1.2e-3)] {
            let direct = (z.exp() - 1.0) / z;
            let small = z * 0.1;
            assert!((phi1(z) - direct).norm() < 1e-14);
            assert!((phi1(small) - (small.exp() - 1.0) / small).norm() < 1e-12);
        }
    }

    #[test]
    fn decoupled_reflection_closed_form() {
        let (g, big) = (1.0, 0.6);
        let params = SystemParams::new(0.0, g, big).unwrap();
        let w = PhotonWaveform::exponential(big).unwrap();
        let t = 1.9;
        let v = out_state(t, 0.0, &w, &params, &vacuum()).unwrap();
        // sqrt(2G) [e^{-G t} - g (e^{-G t} - e^{-g t/2}) / (g/2 - G)]
        let amp = (2.0 * big).sqrt()
            * ((-big * t).exp() - g * ((-big * t).exp() - (-0.5 * g * t).exp()) / (0.5 * g - big));
        assert_abs_diff_eq!(v.norm_sqr(), amp * amp, epsilon = 1e-12);
    }

    #[test]
    fn in_cavity_zero_at_start_and_closed_form_when_decoupled() {
        let (g, big) = (1.0, 2.0);
        let params = SystemParams::new(0.0, g, big).unwrap();
        let w = PhotonWaveform::exponential(big).unwrap();
        assert_eq!(
            in_cavity_state(0.0, &w, &params, &vacuum()).unwrap().norm(),
            0.0
        );
        let t = 1.3;
        let v = in_cavity_state(t, &w, &params, &vacuum()).unwrap();
        let c = ((-big * t).exp() - (-0.5 * g * t).exp()) / (0.5 * g - big);
        assert_abs_diff_eq!(v.norm_sqr(), 2.0 * g * big * c * c, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_rate_uses_limit() {
        // Gamma = gamma / 2 makes the closed-form denominator vanish
        let (g, big) = (1.0, 0.5);
        let params = SystemParams::new(0.0, g, big).unwrap();
        let w = PhotonWaveform::exponential(big).unwrap();
        let t = 2.0;
        let v = in_cavity_state(t, &w, &params, &vacuum()).unwrap();
        let expect = 2.0 * g * big * (t * (-0.5 * g * t).exp()).powi(2);
        assert_abs_diff_eq!(v.norm_sqr(), expect, epsilon = 1e-12);
        assert_abs_diff_eq!(
            probability_audit(t, &w, &params, &vacuum()).unwrap(),
            1.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn domain_errors() {
        let params = SystemParams::new(1.0, 1.0, 1.0).unwrap();
        let w = PhotonWaveform::exponential(1.0).unwrap();
        assert!(matches!(
            out_state(1.0, 1.0, &w, &params, &vacuum()),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            out_state(1.0, -0.1, &w, &params, &vacuum()),
            Err(Error::Domain(_))
        ));
        let unnormalized = FockVector::from_amplitudes(vec![C64::new(2.0, 0.0)]).unwrap();
        assert!(out_state(2.0, 1.0, &w, &params, &unnormalized).is_err());
    }

    #[test]
    fn audit_at_time_zero_is_waveform_norm() {
        let params = SystemParams::new(1.2, 1.0, 0.2).unwrap();
        let w = PhotonWaveform::exponential(0.2).unwrap();
        assert_abs_diff_eq!(
            probability_audit(0.0, &w, &params, &vacuum()).unwrap(),
            1.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(SystemParams::new(-1.0, 1.0, 1.0).is_err());
        assert!(SystemParams::new(1.0, 0.0, 1.0).is_err());
        assert!(SystemParams::new(f64::NAN, 1.0, 1.0).is_err());
    }
}
