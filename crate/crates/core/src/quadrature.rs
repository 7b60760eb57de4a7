//! Composite Simpson quadrature with step refinement and Richardson extrapolation.

use ndarray::Array1;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How time integrals against the photon waveform are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntegrationMethod {
    /// Closed form when the waveform is a finite sum of exponentials, quadrature otherwise.
    #[default]
    Auto,
    ClosedForm,
    Quadrature,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Initial node spacing, in units of `1/omega_m`.
    pub base_step: f64,
    /// Step divisor applied on each refinement.
    pub refine_factor: usize,
    /// Absolute tolerance on the change between successive refinements.
    pub tolerance: f64,
    pub max_refinements: usize,
    pub method: IntegrationMethod,
}

impl QuadratureConfig {
    /// Largest admissible base step for a cavity bandwidth `gamma`.
    pub fn max_base_step(gamma: f64) -> f64 {
        (1.0 / gamma).min(1.0) / 50.0
    }

    pub fn for_gamma(gamma: f64) -> Self {
        Self {
            base_step: Self::max_base_step(gamma),
            refine_factor: 2,
            tolerance: 1e-10,
            max_refinements: 12,
            method: IntegrationMethod::Auto,
        }
    }

    pub fn with_method(mut self, method: IntegrationMethod) -> Self {
        self.method = method;
        self
    }

    pub fn validate(&self, gamma: f64) -> Result<()> {
        if !(self.base_step > 0.0) || self.base_step > Self::max_base_step(gamma) * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "base_step {} must lie in (0, min(1/gamma, 1)/50 = {}]",
                self.base_step,
                Self::max_base_step(gamma)
            )));
        }
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-4) {
            return Err(Error::invalid(format!(
                "quadrature tolerance {} outside (0, 1e-4]",
                self.tolerance
            )));
        }
        if self.refine_factor < 2 {
            return Err(Error::invalid("refine_factor must be >= 2"));
        }
        Ok(())
    }
}

/// Values that can be accumulated by the quadrature rules.
pub trait QuadValue: Clone {
    fn zeros_like(&self) -> Self;
    fn add_scaled(&mut self, w: f64, x: &Self);
    /// Max-norm distance between two values.
    fn distance(&self, other: &Self) -> f64;
}

impl QuadValue for f64 {
    fn zeros_like(&self) -> Self {
        0.0
    }

    fn add_scaled(&mut self, w: f64, x: &Self) {
        *self += w * x;
    }

    fn distance(&self, other: &Self) -> f64 {
        (self - other).abs()
    }
}

impl QuadValue for C64 {
    fn zeros_like(&self) -> Self {
        C64::new(0.0, 0.0)
    }

    fn add_scaled(&mut self, w: f64, x: &Self) {
        *self += x * w;
    }

    fn distance(&self, other: &Self) -> f64 {
        (self - other).norm()
    }
}

impl QuadValue for Array1<C64> {
    fn zeros_like(&self) -> Self {
        Array1::zeros(self.len())
    }

    fn add_scaled(&mut self, w: f64, x: &Self) {
        self.scaled_add(C64::new(w, 0.0), x);
    }

    fn distance(&self, other: &Self) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Composite Simpson rule with `intervals` (rounded up to even) subintervals.
pub fn simpson<T, F>(f: &F, a: f64, b: f64, intervals: usize) -> T
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    let n = intervals.max(2).next_multiple_of(2);
    let h = (b - a) / n as f64;
    let first = f(a);
    let mut acc = first.clone();
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc.add_scaled(w, &f(a + i as f64 * h));
    }
    acc.add_scaled(1.0, &f(b));
    let mut out = first.zeros_like();
    out.add_scaled(h / 3.0, &acc);
    out
}

/// Integrates `f` over `[a, b]`, refining the Simpson step until successive estimates agree
/// to `cfg.tolerance`, then returns the Richardson-extrapolated value.
pub fn integrate<T, F>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<T>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    if b == a {
        return Ok(f(a).zeros_like());
    }
    let len = (b - a).abs();
    let mut n = ((len / cfg.base_step).ceil() as usize)
        .max(2)
        .next_multiple_of(2);
    let mut prev = simpson(&f, a, b, n);
    let ratio = (cfg.refine_factor as f64).powi(4);
    let mut change = f64::INFINITY;
    for _ in 0..cfg.max_refinements {
        n *= cfg.refine_factor;
        let next = simpson(&f, a, b, n);
        change = next.distance(&prev);
        if change <= cfg.tolerance {
            // Richardson: S + (S - S_prev) / (r^4 - 1)
            let mut out = next.clone();
            out.add_scaled(1.0 / (ratio - 1.0), &next);
            out.add_scaled(-1.0 / (ratio - 1.0), &prev);
            return Ok(out);
        }
        prev = next;
    }
    Err(Error::QuadratureNonconvergence {
        change,
        tolerance: cfg.tolerance,
    })
}
