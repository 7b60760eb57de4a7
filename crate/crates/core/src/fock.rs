//! Truncated Fock-space algebra for the mechanical oscillator.
//!
//! States are dense amplitude vectors over the number basis `|0>, |1>, ...`.
//! Coherent states follow the `e^{-|a|^2/2} a^n / sqrt(n!)` convention with a
//! real, positive vacuum amplitude. Displacement matrices are assembled from
//! closed-form associated-Laguerre matrix elements.

use std::ops::{Add, Mul, Sub};

use ndarray::{Array1, Array2, Axis};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|<v|v> - 1|` for a vector to count as normalized.
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// Default upper bound on the truncated dimension.
pub const DEFAULT_MAX_DIM: usize = 400;

/// Amplitudes over a truncated number basis; index `n` is the occupation.
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    amps: Array1<C64>,
}

impl FockVector {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "Fock dimension must be at least 1");
        Self {
            amps: Array1::zeros(dim),
        }
    }

    /// Number state `|n>` in a space of dimension `dim`.
    pub fn basis(n: usize, dim: usize) -> Self {
        assert!(n < dim, "basis index {n} outside dimension {dim}");
        let mut v = Self::zeros(dim);
        v.amps[n] = C64::new(1.0, 0.0);
        v
    }

    pub fn from_amplitudes(amps: impl Into<Array1<C64>>) -> Result<Self> {
        let amps = amps.into();
        if amps.is_empty() {
            return Err(Error::invalid("Fock vector needs at least one amplitude"));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::invalid("Fock amplitudes must be finite"));
        }
        Ok(Self { amps })
    }

    /// Wraps amplitudes produced internally; finiteness is the caller's concern.
    pub(crate) fn from_array(amps: Array1<C64>) -> Self {
        debug_assert!(!amps.is_empty());
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amps
    }

    pub fn amplitude(&self, n: usize) -> C64 {
        self.amps.get(n).copied().unwrap_or_default()
    }

    pub fn into_array(self) -> Array1<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORMALIZATION_TOL
    }

    pub fn is_finite(&self) -> bool {
        self.amps
            .iter()
            .all(|a| a.re.is_finite() && a.im.is_finite())
    }

    /// `<self|other>`; a shorter vector is treated as zero-padded.
    pub fn inner(&self, other: &FockVector) -> C64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|<self|other>| / (|self| |other|)`, zero if either vector vanishes.
    pub fn overlap(&self, other: &FockVector) -> f64 {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            self.inner(other).norm() / denom
        }
    }

    pub fn normalized(&self) -> Result<FockVector> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::invalid(
                "cannot normalize a zero or non-finite vector",
            ));
        }
        Ok(self.scaled(C64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, s: C64) -> FockVector {
        Self::from_array(self.amps.mapv(|a| a * s))
    }

    /// Zero-pads or truncates to `dim`.
    pub fn resized(&self, dim: usize) -> FockVector {
        let mut out = FockVector::zeros(dim);
        let k = dim.min(self.dim());
        out.amps
            .slice_mut(ndarray::s![..k])
            .assign(&self.amps.slice(ndarray::s![..k]));
        out
    }

    /// Largest componentwise distance, zero-padding the shorter vector.
    pub fn max_abs_diff(&self, other: &FockVector) -> f64 {
        let dim = self.dim().max(other.dim());
        (0..dim)
            .map(|n| (self.amplitude(n) - other.amplitude(n)).norm())
            .fold(0.0, f64::max)
    }

    /// Index of the highest basis state carrying non-zero weight, or `None` for the zero vector.
    pub(crate) fn highest_occupied(&self) -> Option<usize> {
        self.amps.iter().rposition(|a| a.norm_sqr() > 0.0)
    }
}

impl Add for &FockVector {
    type Output = FockVector;

    fn add(self, rhs: &FockVector) -> FockVector {
        let dim = self.dim().max(rhs.dim());
        FockVector::from_array(Array1::from_shape_fn(dim, |n| {
            self.amplitude(n) + rhs.amplitude(n)
        }))
    }
}

impl Sub for &FockVector {
    type Output = FockVector;

    fn sub(self, rhs: &FockVector) -> FockVector {
        let dim = self.dim().max(rhs.dim());
        FockVector::from_array(Array1::from_shape_fn(dim, |n| {
            self.amplitude(n) - rhs.amplitude(n)
        }))
    }
}

impl Mul<C64> for &FockVector {
    type Output = FockVector;

    fn mul(self, rhs: C64) -> FockVector {
        self.scaled(rhs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TruncationMode {
    Fixed(usize),
    Adaptive { target_tail_mass: f64 },
}

/// How large a number basis to allocate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub mode: TruncationMode,
    pub max_dim: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            mode: TruncationMode::Adaptive {
                target_tail_mass: 1e-12,
            },
            max_dim: DEFAULT_MAX_DIM,
        }
    }
}

impl TruncationPolicy {
    pub fn fixed(dim: usize) -> Self {
        Self {
            mode: TruncationMode::Fixed(dim),
            max_dim: dim.max(DEFAULT_MAX_DIM),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            TruncationMode::Fixed(dim) => {
                if dim == 0 {
                    return Err(Error::invalid("fixed truncation dimension must be >= 1"));
                }
                if self.max_dim < dim {
                    return Err(Error::invalid(format!(
                        "max_dim {} is below fixed dimension {dim}",
                        self.max_dim
                    )));
                }
            }
            TruncationMode::Adaptive { target_tail_mass } => {
                if !(target_tail_mass > 0.0 && target_tail_mass <= 1e-6) {
                    return Err(Error::invalid(format!(
                        "target_tail_mass {target_tail_mass} outside (0, 1e-6]"
                    )));
                }
            }
        }
        if self.max_dim == 0 {
            return Err(Error::invalid("max_dim must be >= 1"));
        }
        Ok(())
    }

    /// Tail mass accepted by this policy.
    pub fn tail_target(&self) -> f64 {
        match self.mode {
            TruncationMode::Fixed(_) => NORMALIZATION_TOL,
            TruncationMode::Adaptive { target_tail_mass } => target_tail_mass,
        }
    }

    /// Dimension holding every state within phase-space distance `radius` of the origin.
    ///
    /// The adaptive mode starts from `ceil((radius + 4)^2) + 8` and grows until the
    /// Poisson tail of a coherent state of amplitude `radius` is below the target.
    pub fn dim_for_radius(&self, radius: f64) -> Result<usize> {
        self.validate()?;
        if !radius.is_finite() || radius < 0.0 {
            return Err(Error::invalid(format!(
                "phase-space radius {radius} is not valid"
            )));
        }
        let mean = radius * radius;
        match self.mode {
            TruncationMode::Fixed(dim) => {
                let tail = poisson_tail(mean, dim);
                if tail > NORMALIZATION_TOL {
                    return Err(Error::TruncationInsufficient {
                        needed: dim + 1,
                        max_dim: dim,
                        tail_mass: tail,
                    });
                }
                Ok(dim)
            }
            TruncationMode::Adaptive { target_tail_mass } => {
                let mut dim = (((radius + 4.0).powi(2)).ceil() as usize + 8).min(self.max_dim);
                loop {
                    let tail = poisson_tail(mean, dim);
                    if tail <= target_tail_mass {
                        break;
                    }
                    if dim >= self.max_dim {
                        return Err(Error::TruncationInsufficient {
                            needed: dim + 1,
                            max_dim: self.max_dim,
                            tail_mass: tail,
                        });
                    }
                    dim = (dim + dim / 4 + 1).min(self.max_dim);
                }
                Ok(dim)
            }
        }
    }
}

/// `ln(n!)` by direct summation.
pub(crate) fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Probability that a Poisson variable of the given mean is `>= dim`.
pub(crate) fn poisson_tail(mean: f64, dim: usize) -> f64 {
    if mean == 0.0 {
        return if dim == 0 { 1.0 } else { 0.0 };
    }
    // the mode sits near `mean`; below it use the complement of the head sum
    if (dim as f64) <= mean {
        let head: f64 = (0..dim)
            .map(|n| (-mean + n as f64 * mean.ln() - ln_factorial(n)).exp())
            .sum();
        return (1.0 - head).max(0.0);
    }
    let mut term = (-mean + dim as f64 * mean.ln() - ln_factorial(dim)).exp();
    let mut sum = 0.0;
    let mut n = dim;
    while term > 0.0 && term > sum * 1e-17 {
        sum += term;
        n += 1;
        term *= mean / n as f64;
    }
    sum
}

/// Number-basis amplitudes of the coherent state `|alpha>` in dimension `dim`.
pub fn coherent_amplitudes(alpha: C64, dim: usize) -> Array1<C64> {
    let mut amps = Array1::zeros(dim);
    let mut a = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            a = a * alpha / (n as f64).sqrt();
        }
        amps[n] = a;
    }
    amps
}

/// `<-beta|n> = (-beta)^n e^{-beta^2/2} / sqrt(n!)` for real `beta`.
pub fn vacuum_shift_overlap(beta: f64, n: usize) -> f64 {
    if beta == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let sign = if n % 2 == 1 { -beta.signum() } else { 1.0 };
    sign * (n as f64 * beta.abs().ln() - 0.5 * beta * beta - 0.5 * ln_factorial(n)).exp()
}

/// Normalized coherent state `|alpha>`.
pub fn coherent_state(alpha: C64, policy: &TruncationPolicy) -> Result<FockVector> {
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::invalid("coherent amplitude must be finite"));
    }
    let dim = policy.dim_for_radius(alpha.norm())?;
    Ok(FockVector::from_array(coherent_amplitudes(alpha, dim)))
}

/// Dense square complex matrix acting on the truncated number basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    mat: Array2<C64>,
}

impl Operator {
    pub fn from_matrix(mat: Array2<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(Error::invalid(
                "operator matrix must be square and non-empty",
            ));
        }
        if mat.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::invalid("operator entries must be finite"));
        }
        Ok(Self { mat })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: Array2::eye(dim),
        }
    }

    pub fn diagonal(diag: Array1<C64>) -> Self {
        Self {
            mat: Array2::from_diag(&diag),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.mat
    }

    pub fn adjoint(&self) -> Operator {
        Self {
            mat: self.mat.t().mapv(|a| a.conj()),
        }
    }

    pub fn compose(&self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimensions differ");
        Self {
            mat: self.mat.dot(&rhs.mat),
        }
    }

    /// Applies the operator, zero-padding or truncating the input to `self.dim()`.
    pub fn apply(&self, v: &FockVector) -> FockVector {
        let x = if v.dim() == self.dim() {
            v.amplitudes().clone()
        } else {
            v.resized(self.dim()).into_array()
        };
        FockVector::from_array(self.mat.dot(&x))
    }

    /// `max |(U^dag U - 1)_{ij}|` over rows/columns `i, j < sub`.
    pub fn unitarity_defect(&self, sub: usize) -> f64 {
        let sub = sub.min(self.dim());
        let prod = self.adjoint().mat.dot(&self.mat);
        let mut worst: f64 = 0.0;
        for i in 0..sub {
            for j in 0..sub {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[[i, j]] - target).norm());
            }
        }
        worst
    }

    /// `max |A_ij - B_ij|` over the leading `sub x sub` block.
    pub fn max_abs_diff_block(&self, other: &Operator, sub: usize) -> f64 {
        let sub = sub.min(self.dim()).min(other.dim());
        let mut worst: f64 = 0.0;
        for i in 0..sub {
            for j in 0..sub {
                worst = worst.max((self.mat[[i, j]] - other.mat[[i, j]]).norm());
            }
        }
        worst
    }
}

impl Mul for &Operator {
    type Output = Operator;

    fn mul(self, rhs: &Operator) -> Operator {
        self.compose(rhs)
    }
}

/// Truncated matrix of `D(beta) = exp(beta b^dag - beta^* b)`.
///
/// Uses `<m|D|n> = sqrt(n!/m!) beta^{m-n} e^{-|beta|^2/2} L_n^{(m-n)}(|beta|^2)` for
/// `m >= n` and the conjugate-symmetric form below the diagonal.
pub fn displacement_operator(beta: C64, dim: usize) -> Operator {
    assert!(dim >= 1, "dimension must be positive");
    let x = beta.norm_sqr();
    if x == 0.0 {
        return Operator::identity(dim);
    }
    let ln_abs = beta.norm().ln();
    let theta = beta.arg();
    let ln_fact: Vec<f64> = {
        let mut v = Vec::with_capacity(dim);
        let mut acc = 0.0;
        for n in 0..dim {
            if n > 1 {
                acc += (n as f64).ln();
            }
            v.push(acc);
        }
        v
    };
    let mut mat = Array2::<C64>::zeros((dim, dim));
    let mut lag = vec![0.0; dim];
    for k in 0..dim {
        // L_j^{(k)}(x) for j = 0 .. dim - k - 1
        let len = dim - k;
        let kf = k as f64;
        lag[0] = 1.0;
        if len > 1 {
            lag[1] = 1.0 + kf - x;
        }
        for j in 1..len.saturating_sub(1) {
            let jf = j as f64;
            lag[j + 1] = ((2.0 * jf + 1.0 + kf - x) * lag[j] - (jf + kf) * lag[j - 1]) / (jf + 1.0);
        }
        let phase_up = C64::from_polar(1.0, kf * theta);
        let phase_down = C64::from_polar(if k % 2 == 1 { -1.0 } else { 1.0 }, -kf * theta);
        for (j, &l) in lag.iter().enumerate().take(len) {
            let (lo, hi) = (j, j + k);
            let mag = (0.5 * (ln_fact[lo] - ln_fact[hi]) + kf * ln_abs - 0.5 * x).exp() * l;
            // above the diagonal (row lo, column hi) and below it (row hi, column lo)
            mat[[hi, lo]] = phase_up * mag;
            if k > 0 {
                mat[[lo, hi]] = phase_down * mag;
            }
        }
    }
    Operator { mat }
}

/// Displaced number state `D(beta)|n>` for real `beta`.
pub fn displaced_fock(beta: f64, n: usize, policy: &TruncationPolicy) -> Result<FockVector> {
    if !beta.is_finite() {
        return Err(Error::invalid("beta must be finite"));
    }
    let radius = 2.0 * beta.abs() + (n as f64).sqrt();
    let dim = policy.dim_for_radius(radius)?.max(n + 1);
    let d = displacement_operator(C64::new(beta, 0.0), dim);
    let v = FockVector::from_array(d.matrix().column(n).to_owned());
    let norm_err = (v.norm_sqr() - 1.0).abs();
    if norm_err > NORMALIZATION_TOL {
        return Err(Error::TruncationInsufficient {
            needed: dim + 1,
            max_dim: policy.max_dim,
            tail_mass: norm_err,
        });
    }
    Ok(v)
}

/// Phases `e^{-i(n+1/2)t}` of the free oscillator, `n = 0..dim`.
pub fn free_phase_factors(t: f64, dim: usize) -> Array1<C64> {
    Array1::from_shape_fn(dim, |n| C64::from_polar(1.0, -(n as f64 + 0.5) * t))
}

/// Free evolution `U_m(t) = sum_n |n> e^{-i(n+1/2)t} <n|` with time in units of `1/omega_m`.
pub fn free_phases(t: f64, dim: usize) -> Operator {
    Operator::diagonal(free_phase_factors(t, dim))
}

/// `U_m(t)|v>` without forming the matrix.
pub fn free_evolve(v: &FockVector, t: f64) -> FockVector {
    let phases = free_phase_factors(t, v.dim());
    FockVector::from_array(v.amplitudes() * &phases)
}

/// Oscillator evolution while the photon is in the cavity:
/// `U_gamma(t) = D(beta) diag(e^{-i(n+1/2-beta^2)t}) D(beta)^dag`.
pub fn photon_present_evolution(t: f64, beta: f64, policy: &TruncationPolicy) -> Result<Operator> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!(
            "evolution time {t} must be finite and >= 0"
        )));
    }
    let dim = policy.dim_for_radius(2.0 * beta.abs())?;
    Ok(photon_present_evolution_dim(t, beta, dim))
}

pub(crate) fn photon_present_evolution_dim(t: f64, beta: f64, dim: usize) -> Operator {
    let d = displacement_operator(C64::new(beta, 0.0), dim);
    let phases = Array1::from_shape_fn(dim, |n| {
        C64::from_polar(1.0, -(n as f64 + 0.5 - beta * beta) * t)
    });
    // D diag D^dag, scaling the columns of D by the phases
    let mut scaled = d.matrix().clone();
    for (mut col, p) in scaled.axis_iter_mut(Axis(1)).zip(phases.iter()) {
        col.mapv_inplace(|a| a * p);
    }
    Operator {
        mat: scaled.dot(&d.adjoint().mat),
    }
}

/// `e^{i*phi}` shorthand.
pub(crate) fn cis(phi: f64) -> C64 {
    C64::from_polar(1.0, phi)
}
