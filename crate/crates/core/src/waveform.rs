//! Ingoing single-photon envelopes `F(x)`, supported on `x <= 0`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalization tolerance for waveforms.
pub const WAVEFORM_NORM_TOL: f64 = 1e-8;

/// One term `amplitude * e^{rate x}` of an exponential-sum envelope.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpTerm {
    pub amplitude: C64,
    /// Complex rate; the real part is positive so the term decays as `x -> -inf`.
    pub rate: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PhotonWaveform {
    /// `sqrt(2 Gamma) e^{Gamma x}`.
    ExponentialDecay { big_gamma: f64 },
    /// `sqrt(gamma) e^{(gamma/2 - i beta^2 + i n) x}`, which heralds `D(beta)|n>` at `tau = 2 pi`.
    FockPrep { n: usize, beta: f64, gamma: f64 },
    /// `sqrt(gamma) e^{(gamma/2 - i beta^2) x} / Z * sum_n c~_n e^{i n x}`.
    ModulatedPrep {
        coeffs: Vec<C64>,
        beta: f64,
        gamma: f64,
        z: f64,
    },
    /// Linear interpolation between samples; zero outside the grid.
    Sampled { x: Vec<f64>, values: Vec<C64> },
}

impl PhotonWaveform {
    pub fn exponential(big_gamma: f64) -> Result<Self> {
        if !(big_gamma > 0.0) || !big_gamma.is_finite() {
            return Err(Error::invalid(format!(
                "photon width Gamma = {big_gamma} must be > 0"
            )));
        }
        Ok(PhotonWaveform::ExponentialDecay { big_gamma })
    }

    /// Builds a sampled envelope and checks its support and normalization.
    pub fn sampled(x: Vec<f64>, values: Vec<C64>) -> Result<Self> {
        if x.len() != values.len() || x.len() < 2 {
            return Err(Error::invalid(
                "sampled waveform needs >= 2 matching (x, F) samples",
            ));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(
                "sample positions must be strictly increasing",
            ));
        }
        if x.iter().any(|v| !v.is_finite())
            || values
                .iter()
                .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::invalid("sampled waveform must be finite"));
        }
        if *x.last().unwrap() > 0.0 {
            // F(x) = 0 for x > 0: the photon starts out ingoing
            let tail_nonzero = x
                .iter()
                .zip(&values)
                .any(|(xi, v)| *xi > 0.0 && v.norm() > 0.0);
            if tail_nonzero {
                return Err(Error::invalid("sampled waveform must vanish for x > 0"));
            }
        }
        let w = PhotonWaveform::Sampled { x, values };
        w.validate()?;
        Ok(w)
    }

    /// `F(x)`.
    pub fn eval(&self, x: f64) -> C64 {
        if x > 0.0 {
            return C64::new(0.0, 0.0);
        }
        match self {
            PhotonWaveform::Sampled { x: xs, values } => {
                if x < xs[0] || x > *xs.last().unwrap() {
                    return C64::new(0.0, 0.0);
                }
                let k = xs.partition_point(|&xi| xi <= x).clamp(1, xs.len() - 1);
                let (x0, x1) = (xs[k - 1], xs[k]);
                let s = (x - x0) / (x1 - x0);
                values[k - 1] * (1.0 - s) + values[k] * s
            }
            _ => self
                .exp_terms()
                .unwrap()
                .iter()
                .map(|t| t.amplitude * (t.rate * x).exp())
                .sum(),
        }
    }

    /// The envelope as a sum of exponentials, for every variant except `Sampled`.
    pub fn exp_terms(&self) -> Option<Vec<ExpTerm>> {
        match *self {
            PhotonWaveform::ExponentialDecay { big_gamma } => Some(vec![ExpTerm {
                amplitude: C64::new((2.0 * big_gamma).sqrt(), 0.0),
                rate: C64::new(big_gamma, 0.0),
            }]),
            PhotonWaveform::FockPrep { n, beta, gamma } => Some(vec![ExpTerm {
                amplitude: C64::new(gamma.sqrt(), 0.0),
                rate: C64::new(0.5 * gamma, n as f64 - beta * beta),
            }]),
            PhotonWaveform::ModulatedPrep {
                ref coeffs,
                beta,
                gamma,
                z,
            } => Some(
                coeffs
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.norm_sqr() > 0.0)
                    .map(|(n, &c)| ExpTerm {
                        amplitude: c * (gamma.sqrt() / z),
                        rate: C64::new(0.5 * gamma, n as f64 - beta * beta),
                    })
                    .collect(),
            ),
            PhotonWaveform::Sampled { .. } => None,
        }
    }

    /// `int_{-inf}^{-t} |F(x)|^2 dx`, the probability that the photon has not reached the cavity by `t`.
    pub fn ingoing_mass(&self, t: f64) -> f64 {
        match self {
            PhotonWaveform::Sampled { x, values } => sampled_mass(x, values, f64::NEG_INFINITY, -t),
            _ => {
                let terms = self.exp_terms().unwrap();
                let mut acc = C64::new(0.0, 0.0);
                for a in &terms {
                    for b in &terms {
                        let r = a.rate + b.rate.conj();
                        acc += a.amplitude * b.amplitude.conj() * (-r * t).exp() / r;
                    }
                }
                acc.re
            }
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.ingoing_mass(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PhotonWaveform::ExponentialDecay { big_gamma } if !(*big_gamma > 0.0) => {
                return Err(Error::invalid("Gamma must be > 0"))
            }
            PhotonWaveform::FockPrep { gamma, .. }
            | PhotonWaveform::ModulatedPrep { gamma, .. }
                if !(*gamma > 0.0) =>
            {
                return Err(Error::invalid("gamma must be > 0"))
            }
            _ => {}
        }
        let n = self.norm_sqr();
        if (n - 1.0).abs() > WAVEFORM_NORM_TOL {
            return Err(Error::invalid(format!("waveform norm^2 = {n}, expected 1")));
        }
        Ok(())
    }
}

/// Exact `int |F|^2` of the piecewise-linear interpolant restricted to `[lo, hi]`.
fn sampled_mass(x: &[f64], values: &[C64], lo: f64, hi: f64) -> f64 {
    let mut acc = 0.0;
    for k in 1..x.len() {
        let (x0, x1) = (x[k - 1], x[k]);
        let a = x0.max(lo);
        let b = x1.min(hi).min(0.0);
        if b <= a {
            continue;
        }
        let lerp = |s: f64| values[k - 1] + (values[k] - values[k - 1]) * ((s - x0) / (x1 - x0));
        let (fa, fb) = (lerp(a), lerp(b));
        acc += (b - a) * (fa.norm_sqr() + (fa.conj() * fb).re + fb.norm_sqr()) / 3.0;
    }
    acc
}
