//! Laboratory parameters, their dimensionless images, and the experimental requirements.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::SystemParams;
use crate::error::{Error, Result};

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054571817e-34;
/// Speed of light, m/s.
pub const C_LIGHT: f64 = 299_792_458.0;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380649e-23;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Optical wavelength, m.
    pub wavelength: f64,
    /// Cavity length, m.
    pub cavity_length: f64,
    /// Mirror mass, kg.
    pub mirror_mass: f64,
    /// Mechanical angular frequency, rad/s.
    pub mech_freq: f64,
    pub finesse: f64,
    /// Mechanical quality factor.
    pub quality: f64,
    /// Environment temperature, K.
    pub temperature: f64,
    /// Input-mirror power transmissivity.
    pub transmissivity: f64,
}

impl PhysicalParams {
    /// 1064 nm light, 1 cm cavity, 1 ng mirror at 1 kHz, `T = 1e-7`, `Q = 1e6`, 10 mK.
    pub fn reference() -> Self {
        let t = 1e-7;
        Self {
            wavelength: 1064e-9,
            cavity_length: 0.01,
            mirror_mass: 1e-12,
            mech_freq: 2.0 * PI * 1e3,
            finesse: 2.0 * PI / t,
            quality: 1e6,
            temperature: 0.01,
            transmissivity: t,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("wavelength", self.wavelength),
            ("cavity_length", self.cavity_length),
            ("mirror_mass", self.mirror_mass),
            ("mech_freq", self.mech_freq),
            ("finesse", self.finesse),
            ("quality", self.quality),
            ("temperature", self.temperature),
            ("transmissivity", self.transmissivity),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "{name} = {v} must be finite and > 0"
                )));
            }
        }
        if self.transmissivity >= 1.0 {
            return Err(Error::invalid("transmissivity must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Optical angular frequency `2 pi c / lambda`.
    pub fn optical_freq(&self) -> f64 {
        2.0 * PI * C_LIGHT / self.wavelength
    }

    /// Cavity bandwidth `c T / (2 L)`, rad/s.
    pub fn bandwidth(&self) -> f64 {
        C_LIGHT * self.transmissivity / (2.0 * self.cavity_length)
    }

    /// Photon momentum kick per mechanical period over the zero-point momentum spread.
    pub fn beta(&self) -> f64 {
        let kick = HBAR * self.optical_freq() / C_LIGHT;
        kick * (2.0 / (HBAR * self.mirror_mass * self.mech_freq)).sqrt() * C_LIGHT
            / (2.0 * self.mech_freq * self.cavity_length)
    }

    /// The same `beta` from the coupling `hbar k = hbar omega_0 / L`: `(hbar k / 2 omega_m) / sqrt(hbar m omega_m / 2)`.
    pub fn beta_from_coupling(&self) -> f64 {
        let k = HBAR * self.optical_freq() / self.cavity_length;
        (k / (2.0 * self.mech_freq)) / (HBAR * self.mirror_mass * self.mech_freq / 2.0).sqrt()
    }

    /// Zero-point position spread `sqrt(hbar / 2 m omega_m)`, m.
    pub fn zero_point_length(&self) -> f64 {
        (HBAR / (2.0 * self.mirror_mass * self.mech_freq)).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dimensionless {
    pub beta: f64,
    /// `gamma / omega_m`.
    pub gamma: f64,
}

pub fn derive_dimensionless(p: &PhysicalParams) -> Result<Dimensionless> {
    p.validate()?;
    Ok(Dimensionless {
        beta: p.beta(),
        gamma: p.bandwidth() / p.mech_freq,
    })
}

/// Dimensionless system for an exponential photon of width `big_gamma` (units of `omega_m`).
pub fn system_params(p: &PhysicalParams, big_gamma: f64) -> Result<SystemParams> {
    let d = derive_dimensionless(p)?;
    SystemParams::new(d.beta, d.gamma, big_gamma)
}

/// One inequality `lhs <relation> rhs`, both sides in SI units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Requirement {
    pub name: String,
    pub inequality: String,
    pub lhs: f64,
    pub rhs: f64,
    pub unit: String,
    pub passed: bool,
    /// Ratio of the side that must be larger to the other side; above one when satisfied.
    pub margin: f64,
}

impl Requirement {
    fn less(name: &str, inequality: &str, lhs: f64, rhs: f64, unit: &str) -> Self {
        Self {
            name: name.into(),
            inequality: inequality.into(),
            lhs,
            rhs,
            unit: unit.into(),
            passed: lhs < rhs,
            margin: rhs / lhs,
        }
    }

    fn at_least(name: &str, inequality: &str, lhs: f64, rhs: f64, unit: &str) -> Self {
        Self {
            name: name.into(),
            inequality: inequality.into(),
            lhs,
            rhs,
            unit: unit.into(),
            passed: lhs >= rhs,
            margin: lhs / rhs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequirementsReport {
    pub params: PhysicalParams,
    pub beta: f64,
    pub gamma_over_omega: f64,
    /// `beta >= 1`, so the modulated-waveform series converges.
    pub convergence: Requirement,
    /// `gamma < omega_m`.
    pub bandwidth: Requirement,
    /// `lambda / F < sqrt(hbar / 2 m omega_m)`.
    pub nonlinearity: Requirement,
    /// `Q > k_B T_E / (hbar omega_m)`.
    pub thermal: Requirement,
    pub all_passed: bool,
}

impl RequirementsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn requirements_report(p: &PhysicalParams) -> Result<RequirementsReport> {
    let d = derive_dimensionless(p)?;
    let convergence = Requirement::at_least("convergence", "beta >= 1", d.beta, 1.0, "1");
    let bandwidth = Requirement::less(
        "bandwidth",
        "gamma < omega_m",
        p.bandwidth(),
        p.mech_freq,
        "rad/s",
    );
    let nonlinearity = Requirement::less(
        "nonlinearity",
        "lambda / finesse < sqrt(hbar / (2 m omega_m))",
        p.wavelength / p.finesse,
        p.zero_point_length(),
        "m",
    );
    let thermal = Requirement::less(
        "thermal",
        "k_B T_E / (hbar omega_m) < Q",
        K_B * p.temperature / (HBAR * p.mech_freq),
        p.quality,
        "1",
    );
    let all_passed =
        convergence.passed && bandwidth.passed && nonlinearity.passed && thermal.passed;
    Ok(RequirementsReport {
        params: *p,
        beta: d.beta,
        gamma_over_omega: d.gamma,
        convergence,
        bandwidth,
        nonlinearity,
        thermal,
        all_passed,
    })
}
