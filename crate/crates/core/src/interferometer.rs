//! Michelson interferometer with one movable-mirror arm (A) and one fixed-mirror arm (B).
//!
//! Both arms share the mirror Hilbert space of A; arm B is the same evolution with
//! `beta = 0`, so its mirror state only evolves freely. At a relative detuning `phi`
//! the detection density at one output port is
//! `(|A|^2 + |B|^2 + 2 Re(e^{i phi} <A|B>)) / 4`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::dynamics::{CavityEvolution, SystemParams};
use crate::error::{Error, Result};
use crate::fock::{cis, FockVector};
use crate::table::{Row, SweepTable};
use crate::waveform::PhotonWaveform;

/// Unnormalized mirror states conditioned on the photon leaving each arm at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmStates {
    pub psi_a: FockVector,
    pub psi_b: FockVector,
}

impl ArmStates {
    /// `|psi_A|^2 + |psi_B|^2`.
    pub fn total_norm_sqr(&self) -> f64 {
        self.psi_a.norm_sqr() + self.psi_b.norm_sqr()
    }

    /// `<psi_A|psi_B>`.
    pub fn cross(&self) -> C64 {
        self.psi_a.inner(&self.psi_b)
    }

    pub fn probability_density(&self, phi: f64) -> f64 {
        let p = (self.total_norm_sqr() + 2.0 * (cis(phi) * self.cross()).re) / 4.0;
        p.max(0.0)
    }

    /// `(p_max, p_min)` over the detuning phase.
    pub fn extrema(&self) -> (f64, f64) {
        let s = self.total_norm_sqr();
        let c = 2.0 * self.cross().norm();
        ((s + c) / 4.0, ((s - c) / 4.0).max(0.0))
    }

    pub fn visibility(&self) -> Result<f64> {
        let s = self.total_norm_sqr();
        if s < 1e-300 {
            return Err(Error::UndefinedVisibility);
        }
        Ok((2.0 * self.cross().norm() / s).min(1.0))
    }
}

/// Both arm evolutions, prepared once and reused across times.
#[derive(Clone, Debug)]
pub struct Interferometer {
    arm_a: CavityEvolution,
    arm_b: CavityEvolution,
}

impl Interferometer {
    pub fn new(
        waveform: &PhotonWaveform,
        params: &SystemParams,
        phi0: &FockVector,
    ) -> Result<Self> {
        Ok(Self {
            arm_a: CavityEvolution::new(waveform, params, phi0)?,
            arm_b: CavityEvolution::new(waveform, &params.with_beta(0.0), phi0)?,
        })
    }

    pub fn arm_states(&self, t: f64) -> Result<ArmStates> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("time {t} must be finite and >= 0")));
        }
        Ok(ArmStates {
            psi_a: self.arm_a.boundary_out(t)?,
            psi_b: self.arm_b.boundary_out(t)?,
        })
    }

    pub fn probability_density(&self, t: f64, phi: f64) -> Result<f64> {
        Ok(self.arm_states(t)?.probability_density(phi))
    }

    pub fn p_extrema(&self, t: f64) -> Result<(f64, f64)> {
        Ok(self.arm_states(t)?.extrema())
    }

    pub fn visibility(&self, t: f64) -> Result<f64> {
        self.arm_states(t)?.visibility()
    }

    /// Rows `(tau, p_max, p_min, v)`, one per grid point, in grid order.
    pub fn visibility_series(&self, tau_grid: &[f64]) -> Result<SweepTable> {
        let rows: Vec<Row> = tau_grid
            .par_iter()
            .map(|&tau| {
                let arms = self.arm_states(tau)?;
                let (p_max, p_min) = arms.extrema();
                Ok(Row::ok(vec![tau, p_max, p_min, arms.visibility()?]))
            })
            .collect::<Result<_>>()?;
        let mut table = SweepTable::new(SERIES_HEADER);
        for r in rows {
            table.push(r)?;
        }
        Ok(table)
    }
}

pub const SERIES_HEADER: [&str; 4] = ["tau", "p_max", "p_min", "v"];

/// `0, d, 2d, ...` up to and including `tau_max` (within rounding).
pub fn tau_grid(tau_max: f64, d_tau: f64) -> Result<Vec<f64>> {
    if !(d_tau > 0.0) || !(tau_max >= 0.0) || !tau_max.is_finite() {
        return Err(Error::invalid(format!(
            "tau grid needs d_tau > 0 and tau_max >= 0, got {d_tau}, {tau_max}"
        )));
    }
    let n = (tau_max / d_tau + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| k as f64 * d_tau).collect())
}

/// `tau in [0, 4 pi]` with step `pi / 200`.
pub fn default_tau_grid() -> Vec<f64> {
    (0..=800).map(|k| k as f64 * PI / 200.0).collect()
}

pub fn arm_states(
    t: f64,
    waveform: &PhotonWaveform,
    params: &SystemParams,
    phi0: &FockVector,
) -> Result<ArmStates> {
    Interferometer::new(waveform, params, phi0)?.arm_states(t)
}

pub fn probability_density(
    t: f64,
    phi: f64,
    waveform: &PhotonWaveform,
    params: &SystemParams,
    phi0: &FockVector,
) -> Result<f64> {
    Ok(arm_states(t, waveform, params, phi0)?.probability_density(phi))
}

pub fn p_extrema(
    t: f64,
    waveform: &PhotonWaveform,
    params: &SystemParams,
    phi0: &FockVector,
) -> Result<(f64, f64)> {
    Ok(arm_states(t, waveform, params, phi0)?.extrema())
}

pub fn visibility(
    t: f64,
    waveform: &PhotonWaveform,
    params: &SystemParams,
    phi0: &FockVector,
) -> Result<f64> {
    arm_states(t, waveform, params, phi0)?.visibility()
}

pub fn visibility_series(
    waveform: &PhotonWaveform,
    params: &SystemParams,
    phi0: &FockVector,
    tau_grid: &[f64],
) -> Result<SweepTable> {
    Interferometer::new(waveform, params, phi0)?.visibility_series(tau_grid)
}
