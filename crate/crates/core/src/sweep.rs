//! Parameter sweeps over the observables, with flat key/value configuration.
//!
//! Grid points are the cartesian product of the grid axes, first axis slowest.
//! Points are evaluated in parallel and written in grid order; a failing point
//! becomes a row with `NaN` values and a message in the `error` column.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::SystemParams;
use crate::error::{Error, Result};
use crate::feasibility::{requirements_report, PhysicalParams};
use crate::fock::{FockVector, TruncationPolicy};
use crate::interferometer::{tau_grid, Interferometer};
use crate::prep::{
    min_success_over_subspace, success_probability_fock, OptimizerConfig, OPTIMAL_GAMMA,
};
use crate::table::{OutputFormat, Row, SweepTable};
use crate::waveform::PhotonWaveform;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    VisibilitySeries,
    ProbDensity,
    FockProb,
    SubspaceMin,
    Feasibility,
}

impl Observable {
    pub const ALL: [Observable; 5] = [
        Observable::VisibilitySeries,
        Observable::ProbDensity,
        Observable::FockProb,
        Observable::SubspaceMin,
        Observable::Feasibility,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Observable::VisibilitySeries => "visibility_series",
            Observable::ProbDensity => "prob_density",
            Observable::FockProb => "fock_prob",
            Observable::SubspaceMin => "subspace_min",
            Observable::Feasibility => "feasibility",
        }
    }

    /// Axes spanning the grid, slowest first.
    fn grid_axes(self) -> &'static [&'static str] {
        match self {
            Observable::VisibilitySeries => &["beta", "big_gamma", "gamma"],
            Observable::ProbDensity => &["beta", "big_gamma", "gamma", "phi"],
            Observable::FockProb => &["n", "beta", "epsilon", "gamma"],
            Observable::SubspaceMin => &["j", "beta", "epsilon"],
            Observable::Feasibility => &[
                "wavelength",
                "cavity_length",
                "mirror_mass",
                "mech_freq",
                "finesse",
                "quality",
                "temperature",
                "transmissivity",
            ],
        }
    }

    /// Single-valued settings.
    fn scalars(self) -> &'static [&'static str] {
        match self {
            Observable::VisibilitySeries | Observable::ProbDensity => {
                &["tau_max", "d_tau", "n_trunc"]
            }
            Observable::SubspaceMin => &["starts"],
            Observable::FockProb | Observable::Feasibility => &[],
        }
    }

    fn result_columns(self) -> &'static [&'static str] {
        match self {
            Observable::VisibilitySeries => &["tau", "p_max", "p_min", "v"],
            Observable::ProbDensity => &["tau", "p"],
            Observable::FockProb => &["p", "exceeds_unity", "curve_argmax_beta"],
            Observable::SubspaceMin => &["p_h", "p_0", "p_j", "converged_starts"],
            Observable::Feasibility => &[
                "beta_out",
                "gamma_over_omega",
                "convergence",
                "bandwidth",
                "nonlinearity",
                "thermal",
                "convergence_margin",
                "bandwidth_margin",
                "nonlinearity_margin",
                "thermal_margin",
            ],
        }
    }

    fn defaults(self) -> Vec<(&'static str, Vec<f64>)> {
        let reference = PhysicalParams::reference();
        match self {
            Observable::VisibilitySeries | Observable::ProbDensity => {
                let mut d = vec![
                    ("beta", vec![0.5, 1.2, 2.0]),
                    ("big_gamma", vec![0.2, 1.0, 2.0]),
                    ("gamma", vec![1.0]),
                ];
                if self == Observable::ProbDensity {
                    d.push(("phi", vec![0.0]));
                }
                d.extend([
                    ("tau_max", vec![4.0 * PI]),
                    ("d_tau", vec![PI / 200.0]),
                    ("n_trunc", vec![0.0]),
                ]);
                d
            }
            Observable::FockProb => vec![
                ("n", vec![1.0, 2.0, 5.0, 10.0]),
                ("beta", range_values(0.1, 4.0, 0.01).unwrap()),
                ("epsilon", vec![0.1]),
                ("gamma", vec![OPTIMAL_GAMMA]),
            ],
            Observable::SubspaceMin => vec![
                ("j", (1..=7).map(f64::from).collect()),
                ("beta", range_values(0.05, 4.0, 0.05).unwrap()),
                ("epsilon", vec![0.1]),
                ("starts", vec![OptimizerConfig::default().starts as f64]),
            ],
            Observable::Feasibility => vec![
                ("wavelength", vec![reference.wavelength]),
                ("cavity_length", vec![reference.cavity_length]),
                ("mirror_mass", vec![reference.mirror_mass]),
                ("mech_freq", vec![reference.mech_freq]),
                ("finesse", vec![reference.finesse]),
                ("quality", vec![reference.quality]),
                ("temperature", vec![reference.temperature]),
                ("transmissivity", vec![reference.transmissivity]),
            ],
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().replace('-', "_");
        Observable::ALL
            .into_iter()
            .find(|o| o.name() == key)
            .ok_or_else(|| Error::invalid(format!("unknown observable '{s}'")))
    }
}

/// Inclusive `start, start + step, ..` up to `stop`.
pub fn range_values(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(Error::invalid(format!(
            "range {start}:{stop}:{step} needs step > 0 and stop >= start"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    if n > 10_000_000 {
        return Err(Error::invalid("range has too many points"));
    }
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

/// Parses `1.5`, `4pi`, `pi/200`, `3pi/2` or `-2e-3`.
pub fn parse_number(s: &str) -> Result<f64> {
    let t = s.trim();
    let bad = || Error::invalid(format!("cannot parse number '{s}'"));
    let v = if let Some(k) = t.find("pi") {
        let (coef, rest) = (&t[..k], &t[k + 2..]);
        let c = match coef.trim() {
            "" => 1.0,
            "-" => -1.0,
            c => c.trim_end_matches('*').parse::<f64>().map_err(|_| bad())?,
        };
        let d = match rest.trim() {
            "" => 1.0,
            r => r
                .strip_prefix('/')
                .ok_or_else(bad)?
                .trim()
                .parse::<f64>()
                .map_err(|_| bad())?,
        };
        c * PI / d
    } else {
        t.parse::<f64>().map_err(|_| bad())?
    };
    if !v.is_finite() {
        return Err(bad());
    }
    Ok(v)
}

/// Parses a value list: `x`, `a,b,c` or `start:stop:step`.
pub fn parse_values(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.len() {
        1 => s.split(',').map(parse_number).collect(),
        3 => range_values(
            parse_number(parts[0])?,
            parse_number(parts[1])?,
            parse_number(parts[2])?,
        ),
        _ => Err(Error::invalid(format!(
            "ranges are start:stop:step, got '{s}'"
        ))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub observable: Observable,
    /// Grid axes and scalar settings, in the observable's canonical order.
    pub axes: Vec<GridAxis>,
    pub output_path: Option<PathBuf>,
    pub format: OutputFormat,
    pub seed: u64,
}

fn canonical(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl SweepSpec {
    pub fn default_for(observable: Observable) -> Self {
        Self {
            observable,
            axes: observable
                .defaults()
                .into_iter()
                .map(|(name, values)| GridAxis {
                    name: name.to_string(),
                    values,
                })
                .collect(),
            output_path: None,
            format: OutputFormat::Csv,
            seed: OptimizerConfig::default().seed,
        }
    }

    /// Builds a spec from flat key/value pairs; `observable` is required.
    pub fn from_config(map: &BTreeMap<String, String>) -> Result<Self> {
        let obs = map
            .iter()
            .find(|(k, _)| canonical(k) == "observable")
            .map(|(_, v)| v.parse::<Observable>())
            .ok_or_else(|| Error::invalid("sweep config needs an 'observable' key"))??;
        let mut spec = Self::default_for(obs);
        for (k, v) in map {
            if canonical(k) != "observable" {
                spec.set(k, v)?;
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Overrides one setting. Keys accept `-` or `_` separators.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = canonical(key);
        match key.as_str() {
            "observable" => {
                let obs: Observable = value.parse()?;
                if obs != self.observable {
                    return Err(Error::invalid(
                        "observable cannot change after construction",
                    ));
                }
            }
            "out" | "output_path" => self.output_path = Some(PathBuf::from(value.trim())),
            "format" => self.format = value.parse()?,
            "seed" => {
                self.seed = value.trim().parse().map_err(|_| {
                    Error::invalid(format!("seed '{value}' is not an unsigned integer"))
                })?
            }
            _ => {
                let values = parse_values(value)?;
                let axis = self
                    .axes
                    .iter_mut()
                    .find(|a| a.name == key)
                    .ok_or_else(|| {
                        Error::invalid(format!("'{key}' is not a parameter of {}", self.observable))
                    })?;
                axis.values = values;
            }
        }
        Ok(())
    }

    pub fn values(&self, name: &str) -> Option<&[f64]> {
        self.axes
            .iter()
            .find(|a| a.name == name)
            .map(|a| a.values.as_slice())
    }

    fn scalar(&self, name: &str) -> f64 {
        self.values(name).expect("validated spec")[0]
    }

    pub fn validate(&self) -> Result<()> {
        let obs = self.observable;
        for axis in &self.axes {
            if axis.values.is_empty() {
                return Err(Error::invalid(format!("grid '{}' is empty", axis.name)));
            }
            if axis.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "grid '{}' has non-finite values",
                    axis.name
                )));
            }
        }
        for name in obs.scalars() {
            if self.values(name).map_or(0, <[f64]>::len) != 1 {
                return Err(Error::invalid(format!("'{name}' must be a single value")));
            }
        }
        for name in ["n", "j", "n_trunc", "starts"] {
            if let Some(vals) = self.values(name) {
                if vals.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
                    return Err(Error::invalid(format!(
                        "'{name}' must be a nonnegative integer"
                    )));
                }
            }
        }
        if let Some(d) = self.values("d_tau") {
            tau_grid(self.scalar("tau_max"), d[0])?;
        }
        Ok(())
    }

    fn grid_points(&self) -> Vec<Vec<f64>> {
        let mut points = vec![Vec::new()];
        for name in self.observable.grid_axes() {
            let vals = self.values(name).expect("validated spec");
            points = points
                .into_iter()
                .flat_map(|p| {
                    vals.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push(*v);
                        q
                    })
                })
                .collect();
        }
        points
    }

    pub fn header(&self) -> Vec<String> {
        let obs = self.observable;
        obs.grid_axes()
            .iter()
            .chain(obs.result_columns())
            .map(|s| s.to_string())
            .collect()
    }
}

/// Mixes the sweep seed with a grid index so each point has its own stream.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn failed(point: &[f64], width: usize, e: &Error) -> Row {
    let mut values = point.to_vec();
    values.resize(point.len() + width, f64::NAN);
    Row {
        values,
        error: Some(e.to_string()),
    }
}

fn with_point(point: &[f64], tail: impl IntoIterator<Item = f64>) -> Row {
    Row::ok(point.iter().copied().chain(tail).collect())
}

fn interferometer(
    spec: &SweepSpec,
    beta: f64,
    big_gamma: f64,
    gamma: f64,
) -> Result<Interferometer> {
    let mut params = SystemParams::new(beta, gamma, big_gamma)?;
    let n_trunc = spec.scalar("n_trunc") as usize;
    if n_trunc > 0 {
        params.policy = TruncationPolicy::fixed(n_trunc);
        params.validate()?;
    }
    let w = PhotonWaveform::exponential(big_gamma)?;
    Interferometer::new(&w, &params, &FockVector::basis(0, 1))
}

fn eval_point(spec: &SweepSpec, index: usize, p: &[f64]) -> Result<Vec<Row>> {
    match spec.observable {
        Observable::VisibilitySeries => {
            let ifm = interferometer(spec, p[0], p[1], p[2])?;
            tau_grid(spec.scalar("tau_max"), spec.scalar("d_tau"))?
                .into_iter()
                .map(|tau| {
                    let arms = ifm.arm_states(tau)?;
                    let (hi, lo) = arms.extrema();
                    Ok(with_point(p, [tau, hi, lo, arms.visibility()?]))
                })
                .collect()
        }
        Observable::ProbDensity => {
            let ifm = interferometer(spec, p[0], p[1], p[2])?;
            tau_grid(spec.scalar("tau_max"), spec.scalar("d_tau"))?
                .into_iter()
                .map(|tau| Ok(with_point(p, [tau, ifm.probability_density(tau, p[3])?])))
                .collect()
        }
        Observable::FockProb => {
            let r = success_probability_fock(p[0] as usize, p[1], p[2], p[3])?;
            // the argmax column is filled once the whole curve is known
            Ok(vec![with_point(
                p,
                [r.value, f64::from(u8::from(r.exceeds_unity)), f64::NAN],
            )])
        }
        Observable::SubspaceMin => {
            let (j, beta, eps) = (p[0] as usize, p[1], p[2]);
            let opt = OptimizerConfig {
                seed: point_seed(spec.seed, index),
                starts: spec.scalar("starts") as usize,
                ..OptimizerConfig::default()
            };
            let m = min_success_over_subspace(j, beta, eps, &opt)?;
            let p0 = success_probability_fock(0, beta, eps, OPTIMAL_GAMMA)?.value;
            let pj = success_probability_fock(j, beta, eps, OPTIMAL_GAMMA)?.value;
            Ok(vec![with_point(
                p,
                [m.probability, p0, pj, m.converged_starts as f64],
            )])
        }
        Observable::Feasibility => {
            let phys = PhysicalParams {
                wavelength: p[0],
                cavity_length: p[1],
                mirror_mass: p[2],
                mech_freq: p[3],
                finesse: p[4],
                quality: p[5],
                temperature: p[6],
                transmissivity: p[7],
            };
            let r = requirements_report(&phys)?;
            let reqs = [&r.convergence, &r.bandwidth, &r.nonlinearity, &r.thermal];
            let flags = reqs.iter().map(|q| f64::from(u8::from(q.passed)));
            let margins = reqs.iter().map(|q| q.margin);
            Ok(vec![with_point(
                p,
                [r.beta, r.gamma_over_omega]
                    .into_iter()
                    .chain(flags)
                    .chain(margins),
            )])
        }
    }
}

/// Fills `curve_argmax_beta`: the beta of the largest `p` among rows sharing `n`, `epsilon`, `gamma`.
fn fill_fock_argmax(table: &mut SweepTable) {
    let (ib, ip, ia) = (1, 4, 6);
    let key = |r: &Row| [r.values[0], r.values[2], r.values[3]].map(f64::to_bits);
    let mut best: BTreeMap<[u64; 3], (f64, f64)> = BTreeMap::new();
    for r in table.rows.iter().filter(|r| r.error.is_none()) {
        let e = best.entry(key(r)).or_insert((f64::NEG_INFINITY, f64::NAN));
        if r.values[ip] > e.0 {
            *e = (r.values[ip], r.values[ib]);
        }
    }
    for r in table.rows.iter_mut().filter(|r| r.error.is_none()) {
        r.values[ia] = best[&key(r)].1;
    }
}

/// Evaluates the observable at every grid point. Only an invalid spec is an error;
/// numerical failures at individual points land in the `error` column.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    let width = spec.observable.result_columns().len();
    let rows: Vec<Vec<Row>> = spec
        .grid_points()
        .par_iter()
        .enumerate()
        .map(|(i, p)| eval_point(spec, i, p).unwrap_or_else(|e| vec![failed(p, width, &e)]))
        .collect();
    let mut table = SweepTable::new(spec.header()).with_error_column();
    for r in rows.into_iter().flatten() {
        table.push(r)?;
    }
    if spec.observable == Observable::FockProb {
        fill_fock_argmax(&mut table);
    }
    Ok(table)
}

/// Parses flat `key = value` text; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .or_else(|| line.split_once(char::is_whitespace))
            .ok_or_else(|| {
                Error::invalid(format!(
                    "config line {}: expected 'key = value'",
                    lineno + 1
                ))
            })?;
        let (k, v) = (canonical(k), v.trim().to_string());
        if k.is_empty() || v.is_empty() {
            return Err(Error::invalid(format!(
                "config line {}: empty key or value",
                lineno + 1
            )));
        }
        if map.insert(k.clone(), v).is_some() {
            return Err(Error::invalid(format!(
                "config line {}: duplicate key '{k}'",
                lineno + 1
            )));
        }
    }
    Ok(map)
}
