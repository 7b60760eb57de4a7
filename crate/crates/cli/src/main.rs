//! `optomech`: interferometer visibility, state-preparation probabilities and parameter sweeps.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;
use optomech_core::dynamics::SystemParams;
use optomech_core::feasibility::{requirements_report, PhysicalParams};
use optomech_core::fock::{FockVector, TruncationPolicy};
use optomech_core::interferometer::{tau_grid, Interferometer};
use optomech_core::prep::{
    arbitrary_prep_waveform, fidelity_window_fock, min_success_over_subspace,
    success_probability_fock, success_probability_state, OptimizerConfig, TargetState,
    OPTIMAL_GAMMA,
};
use optomech_core::sweep::{parse_config, parse_number, run_sweep, SweepSpec};
use optomech_core::table::{write_atomic, OutputFormat, Row, SweepTable};
use optomech_core::waveform::PhotonWaveform;
use optomech_core::Error;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "optomech",
    version,
    about = "Single-photon cavity optomechanics calculations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fringe visibility and density extrema over a tau grid.
    Visibility(Common),
    /// Detection density at one output port over a tau grid.
    Probdensity {
        #[command(flatten)]
        common: Common,
        /// Detuning phase between the arms, radians.
        #[arg(long)]
        phi: Option<String>,
    },
    /// Window and heralding probability for a displaced Fock target.
    PrepFock {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<String>,
    },
    /// Window, heralding probability and waveform normalization for a superposition target.
    PrepState {
        #[command(flatten)]
        common: Common,
        /// Comma-separated coefficients over |0~>, |1~>, ..., e.g. `1,0.5-0.5i`; normalized on input.
        #[arg(long, allow_hyphen_values = true)]
        coeffs: Option<String>,
    },
    /// Smallest heralding probability over span{|0~> .. |j~>}.
    SubspaceMin {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        j: Option<String>,
        #[arg(long)]
        starts: Option<String>,
    },
    /// Experimental requirements for laboratory parameters (SI units).
    Feasibility {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        phys: Physical,
    },
    /// Runs a parameter sweep; grid values are `x`, `a,b,c` or `start:stop:step`.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// visibility_series, prob_density, fock_prob, subspace_min or feasibility.
        #[arg(long)]
        observable: Option<String>,
        /// Extra `key=value` grid overrides, e.g. `--set n=1,2,5,10`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    /// Cavity bandwidth in units of omega_m.
    #[arg(long)]
    gamma: Option<String>,
    /// Photon width in units of omega_m.
    #[arg(long = "big-gamma")]
    big_gamma: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    /// Fixed Fock-space dimension; adaptive when omitted or 0.
    #[arg(long = "n-trunc")]
    n_trunc: Option<String>,
    #[arg(long = "tau-max")]
    tau_max: Option<String>,
    #[arg(long = "d-tau")]
    d_tau: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    /// Flat `key = value` file; keys are the long flag names. Flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct Physical {
    #[arg(long)]
    wavelength: Option<String>,
    #[arg(long = "cavity-length")]
    cavity_length: Option<String>,
    #[arg(long = "mirror-mass")]
    mirror_mass: Option<String>,
    /// Mechanical angular frequency, rad/s.
    #[arg(long = "mech-freq")]
    mech_freq: Option<String>,
    #[arg(long)]
    finesse: Option<String>,
    #[arg(long)]
    quality: Option<String>,
    #[arg(long)]
    temperature: Option<String>,
    #[arg(long)]
    transmissivity: Option<String>,
}

#[derive(Debug)]
enum CliError {
    Invalid(String),
    /// Output was written but some grid points failed.
    Numerical(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Core(Error::Io { .. }) => 4,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Numerical(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Config-file values overlaid with command-line flags.
struct Settings {
    map: BTreeMap<String, String>,
    out: Option<PathBuf>,
}

impl Settings {
    fn load(common: &Common, extra: &[(&str, &Option<String>)]) -> CliResult<Self> {
        let mut map = match &common.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                    path: path.clone(),
                    source,
                })?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        let flags = [
            ("beta", &common.beta),
            ("gamma", &common.gamma),
            ("big_gamma", &common.big_gamma),
            ("epsilon", &common.epsilon),
            ("n_trunc", &common.n_trunc),
            ("tau_max", &common.tau_max),
            ("d_tau", &common.d_tau),
            ("seed", &common.seed),
            ("format", &common.format),
        ];
        for (k, v) in flags.iter().chain(extra) {
            if let Some(v) = v {
                map.insert(k.to_string(), v.clone());
            }
        }
        let out = common
            .out
            .clone()
            .or_else(|| map.remove("out").map(PathBuf::from));
        Ok(Self { map, out })
    }

    /// Rejects keys this command does not understand.
    fn only(&self, allowed: &[&str]) -> CliResult<()> {
        match self
            .map
            .keys()
            .find(|k| !allowed.contains(&k.as_str()) && *k != "format")
        {
            Some(k) => Err(CliError::Invalid(format!(
                "option '{k}' does not apply to this command"
            ))),
            None => Ok(()),
        }
    }

    fn number(&self, key: &str, default: f64) -> CliResult<f64> {
        match self.map.get(key) {
            Some(v) => Ok(parse_number(v)?),
            None => Ok(default),
        }
    }

    fn count(&self, key: &str, default: usize) -> CliResult<usize> {
        let v = self.number(key, default as f64)?;
        if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            return Err(CliError::Invalid(format!(
                "'{key}' must be a nonnegative integer"
            )));
        }
        Ok(v as usize)
    }

    fn seed(&self) -> CliResult<u64> {
        match self.map.get("seed") {
            Some(s) => s
                .trim()
                .parse()
                .map_err(|_| CliError::Invalid(format!("seed '{s}' is not an unsigned integer"))),
            None => Ok(OptimizerConfig::default().seed),
        }
    }

    fn format(&self) -> CliResult<OutputFormat> {
        match self.map.get("format") {
            Some(f) => Ok(f.parse()?),
            None => Ok(OutputFormat::Csv),
        }
    }
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(path) => Ok(write_atomic(path, bytes)?),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|source| {
                    CliError::Core(Error::Io {
                        path: PathBuf::from("<stdout>"),
                        source,
                    })
                })
        }
    }
}

fn write_json(out: Option<&Path>, value: &serde_json::Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("values serialize");
    text.push('\n');
    write_output(out, text.as_bytes())
}

const DYNAMICS_KEYS: [&str; 6] = ["beta", "gamma", "big_gamma", "n_trunc", "tau_max", "d_tau"];

fn series(s: &Settings, phi: Option<f64>) -> CliResult<SweepTable> {
    let beta = s.number("beta", 1.0)?;
    let gamma = s.number("gamma", 1.0)?;
    let big_gamma = s.number("big_gamma", 1.0)?;
    let mut params = SystemParams::new(beta, gamma, big_gamma)?;
    let n_trunc = s.count("n_trunc", 0)?;
    if n_trunc > 0 {
        params.policy = TruncationPolicy::fixed(n_trunc);
        params.validate()?;
    }
    let waveform = PhotonWaveform::exponential(big_gamma)?;
    let ifm = Interferometer::new(&waveform, &params, &FockVector::basis(0, 1))?;
    let grid = tau_grid(
        s.number("tau_max", 4.0 * std::f64::consts::PI)?,
        s.number("d_tau", std::f64::consts::PI / 200.0)?,
    )?;
    match phi {
        None => Ok(ifm.visibility_series(&grid)?),
        Some(phi) => {
            let mut t = SweepTable::new(["tau", "p"]);
            for tau in grid {
                t.push(Row::ok(vec![tau, ifm.probability_density(tau, phi)?]))?;
            }
            Ok(t)
        }
    }
}

fn parse_coeffs(text: &str) -> CliResult<Vec<C64>> {
    text.split(',')
        .map(|c| {
            let c = c.trim();
            c.parse::<C64>()
                .map_err(|_| CliError::Invalid(format!("cannot parse coefficient '{c}'")))
        })
        .collect()
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Visibility(common) => {
            let s = Settings::load(&common, &[])?;
            s.only(&DYNAMICS_KEYS)?;
            let t = series(&s, None)?;
            write_output(s.out.as_deref(), &t.encode(s.format()?)?)
        }
        Command::Probdensity { common, phi } => {
            let s = Settings::load(&common, &[("phi", &phi)])?;
            let mut keys = DYNAMICS_KEYS.to_vec();
            keys.push("phi");
            s.only(&keys)?;
            let t = series(&s, Some(s.number("phi", 0.0)?))?;
            write_output(s.out.as_deref(), &t.encode(s.format()?)?)
        }
        Command::PrepFock { common, n } => {
            let s = Settings::load(&common, &[("n", &n)])?;
            s.only(&["n", "beta", "epsilon", "gamma"])?;
            let n = s.count("n", 1)?;
            let beta = s.number("beta", 1.0)?;
            let eps = s.number("epsilon", 0.1)?;
            let gamma = s.number("gamma", OPTIMAL_GAMMA)?;
            let window = fidelity_window_fock(n, beta, eps)?;
            let p = success_probability_fock(n, beta, eps, gamma)?;
            write_json(
                s.out.as_deref(),
                &json!({
                    "n": n, "beta": beta, "epsilon": eps, "gamma": gamma,
                    "window_delta_tau": window,
                    "success_probability": p.value,
                    "exceeds_unity": p.exceeds_unity,
                }),
            )
        }
        Command::PrepState { common, coeffs } => {
            let s = Settings::load(&common, &[("coeffs", &coeffs)])?;
            s.only(&["coeffs", "beta", "epsilon", "gamma"])?;
            let text = s
                .map
                .get("coeffs")
                .ok_or_else(|| CliError::Invalid("--coeffs is required".into()))?;
            let beta = s.number("beta", 1.0)?;
            let eps = s.number("epsilon", 0.1)?;
            let gamma = s.number("gamma", OPTIMAL_GAMMA)?;
            let target = TargetState::normalized(parse_coeffs(text)?, beta)?;
            let report = success_probability_state(&target, eps)?;
            let (_, z) = arbitrary_prep_waveform(&target, gamma)?;
            write_json(
                s.out.as_deref(),
                &json!({
                    "beta": beta, "epsilon": eps, "gamma": gamma,
                    "coeffs": target.coeffs.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>(),
                    "report": report,
                    "waveform_z": z,
                }),
            )
        }
        Command::SubspaceMin { common, j, starts } => {
            let s = Settings::load(&common, &[("j", &j), ("starts", &starts)])?;
            s.only(&["j", "beta", "epsilon", "seed", "starts"])?;
            let j = s.count("j", 1)?;
            let beta = s.number("beta", 0.87)?;
            let eps = s.number("epsilon", 0.1)?;
            let opt = OptimizerConfig {
                seed: s.seed()?,
                starts: s.count("starts", OptimizerConfig::default().starts)?,
                ..OptimizerConfig::default()
            };
            let m = min_success_over_subspace(j, beta, eps, &opt)?;
            write_json(
                s.out.as_deref(),
                &json!({
                    "j": j, "beta": beta, "epsilon": eps, "seed": opt.seed,
                    "probability": m.probability,
                    "coeffs": m.coeffs.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>(),
                    "converged_starts": m.converged_starts,
                }),
            )
        }
        Command::Feasibility { common, phys } => {
            let fields: [(&str, &Option<String>); 8] = [
                ("wavelength", &phys.wavelength),
                ("cavity_length", &phys.cavity_length),
                ("mirror_mass", &phys.mirror_mass),
                ("mech_freq", &phys.mech_freq),
                ("finesse", &phys.finesse),
                ("quality", &phys.quality),
                ("temperature", &phys.temperature),
                ("transmissivity", &phys.transmissivity),
            ];
            let s = Settings::load(&common, &fields)?;
            s.only(&fields.map(|(k, _)| k))?;
            let r = PhysicalParams::reference();
            let p = PhysicalParams {
                wavelength: s.number("wavelength", r.wavelength)?,
                cavity_length: s.number("cavity_length", r.cavity_length)?,
                mirror_mass: s.number("mirror_mass", r.mirror_mass)?,
                mech_freq: s.number("mech_freq", r.mech_freq)?,
                finesse: s.number("finesse", r.finesse)?,
                quality: s.number("quality", r.quality)?,
                temperature: s.number("temperature", r.temperature)?,
                transmissivity: s.number("transmissivity", r.transmissivity)?,
            };
            let report = requirements_report(&p)?;
            let mut text = report.to_json();
            text.push('\n');
            write_output(s.out.as_deref(), text.as_bytes())
        }
        Command::Sweep {
            common,
            observable,
            sets,
        } => {
            let mut s = Settings::load(&common, &[("observable", &observable)])?;
            for kv in &sets {
                let (k, v) = kv.split_once('=').ok_or_else(|| {
                    CliError::Invalid(format!("--set expects KEY=VALUE, got '{kv}'"))
                })?;
                s.map
                    .insert(k.trim().replace('-', "_"), v.trim().to_string());
            }
            if let Some(out) = &s.out {
                s.map.insert("out".into(), out.display().to_string());
            }
            let spec = SweepSpec::from_config(&s.map)?;
            let table = run_sweep(&spec)?;
            let bytes = table.encode(spec.format)?;
            write_output(spec.output_path.as_deref(), &bytes)?;
            let failures = table.error_count();
            if failures > 0 {
                return Err(CliError::Numerical(format!(
                    "{failures} grid point(s) failed; see the error column"
                )));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("optomech: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
