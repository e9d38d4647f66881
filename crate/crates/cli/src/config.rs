//! Run configuration: an optional JSON file merged with command-line flags.
//! Flags always win; the merged parameters are validated again afterwards.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use hyperdof::analysis::{AveragingMethod, SweepGrid, DEFAULT_NODES};
use hyperdof::cavity::{CavityParams, ScatteringCoeffs, DEFAULT_KS_OVER_K};
use hyperdof::circuit::{Physics, ProtocolMode};
use hyperdof::hilbert::{Frequency, PhotonInputSpec, Spatial, Spin, SpinConfig, TimeBin};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Contents of `--config <path>`. Every key is optional; unknown keys are
/// rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub cavity: Option<CavityParams>,
    /// Direct coefficients; used instead of `cavity` when present.
    pub coeffs: Option<ScatteringCoeffs>,
    pub photon_a: Option<PhotonInputSpec>,
    pub photon_b: Option<PhotonInputSpec>,
    pub seed: Option<u64>,
    pub mode: Option<ModeArg>,
    pub physics: Option<PhysicsArg>,
    pub force_outcome: Option<String>,
    pub record_intermediates: Option<bool>,
    pub method: Option<MethodArg>,
    pub nodes: Option<usize>,
    pub samples: Option<usize>,
    pub shots: Option<usize>,
    pub grid: Option<SweepGrid>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Cpf,
    Parity,
}

impl From<ModeArg> for ProtocolMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Cpf => ProtocolMode::HyperCpf,
            ModeArg::Parity => ProtocolMode::HyperParity,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhysicsArg {
    Ideal,
    /// The cavity coefficients on all three NVs.
    Lossy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Quadrature,
    Trapezoid,
    MonteCarlo,
    ClosedForm,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Units {
    /// Rates in GHz, multiplied by 2π.
    #[default]
    Ghz,
    /// Rates as multiples of the current `kappa`.
    Kappa,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Realistic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InputKind {
    /// Drawn from the seeded generator.
    Random,
    /// Every amplitude pair balanced.
    Uniform,
}

#[derive(Args, Clone, Debug, Default)]
pub struct CavityArgs {
    /// Start from a parameter preset (the default when no config cavity is given).
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long, allow_hyphen_values = true)]
    pub g: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub kappa_s: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    /// Sets `kappa_s = ks_over_k * kappa`.
    #[arg(long, allow_hyphen_values = true)]
    pub ks_over_k: Option<f64>,
    /// Sets `g` so that `g² / (kappa gamma)` hits this value.
    #[arg(long, allow_hyphen_values = true)]
    pub cooperativity: Option<f64>,
    /// Cavity and dipole both on resonance with the photon.
    #[arg(long, conflicts_with_all = ["detuning_c", "detuning_x"])]
    pub resonant: bool,
    /// Cavity detuning `omega_c - omega`.
    #[arg(long, allow_hyphen_values = true)]
    pub detuning_c: Option<f64>,
    /// Dipole detuning `omega_x - omega`.
    #[arg(long, allow_hyphen_values = true)]
    pub detuning_x: Option<f64>,
    /// Units of the rate and detuning flags.
    #[arg(long, value_enum, default_value_t)]
    pub units: Units,
}

impl CavityArgs {
    fn touches_params(&self) -> bool {
        self.preset.is_some()
            || self.g.is_some()
            || self.kappa.is_some()
            || self.kappa_s.is_some()
            || self.gamma.is_some()
            || self.ks_over_k.is_some()
            || self.cooperativity.is_some()
            || self.resonant
            || self.detuning_c.is_some()
            || self.detuning_x.is_some()
    }

    /// Merges the flags onto the file parameters (or the realistic preset).
    pub fn params(&self, file: &FileConfig) -> Result<CavityParams, CliError> {
        let mut p = match (self.preset, file.cavity) {
            (None, Some(p)) => p,
            _ => CavityParams::realistic(DEFAULT_KS_OVER_K),
        };
        let kappa_before = p.kappa;
        let scale = |x: f64, kappa: f64| match self.units {
            Units::Ghz => x * TAU,
            Units::Kappa => x * kappa,
        };
        if let Some(k) = self.kappa {
            p.kappa = scale(k, kappa_before);
        }
        if let Some(g) = self.g {
            p.g = scale(g, p.kappa);
        }
        if let Some(ks) = self.kappa_s {
            p.kappa_s = scale(ks, p.kappa);
        }
        if let Some(gamma) = self.gamma {
            p.gamma = scale(gamma, p.kappa);
        }
        if let Some(ratio) = self.ks_over_k {
            p.kappa_s = ratio * p.kappa;
        }
        if let Some(c) = self.cooperativity {
            if c < 0.0 {
                return Err(CliError::Usage("cooperativity must be >= 0".into()));
            }
            p.g = (c * p.kappa * p.gamma).sqrt();
        }
        if self.resonant {
            p.omega_c = p.omega;
            p.omega_x = p.omega;
        }
        if let Some(d) = self.detuning_c {
            p.omega_c = p.omega + scale(d, p.kappa);
        }
        if let Some(d) = self.detuning_x {
            p.omega_x = p.omega + scale(d, p.kappa);
        }
        p.validate()?;
        Ok(p)
    }

    /// Coefficients from the merged parameters, or the file's direct
    /// coefficients when no cavity flag is given.
    pub fn coeffs(&self, file: &FileConfig) -> Result<(Option<CavityParams>, ScatteringCoeffs), CliError> {
        if let (Some(c), false) = (file.coeffs, self.touches_params()) {
            if !c.is_finite() {
                return Err(CliError::Usage("coefficients must be finite".into()));
            }
            if !c.is_passive(1e-12) {
                return Err(CliError::Usage("coefficients must be passive: |r|^2 + |t|^2 <= 1 and |r0|^2 + |t0|^2 <= 1".into()));
            }
            return Ok((None, c));
        }
        let p = self.params(file)?;
        Ok((Some(p), p.scattering_coeffs()?))
    }
}

#[derive(Args, Clone, Debug, Default)]
pub struct InputArgs {
    /// How to fill photon inputs not given in the config file.
    #[arg(long, value_enum)]
    pub inputs: Option<InputKind>,
    /// Basis input for photon a, e.g. `w2,m1,s`.
    #[arg(long, value_parser = parse_basis)]
    pub basis_a: Option<PhotonInputSpec>,
    #[arg(long, value_parser = parse_basis)]
    pub basis_b: Option<PhotonInputSpec>,
}

impl InputArgs {
    pub fn specs(&self, file: &FileConfig, seed: u64) -> Result<(PhotonInputSpec, PhotonInputSpec), CliError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |explicit: Option<PhotonInputSpec>, from_file: Option<PhotonInputSpec>| match (explicit, self.inputs) {
            (Some(s), _) => s,
            (None, Some(InputKind::Uniform)) => PhotonInputSpec::uniform(),
            (None, Some(InputKind::Random)) => PhotonInputSpec::random(&mut rng),
            (None, None) => from_file.unwrap_or_else(|| PhotonInputSpec::random(&mut rng)),
        };
        let a = fill(self.basis_a, file.photon_a);
        let b = fill(self.basis_b, file.photon_b);
        a.validate()?;
        b.validate()?;
        Ok((a, b))
    }
}

#[derive(Args, Clone, Debug, Default)]
pub struct MethodArgs {
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Nodes per axis for quadrature and trapezoid.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Monte Carlo sample count.
    #[arg(long)]
    pub samples: Option<usize>,
}

impl MethodArgs {
    pub fn method(&self, file: &FileConfig, seed: u64) -> Result<AveragingMethod, CliError> {
        let nodes = self.nodes.or(file.nodes).unwrap_or(DEFAULT_NODES);
        let samples = self.samples.or(file.samples).unwrap_or(100_000);
        let m = match self.method.or(file.method).unwrap_or(MethodArg::Quadrature) {
            MethodArg::Quadrature => AveragingMethod::Quadrature { nodes },
            MethodArg::Trapezoid => AveragingMethod::Trapezoid { nodes },
            MethodArg::MonteCarlo => AveragingMethod::MonteCarlo { samples, seed },
            MethodArg::ClosedForm => AveragingMethod::ClosedForm,
        };
        m.validate()?;
        Ok(m)
    }
}

pub fn physics(arg: Option<PhysicsArg>, file: &FileConfig, coeffs: ScatteringCoeffs) -> Physics {
    match arg.or(file.physics).unwrap_or(PhysicsArg::Ideal) {
        PhysicsArg::Ideal => Physics::Ideal,
        PhysicsArg::Lossy => Physics::Lossy([coeffs; 3]),
    }
}

/// `w1,m2,s` style basis label; the order of the three labels is free.
pub fn parse_basis(s: &str) -> Result<PhotonInputSpec, String> {
    let (mut f, mut m, mut t) = (None, None, None);
    for part in s.split(',').map(str::trim) {
        match part {
            "w1" => f = Some(Frequency::W1),
            "w2" => f = Some(Frequency::W2),
            "m1" => m = Some(Spatial::M1),
            "m2" => m = Some(Spatial::M2),
            "l" => t = Some(TimeBin::Long),
            "s" => t = Some(TimeBin::Short),
            other => return Err(format!("unknown basis label `{other}`")),
        }
    }
    match (f, m, t) {
        (Some(f), Some(m), Some(t)) => Ok(PhotonInputSpec::basis(f, m, t)),
        _ => Err(format!("`{s}` needs one frequency (w1|w2), spatial (m1|m2) and time-bin (l|s) label")),
    }
}

/// Three spin signs for NV1..NV3, e.g. `+-+`.
pub fn parse_outcome(s: &str) -> Result<SpinConfig, String> {
    let spins: Vec<Spin> = s
        .chars()
        .map(|c| match c {
            '+' => Ok(Spin::Plus),
            '-' | '−' => Ok(Spin::Minus),
            other => Err(format!("unexpected `{other}` in outcome, use + and -")),
        })
        .collect::<Result<_, _>>()?;
    let spins: [Spin; 3] = spins.try_into().map_err(|_| format!("outcome `{s}` must have exactly three signs"))?;
    Ok(SpinConfig(spins))
}

/// `ks=0:0.5:26 coop=0.1:30:60`; each axis is `start:stop:count` or a
/// comma-separated list.
pub fn parse_grid(s: &str) -> Result<SweepGrid, String> {
    let (mut ks, mut coop) = (None, None);
    for token in s.split_whitespace() {
        let (key, value) = token.split_once('=').ok_or_else(|| format!("`{token}` is not key=value"))?;
        let axis = parse_axis(value)?;
        match key {
            "ks" | "ks_over_k" => ks = Some(axis),
            "coop" | "cooperativity" => coop = Some(axis),
            other => return Err(format!("unknown grid axis `{other}`, use ks and coop")),
        }
    }
    let default = SweepGrid::standard();
    SweepGrid::new(ks.unwrap_or(default.ks_over_k), coop.unwrap_or(default.cooperativity)).map_err(|e| e.to_string())
}

fn parse_axis(value: &str) -> Result<Vec<f64>, String> {
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    let parts: Vec<&str> = value.split(':').collect();
    match parts.as_slice() {
        [start, stop, count] => {
            let n: usize = count.trim().parse().map_err(|e| format!("`{count}`: {e}"))?;
            if n == 0 {
                return Err("range count must be at least 1".into());
            }
            Ok(hyperdof::analysis::linspace(num(start)?, num(stop)?, n))
        }
        [list] => list.split(',').map(num).collect(),
        _ => Err(format!("`{value}` is neither start:stop:count nor a list")),
    }
}
