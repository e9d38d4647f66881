//! Block fidelity and efficiency, their angle averages, parameter sweeps,
//! and whole-protocol metrics.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};
use std::io::Write;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::{CavityParams, ScatteringCoeffs};
use crate::circuit::{apply_feed_forward, evolve, FeedForwardTable, Physics, ProtocolMode};
use crate::error::{Error, Result};
use crate::hilbert::{
    Frequency, Nv, PhotonInputSpec, PhotonMode, Polarization, Spatial, Spin, SpinConfig, StateVector, TimeBin, C64,
    EXACT_TOL,
};

/// Default Gauss–Legendre nodes per axis.
pub const DEFAULT_NODES: usize = 128;
/// Largest shift allowed when the node count is doubled.
pub const CONVERGENCE_TOL: f64 = 1e-7;

/// Two-photon frequency state with one spin, index `a | b << 1 | spin << 2`
/// (`0 = ω1` / `+`). Both photons are `R`-polarized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockState(#[serde(with = "crate::hilbert::reim::array")] pub [C64; 8]);

impl BlockState {
    pub fn index(a: Frequency, b: Frequency, spin: Spin) -> usize {
        a.bit() | b.bit() << 1 | spin.bit() << 2
    }

    pub fn get(&self, a: Frequency, b: Frequency, spin: Spin) -> C64 {
        self.0[Self::index(a, b, spin)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &BlockState) -> C64 {
        self.0.iter().zip(&other.0).map(|(x, y)| x.conj() * y).sum()
    }

    /// Embeds into the full state space: photon frequencies as given, spatial
    /// `m1`, time bin `l`, the spin on NV1 and NV2, NV3 in `|+⟩`.
    pub fn to_state_vector(&self) -> StateVector {
        let mut out = StateVector::zeros(false, false);
        for (idx, &amp) in self.0.iter().enumerate() {
            if amp == C64::new(0.0, 0.0) {
                continue;
            }
            let mode = |bit| PhotonMode::new(Polarization::R, Frequency::from_bit(bit), Spatial::M1, TimeBin::Long);
            let spin = Spin::from_bit(idx >> 2);
            let spins = SpinConfig([spin, Spin::Plus, Spin::Plus]);
            let basis = StateVector::basis(mode(idx & 1), mode((idx >> 1) & 1), spins);
            out = &out + &(&basis * amp);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockStates {
    pub init: BlockState,
    pub ideal: BlockState,
    pub real: BlockState,
}

/// Input, ideal output and lossy output of the two-photon Block test, for
/// photon amplitudes `(cos α, sin α)` and `(cos β, sin β)`.
pub fn block_states(alpha: f64, beta: f64, c: &ScatteringCoeffs) -> BlockStates {
    use Frequency::{W1, W2};
    use Spin::{Minus, Plus};
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let amp = |x: f64| C64::new(FRAC_1_SQRT_2 * x, 0.0);
    let x = c.coupled_sum();
    let y = c.uncoupled_sum();

    let mut init = [C64::new(0.0, 0.0); 8];
    for spin in Spin::ALL {
        init[BlockState::index(W1, W1, spin)] = amp(ca * cb);
        init[BlockState::index(W1, W2, spin)] = amp(ca * sb);
        init[BlockState::index(W2, W1, spin)] = amp(sa * cb);
        init[BlockState::index(W2, W2, spin)] = amp(sa * sb);
    }

    let mut ideal = [C64::new(0.0, 0.0); 8];
    ideal[BlockState::index(W1, W1, Plus)] = amp(ca * cb);
    ideal[BlockState::index(W1, W2, Plus)] = amp(-ca * sb);
    ideal[BlockState::index(W1, W1, Minus)] = amp(ca * cb);
    ideal[BlockState::index(W1, W2, Minus)] = amp(ca * sb);
    ideal[BlockState::index(W2, W1, Plus)] = amp(-sa * cb);
    ideal[BlockState::index(W2, W2, Plus)] = amp(sa * sb);
    ideal[BlockState::index(W2, W1, Minus)] = amp(sa * cb);
    ideal[BlockState::index(W2, W2, Minus)] = amp(sa * sb);

    let mut real = [C64::new(0.0, 0.0); 8];
    real[BlockState::index(W1, W1, Plus)] = amp(ca * cb) * x * x;
    real[BlockState::index(W1, W1, Minus)] = amp(ca * cb) * y * y;
    real[BlockState::index(W2, W1, Plus)] = amp(sa * cb) * y * x;
    real[BlockState::index(W2, W1, Minus)] = amp(sa * cb) * y * y;
    real[BlockState::index(W1, W2, Plus)] = amp(ca * sb) * y * x;
    real[BlockState::index(W1, W2, Minus)] = amp(ca * sb) * y * y;
    real[BlockState::index(W2, W2, Plus)] = amp(sa * sb) * y * y;
    real[BlockState::index(W2, W2, Minus)] = amp(sa * sb) * y * y;

    BlockStates { init: BlockState(init), ideal: BlockState(ideal), real: BlockState(real) }
}

/// How `ψ_real` enters the overlap.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityConvention {
    /// `ψ_real` rescaled to unit norm first.
    #[default]
    Normalized,
    /// The raw overlap, which also carries the photon loss.
    Unnormalized,
}

/// `|⟨ψ_real|ψ_ideal⟩|` at one pair of angles.
pub fn block_fidelity_with(alpha: f64, beta: f64, c: &ScatteringCoeffs, convention: FidelityConvention) -> Result<f64> {
    let s = block_states(alpha, beta, c);
    let norm = s.real.norm_sqr();
    if norm == 0.0 {
        return Err(Error::ZeroState);
    }
    let overlap = s.real.inner(&s.ideal).norm();
    Ok(match convention {
        FidelityConvention::Normalized => (overlap / norm.sqrt()).min(1.0),
        FidelityConvention::Unnormalized => overlap,
    })
}

pub fn block_fidelity(alpha: f64, beta: f64, c: &ScatteringCoeffs) -> Result<f64> {
    block_fidelity_with(alpha, beta, c, FidelityConvention::Normalized)
}

/// Output/input photon ratio `‖ψ_real‖²` at one pair of angles.
pub fn block_efficiency(alpha: f64, beta: f64, c: &ScatteringCoeffs) -> f64 {
    block_states(alpha, beta, c).real.norm_sqr()
}

/// `(|t+r|⁴ + 2|t+r|²|t0+r0|² + 5|t0+r0|⁴) / 8`.
pub fn block_efficiency_closed_form(c: &ScatteringCoeffs) -> f64 {
    let x2 = c.coupled_sum().norm_sqr();
    let y2 = c.uncoupled_sum().norm_sqr();
    (x2 * x2 + 2.0 * x2 * y2 + 5.0 * y2 * y2) / 8.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AveragingMethod {
    /// Closed-form efficiency; the fidelity still uses default quadrature.
    ClosedForm,
    /// Tensor-product Gauss–Legendre on `[0, 2π]²`.
    Quadrature { nodes: usize },
    /// Uniform-grid trapezoid rule (spectrally accurate for periodic integrands).
    Trapezoid { nodes: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for AveragingMethod {
    fn default() -> Self {
        AveragingMethod::Quadrature { nodes: DEFAULT_NODES }
    }
}

impl AveragingMethod {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AveragingMethod::ClosedForm => Ok(()),
            AveragingMethod::Quadrature { nodes } | AveragingMethod::Trapezoid { nodes } if nodes < 2 => {
                Err(Error::InvalidMethod(format!("need at least 2 nodes per axis, got {nodes}")))
            }
            AveragingMethod::MonteCarlo { samples, .. } if samples < 2 => {
                Err(Error::InvalidMethod(format!("need at least 2 samples, got {samples}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockMetrics {
    pub avg_fidelity: f64,
    pub avg_efficiency: f64,
    pub method: AveragingMethod,
    /// Monte Carlo only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fidelity_std_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency_std_error: Option<f64>,
    /// Set when doubling the node count moves an estimate by more than
    /// [`CONVERGENCE_TOL`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence_warning: Option<String>,
}

/// Angle rule on `[0, 2π)`: nodes and weights summing to 1.
fn angle_rule(method: AveragingMethod) -> Vec<(f64, f64)> {
    match method {
        AveragingMethod::Trapezoid { nodes } => {
            (0..nodes).map(|i| (TAU * i as f64 / nodes as f64, 1.0 / nodes as f64)).collect()
        }
        AveragingMethod::Quadrature { nodes } => {
            let rule = GaussLegendre::new(NonZeroUsize::new(nodes).expect("validated node count"));
            rule.as_node_weight_pairs().iter().map(|&(x, w)| (std::f64::consts::PI * (x + 1.0), w / 2.0)).collect()
        }
        _ => unreachable!("not a grid rule"),
    }
}

/// Grid average of `(F, η)` with both angles shifted by `shift`.
pub fn grid_average(
    c: &ScatteringCoeffs,
    method: AveragingMethod,
    shift: f64,
    convention: FidelityConvention,
) -> Result<(f64, f64)> {
    method.validate()?;
    let rule = angle_rule(method);
    let mut f = 0.0;
    let mut eta = 0.0;
    for &(a, wa) in &rule {
        for &(b, wb) in &rule {
            let w = wa * wb;
            f += w * block_fidelity_with(a + shift, b + shift, c, convention)?;
            eta += w * block_efficiency(a + shift, b + shift, c);
        }
    }
    Ok((f, eta))
}

fn doubled(method: AveragingMethod) -> AveragingMethod {
    match method {
        AveragingMethod::Quadrature { nodes } => AveragingMethod::Quadrature { nodes: 2 * nodes },
        AveragingMethod::Trapezoid { nodes } => AveragingMethod::Trapezoid { nodes: 2 * nodes },
        other => other,
    }
}

/// Angle-averaged fidelity and efficiency of the Block.
pub fn average_block_metrics(c: &ScatteringCoeffs, method: AveragingMethod) -> Result<BlockMetrics> {
    average_block_metrics_with(c, method, FidelityConvention::Normalized)
}

pub fn average_block_metrics_with(
    c: &ScatteringCoeffs,
    method: AveragingMethod,
    convention: FidelityConvention,
) -> Result<BlockMetrics> {
    method.validate()?;
    match method {
        AveragingMethod::ClosedForm => {
            let quad = AveragingMethod::Quadrature { nodes: DEFAULT_NODES };
            let (f, _) = grid_average(c, quad, 0.0, convention)?;
            let mut m = with_convergence_check(c, quad, convention, f, block_efficiency_closed_form(c))?;
            m.method = method;
            Ok(m)
        }
        AveragingMethod::Quadrature { .. } | AveragingMethod::Trapezoid { .. } => {
            let (f, eta) = grid_average(c, method, 0.0, convention)?;
            with_convergence_check(c, method, convention, f, eta)
        }
        AveragingMethod::MonteCarlo { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (mut sf, mut sf2, mut se, mut se2) = (0.0, 0.0, 0.0, 0.0);
            for _ in 0..samples {
                let a = rng.random::<f64>() * TAU;
                let b = rng.random::<f64>() * TAU;
                let f = block_fidelity_with(a, b, c, convention)?;
                let e = block_efficiency(a, b, c);
                sf += f;
                sf2 += f * f;
                se += e;
                se2 += e * e;
            }
            let n = samples as f64;
            let stderr = |s: f64, s2: f64| ((s2 / n - (s / n).powi(2)).max(0.0) / (n - 1.0)).sqrt();
            Ok(BlockMetrics {
                avg_fidelity: sf / n,
                avg_efficiency: se / n,
                method,
                fidelity_std_error: Some(stderr(sf, sf2)),
                efficiency_std_error: Some(stderr(se, se2)),
                convergence_warning: None,
            })
        }
    }
}

fn with_convergence_check(
    c: &ScatteringCoeffs,
    method: AveragingMethod,
    convention: FidelityConvention,
    f: f64,
    eta: f64,
) -> Result<BlockMetrics> {
    let (f2, eta2) = grid_average(c, doubled(method), 0.0, convention)?;
    let shift = (f2 - f).abs().max((eta2 - eta).abs());
    let convergence_warning = (shift > CONVERGENCE_TOL)
        .then(|| format!("doubling the node count moves the estimate by {shift:.3e}"));
    Ok(BlockMetrics {
        avg_fidelity: f,
        avg_efficiency: eta,
        method,
        fidelity_std_error: None,
        efficiency_std_error: None,
        convergence_warning,
    })
}

/// Resonant parameter grid: leakage ratio `κs/κ` and cooperativity `g²/κγ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub ks_over_k: Vec<f64>,
    pub cooperativity: Vec<f64>,
}

/// `count` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        n => (0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect(),
    }
}

impl SweepGrid {
    pub fn new(ks_over_k: Vec<f64>, cooperativity: Vec<f64>) -> Result<Self> {
        let grid = SweepGrid { ks_over_k, cooperativity };
        grid.validate()?;
        Ok(grid)
    }

    /// `κs/κ` from 0 to 0.5 (21 points) and cooperativity from 0.5 to 30
    /// (60 points), plus the microdisk cooperativity 8.654.
    pub fn standard() -> Self {
        let mut coop = linspace(0.5, 30.0, 60);
        coop.push(8.654);
        coop.sort_by(f64::total_cmp);
        SweepGrid { ks_over_k: linspace(0.0, 0.5, 21), cooperativity: coop }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, axis: &[f64], positive: bool| -> Result<()> {
            if axis.is_empty() {
                return Err(Error::InvalidGrid(format!("{name} axis is empty")));
            }
            for &v in axis {
                if !v.is_finite() || v < 0.0 || (positive && v == 0.0) {
                    let bound = if positive { "> 0" } else { ">= 0" };
                    return Err(Error::InvalidGrid(format!("{name} value {v} must be finite and {bound}")));
                }
            }
            if axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidGrid(format!("{name} axis must be strictly increasing")));
            }
            Ok(())
        };
        check("ks_over_k", &self.ks_over_k, false)?;
        check("cooperativity", &self.cooperativity, true)
    }

    pub fn len(&self) -> usize {
        self.ks_over_k.len() * self.cooperativity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ks_over_k: f64,
    pub cooperativity: f64,
    pub avg_fidelity: f64,
    pub avg_efficiency: f64,
}

/// Block metrics at every grid point at resonance. Rows are ordered by
/// `κs/κ`, then cooperativity, whatever the thread scheduling.
pub fn sweep(grid: &SweepGrid, method: AveragingMethod) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    method.validate()?;
    let points: Vec<(f64, f64)> =
        grid.ks_over_k.iter().flat_map(|&ks| grid.cooperativity.iter().map(move |&coop| (ks, coop))).collect();
    points
        .into_par_iter()
        .map(|(ks, coop)| {
            let c = CavityParams::resonant(ks, coop).scattering_coeffs()?;
            debug_assert!(c.coupled_sum().im.abs() < EXACT_TOL && c.uncoupled_sum().im.abs() < EXACT_TOL);
            let (avg_fidelity, avg_efficiency) = match method {
                AveragingMethod::ClosedForm => {
                    let quad = AveragingMethod::Quadrature { nodes: DEFAULT_NODES };
                    let (f, _) = grid_average(&c, quad, 0.0, FidelityConvention::Normalized)?;
                    (f, block_efficiency_closed_form(&c))
                }
                AveragingMethod::MonteCarlo { .. } => {
                    let m = average_block_metrics(&c, method)?;
                    (m.avg_fidelity, m.avg_efficiency)
                }
                _ => grid_average(&c, method, 0.0, FidelityConvention::Normalized)?,
            };
            Ok(SweepRow { ks_over_k: ks, cooperativity: coop, avg_fidelity, avg_efficiency })
        })
        .collect()
}

/// Fixed-point rendering with 9 significant digits.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let decimals = (8 - x.abs().log10().floor() as i32).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding can carry into a new digit, e.g. 9.999999999 -> 10.00000000
    let digits = s.chars().filter(|c| c.is_ascii_digit()).collect::<String>();
    if digits.trim_start_matches('0').len() > 9 && decimals > 0 {
        format!("{x:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

/// CSV with header `ks_over_k,cooperativity,avg_fidelity,avg_efficiency`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["ks_over_k", "cooperativity", "avg_fidelity", "avg_efficiency"])?;
    for r in rows {
        w.write_record([
            format_sig9(r.ks_over_k),
            format_sig9(r.cooperativity),
            format_sig9(r.avg_fidelity),
            format_sig9(r.avg_efficiency),
        ])?;
    }
    w.flush()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolMetrics {
    /// Outcome-weighted overlap of the normalized lossy and ideal outputs.
    pub fidelity: f64,
    /// Squared norm of the lossy state before measurement.
    pub efficiency: f64,
}

/// Fidelity and efficiency of the full hyper-CPF run with the given per-NV
/// coefficients. For every spin outcome the lossy branch is corrected with
/// the CPF corrections, normalized, and overlapped with the ideal output; overlaps are
/// weighted by the outcome probabilities of the lossy run.
pub fn protocol_metrics(
    spec_a: &PhotonInputSpec,
    spec_b: &PhotonInputSpec,
    coeffs: [ScatteringCoeffs; 3],
) -> Result<ProtocolMetrics> {
    let (ideal_pre, _) = evolve(spec_a, spec_b, ProtocolMode::HyperCpf, &Physics::Ideal, false)?;
    let (lossy_pre, _) = evolve(spec_a, spec_b, ProtocolMode::HyperCpf, &Physics::Lossy(coeffs), false)?;
    let efficiency = lossy_pre.norm_sqr();
    if efficiency == 0.0 {
        return Err(Error::ZeroState);
    }
    let table = FeedForwardTable::cpf();
    let project = |s: &StateVector, o: SpinConfig| {
        s.project_spin(Nv::E1, o.0[0]).project_spin(Nv::E2, o.0[1]).project_spin(Nv::E3, o.0[2])
    };
    let photons = |s: &StateVector, o: SpinConfig| -> Vec<C64> {
        let v = s.photon_amplitudes(o);
        let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        v.into_iter().map(|c| c / n).collect()
    };
    let mut fidelity = 0.0;
    for o in SpinConfig::all() {
        let branch = project(&lossy_pre, o);
        let p = branch.norm_sqr() / efficiency;
        if p == 0.0 {
            continue;
        }
        let lossy = photons(&apply_feed_forward(&branch, o, &table)?, o);
        let ideal = photons(&apply_feed_forward(&project(&ideal_pre, o), o, &table)?, o);
        let overlap: C64 = lossy.iter().zip(&ideal).map(|(x, y)| x.conj() * y).sum();
        fidelity += p * overlap.norm();
    }
    Ok(ProtocolMetrics { fidelity: fidelity.min(1.0), efficiency })
}
