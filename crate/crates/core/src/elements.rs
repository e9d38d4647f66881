//! Linear maps for the optical and spin elements of the gate circuit, and the
//! composite Block (HWP → PBS → NV cavity → PBS → HWP).
//!
//! Small maps are plain matrices over their own label space; `lift_*`
//! functions embed them into the 16- or 32-dimensional photon-local space.
//!
//! Local orderings:
//! - polarization maps: `{R, L}`; spin maps: `{+, −}`; DOF maps: `{x1, x2}`
//! - Pockels cell: `(polarization ⊗ time bin)`, index `pol | timebin << 1`
//! - PBS routing: `(polarization ⊗ port)`, index `pol | port << 1`
//! - Block input/output arm: `(polarization ⊗ label ⊗ spin)`, index
//!   `pol | label << 1 | spin << 2`
//! - Block interior: `(polarization ⊗ frequency ⊗ port ⊗ spin)`, index
//!   `pol | freq << 1 | port << 2 | spin << 3`

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::cavity::{ScatterKey, ScatteringCoeffs, TransitionTable};
use crate::error::{Error, Result};
use crate::hilbert::{
    Frequency, Matrix, Nv, Photon, PhotonMode, Polarization, Port, Spatial, Spin, StateVector, TimeBin, C64,
    EXACT_TOL,
};

/// A photonic degree of freedom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dof {
    Polarization,
    Frequency,
    Spatial,
    TimeBin,
}

impl Dof {
    /// The qubit DOFs, in NV order.
    pub const QUBITS: [Dof; 3] = [Dof::Frequency, Dof::Spatial, Dof::TimeBin];

    /// The DOF whose Block uses this NV as ancilla.
    pub fn of_nv(nv: Nv) -> Dof {
        match nv {
            Nv::E1 => Dof::Frequency,
            Nv::E2 => Dof::Spatial,
            Nv::E3 => Dof::TimeBin,
        }
    }

    fn get(self, m: PhotonMode) -> usize {
        match self {
            Dof::Polarization => m.polarization.bit(),
            Dof::Frequency => m.frequency.bit(),
            Dof::Spatial => m.spatial.bit(),
            Dof::TimeBin => m.timebin.bit(),
        }
    }

    fn set(self, m: PhotonMode, bit: usize) -> PhotonMode {
        match self {
            Dof::Polarization => m.with_polarization(Polarization::from_bit(bit)),
            Dof::Frequency => m.with_frequency(Frequency::from_bit(bit)),
            Dof::Spatial => m.with_spatial(Spatial::from_bit(bit)),
            Dof::TimeBin => m.with_timebin(TimeBin::from_bit(bit)),
        }
    }
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn matrix2(a: f64, b: f64, cc: f64, d: f64) -> Matrix {
    Matrix::from_row_slice(2, 2, &[c(a), c(b), c(cc), c(d)])
}

/// Half-wave plate with fast axis at `theta` radians, acting on `{R, L}`
/// amplitudes. At 22.5° this is the Hadamard `R → (R+L)/√2`, `L → (R−L)/√2`.
pub fn hwp(theta: f64) -> Matrix {
    let (s, co) = (2.0 * theta).sin_cos();
    matrix2(co, s, s, -co)
}

pub fn hwp_hadamard() -> Matrix {
    matrix2(FRAC_1_SQRT_2, FRAC_1_SQRT_2, FRAC_1_SQRT_2, -FRAC_1_SQRT_2)
}

/// `|+⟩ → (|+⟩+|−⟩)/√2`, `|−⟩ → (|+⟩−|−⟩)/√2`.
pub fn spin_hadamard() -> Matrix {
    hwp_hadamard()
}

/// `ω1 ↔ ω2`.
pub fn frequency_shift() -> Matrix {
    pauli_x()
}

pub fn pauli_x() -> Matrix {
    matrix2(0.0, 1.0, 1.0, 0.0)
}

/// π phase on the second label.
pub fn sigma_z() -> Matrix {
    matrix2(1.0, 0.0, 0.0, -1.0)
}

/// Polarization bit flip conditioned on the `l` time bin.
pub fn pockels_conditional_flip() -> Matrix {
    let mut m = Matrix::zeros(4, 4);
    for pol in 0..2 {
        // l = 0 flips, s = 1 passes
        m[(pol ^ 1, pol)] = c(1.0);
        m[(pol | 2, pol | 2)] = c(1.0);
    }
    m
}

/// Circular PBS: `R` keeps its arm, `L` switches arm, no phase on either.
pub fn pbs_route() -> Matrix {
    let mut m = Matrix::zeros(4, 4);
    for port in 0..2 {
        m[(port << 1, port << 1)] = c(1.0);
        m[(1 | (port ^ 1) << 1, 1 | port << 1)] = c(1.0);
    }
    m
}

/// Embeds a 2x2 map on one DOF into the photon-local space.
pub fn lift_dof(dof: Dof, op: &Matrix, with_port: bool) -> Matrix {
    assert_eq!(op.shape(), (2, 2));
    PhotonMode::operator_from_rule(with_port, with_port, |m| {
        let col = dof.get(m);
        (0..2)
            .filter(|&row| op[(row, col)] != c(0.0))
            .map(|row| (dof.set(m, row), op[(row, col)]))
            .collect()
    })
}

/// Embeds the Pockels-cell map into the photon-local space.
pub fn lift_pockels(with_port: bool) -> Matrix {
    let pc = pockels_conditional_flip();
    PhotonMode::operator_from_rule(with_port, with_port, |m| {
        let col = m.polarization.bit() | m.timebin.bit() << 1;
        (0..4)
            .filter(|&row| pc[(row, col)] != c(0.0))
            .map(|row| {
                let out = m
                    .with_polarization(Polarization::from_bit(row))
                    .with_timebin(TimeBin::from_bit(row >> 1));
                (out, pc[(row, col)])
            })
            .collect()
    })
}

/// Embeds the PBS routing map into a photon-local space that carries a port.
pub fn lift_pbs() -> Matrix {
    let pbs = pbs_route();
    PhotonMode::operator_from_rule(true, true, |m| {
        let port = m.port.expect("port present");
        let col = m.polarization.bit() | port.bit() << 1;
        (0..4)
            .filter(|&row| pbs[(row, col)] != c(0.0))
            .map(|row| {
                let out = m
                    .with_polarization(Polarization::from_bit(row))
                    .with_port(Some(Port::from_bit(row >> 1)));
                (out, pbs[(row, col)])
            })
            .collect()
    })
}

/// Branch factors of a Block on `(label ⊗ spin)`, index `label | spin << 1`:
/// `t + r` on the coupled branch, `t0 + r0` elsewhere.
pub fn block_branch_factor<F>(coeffs: &ScatteringCoeffs, coupled: F) -> Matrix
where
    F: Fn(Frequency, Spin) -> bool,
{
    let mut m = Matrix::zeros(4, 4);
    for idx in 0..4 {
        let label = Frequency::from_bit(idx);
        let spin = Spin::from_bit(idx >> 1);
        m[(idx, idx)] = if coupled(label, spin) { coeffs.coupled_sum() } else { coeffs.uncoupled_sum() };
    }
    m
}

/// The physical coupling condition of a Block: `ω1` with the spin in `|+⟩`.
pub fn ideal_coupling(label: Frequency, spin: Spin) -> bool {
    label == Frequency::W1 && spin == Spin::Plus
}

/// Branch-factor Block on the full arm space `(polarization ⊗ label ⊗ spin)`.
///
/// An `R` input sees `t ± r` as in [`block_branch_factor`]; an `L` input
/// enters the cavity with the opposite relative sign between its two arms and
/// picks up `t − r` (coupled) or `t0 − r0` (uncoupled).
pub fn block_branch_map<F>(coeffs: &ScatteringCoeffs, coupled: F) -> Matrix
where
    F: Fn(Frequency, Spin) -> bool,
{
    let factors = block_branch_factor(coeffs, &coupled);
    let mut m = Matrix::zeros(8, 8);
    for idx in 0..8 {
        let pol = Polarization::from_bit(idx);
        let inner = idx >> 1;
        m[(idx, idx)] = match pol {
            Polarization::R => factors[(inner, inner)],
            Polarization::L => {
                if coupled(Frequency::from_bit(inner), Spin::from_bit(inner >> 1)) {
                    coeffs.t - coeffs.r
                } else {
                    coeffs.t0 - coeffs.r0
                }
            }
        };
    }
    m
}

/// Stages of an element-composed Block.
#[derive(Clone, Debug)]
pub struct BlockComposition {
    /// HWP then PBS: arm (8) → interior (16).
    pub split: Matrix,
    /// Cavity scattering on the interior space (16 × 16).
    pub scatter: Matrix,
    /// PBS recombination into the output arm (8 × 16).
    pub recombine: Matrix,
    /// Amplitude routed away from the output arm (8 × 16).
    pub discard: Matrix,
    /// Full Block on the arm space, `HWP · recombine · scatter · split`.
    pub map: Matrix,
    /// Largest column norm of `discard · scatter · split`.
    pub residual: f64,
}

impl BlockComposition {
    /// Interior state right after the cavity, for one arm-space input.
    pub fn post_cavity(&self, input: usize) -> Vec<C64> {
        (&self.scatter * &self.split).column(input).iter().copied().collect()
    }
}

fn arm_index(pol: usize, freq: usize, spin: usize) -> usize {
    pol | freq << 1 | spin << 2
}

/// Composes HWP → PBS → cavity → PBS → HWP.
///
/// The HWP sends `R` to `(R+L)/√2`; the PBS routes `R` into the cavity
/// travelling down and `L` travelling up. On the way out, `R↓` and `L↑`
/// recombine into the output arm and anything else leaves the Block.
pub fn block_compose_from_elements(coeffs: &ScatteringCoeffs) -> Result<BlockComposition> {
    let hwp = hwp_hadamard();
    let mut split = Matrix::zeros(16, 8);
    for freq in 0..2 {
        for spin in 0..2 {
            for pol_in in 0..2 {
                for pol in 0..2 {
                    let port = if pol == 0 { Port::Down } else { Port::Up };
                    let key = ScatterKey::new(
                        port,
                        Polarization::from_bit(pol),
                        Frequency::from_bit(freq),
                        Spin::from_bit(spin),
                    );
                    split[(key.index(), arm_index(pol_in, freq, spin))] += hwp[(pol, pol_in)];
                }
            }
        }
    }

    let scatter = TransitionTable::new(coeffs).to_matrix();

    let mut recombine = Matrix::zeros(8, 16);
    let mut discard = Matrix::zeros(8, 16);
    for key in ScatterKey::all() {
        let arm = arm_index(key.polarization.bit(), key.frequency.bit(), key.spin.bit());
        let through = matches!(
            (key.polarization, key.direction),
            (Polarization::R, Port::Down) | (Polarization::L, Port::Up)
        );
        if through {
            recombine[(arm, key.index())] = c(1.0);
        } else {
            discard[(arm, key.index())] = c(1.0);
        }
    }

    let inner = &scatter * &split;
    let leaked = &discard * &inner;
    let residual = leaked.column_iter().map(|col| col.norm()).fold(0.0, f64::max);
    if residual > EXACT_TOL {
        return Err(Error::CompositionMismatch { residual });
    }

    let mut hwp_arm = Matrix::zeros(8, 8);
    for idx in 0..8 {
        for pol in 0..2 {
            hwp_arm[(arm_index(pol, (idx >> 1) & 1, idx >> 2), idx)] += hwp[(pol, idx & 1)];
        }
    }
    let map = &hwp_arm * (&recombine * &inner);
    Ok(BlockComposition { split, scatter, recombine, discard, map, residual })
}

/// Which photon components a Block acts on, and which frequency label they
/// present to the NV.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockConfig {
    /// Every component enters; the NV sees the photon's own frequency.
    Frequency,
    /// Only components in `routed` enter. A WDM splits them by frequency and
    /// an FS on one arm shifts it, so the NV always sees `ω1`; the mirrored
    /// FS/WDM pair undoes this on exit. The other spatial mode bypasses.
    Spatial { routed: Spatial },
    /// Time-bin path of spatial mode `path`, between two Pockels cells: the
    /// `l` component arrives `L`-polarized and a PBS sends it around the
    /// Block, while `R` components enter with the NV seeing `ω1` (WDM/FS
    /// conditioning as above).
    TimeBin { path: Spatial },
}

impl BlockConfig {
    /// The label presented to the NV, or `None` if the component bypasses.
    pub fn nv_label(&self, m: PhotonMode) -> Option<Frequency> {
        match *self {
            BlockConfig::Frequency => Some(m.frequency),
            BlockConfig::Spatial { routed } => (m.spatial == routed).then_some(Frequency::W1),
            BlockConfig::TimeBin { path } => {
                (m.spatial == path && m.polarization == Polarization::R).then_some(Frequency::W1)
            }
        }
    }
}

/// Lifts an arm-space Block map (8 × 8) onto (photon-local ⊗ spin), with
/// columns `local + 16 · spin`.
pub fn lift_block(arm_map: &Matrix, config: BlockConfig) -> Matrix {
    assert_eq!(arm_map.shape(), (8, 8));
    let mut m = Matrix::zeros(32, 32);
    for mode in PhotonMode::all(false) {
        for spin in 0..2 {
            let col = mode.index() + 16 * spin;
            match config.nv_label(mode) {
                None => m[(col, col)] = c(1.0),
                Some(label) => {
                    let arm_col = arm_index(mode.polarization.bit(), label.bit(), spin);
                    for pol_out in 0..2 {
                        for spin_out in 0..2 {
                            let v = arm_map[(arm_index(pol_out, label.bit(), spin_out), arm_col)];
                            if v != c(0.0) {
                                let out = mode.with_polarization(Polarization::from_bit(pol_out));
                                m[(out.index() + 16 * spin_out, col)] += v;
                            }
                        }
                    }
                }
            }
        }
    }
    m
}

/// Element kinds placed on one photon (and, for Blocks and spin Hadamards,
/// one NV).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ElementKind {
    /// Circular PBS routing; needs a port on the photon.
    Pbs,
    /// Half-wave plate at the given angle in radians.
    Hwp(f64),
    /// Frequency demultiplexer. It only steers wave packets between arms,
    /// which the label space does not carry, so it acts as the identity;
    /// its effect on Blocks is encoded in [`BlockConfig`].
    Wdm,
    Fs,
    PcL,
    SpinHadamard(Nv),
    BlockIdeal(Nv, BlockConfig),
    BlockLossy(Nv, BlockConfig, ScatteringCoeffs),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementOp {
    pub kind: ElementKind,
    pub target: Photon,
}

impl ElementOp {
    pub fn new(kind: ElementKind, target: Photon) -> Self {
        ElementOp { kind, target }
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        let port = state.has_port(self.target);
        match &self.kind {
            ElementKind::Pbs => {
                if !port {
                    return Err(Error::Dimension { expected: 32, found: 16 });
                }
                state.apply_single_photon_map(self.target, &lift_pbs())
            }
            ElementKind::Hwp(theta) => {
                state.apply_single_photon_map(self.target, &lift_dof(Dof::Polarization, &hwp(*theta), port))
            }
            ElementKind::Wdm => Ok(state.clone()),
            ElementKind::Fs => {
                state.apply_single_photon_map(self.target, &lift_dof(Dof::Frequency, &frequency_shift(), port))
            }
            ElementKind::PcL => state.apply_single_photon_map(self.target, &lift_pockels(port)),
            ElementKind::SpinHadamard(nv) => state.apply_spin_map(*nv, &spin_hadamard()),
            ElementKind::BlockIdeal(nv, config) => {
                apply_block(state, self.target, *nv, *config, &ScatteringCoeffs::IDEAL)
            }
            ElementKind::BlockLossy(nv, config, coeffs) => apply_block(state, self.target, *nv, *config, coeffs),
        }
    }
}

fn apply_block(
    state: &StateVector,
    photon: Photon,
    nv: Nv,
    config: BlockConfig,
    coeffs: &ScatteringCoeffs,
) -> Result<StateVector> {
    let composed = block_compose_from_elements(coeffs)?;
    state.apply_photon_spin_map(photon, nv, &lift_block(&composed.map, config))
}
