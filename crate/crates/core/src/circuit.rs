//! The two-photon pipelines: hyper-CPF (three Blocks per photon, spin
//! Hadamards, spin measurement, feed-forward) and hyper-parity.
//!
//! NV1 acts on the frequency qubit, NV2 on the spatial qubit and NV3 on the
//! time-bin qubit. Photon a is injected first, then photon b.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cavity::ScatteringCoeffs;
use crate::elements::{lift_dof, pauli_x, sigma_z, BlockConfig, Dof, ElementKind, ElementOp};
use crate::error::{Error, Result};
use crate::hilbert::{
    ForcedOutcomes, Matrix, Nv, OutcomeSource, Photon, PhotonInputSpec, SampledOutcomes, Spatial, Spin,
    SpinConfig, SpinMeasurement, StateVector, C64, EXACT_TOL,
};

/// The three NV measurement results `(s1, s2, s3)`.
pub type MeasurementOutcome = SpinConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolMode {
    HyperCpf,
    HyperParity,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Physics {
    Ideal,
    /// One coefficient quadruple per NV, in NV order.
    Lossy([ScatteringCoeffs; 3]),
}

impl Physics {
    pub fn coeffs(&self, nv: Nv) -> ScatteringCoeffs {
        match self {
            Physics::Ideal => ScatteringCoeffs::IDEAL,
            Physics::Lossy(c) => c[nv.position()],
        }
    }

    fn block(&self, nv: Nv, config: BlockConfig) -> ElementKind {
        match self {
            Physics::Ideal => ElementKind::BlockIdeal(nv, config),
            Physics::Lossy(c) => ElementKind::BlockLossy(nv, config, c[nv.position()]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub mode: ProtocolMode,
    pub physics: Physics,
    /// Outcomes to project onto; when absent they are sampled with `seed`.
    pub forced_outcomes: Option<MeasurementOutcome>,
    pub seed: u64,
    pub record_intermediates: bool,
}

impl ProtocolConfig {
    pub fn new(mode: ProtocolMode) -> Self {
        ProtocolConfig { mode, physics: Physics::Ideal, forced_outcomes: None, seed: 0, record_intermediates: false }
    }

    pub fn with_physics(mut self, physics: Physics) -> Self {
        self.physics = physics;
        self
    }

    pub fn with_forced(mut self, outcome: MeasurementOutcome) -> Self {
        self.forced_outcomes = Some(outcome);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn recording(mut self) -> Self {
        self.record_intermediates = true;
        self
    }
}

/// Single-qubit feed-forward operation on one DOF.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeedForwardOp {
    I,
    MinusI,
    SigmaZ,
    MinusSigmaZ,
}

impl FeedForwardOp {
    pub fn matrix(self) -> Matrix {
        match self {
            FeedForwardOp::I => Matrix::identity(2, 2),
            FeedForwardOp::MinusI => -Matrix::identity(2, 2),
            FeedForwardOp::SigmaZ => sigma_z(),
            FeedForwardOp::MinusSigmaZ => -sigma_z(),
        }
    }
}

/// Corrections keyed by `(nv, outcome)`: `(op on photon a, op on photon b)`,
/// each acting on that NV's DOF.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedForwardTable {
    pub rows: Vec<((Nv, Spin), (FeedForwardOp, FeedForwardOp))>,
}

impl FeedForwardTable {
    /// Corrections that turn every measured branch into the CPF gate.
    pub fn cpf() -> Self {
        use FeedForwardOp::*;
        FeedForwardTable {
            rows: vec![
                ((Nv::E1, Spin::Plus), (MinusI, I)),
                ((Nv::E1, Spin::Minus), (SigmaZ, I)),
                ((Nv::E2, Spin::Plus), (MinusSigmaZ, SigmaZ)),
                ((Nv::E2, Spin::Minus), (I, SigmaZ)),
                ((Nv::E3, Spin::Plus), (I, I)),
                ((Nv::E3, Spin::Minus), (SigmaZ, I)),
            ],
        }
    }

    pub fn lookup(&self, nv: Nv, outcome: Spin) -> Option<(FeedForwardOp, FeedForwardOp)> {
        self.rows.iter().find(|(key, _)| *key == (nv, outcome)).map(|(_, ops)| *ops)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

/// A labelled snapshot of the joint state after a pipeline stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub label: String,
    pub state: StateVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    pub mode: ProtocolMode,
    pub outcome: MeasurementOutcome,
    /// Squared norm of the joint state before measurement.
    pub success_probability: f64,
    /// Probability of `outcome` given that both photons survived.
    pub outcome_probability: f64,
    pub measurements: Vec<SpinMeasurement>,
    /// CPF: after the feed-forward corrections. Parity: the collapsed state.
    pub final_state: StateVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parity_triple: Option<[Parity; 3]>,
    /// Parity only: the collapsed state after [`parity_feed_forward`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected_state: Option<StateVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intermediates: Option<Vec<StageRecord>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// One named step of the pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub label: String,
    pub ops: Vec<ElementOp>,
}

fn stage(photon: Photon, name: &str, ops: Vec<ElementKind>) -> Stage {
    let prefix = match photon {
        Photon::A => "a",
        Photon::B => "b",
    };
    Stage { label: format!("{prefix}.{name}"), ops: ops.into_iter().map(|k| ElementOp::new(k, photon)).collect() }
}

fn all_spin_hadamards() -> Vec<ElementKind> {
    Nv::ALL.iter().map(|&nv| ElementKind::SpinHadamard(nv)).collect()
}

/// The three Blocks a photon passes, with the Pockels-cell sandwich around
/// the two time-bin paths. `h_between` inserts `H_e` on each NV right after
/// its Block (photon a only).
fn photon_blocks(photon: Photon, physics: &Physics, h_between: bool) -> Vec<Stage> {
    let mut stages = vec![stage(photon, "block1", vec![physics.block(Nv::E1, BlockConfig::Frequency)])];
    if h_between {
        stages.push(stage(photon, "h_e1", vec![ElementKind::SpinHadamard(Nv::E1)]));
    }
    stages.push(stage(photon, "block2", vec![physics.block(Nv::E2, BlockConfig::Spatial { routed: Spatial::M1 })]));
    if h_between {
        stages.push(stage(photon, "h_e2", vec![ElementKind::SpinHadamard(Nv::E2)]));
    }
    stages.push(stage(photon, "pc_l_in", vec![ElementKind::PcL]));
    stages.push(stage(
        photon,
        "block3_upper",
        vec![physics.block(Nv::E3, BlockConfig::TimeBin { path: Spatial::M1 })],
    ));
    stages.push(stage(
        photon,
        "block3_lower",
        vec![physics.block(Nv::E3, BlockConfig::TimeBin { path: Spatial::M2 })],
    ));
    stages.push(stage(photon, "pc_l_out", vec![ElementKind::PcL]));
    if h_between {
        stages.push(stage(photon, "h_e3", vec![ElementKind::SpinHadamard(Nv::E3)]));
    }
    stages
}

/// All stages up to (not including) the spin measurement.
pub fn pipeline(mode: ProtocolMode, physics: &Physics) -> Vec<Stage> {
    let mut stages = photon_blocks(Photon::A, physics, true);
    match mode {
        ProtocolMode::HyperCpf => {
            stages.extend(photon_blocks(Photon::B, physics, false));
            stages.push(stage(Photon::B, "h_e_all", all_spin_hadamards()));
        }
        ProtocolMode::HyperParity => {
            stages.push(stage(Photon::B, "h_e_pre", all_spin_hadamards()));
            stages.extend(photon_blocks(Photon::B, physics, false));
            stages.push(stage(Photon::B, "h_e_post", all_spin_hadamards()));
        }
    }
    stages
}

/// Runs the pipeline on the initial product state. Returns the
/// pre-measurement state and, if `record`, the state after every stage
/// (starting with `"input"`).
pub fn evolve(
    spec_a: &PhotonInputSpec,
    spec_b: &PhotonInputSpec,
    mode: ProtocolMode,
    physics: &Physics,
    record: bool,
) -> Result<(StateVector, Vec<StageRecord>)> {
    let mut state = StateVector::initial(spec_a, spec_b)?;
    let mut records = Vec::new();
    if record {
        records.push(StageRecord { label: "input".into(), state: state.clone() });
    }
    for st in pipeline(mode, physics) {
        for op in &st.ops {
            state = op.apply(&state)?;
        }
        if record {
            records.push(StageRecord { label: st.label, state: state.clone() });
        }
    }
    Ok((state, records))
}

fn measure_all(
    state: &StateVector,
    source: &mut dyn OutcomeSource,
) -> Result<(MeasurementOutcome, Vec<SpinMeasurement>, StateVector)> {
    let mut state = state.clone();
    let mut measurements = Vec::with_capacity(3);
    let mut outcome = [Spin::Plus; 3];
    for nv in Nv::ALL {
        let (m, next) = state.measure_spin(nv, source)?;
        outcome[nv.position()] = m.outcome;
        measurements.push(m);
        state = next;
    }
    Ok((SpinConfig(outcome), measurements, state))
}

fn measure_with_config(
    state: &StateVector,
    cfg: &ProtocolConfig,
) -> Result<(MeasurementOutcome, Vec<SpinMeasurement>, StateVector)> {
    match cfg.forced_outcomes {
        Some(forced) => measure_all(state, &mut ForcedOutcomes(forced)),
        None => measure_all(state, &mut SampledOutcomes(ChaCha8Rng::seed_from_u64(cfg.seed))),
    }
}

fn lossy_note(p: f64) -> Option<String> {
    (p < 1.0 - EXACT_TOL).then(|| {
        format!(
            "success probability {p:.9}: states keep the surviving norm and must be normalized before comparison"
        )
    })
}

fn run(spec_a: &PhotonInputSpec, spec_b: &PhotonInputSpec, cfg: &ProtocolConfig) -> Result<ProtocolResult> {
    let (pre, mut records) = evolve(spec_a, spec_b, cfg.mode, &cfg.physics, cfg.record_intermediates)?;
    let success_probability = pre.norm_sqr();
    let (outcome, measurements, collapsed) = measure_with_config(&pre, cfg)?;
    let outcome_probability = measurements.iter().map(|m| m.conditional_probability).product();
    if cfg.record_intermediates {
        records.push(StageRecord { label: "measure".into(), state: collapsed.clone() });
    }

    let (final_state, parity_triple, corrected_state) = match cfg.mode {
        ProtocolMode::HyperCpf => {
            let corrected = apply_feed_forward(&collapsed, outcome, &FeedForwardTable::cpf())?;
            if cfg.record_intermediates {
                records.push(StageRecord { label: "feed_forward".into(), state: corrected.clone() });
            }
            (corrected, None, None)
        }
        ProtocolMode::HyperParity => {
            let (corrected, triple) = parity_feed_forward(&collapsed, outcome)?;
            if cfg.record_intermediates {
                records.push(StageRecord { label: "parity_feed_forward".into(), state: corrected.clone() });
            }
            (collapsed, Some(triple), Some(corrected))
        }
    };

    Ok(ProtocolResult {
        mode: cfg.mode,
        outcome,
        success_probability,
        outcome_probability,
        measurements,
        final_state,
        parity_triple,
        corrected_state,
        intermediates: cfg.record_intermediates.then_some(records),
        notes: lossy_note(success_probability).into_iter().collect(),
    })
}

/// Hyper-CPF: phase −1 on `|ω2⟩|ω2⟩`, `|m2⟩|m2⟩` and `|s⟩|s⟩` independently.
pub fn run_hyper_cpf(spec_a: &PhotonInputSpec, spec_b: &PhotonInputSpec, cfg: &ProtocolConfig) -> Result<ProtocolResult> {
    let cfg = ProtocolConfig { mode: ProtocolMode::HyperCpf, ..*cfg };
    run(spec_a, spec_b, &cfg)
}

/// Hyper-parity: the spin measurement reads the parity of each DOF pair and
/// collapses the photons onto the matching even or odd product.
pub fn run_hyper_parity(
    spec_a: &PhotonInputSpec,
    spec_b: &PhotonInputSpec,
    cfg: &ProtocolConfig,
) -> Result<ProtocolResult> {
    let cfg = ProtocolConfig { mode: ProtocolMode::HyperParity, ..*cfg };
    run(spec_a, spec_b, &cfg)
}

fn apply_on_dof(state: &StateVector, photon: Photon, dof: Dof, op: &Matrix) -> Result<StateVector> {
    state.apply_single_photon_map(photon, &lift_dof(dof, op, state.has_port(photon)))
}

/// Applies the per-DOF corrections of `table` for the measured outcome.
pub fn apply_feed_forward(
    state: &StateVector,
    outcome: MeasurementOutcome,
    table: &FeedForwardTable,
) -> Result<StateVector> {
    let mut state = state.clone();
    for nv in Nv::ALL {
        let spin = outcome.get(nv);
        let (op_a, op_b) = table
            .lookup(nv, spin)
            .ok_or_else(|| Error::InvalidParams(format!("feed-forward table has no row for NV{} {spin}", nv.number())))?;
        let dof = Dof::of_nv(nv);
        state = apply_on_dof(&state, Photon::A, dof, &op_a.matrix())?;
        state = apply_on_dof(&state, Photon::B, dof, &op_b.matrix())?;
    }
    Ok(state)
}

/// `+` reads even parity, `−` odd, per NV/DOF (frequency, spatial, time bin).
pub fn classify_parity_outcome(outcome: MeasurementOutcome) -> [Parity; 3] {
    outcome.0.map(|s| match s {
        Spin::Plus => Parity::Even,
        Spin::Minus => Parity::Odd,
    })
}

/// Brings a collapsed parity state to a uniform shape: every DOF is bit-flipped
/// on photon b where its parity differs from the frequency parity, so the
/// result is all-even (frequency even) or all-odd (frequency odd). Returns the
/// measured parities, not the post-flip ones.
pub fn parity_feed_forward(state: &StateVector, outcome: MeasurementOutcome) -> Result<(StateVector, [Parity; 3])> {
    let triple = classify_parity_outcome(outcome);
    let mut state = state.clone();
    for (k, dof) in Dof::QUBITS.iter().enumerate() {
        if triple[k] != triple[0] {
            state = apply_on_dof(&state, Photon::B, *dof, &pauli_x())?;
        }
    }
    Ok((state, triple))
}

/// Outcome probabilities (conditional on survival) of all eight spin outcomes
/// of a pre-measurement state, in [`SpinConfig::index`] order.
pub fn outcome_distribution(state: &StateVector) -> Result<[f64; 8]> {
    let total = state.norm_sqr();
    if total == 0.0 {
        return Err(Error::ZeroState);
    }
    let mut out = [0.0; 8];
    for spins in SpinConfig::all() {
        let p: f64 = state.photon_amplitudes(spins).iter().map(|c| c.norm_sqr()).sum();
        out[spins.index()] = p / total;
    }
    Ok(out)
}

/// Photon part of a state whose spins are all definite, at those spins.
pub fn photon_part(state: &StateVector, spins: SpinConfig) -> Vec<C64> {
    state.photon_amplitudes(spins)
}
