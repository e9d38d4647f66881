use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use hyperdof::analysis::{
    average_block_metrics, block_efficiency_closed_form, sweep as run_sweep, write_sweep_csv, AveragingMethod,
    BlockMetrics, SweepGrid,
};
use hyperdof::cavity::{CavityParams, ScatteringCoeffs};
use hyperdof::circuit::{
    evolve, outcome_distribution, run_hyper_cpf, run_hyper_parity, Parity, Physics, ProtocolConfig, ProtocolMode,
};
use hyperdof::hilbert::{Frequency, PhotonInputSpec, PhotonMode, Spatial, SpinConfig, StateVector, TimeBin, C64};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{self, CavityArgs, FileConfig, PhysicsArg};
use crate::CliError;

const ORACLE_TOL: f64 = 1e-10;

pub struct Output {
    pub json: bool,
}

impl Output {
    fn emit<T: Serialize>(&self, value: &T, text: impl FnOnce() -> String) -> Result<(), CliError> {
        let mut stdout = std::io::stdout().lock();
        if self.json {
            serde_json::to_writer_pretty(&mut stdout, value)?;
            writeln!(stdout)?;
        } else {
            write!(stdout, "{}", text())?;
        }
        Ok(())
    }
}

pub fn outcome_or_file(flag: Option<SpinConfig>, file: &FileConfig) -> Result<Option<SpinConfig>, CliError> {
    match (flag, &file.force_outcome) {
        (Some(o), _) => Ok(Some(o)),
        (None, Some(s)) => config::parse_outcome(s).map(Some).map_err(CliError::Usage),
        (None, None) => Ok(None),
    }
}

pub fn resolve_physics(arg: Option<PhysicsArg>, file: &FileConfig, cavity: &CavityArgs) -> Result<Physics, CliError> {
    let (_, coeffs) = cavity.coeffs(file)?;
    Ok(config::physics(arg, file, coeffs))
}

fn fmt_c(c: C64) -> String {
    format!("{:+.9} {:+.9}i", c.re, c.im)
}

#[derive(Serialize)]
struct CoeffsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<CavityParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cooperativity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ks_over_k: Option<f64>,
    coeffs: ScatteringCoeffs,
    #[serde(with = "hyperdof::hilbert::reim")]
    coupled_sum: C64,
    #[serde(with = "hyperdof::hilbert::reim")]
    uncoupled_sum: C64,
}

pub fn coeffs(out: &Output, file: &FileConfig, cavity: &CavityArgs) -> Result<ExitCode, CliError> {
    let (params, c) = cavity.coeffs(file)?;
    let report = CoeffsReport {
        params,
        cooperativity: params.map(|p| p.cooperativity()),
        ks_over_k: params.map(|p| p.ks_over_k()),
        coeffs: c,
        coupled_sum: c.coupled_sum(),
        uncoupled_sum: c.uncoupled_sum(),
    };
    out.emit(&report, || {
        let mut s = String::new();
        if let Some(p) = params {
            s += &format!("cooperativity  {:.6}\nks_over_k      {:.6}\n", p.cooperativity(), p.ks_over_k());
        }
        s += &format!("r   {}  |r|  = {:.9}\n", fmt_c(c.r), c.r.norm());
        s += &format!("t   {}  |t|  = {:.9}\n", fmt_c(c.t), c.t.norm());
        s += &format!("r0  {}  |r0| = {:.9}\n", fmt_c(c.r0), c.r0.norm());
        s += &format!("t0  {}  |t0| = {:.9}\n", fmt_c(c.t0), c.t0.norm());
        s += &format!("t+r    {}\nt0+r0  {}\n", fmt_c(report.coupled_sum), fmt_c(report.uncoupled_sum));
        s
    })?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct TruthRow {
    input_a: String,
    input_b: String,
    output_a: String,
    output_b: String,
    /// Output amplitude relative to the `(w1,m1,l | w1,m1,l)` row.
    #[serde(with = "hyperdof::hilbert::reim")]
    phase: C64,
    expected: f64,
    ok: bool,
}

#[derive(Serialize)]
struct TruthTable {
    rows: Vec<TruthRow>,
    max_error: f64,
    pass: bool,
}

fn bits3(i: usize) -> [usize; 3] {
    [i & 1, (i >> 1) & 1, (i >> 2) & 1]
}

fn dof_label(bits: [usize; 3]) -> String {
    format!("{},{},{}", Frequency::from_bit(bits[0]), Spatial::from_bit(bits[1]), TimeBin::from_bit(bits[2]))
}

fn mode_label(m: PhotonMode) -> String {
    format!("{},{},{}", m.frequency, m.spatial, m.timebin)
}

pub fn truth_table(out: &Output, forced: Option<SpinConfig>, seed: u64) -> Result<ExitCode, CliError> {
    let mut rows = Vec::with_capacity(64);
    let mut gauge = None;
    let mut max_error: f64 = 0.0;
    for yb in 0..8 {
        for xa in 0..8 {
            let (x, y) = (bits3(xa), bits3(yb));
            let spec = |b: [usize; 3]| {
                PhotonInputSpec::basis(Frequency::from_bit(b[0]), Spatial::from_bit(b[1]), TimeBin::from_bit(b[2]))
            };
            let mut cfg = ProtocolConfig::new(ProtocolMode::HyperCpf).with_seed(seed.wrapping_add((xa + 8 * yb) as u64));
            if let Some(o) = forced {
                cfg = cfg.with_forced(o);
            }
            let res = run_hyper_cpf(&spec(x), &spec(y), &cfg)?;
            let amps = res.final_state.photon_amplitudes(res.outcome);
            let (peak, amp) = amps
                .iter()
                .enumerate()
                .max_by(|p, q| p.1.norm_sqr().total_cmp(&q.1.norm_sqr()))
                .map(|(i, c)| (i, *c))
                .expect("nonempty");
            let leak: f64 = amps.iter().enumerate().filter(|(i, _)| *i != peak).map(|(_, c)| c.norm()).fold(0.0, f64::max);
            let dim = PhotonMode::local_dim(false);
            let (ma, mb) = (PhotonMode::from_index(peak % dim, false)?, PhotonMode::from_index(peak / dim, false)?);
            let g = *gauge.get_or_insert(amp);
            let phase = amp / g;
            let expected = if (xa & yb).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            let want_a = PhotonMode::new(
                hyperdof::hilbert::Polarization::R,
                Frequency::from_bit(x[0]),
                Spatial::from_bit(x[1]),
                TimeBin::from_bit(x[2]),
            );
            let want_b = PhotonMode::new(
                hyperdof::hilbert::Polarization::R,
                Frequency::from_bit(y[0]),
                Spatial::from_bit(y[1]),
                TimeBin::from_bit(y[2]),
            );
            let err = if ma == want_a && mb == want_b { (phase - expected).norm().max(leak) } else { f64::INFINITY };
            max_error = max_error.max(err);
            rows.push(TruthRow {
                input_a: dof_label(x),
                input_b: dof_label(y),
                output_a: mode_label(ma),
                output_b: mode_label(mb),
                phase,
                expected,
                ok: err < ORACLE_TOL,
            });
        }
    }
    let pass = rows.iter().all(|r| r.ok);
    let table = TruthTable { rows, max_error, pass };
    out.emit(&table, || {
        let mut s = String::from("input a   | input b   -> output a  | output b  phase\n");
        for r in &table.rows {
            s += &format!(
                "{:9} | {:9} -> {:9} | {:9} {:+.0}{}\n",
                r.input_a,
                r.input_b,
                r.output_a,
                r.output_b,
                r.phase.re,
                if r.ok { "" } else { "  MISMATCH" }
            );
        }
        s += &format!("{} (max error {:.3e})\n", if table.pass { "PASS" } else { "FAIL" }, table.max_error);
        s
    })?;
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

#[derive(Serialize)]
struct ShotCount {
    outcome: String,
    count: usize,
    frequency: f64,
    probability: f64,
}

#[derive(Serialize)]
struct ParityReport {
    outcome: String,
    parity: [Parity; 3],
    outcome_probability: f64,
    success_probability: f64,
    /// Feed-forward corrected and renormalized.
    corrected_state: StateVector,
    #[serde(skip_serializing_if = "Option::is_none")]
    shots: Option<Vec<ShotCount>>,
}

fn state_lines(state: &StateVector) -> Result<String, CliError> {
    let mut s = String::new();
    for (i, c) in state.nonzero() {
        if c.norm() < 1e-12 {
            continue;
        }
        let (a, b, spins) = state.label_of(i)?;
        s += &format!("  a[{a}] b[{b}] s[{spins}]  {}\n", fmt_c(c));
    }
    Ok(s)
}

pub fn parity(
    out: &Output,
    a: &PhotonInputSpec,
    b: &PhotonInputSpec,
    physics: Physics,
    forced: Option<SpinConfig>,
    shots: Option<usize>,
    seed: u64,
) -> Result<ExitCode, CliError> {
    let mut cfg = ProtocolConfig::new(ProtocolMode::HyperParity).with_physics(physics).with_seed(seed);
    if let Some(o) = forced {
        cfg = cfg.with_forced(o);
    }
    let res = run_hyper_parity(a, b, &cfg)?;
    let corrected = res.corrected_state.as_ref().expect("parity run returns a corrected state").normalized()?;

    let shots = match shots {
        Some(0) => return Err(CliError::Usage("--shots must be at least 1".into())),
        Some(n) => {
            let (pre, _) = evolve(a, b, ProtocolMode::HyperParity, &physics, false)?;
            let probs = outcome_distribution(&pre)?;
            let dist = WeightedIndex::new(probs).map_err(|e| CliError::Usage(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut counts = [0usize; 8];
            for _ in 0..n {
                counts[dist.sample(&mut rng)] += 1;
            }
            Some(
                SpinConfig::all()
                    .map(|o| ShotCount {
                        outcome: o.to_string(),
                        count: counts[o.index()],
                        frequency: counts[o.index()] as f64 / n as f64,
                        probability: probs[o.index()],
                    })
                    .collect(),
            )
        }
        None => None,
    };

    let parity = res.parity_triple.expect("parity run returns parities");
    let report = ParityReport {
        outcome: res.outcome.to_string(),
        parity,
        outcome_probability: res.outcome_probability,
        success_probability: res.success_probability,
        corrected_state: corrected,
        shots,
    };
    let body = state_lines(&report.corrected_state)?;
    out.emit(&report, || {
        let name = |p: Parity| match p {
            Parity::Even => "even",
            Parity::Odd => "odd",
        };
        let mut s = format!("outcome              {}\n", report.outcome);
        s += &format!(
            "parity (f/m/t)       {}/{}/{}\n",
            name(parity[0]),
            name(parity[1]),
            name(parity[2])
        );
        s += &format!("branch probability   {:.9}\n", report.outcome_probability);
        s += &format!("success probability  {:.9}\n", report.success_probability);
        s += "corrected state:\n";
        s += &body;
        if let Some(counts) = &report.shots {
            s += "shots:\n";
            for c in counts {
                s += &format!("  {}  {:>8}  {:.5}  (p = {:.5})\n", c.outcome, c.count, c.frequency, c.probability);
            }
        }
        s
    })?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    cooperativity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ks_over_k: Option<f64>,
    efficiency_closed_form: f64,
    metrics: BlockMetrics,
}

pub fn block_metrics(
    out: &Output,
    file: &FileConfig,
    cavity: &CavityArgs,
    method: AveragingMethod,
) -> Result<ExitCode, CliError> {
    let (params, c) = cavity.coeffs(file)?;
    let metrics = average_block_metrics(&c, method)?;
    if let Some(w) = &metrics.convergence_warning {
        eprintln!("warning: {w}");
    }
    let report = MetricsReport {
        cooperativity: params.map(|p| p.cooperativity()),
        ks_over_k: params.map(|p| p.ks_over_k()),
        efficiency_closed_form: block_efficiency_closed_form(&c),
        metrics,
    };
    out.emit(&report, || {
        let m = &report.metrics;
        let mut s = String::new();
        if let (Some(coop), Some(ks)) = (report.cooperativity, report.ks_over_k) {
            s += &format!("cooperativity {coop:.6}, ks_over_k {ks:.6}\n");
        }
        s += &format!("F_avg    {:.9}", m.avg_fidelity);
        if let Some(e) = m.fidelity_std_error {
            s += &format!(" +- {e:.2e}");
        }
        s += &format!("\neta_avg  {:.9}", m.avg_efficiency);
        if let Some(e) = m.efficiency_std_error {
            s += &format!(" +- {e:.2e}");
        }
        s += &format!("\neta_avg  {:.9} (closed form)\nmethod   {:?}\n", report.efficiency_closed_form, m.method);
        s
    })?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SweepReport<'a> {
    rows: usize,
    path: &'a Path,
}

pub fn sweep(out: &Output, grid: &SweepGrid, method: AveragingMethod, path: &Path) -> Result<ExitCode, CliError> {
    let rows = run_sweep(grid, method)?;
    let mut w = BufWriter::new(File::create(path)?);
    write_sweep_csv(&rows, &mut w)?;
    w.flush()?;
    let report = SweepReport { rows: rows.len(), path };
    out.emit(&report, || format!("wrote {} rows to {}\n", report.rows, path.display()))?;
    Ok(ExitCode::SUCCESS)
}

pub fn simulate(
    a: &PhotonInputSpec,
    b: &PhotonInputSpec,
    mode: ProtocolMode,
    physics: Physics,
    forced: Option<SpinConfig>,
    seed: u64,
    record: bool,
) -> Result<ExitCode, CliError> {
    let mut cfg = ProtocolConfig::new(mode).with_physics(physics).with_seed(seed);
    if let Some(o) = forced {
        cfg = cfg.with_forced(o);
    }
    if record {
        cfg = cfg.recording();
    }
    let res = match mode {
        ProtocolMode::HyperCpf => run_hyper_cpf(a, b, &cfg)?,
        ProtocolMode::HyperParity => run_hyper_parity(a, b, &cfg)?,
    };
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, &res)?;
    writeln!(stdout)?;
    Ok(ExitCode::SUCCESS)
}
