//! Acceptance criteria. Each test writes one `criterion N: PASS|FAIL` line to
//! stdout (uncaptured) before asserting.

mod common;

use std::io::Write;
use std::time::Instant;

use common::*;
use hyperdof::analysis::{
    average_block_metrics, block_efficiency_closed_form, grid_average, linspace, sweep, AveragingMethod,
    FidelityConvention, SweepGrid,
};
use hyperdof::cavity::{CavityParams, ScatteringCoeffs, TransitionTable};
use hyperdof::circuit::{evolve, run_hyper_cpf, run_hyper_parity, Physics, ProtocolConfig, ProtocolMode};
use hyperdof::elements::{
    block_branch_map, block_compose_from_elements, frequency_shift, hwp_hadamard, ideal_coupling, lift_block,
    lift_dof, lift_pbs, lift_pockels, pbs_route, pockels_conditional_flip, sigma_z, spin_hadamard, BlockConfig, Dof,
};
use hyperdof::hilbert::{
    Frequency, Matrix, Nv, PhotonInputSpec, Spatial, Spin, SpinConfig, TimeBin, C64,
};
use rand::Rng;

fn report(n: u32, pass: bool, started: Instant, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {n}: {verdict} ({:.2} s) {detail}\n", started.elapsed().as_secs_f64());
    let _ = std::io::stdout().write_all(line.as_bytes());
}

fn random_passive(rng: &mut impl Rng) -> ScatteringCoeffs {
    let mut pair = || {
        let norm: f64 = rng.random();
        let split: f64 = rng.random();
        let (p1, p2) = (rng.random::<f64>() * std::f64::consts::TAU, rng.random::<f64>() * std::f64::consts::TAU);
        (C64::from_polar((norm * split).sqrt(), p1), C64::from_polar((norm * (1.0 - split)).sqrt(), p2))
    };
    let (r, t) = pair();
    let (r0, t0) = pair();
    ScatteringCoeffs::new(r, t, r0, t0)
}

fn bits(i: usize) -> [usize; 3] {
    [i & 1, (i >> 1) & 1, (i >> 2) & 1]
}

fn basis_spec(b: [usize; 3]) -> PhotonInputSpec {
    PhotonInputSpec::basis(Frequency::from_bit(b[0]), Spatial::from_bit(b[1]), TimeBin::from_bit(b[2]))
}

#[test]
fn criterion_1_scattering_endpoint() {
    let t0 = Instant::now();
    let params = CavityParams::realistic(0.0);
    let coop = params.cooperativity();
    let r = params.scattering_coeffs().unwrap().r;
    let pass = (0.94..=0.95).contains(&r.re) && r.im.abs() < 1e-12 && (coop - 8.654).abs() < 1e-3;
    report(1, pass, t0, &format!("r = {:.6}, g^2/(kappa gamma) = {coop:.4}", r.re));
    assert!(pass);
}

#[test]
fn criterion_2_headline_metrics() {
    let t0 = Instant::now();
    let c = CavityParams::resonant(0.1, 8.654).scattering_coeffs().unwrap();
    let closed = block_efficiency_closed_form(&c);
    let quad = average_block_metrics(&c, AveragingMethod::Quadrature { nodes: 128 }).unwrap();
    let pass = (closed - 0.6601).abs() <= 5e-4
        && (quad.avg_efficiency - 0.6601).abs() <= 5e-4
        && (quad.avg_fidelity - 0.9999).abs() <= 5e-4;
    report(
        2,
        pass,
        t0,
        &format!(
            "eta closed = {closed:.6}, eta quad = {:.6}, F quad = {:.7}",
            quad.avg_efficiency, quad.avg_fidelity
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_3_closed_form_identity() {
    let t0 = Instant::now();
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let c = random_passive(&mut r);
        let (_, eta) = grid_average(&c, AveragingMethod::Quadrature { nodes: 64 }, 0.0, FidelityConvention::Normalized)
            .unwrap();
        worst = worst.max((eta - block_efficiency_closed_form(&c)).abs());
    }
    let pass = worst <= 1e-6;
    report(3, pass, t0, &format!("max |quadrature - closed form| = {worst:.2e} over 100 quadruples"));
    assert!(pass);
}

#[test]
fn criterion_4_truth_table_oracle() {
    let t0 = Instant::now();
    let diag = cpf3_matrix_diag();
    let mut worst: f64 = 0.0;
    for xa in 0..8 {
        for yb in 0..8 {
            let cfg = ProtocolConfig::new(ProtocolMode::HyperCpf).with_seed((xa * 8 + yb) as u64);
            let res = run_hyper_cpf(&basis_spec(bits(xa)), &basis_spec(bits(yb)), &cfg).unwrap();
            let got = res.final_state.photon_amplitudes(res.outcome);
            let mut want = vec![C64::new(0.0, 0.0); 256];
            want[r_mode(bits(xa)).index() + 16 * r_mode(bits(yb)).index()] = C64::new(diag[xa + 8 * yb], 0.0);
            // basis outputs carry a definite sign, so compare without phase gauging
            let d = want.iter().zip(&got).map(|(w, g)| (w - g).norm()).fold(0.0, f64::max);
            worst = worst.max(d);
        }
    }
    let basis_worst = worst;
    for (i, (a, b)) in random_specs(4, 100).into_iter().enumerate() {
        let res = run_hyper_cpf(&a, &b, &ProtocolConfig::new(ProtocolMode::HyperCpf).with_seed(i as u64)).unwrap();
        let got = res.final_state.photon_amplitudes(res.outcome);
        worst = worst.max(diff_vec_up_to_phase(&cpf3_photon_amplitudes(&a, &b), &got));
    }
    let pass = worst < 1e-10;
    report(4, pass, t0, &format!("64 basis max err {basis_worst:.1e}, with 100 random inputs {worst:.1e}"));
    assert!(pass);
}

#[test]
fn criterion_5_parity_collapse_oracle() {
    let t0 = Instant::now();
    let mut worst_state: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    for (a, b) in random_specs(5, 100) {
        let mut total = 0.0;
        for outcome in SpinConfig::all() {
            let cfg = ProtocolConfig::new(ProtocolMode::HyperParity).with_forced(outcome);
            let res = run_hyper_parity(&a, &b, &cfg).unwrap();
            worst_state = worst_state.max(diff_up_to_phase(&parity_collapse_oracle(&a, &b, outcome), &res.final_state));
            total += res.outcome_probability;
        }
        worst_sum = worst_sum.max((total - 1.0).abs());
    }
    // balanced pairs: equal magnitudes, random phases
    let mut r = rng(55);
    let mut worst_eighth: f64 = 0.0;
    for _ in 0..20 {
        let mut pair = || {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            [C64::from_polar(h, r.random::<f64>() * 6.3), C64::from_polar(h, r.random::<f64>() * 6.3)]
        };
        let a = PhotonInputSpec::new(pair(), pair(), pair()).unwrap();
        let b = PhotonInputSpec::new(pair(), pair(), pair()).unwrap();
        for outcome in SpinConfig::all() {
            let res = run_hyper_parity(&a, &b, &ProtocolConfig::new(ProtocolMode::HyperParity).with_forced(outcome))
                .unwrap();
            worst_eighth = worst_eighth.max((res.outcome_probability - 0.125).abs());
        }
    }
    let pass = worst_state < 1e-10 && worst_sum < 1e-12 && worst_eighth < 1e-10;
    report(
        5,
        pass,
        t0,
        &format!(
            "state err {worst_state:.1e}, |sum p - 1| {worst_sum:.1e}, balanced |p - 1/8| {worst_eighth:.1e}"
        ),
    );
    assert!(pass);
}

/// Ideal Block signs by (polarization, frequency, spin), `R`, `ω1`, `+` first.
const EQ8_SIGNS: [[[f64; 2]; 2]; 2] = [[[1.0, -1.0], [-1.0, -1.0]], [[-1.0, -1.0], [-1.0, -1.0]]];

#[test]
fn criterion_6_block_equivalence() {
    let t0 = Instant::now();
    let mut r = rng(6);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let c = random_passive(&mut r);
        let composed = block_compose_from_elements(&c).unwrap().map;
        worst = worst.max((composed - block_branch_map(&c, ideal_coupling)).norm());
    }
    let ideal = block_compose_from_elements(&ScatteringCoeffs::IDEAL).unwrap().map;
    let mut signs_ok = true;
    for i in 0..8 {
        for j in 0..8 {
            // arm index is pol | freq << 1 | spin << 2
            let sign = EQ8_SIGNS[i & 1][(i >> 1) & 1][i >> 2];
            let want = if i == j { C64::new(sign, 0.0) } else { C64::new(0.0, 0.0) };
            signs_ok &= (ideal[(j, i)] - want).norm() < 1e-15;
        }
    }
    let pass = worst < 1e-12 && signs_ok;
    report(6, pass, t0, &format!("max ||composed - branch|| = {worst:.1e} over 1000, ideal signs exact: {signs_ok}"));
    assert!(pass);
}

#[test]
fn criterion_7_feed_forward_outcome_independence() {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    for (a, b) in random_specs(7, 100) {
        let cfg = |o| ProtocolConfig::new(ProtocolMode::HyperCpf).with_forced(o);
        let reference = run_hyper_cpf(&a, &b, &cfg(SpinConfig::ALL_PLUS)).unwrap();
        let ref_photons = reference.final_state.photon_amplitudes(SpinConfig::ALL_PLUS);
        for outcome in SpinConfig::all() {
            let res = run_hyper_cpf(&a, &b, &cfg(outcome)).unwrap();
            worst = worst.max(diff_vec_up_to_phase(&ref_photons, &res.final_state.photon_amplitudes(outcome)));
        }
    }
    let pass = worst < 1e-10;
    report(7, pass, t0, &format!("max deviation across 8 outcomes x 100 inputs = {worst:.1e}"));
    assert!(pass);
}

#[test]
fn criterion_8_surface_properties() {
    let t0 = Instant::now();
    let ks = linspace(0.0, 0.5, 20);
    let coop = linspace(0.5, 30.0, 20);
    let grid = SweepGrid::new(ks.clone(), coop.clone()).unwrap();
    let rows = sweep(&grid, AveragingMethod::Quadrature { nodes: 128 }).unwrap();
    let at = |i: usize, j: usize| rows[i * coop.len() + j];

    let (mut f_ks, mut f_coop, mut e_ks, mut e_coop) = (0, 0, 0, 0);
    for i in 0..ks.len() {
        for j in 0..coop.len() {
            if i + 1 < ks.len() {
                f_ks += (at(i + 1, j).avg_fidelity > at(i, j).avg_fidelity) as usize;
                e_ks += (at(i + 1, j).avg_efficiency > at(i, j).avg_efficiency) as usize;
            }
            if j + 1 < coop.len() {
                f_coop += (at(i, j + 1).avg_fidelity < at(i, j).avg_fidelity) as usize;
                e_coop += (at(i, j + 1).avg_efficiency < at(i, j).avg_efficiency) as usize;
            }
        }
    }
    let best = at(0, coop.len() - 1);
    let worst = at(ks.len() - 1, 0);
    let corners = best.avg_fidelity > worst.avg_fidelity && best.avg_efficiency > worst.avg_efficiency;
    let pass = f_ks + f_coop + e_ks + e_coop == 0 && corners;
    report(
        8,
        pass,
        t0,
        &format!(
            "violations of 380 pairs per direction: F along ks {f_ks}, F along coop {f_coop}, \
             eta along ks {e_ks}, eta along coop {e_coop}; corners F {:.5} vs {:.5}, eta {:.4} vs {:.4}",
            best.avg_fidelity, worst.avg_fidelity, best.avg_efficiency, worst.avg_efficiency
        ),
    );
    assert!(pass);
}

fn unitary_err(m: &Matrix) -> f64 {
    (m.adjoint() * m - Matrix::identity(m.ncols(), m.ncols())).norm()
}

fn max_singular(m: &Matrix) -> f64 {
    m.clone().svd(false, false).singular_values.iter().copied().fold(0.0, f64::max)
}

#[test]
fn criterion_9_invariant_suites() {
    let t0 = Instant::now();
    let mut failures = Vec::new();

    let ideal_block = block_compose_from_elements(&ScatteringCoeffs::IDEAL).unwrap().map;
    let unitaries = [
        ("hwp", hwp_hadamard()),
        ("spin hadamard", spin_hadamard()),
        ("fs", frequency_shift()),
        ("sigma_z", sigma_z()),
        ("pc_l", pockels_conditional_flip()),
        ("pbs", pbs_route()),
        ("lifted pc_l", lift_pockels(false)),
        ("lifted pbs", lift_pbs()),
        ("lifted fs", lift_dof(Dof::Frequency, &frequency_shift(), false)),
        ("ideal scattering", TransitionTable::ideal().to_matrix()),
        ("ideal block", ideal_block.clone()),
        ("block2 lift", lift_block(&ideal_block, BlockConfig::Spatial { routed: Spatial::M1 })),
        ("block3 lift", lift_block(&ideal_block, BlockConfig::TimeBin { path: Spatial::M1 })),
    ];
    for (name, m) in &unitaries {
        if unitary_err(m) > 1e-12 {
            failures.push(format!("{name} not unitary"));
        }
    }
    for (name, m) in [
        ("hwp", hwp_hadamard()),
        ("fs", frequency_shift()),
        ("pc_l", pockels_conditional_flip()),
        ("pbs", pbs_route()),
        ("spin hadamard", spin_hadamard()),
    ] {
        let n = m.nrows();
        if (&m * &m - Matrix::identity(n, n)).norm() > 1e-12 {
            failures.push(format!("{name} not an involution"));
        }
    }

    let mut r = rng(9);
    for _ in 0..200 {
        let params = CavityParams::resonant(r.random::<f64>() * 2.0, r.random::<f64>() * 50.0);
        let mut p = params;
        p.omega_c = r.random::<f64>() * 4.0 - 2.0;
        let c = p.scattering_coeffs().unwrap();
        let comp = block_compose_from_elements(&c).unwrap();
        if max_singular(&comp.map) > 1.0 + 1e-9 || max_singular(&comp.scatter) > 1.0 + 1e-9 || !c.is_passive(1e-12) {
            failures.push("lossy map not subunitary".into());
            break;
        }
    }

    let lossy = Physics::Lossy([CavityParams::resonant(0.1, 8.654).scattering_coeffs().unwrap(); 3]);
    for (a, b) in random_specs(99, 20) {
        let (ideal_pre, _) = evolve(&a, &b, ProtocolMode::HyperCpf, &Physics::Ideal, false).unwrap();
        if (ideal_pre.norm_sqr() - 1.0).abs() > 1e-12 {
            failures.push("ideal pipeline does not conserve the norm".into());
        }
        let (pre, _) = evolve(&a, &b, ProtocolMode::HyperParity, &lossy, false).unwrap();
        let total: f64 = SpinConfig::all()
            .map(|o| pre.project_spin(Nv::E1, o.0[0]).project_spin(Nv::E2, o.0[1]).project_spin(Nv::E3, o.0[2]).norm_sqr())
            .sum();
        if (total - pre.norm_sqr()).abs() > 1e-12 {
            failures.push("measurement branches incomplete".into());
        }
        let p: f64 = [Spin::Plus, Spin::Minus].iter().map(|&s| pre.project_spin(Nv::E2, s).norm_sqr()).sum();
        if (p - pre.norm_sqr()).abs() > 1e-12 {
            failures.push("single-spin measurement incomplete".into());
        }
    }

    let pass = failures.is_empty();
    let detail = if pass { "unitarity, involutions, subunitarity, completeness, norm conservation".to_string() } else { failures.join("; ") };
    report(9, pass, t0, &detail);
    assert!(pass, "{failures:?}");
}
