//! Independent oracles for the gate pipelines. They build expected states
//! directly from the input coefficients, one DOF factor at a time, without
//! going through any element maps.
#![allow(dead_code)]

use hyperdof::hilbert::{
    max_diff_up_to_phase, Frequency, PhotonInputSpec, PhotonMode, Polarization, Spatial, SpinConfig,
    StateVector, TimeBin, C64,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_specs(seed: u64, n: usize) -> Vec<(PhotonInputSpec, PhotonInputSpec)> {
    let mut r = rng(seed);
    (0..n).map(|_| (PhotonInputSpec::random(&mut r), PhotonInputSpec::random(&mut r))).collect()
}

pub fn dof_pairs(spec: &PhotonInputSpec) -> [[C64; 2]; 3] {
    [spec.freq_amps, spec.spatial_amps, spec.time_amps]
}

pub fn r_mode(bits: [usize; 3]) -> PhotonMode {
    PhotonMode::new(
        Polarization::R,
        Frequency::from_bit(bits[0]),
        Spatial::from_bit(bits[1]),
        TimeBin::from_bit(bits[2]),
    )
}

fn bits3(i: usize) -> [usize; 3] {
    [i & 1, (i >> 1) & 1, (i >> 2) & 1]
}

/// Joint state with both photons `R`-polarized and amplitude
/// `Π_k factor(k, x_k, y_k, s_k)` for photon-a bits `x`, photon-b bits `y`
/// and spin bits `s`.
pub fn product_state<F>(factor: F) -> StateVector
where
    F: Fn(usize, usize, usize, usize) -> C64,
{
    let mut amps = vec![c(0.0, 0.0); 16 * 16 * 8];
    for xa in 0..8 {
        for yb in 0..8 {
            for s in 0..8 {
                let (x, y, sp) = (bits3(xa), bits3(yb), bits3(s));
                let amp: C64 = (0..3).map(|k| factor(k, x[k], y[k], sp[k])).product();
                let idx = r_mode(x).index() + 16 * (r_mode(y).index() + 16 * SpinConfig::from_index(s).index());
                amps[idx] = amp;
            }
        }
    }
    StateVector::from_amplitudes(amps, false, false).unwrap()
}

/// Photon-only CPF⊗3 on the product input, as a 256-amplitude vector
/// indexed `a + 16 b`.
pub fn cpf3_photon_amplitudes(spec_a: &PhotonInputSpec, spec_b: &PhotonInputSpec) -> Vec<C64> {
    let (pa, pb) = (dof_pairs(spec_a), dof_pairs(spec_b));
    let mut out = vec![c(0.0, 0.0); 256];
    for xa in 0..8 {
        for yb in 0..8 {
            let (x, y) = (bits3(xa), bits3(yb));
            let mut amp = c(1.0, 0.0);
            for k in 0..3 {
                amp *= pa[k][x[k]] * pb[k][y[k]];
                if x[k] == 1 && y[k] == 1 {
                    amp = -amp;
                }
            }
            out[r_mode(x).index() + 16 * r_mode(y).index()] = amp;
        }
    }
    out
}

/// The 64 x 64 CPF⊗3 matrix on three-DOF basis states, indexed by
/// `x + 8 y` with `x = f | m << 1 | t << 2`.
pub fn cpf3_matrix_diag() -> Vec<f64> {
    (0usize..64)
        .map(|i| {
            let (x, y) = (i % 8, i / 8);
            let both = x & y;
            if both.count_ones() % 2 == 1 { -1.0 } else { 1.0 }
        })
        .collect()
}

/// Normalizes both states and compares them up to a global phase.
pub fn diff_up_to_phase(expected: &StateVector, got: &StateVector) -> f64 {
    let (e, g) = (expected.normalized().unwrap(), got.normalized().unwrap());
    max_diff_up_to_phase(e.amplitudes(), g.amplitudes())
}

pub fn diff_vec_up_to_phase(expected: &[C64], got: &[C64]) -> f64 {
    let norm = |v: &[C64]| -> Vec<C64> {
        let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        v.iter().map(|c| c / n).collect()
    };
    max_diff_up_to_phase(&norm(expected), &norm(got))
}

/// Collapsed parity state: per DOF, even outcomes keep `x == y`, odd keep
/// `x != y`, each with the product of the input coefficients.
pub fn parity_collapse_oracle(spec_a: &PhotonInputSpec, spec_b: &PhotonInputSpec, outcome: SpinConfig) -> StateVector {
    let (pa, pb) = (dof_pairs(spec_a), dof_pairs(spec_b));
    let s_bits: Vec<usize> = outcome.0.iter().map(|s| s.bit()).collect();
    product_state(|k, x, y, s| {
        if s != s_bits[k] || (x ^ y) != s_bits[k] {
            c(0.0, 0.0)
        } else {
            pa[k][x] * pb[k][y]
        }
    })
}

/// Parity state after photon b is bit-flipped on every DOF whose parity
/// differs from the frequency parity.
pub fn parity_canonical_oracle(spec_a: &PhotonInputSpec, spec_b: &PhotonInputSpec, outcome: SpinConfig) -> StateVector {
    let (pa, pb) = (dof_pairs(spec_a), dof_pairs(spec_b));
    let s_bits: Vec<usize> = outcome.0.iter().map(|s| s.bit()).collect();
    let anchor = s_bits[0];
    product_state(|k, x, y, s| {
        let flip = s_bits[k] ^ anchor;
        if s != s_bits[k] || (x ^ y) != anchor {
            c(0.0, 0.0)
        } else {
            pa[k][x] * pb[k][y ^ flip]
        }
    })
}
