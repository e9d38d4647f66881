//! NV center in a double-sided cavity: steady-state scattering coefficients
//! and the spin-dependent transition rules they induce.
//!
//! All rates and frequencies share one angular unit. Only differences of the
//! frequencies enter the coefficients, so the absolute scale is arbitrary; the
//! presets use 2π·GHz.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{Frequency, Matrix, Polarization, Port, Spin, C64};

/// Measured microdisk parameters, in GHz (before the 2π factor).
pub const MICRODISK_G_GHZ: f64 = 0.30;
pub const MICRODISK_KAPPA_GHZ: f64 = 26.0;
pub const MICRODISK_GAMMA_TOTAL_GHZ: f64 = 0.013;
pub const MICRODISK_GAMMA_ZPL_GHZ: f64 = 0.0004;

/// Side leakage of current fabrication, as a fraction of `kappa`.
pub const DEFAULT_KS_OVER_K: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityParams {
    /// NV–cavity coupling rate.
    pub g: f64,
    /// Cavity field decay rate (per port).
    pub kappa: f64,
    /// Side-leakage rate; enters the coefficients as `kappa_s / 2`.
    pub kappa_s: f64,
    /// Dipole decay rate; enters as `gamma / 2`.
    pub gamma: f64,
    /// Incident photon frequency.
    pub omega: f64,
    pub omega_c: f64,
    /// Dipole transition frequency.
    pub omega_x: f64,
}

impl CavityParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("g", self.g),
            ("kappa", self.kappa),
            ("kappa_s", self.kappa_s),
            ("gamma", self.gamma),
            ("omega", self.omega),
            ("omega_c", self.omega_c),
            ("omega_x", self.omega_x),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("{name} must be finite")));
        }
        if self.g < 0.0 {
            return Err(Error::InvalidParams("g must be >= 0".into()));
        }
        if self.kappa <= 0.0 {
            return Err(Error::InvalidParams("kappa must be > 0".into()));
        }
        if self.kappa_s < 0.0 {
            return Err(Error::InvalidParams("kappa_s must be >= 0".into()));
        }
        if self.gamma <= 0.0 {
            return Err(Error::InvalidParams("gamma must be > 0".into()));
        }
        Ok(())
    }

    /// `g² / (kappa · gamma)`.
    pub fn cooperativity(&self) -> f64 {
        self.g * self.g / (self.kappa * self.gamma)
    }

    pub fn ks_over_k(&self) -> f64 {
        self.kappa_s / self.kappa
    }

    /// Microdisk preset with the given side leakage `kappa_s / kappa`.
    ///
    /// The dipole rate is the zero-phonon-line rate: with it the cooperativity
    /// is 0.09 / (26 · 0.0004) ≈ 8.654, whereas the total rate would give
    /// about 0.266.
    pub fn realistic(ks_over_k: f64) -> Self {
        let kappa = TAU * MICRODISK_KAPPA_GHZ;
        CavityParams {
            g: TAU * MICRODISK_G_GHZ,
            kappa,
            kappa_s: ks_over_k * kappa,
            gamma: TAU * MICRODISK_GAMMA_ZPL_GHZ,
            omega: 0.0,
            omega_c: 0.0,
            omega_x: 0.0,
        }
    }

    /// Resonant parameters in units of `kappa`, with `gamma / kappa` taken from
    /// the microdisk preset and `g` chosen to hit the requested cooperativity.
    pub fn resonant(ks_over_k: f64, cooperativity: f64) -> Self {
        let gamma = MICRODISK_GAMMA_ZPL_GHZ / MICRODISK_KAPPA_GHZ;
        CavityParams {
            g: (cooperativity * gamma).sqrt(),
            kappa: 1.0,
            kappa_s: ks_over_k,
            gamma,
            omega: 0.0,
            omega_c: 0.0,
            omega_x: 0.0,
        }
    }

    /// Reflection and transmission amplitudes of the hot (`g`) and cold
    /// (`g = 0`) cavity in the weak-excitation limit.
    pub fn scattering_coeffs(&self) -> Result<ScatteringCoeffs> {
        self.validate()?;
        let dipole = C64::new(self.gamma / 2.0, self.omega_x - self.omega);
        let leak = C64::new(self.kappa_s / 2.0, self.omega_c - self.omega);
        let cavity = C64::new(self.kappa + self.kappa_s / 2.0, self.omega_c - self.omega);
        let g2 = self.g * self.g;

        let hot = dipole * cavity + g2;
        let r = (dipole * leak + g2) / hot;
        let t = -self.kappa * dipole / hot;
        // g = 0: the dipole factor cancels.
        let r0 = leak / cavity;
        let t0 = C64::new(-self.kappa, 0.0) / cavity;
        Ok(ScatteringCoeffs { r, t, r0, t0 })
    }
}

/// Complex amplitudes of a hot (`r`, `t`) and cold (`r0`, `t0`) cavity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringCoeffs {
    #[serde(with = "crate::hilbert::reim")]
    pub r: C64,
    #[serde(with = "crate::hilbert::reim")]
    pub t: C64,
    #[serde(with = "crate::hilbert::reim")]
    pub r0: C64,
    #[serde(with = "crate::hilbert::reim")]
    pub t0: C64,
}

impl ScatteringCoeffs {
    /// Perfect reflection when coupled, π-phase transmission when not.
    pub const IDEAL: ScatteringCoeffs = ScatteringCoeffs {
        r: C64::new(1.0, 0.0),
        t: C64::new(0.0, 0.0),
        r0: C64::new(0.0, 0.0),
        t0: C64::new(-1.0, 0.0),
    };

    pub fn new(r: C64, t: C64, r0: C64, t0: C64) -> Self {
        ScatteringCoeffs { r, t, r0, t0 }
    }

    /// Largest of `|r|² + |t|²` and `|r0|² + |t0|²`.
    pub fn max_throughput(&self) -> f64 {
        (self.r.norm_sqr() + self.t.norm_sqr()).max(self.r0.norm_sqr() + self.t0.norm_sqr())
    }

    pub fn is_passive(&self, tol: f64) -> bool {
        self.max_throughput() <= 1.0 + tol
    }

    /// `t + r`: Block amplitude of the coupled branch.
    pub fn coupled_sum(&self) -> C64 {
        self.t + self.r
    }

    /// `t0 + r0`: Block amplitude of an uncoupled branch.
    pub fn uncoupled_sum(&self) -> C64 {
        self.t0 + self.r0
    }

    pub fn is_finite(&self) -> bool {
        [self.r, self.t, self.r0, self.t0].iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Input label of one scattering rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScatterKey {
    pub direction: Port,
    pub polarization: Polarization,
    pub frequency: Frequency,
    pub spin: Spin,
}

impl ScatterKey {
    pub fn new(direction: Port, polarization: Polarization, frequency: Frequency, spin: Spin) -> Self {
        ScatterKey { direction, polarization, frequency, spin }
    }

    /// Index in the (polarization ⊗ frequency ⊗ port ⊗ spin) space.
    pub fn index(&self) -> usize {
        self.polarization.bit() | self.frequency.bit() << 1 | self.direction.bit() << 2 | self.spin.bit() << 3
    }

    pub fn from_index(index: usize) -> Self {
        ScatterKey {
            polarization: Polarization::from_bit(index),
            frequency: Frequency::from_bit(index >> 1),
            direction: Port::from_bit(index >> 2),
            spin: Spin::from_bit(index >> 3),
        }
    }

    pub fn all() -> impl Iterator<Item = ScatterKey> {
        (0..16).map(ScatterKey::from_index)
    }

    /// The dipole couples `|+⟩` to `R↓`/`L↑` at `ω1` and `|−⟩` to `R↑`/`L↓`
    /// at `ω2`.
    pub fn is_coupled(&self) -> bool {
        use Polarization::*;
        use Port::*;
        matches!(
            (self.direction, self.polarization, self.frequency, self.spin),
            (Down, R, Frequency::W1, Spin::Plus)
                | (Up, L, Frequency::W1, Spin::Plus)
                | (Up, R, Frequency::W2, Spin::Minus)
                | (Down, L, Frequency::W2, Spin::Minus)
        )
    }
}

/// One output term of a rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterTerm {
    pub direction: Port,
    pub polarization: Polarization,
    #[serde(with = "crate::hilbert::reim")]
    pub coeff: C64,
}

/// The sixteen scattering rules for a given coefficient quadruple.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionTable {
    rules: Vec<Vec<ScatterTerm>>,
}

impl TransitionTable {
    /// Each input is transmitted unchanged with `t` (`t0`) or reflected with
    /// `r` (`r0`), reflection flipping both polarization and direction.
    pub fn new(c: &ScatteringCoeffs) -> Self {
        let rules = ScatterKey::all()
            .map(|key| {
                let (t, r) = if key.is_coupled() { (c.t, c.r) } else { (c.t0, c.r0) };
                [
                    ScatterTerm { direction: key.direction, polarization: key.polarization, coeff: t },
                    ScatterTerm {
                        direction: key.direction.flipped(),
                        polarization: key.polarization.flipped(),
                        coeff: r,
                    },
                ]
                .into_iter()
                .filter(|term| term.coeff != C64::new(0.0, 0.0))
                .collect()
            })
            .collect();
        TransitionTable { rules }
    }

    pub fn ideal() -> Self {
        Self::new(&ScatteringCoeffs::IDEAL)
    }

    pub fn rule(&self, key: ScatterKey) -> &[ScatterTerm] {
        &self.rules[key.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ScatterKey, &[ScatterTerm])> {
        ScatterKey::all().map(move |k| (k, self.rule(k)))
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// 16x16 matrix over (polarization ⊗ frequency ⊗ port ⊗ spin).
    pub fn to_matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(16, 16);
        for (key, terms) in self.iter() {
            for term in terms {
                let out = ScatterKey { direction: term.direction, polarization: term.polarization, ..key };
                m[(out.index(), key.index())] += term.coeff;
            }
        }
        m
    }
}
