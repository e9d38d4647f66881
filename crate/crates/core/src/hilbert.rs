//! Labeled state space for two photons and three NV electron spins.
//!
//! Every photon carries four binary labels (polarization, frequency, spatial
//! mode, time bin) and, while it is inside a Block interferometer, a fifth
//! binary `port` label recording its propagation direction through the cavity.
//!
//! # Index packing
//!
//! Photon-local indices are little-endian over the fields
//!
//! | bit | field        | 0      | 1      |
//! |-----|--------------|--------|--------|
//! | 0   | polarization | `R`    | `L`    |
//! | 1   | frequency    | `ω1`   | `ω2`   |
//! | 2   | spatial      | `m1`   | `m2`   |
//! | 3   | time bin     | `l`    | `s`    |
//! | 4   | port         | `down` | `up`   |
//!
//! so the local dimension is 16 without a port and 32 with one. Spin
//! configurations pack as `s1 | s2 << 1 | s3 << 2` with `+ = 0`, `- = 1`. The
//! joint index is
//!
//! ```text
//! index = a + dim_a * (b + dim_b * spins)
//! ```
//!
//! which with both ports absent spans 16 * 16 * 8 = 2048 amplitudes.

use std::fmt;
use std::ops::{Add, Mul};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Dense complex matrix acting on a small local space. Rows index outputs.
pub type Matrix = DMatrix<C64>;

/// Tolerance for exact-physics comparisons.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance for user-supplied normalization.
pub const INPUT_TOL: f64 = 1e-10;

pub const SPIN_DIM: usize = 8;

macro_rules! binary_label {
    ($(#[$meta:meta])* $name:ident { $zero:ident => $zs:literal, $one:ident => $os:literal }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $zero,
            $one,
        }

        impl $name {
            pub const ALL: [$name; 2] = [$name::$zero, $name::$one];

            #[inline]
            pub fn bit(self) -> usize {
                match self {
                    $name::$zero => 0,
                    $name::$one => 1,
                }
            }

            #[inline]
            pub fn from_bit(bit: usize) -> Self {
                if bit & 1 == 0 { $name::$zero } else { $name::$one }
            }

            #[inline]
            pub fn flipped(self) -> Self {
                Self::from_bit(self.bit() ^ 1)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self {
                    $name::$zero => $zs,
                    $name::$one => $os,
                })
            }
        }
    };
}

binary_label!(Polarization { R => "R", L => "L" });
binary_label!(
    /// Logical frequency label.
    Frequency { W1 => "w1", W2 => "w2" }
);
binary_label!(Spatial { M1 => "m1", M2 => "m2" });
binary_label!(
    /// `Long` is the `l` (early, long-path) bin and `Short` the `s` bin.
    TimeBin { Long => "l", Short => "s" }
);
binary_label!(
    /// Propagation direction through a cavity: `Down` is against the NV axis
    /// (the transmitted `R` arm of a Block), `Up` is along it.
    Port { Down => "down", Up => "up" }
);
binary_label!(Spin { Plus => "+", Minus => "-" });
binary_label!(Photon { A => "a", B => "b" });

/// One of the three NV centers. NV1 serves the frequency qubits, NV2 the
/// spatial qubits and NV3 the time-bin qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Nv {
    E1,
    E2,
    E3,
}

impl Nv {
    pub const ALL: [Nv; 3] = [Nv::E1, Nv::E2, Nv::E3];

    /// Zero-based position inside the spin register.
    pub fn position(self) -> usize {
        match self {
            Nv::E1 => 0,
            Nv::E2 => 1,
            Nv::E3 => 2,
        }
    }

    /// One-based label as used in reports.
    pub fn number(self) -> u8 {
        self.position() as u8 + 1
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Nv::E1),
            2 => Some(Nv::E2),
            3 => Some(Nv::E3),
            _ => None,
        }
    }
}

impl fmt::Display for Nv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NV{}", self.number())
    }
}

/// Basis label of a single photon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhotonMode {
    pub polarization: Polarization,
    pub frequency: Frequency,
    pub spatial: Spatial,
    pub timebin: TimeBin,
    pub port: Option<Port>,
}

impl PhotonMode {
    pub const fn new(
        polarization: Polarization,
        frequency: Frequency,
        spatial: Spatial,
        timebin: TimeBin,
    ) -> Self {
        PhotonMode { polarization, frequency, spatial, timebin, port: None }
    }

    pub fn with_port(self, port: Option<Port>) -> Self {
        PhotonMode { port, ..self }
    }

    pub fn with_polarization(self, polarization: Polarization) -> Self {
        PhotonMode { polarization, ..self }
    }

    pub fn with_frequency(self, frequency: Frequency) -> Self {
        PhotonMode { frequency, ..self }
    }

    pub fn with_spatial(self, spatial: Spatial) -> Self {
        PhotonMode { spatial, ..self }
    }

    pub fn with_timebin(self, timebin: TimeBin) -> Self {
        PhotonMode { timebin, ..self }
    }

    pub const fn local_dim(with_port: bool) -> usize {
        if with_port { 32 } else { 16 }
    }

    pub fn index(&self) -> usize {
        self.polarization.bit()
            | self.frequency.bit() << 1
            | self.spatial.bit() << 2
            | self.timebin.bit() << 3
            | self.port.map_or(0, |p| p.bit() << 4)
    }

    pub fn from_index(index: usize, with_port: bool) -> Result<Self> {
        let dim = Self::local_dim(with_port);
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, dim });
        }
        Ok(PhotonMode {
            polarization: Polarization::from_bit(index),
            frequency: Frequency::from_bit(index >> 1),
            spatial: Spatial::from_bit(index >> 2),
            timebin: TimeBin::from_bit(index >> 3),
            port: with_port.then(|| Port::from_bit(index >> 4)),
        })
    }

    /// All modes of the 16- or 32-dimensional local space, in index order.
    pub fn all(with_port: bool) -> impl Iterator<Item = PhotonMode> {
        (0..Self::local_dim(with_port)).map(move |i| Self::from_index(i, with_port).unwrap())
    }

    /// Builds the local matrix of a linear map given by its action on basis
    /// labels. `rule` returns the output expansion of one input mode.
    pub fn operator_from_rule<F>(port_in: bool, port_out: bool, rule: F) -> Matrix
    where
        F: Fn(PhotonMode) -> Vec<(PhotonMode, C64)>,
    {
        let mut m = Matrix::zeros(Self::local_dim(port_out), Self::local_dim(port_in));
        for input in Self::all(port_in) {
            for (output, c) in rule(input) {
                debug_assert_eq!(output.port.is_some(), port_out);
                m[(output.index(), input.index())] += c;
            }
        }
        m
    }
}

impl fmt::Display for PhotonMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.polarization, self.frequency, self.spatial, self.timebin)?;
        if let Some(p) = self.port {
            write!(f, ",{p}")?;
        }
        Ok(())
    }
}

/// Joint state of the three electron spins as a basis label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinConfig(pub [Spin; 3]);

impl SpinConfig {
    pub const ALL_PLUS: SpinConfig = SpinConfig([Spin::Plus; 3]);

    pub fn index(&self) -> usize {
        self.0.iter().enumerate().map(|(k, s)| s.bit() << k).sum()
    }

    pub fn from_index(index: usize) -> Self {
        SpinConfig([
            Spin::from_bit(index),
            Spin::from_bit(index >> 1),
            Spin::from_bit(index >> 2),
        ])
    }

    pub fn all() -> impl Iterator<Item = SpinConfig> {
        (0..SPIN_DIM).map(SpinConfig::from_index)
    }

    pub fn get(&self, nv: Nv) -> Spin {
        self.0[nv.position()]
    }
}

impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Three-DOF input of one photon: amplitude pairs for frequency
/// (`ω1`, `ω2`), spatial mode (`m1`, `m2`) and time bin (`l`, `s`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhotonInputSpec {
    #[serde(with = "reim::array")]
    pub freq_amps: [C64; 2],
    #[serde(with = "reim::array")]
    pub spatial_amps: [C64; 2],
    #[serde(with = "reim::array")]
    pub time_amps: [C64; 2],
}

impl PhotonInputSpec {
    pub fn new(freq_amps: [C64; 2], spatial_amps: [C64; 2], time_amps: [C64; 2]) -> Result<Self> {
        let spec = PhotonInputSpec { freq_amps, spatial_amps, time_amps };
        spec.validate()?;
        Ok(spec)
    }

    /// A single basis state.
    pub fn basis(frequency: Frequency, spatial: Spatial, timebin: TimeBin) -> Self {
        let pick = |bit: usize| {
            let mut p = [C64::new(0.0, 0.0); 2];
            p[bit] = C64::new(1.0, 0.0);
            p
        };
        PhotonInputSpec {
            freq_amps: pick(frequency.bit()),
            spatial_amps: pick(spatial.bit()),
            time_amps: pick(timebin.bit()),
        }
    }

    /// Equal-weight superposition in all three DOFs.
    pub fn uniform() -> Self {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        PhotonInputSpec { freq_amps: [h; 2], spatial_amps: [h; 2], time_amps: [h; 2] }
    }

    /// Haar-like random spec: each pair is a random point on the Bloch sphere
    /// with a random global phase.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut pair = || {
            let theta: f64 = rng.random::<f64>().mul_add(2.0, -1.0).acos();
            let phi0: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            let phi1: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            [
                C64::from_polar((theta / 2.0).cos(), phi0),
                C64::from_polar((theta / 2.0).sin(), phi1),
            ]
        };
        PhotonInputSpec { freq_amps: pair(), spatial_amps: pair(), time_amps: pair() }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, pair) in self.pairs() {
            let norm_sqr = pair[0].norm_sqr() + pair[1].norm_sqr();
            if !norm_sqr.is_finite() || (norm_sqr - 1.0).abs() > INPUT_TOL {
                return Err(Error::Normalization { field, norm_sqr });
            }
        }
        Ok(())
    }

    pub fn pairs(&self) -> [(&'static str, [C64; 2]); 3] {
        [
            ("freq_amps", self.freq_amps),
            ("spatial_amps", self.spatial_amps),
            ("time_amps", self.time_amps),
        ]
    }

    /// Amplitude of one (R-polarized) basis mode in the product state.
    pub fn amplitude(&self, mode: PhotonMode) -> C64 {
        if mode.polarization != Polarization::R || mode.port.is_some() {
            return C64::new(0.0, 0.0);
        }
        self.freq_amps[mode.frequency.bit()]
            * self.spatial_amps[mode.spatial.bit()]
            * self.time_amps[mode.timebin.bit()]
    }
}

/// Dense state over photon a ⊗ photon b ⊗ three spins.
///
/// Values are immutable: every operation returns a new state. The cached
/// squared norm is recomputed on construction, so it always matches the
/// amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
    port_a: bool,
    port_b: bool,
    tracked_norm: f64,
}

impl StateVector {
    pub fn zeros(port_a: bool, port_b: bool) -> Self {
        let dim = Self::dim_for(port_a, port_b);
        StateVector { amps: vec![C64::new(0.0, 0.0); dim], port_a, port_b, tracked_norm: 0.0 }
    }

    pub fn from_amplitudes(amps: Vec<C64>, port_a: bool, port_b: bool) -> Result<Self> {
        let expected = Self::dim_for(port_a, port_b);
        if amps.len() != expected {
            return Err(Error::Dimension { expected, found: amps.len() });
        }
        Ok(Self::from_parts(amps, port_a, port_b))
    }

    fn from_parts(amps: Vec<C64>, port_a: bool, port_b: bool) -> Self {
        let tracked_norm = amps.iter().map(|c| c.norm_sqr()).sum();
        StateVector { amps, port_a, port_b, tracked_norm }
    }

    pub fn basis(a: PhotonMode, b: PhotonMode, spins: SpinConfig) -> Self {
        let mut s = Self::zeros(a.port.is_some(), b.port.is_some());
        let idx = s.index_of(a, b, spins);
        s.amps[idx] = C64::new(1.0, 0.0);
        s.tracked_norm = 1.0;
        s
    }

    /// Product input state: both photons `R`-polarized, each spin in
    /// `(|+⟩ + |−⟩)/√2`.
    pub fn initial(spec_a: &PhotonInputSpec, spec_b: &PhotonInputSpec) -> Result<Self> {
        spec_a.validate()?;
        spec_b.validate()?;
        let spin_amp = C64::new(2f64.powf(-1.5), 0.0);
        let mut amps = vec![C64::new(0.0, 0.0); Self::dim_for(false, false)];
        for a in PhotonMode::all(false) {
            let ca = spec_a.amplitude(a);
            if ca == C64::new(0.0, 0.0) {
                continue;
            }
            for b in PhotonMode::all(false) {
                let cab = ca * spec_b.amplitude(b);
                for s in 0..SPIN_DIM {
                    amps[a.index() + 16 * (b.index() + 16 * s)] = cab * spin_amp;
                }
            }
        }
        Ok(Self::from_parts(amps, false, false))
    }

    const fn dim_for(port_a: bool, port_b: bool) -> usize {
        PhotonMode::local_dim(port_a) * PhotonMode::local_dim(port_b) * SPIN_DIM
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn has_port(&self, photon: Photon) -> bool {
        match photon {
            Photon::A => self.port_a,
            Photon::B => self.port_b,
        }
    }

    pub fn local_dim(&self, photon: Photon) -> usize {
        PhotonMode::local_dim(self.has_port(photon))
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.tracked_norm
    }

    pub fn is_zero(&self) -> bool {
        self.amps.iter().all(|c| c.norm_sqr() == 0.0)
    }

    pub fn index_of(&self, a: PhotonMode, b: PhotonMode, spins: SpinConfig) -> usize {
        debug_assert_eq!(a.port.is_some(), self.port_a);
        debug_assert_eq!(b.port.is_some(), self.port_b);
        let da = self.local_dim(Photon::A);
        let db = self.local_dim(Photon::B);
        a.index() + da * (b.index() + db * spins.index())
    }

    pub fn label_of(&self, index: usize) -> Result<(PhotonMode, PhotonMode, SpinConfig)> {
        if index >= self.dim() {
            return Err(Error::IndexOutOfRange { index, dim: self.dim() });
        }
        let da = self.local_dim(Photon::A);
        let db = self.local_dim(Photon::B);
        let a = PhotonMode::from_index(index % da, self.port_a)?;
        let b = PhotonMode::from_index((index / da) % db, self.port_b)?;
        Ok((a, b, SpinConfig::from_index(index / (da * db))))
    }

    pub fn amplitude(&self, a: PhotonMode, b: PhotonMode, spins: SpinConfig) -> C64 {
        self.amps[self.index_of(a, b, spins)]
    }

    /// Nonzero amplitudes with their labels, in index order.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, C64)> + '_ {
        self.amps.iter().copied().enumerate().filter(|(_, c)| c.norm_sqr() > 0.0)
    }

    /// Photon amplitudes on the slice where the spins are in `spins`,
    /// indexed by `a + dim_a * b`.
    pub fn photon_amplitudes(&self, spins: SpinConfig) -> Vec<C64> {
        let block = self.local_dim(Photon::A) * self.local_dim(Photon::B);
        let start = block * spins.index();
        self.amps[start..start + block].to_vec()
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn overlap(&self, other: &StateVector) -> Result<C64> {
        if self.port_a != other.port_a || self.port_b != other.port_b {
            return Err(Error::Dimension { expected: self.dim(), found: other.dim() });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(x, y)| x.conj() * y).sum())
    }

    pub fn normalized(&self) -> Result<StateVector> {
        if self.tracked_norm == 0.0 {
            return Err(Error::ZeroState);
        }
        Ok(self * C64::new(self.tracked_norm.sqrt().recip(), 0.0))
    }

    pub fn apply_single_photon_map(&self, photon: Photon, map: &Matrix) -> Result<StateVector> {
        let din = self.local_dim(photon);
        if map.ncols() != din {
            return Err(Error::Dimension { expected: din, found: map.ncols() });
        }
        let port_out = local_port_flag(map.nrows())?;
        self.apply_lifted(photon, None, map, port_out)
    }

    /// Applies a map on (photon-local ⊗ spin `nv`). Columns are indexed by
    /// `local + dim * spin`.
    pub fn apply_photon_spin_map(&self, photon: Photon, nv: Nv, map: &Matrix) -> Result<StateVector> {
        let din = 2 * self.local_dim(photon);
        if map.ncols() != din {
            return Err(Error::Dimension { expected: din, found: map.ncols() });
        }
        if !map.nrows().is_multiple_of(2) {
            return Err(Error::Dimension { expected: din, found: map.nrows() });
        }
        let port_out = local_port_flag(map.nrows() / 2)?;
        self.apply_lifted(photon, Some(nv), map, port_out)
    }

    /// Applies a 2x2 map to one spin.
    pub fn apply_spin_map(&self, nv: Nv, map: &Matrix) -> Result<StateVector> {
        if map.shape() != (2, 2) {
            return Err(Error::Dimension { expected: 2, found: map.ncols() });
        }
        let k = nv.position();
        let block = self.local_dim(Photon::A) * self.local_dim(Photon::B);
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        for (idx, amp) in self.nonzero() {
            let photons = idx % block;
            let s = idx / block;
            let bit = (s >> k) & 1;
            for new_bit in 0..2 {
                let m = map[(new_bit, bit)];
                if m == C64::new(0.0, 0.0) {
                    continue;
                }
                let s2 = (s & !(1 << k)) | (new_bit << k);
                out[photons + block * s2] += m * amp;
            }
        }
        Ok(Self::from_parts(out, self.port_a, self.port_b))
    }

    fn apply_lifted(
        &self,
        photon: Photon,
        nv: Option<Nv>,
        map: &Matrix,
        port_out: bool,
    ) -> Result<StateVector> {
        let da = self.local_dim(Photon::A);
        let db = self.local_dim(Photon::B);
        let (new_port_a, new_port_b) = match photon {
            Photon::A => (port_out, self.port_b),
            Photon::B => (self.port_a, port_out),
        };
        let nda = PhotonMode::local_dim(new_port_a);
        let ndb = PhotonMode::local_dim(new_port_b);
        let din = self.local_dim(photon);
        let dout = PhotonMode::local_dim(port_out);
        let mut out = vec![C64::new(0.0, 0.0); nda * ndb * SPIN_DIM];

        for (idx, amp) in self.nonzero() {
            let a = idx % da;
            let b = (idx / da) % db;
            let s = idx / (da * db);
            let local = match photon {
                Photon::A => a,
                Photon::B => b,
            };
            let (col, spin_bit) = match nv {
                Some(nv) => {
                    let bit = (s >> nv.position()) & 1;
                    (local + din * bit, Some((nv.position(), bit)))
                }
                None => (local, None),
            };
            for row in 0..map.nrows() {
                let m = map[(row, col)];
                if m == C64::new(0.0, 0.0) {
                    continue;
                }
                let new_local = row % dout;
                let s2 = match spin_bit {
                    Some((k, _)) => (s & !(1 << k)) | ((row / dout) << k),
                    None => s,
                };
                let (na, nb) = match photon {
                    Photon::A => (new_local, b),
                    Photon::B => (a, new_local),
                };
                out[na + nda * (nb + ndb * s2)] += m * amp;
            }
        }
        Ok(Self::from_parts(out, new_port_a, new_port_b))
    }

    /// Unnormalized projection of spin `nv` onto `outcome`.
    pub fn project_spin(&self, nv: Nv, outcome: Spin) -> StateVector {
        let block = self.local_dim(Photon::A) * self.local_dim(Photon::B);
        let k = nv.position();
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(idx, &c)| {
                if ((idx / block) >> k) & 1 == outcome.bit() { c } else { C64::new(0.0, 0.0) }
            })
            .collect();
        Self::from_parts(amps, self.port_a, self.port_b)
    }

    /// Projective measurement of one spin in the `{|+⟩, |−⟩}` basis.
    ///
    /// The surviving branch is rescaled to the pre-measurement squared norm,
    /// so probability already lost to leakage stays lost.
    pub fn measure_spin(
        &self,
        nv: Nv,
        source: &mut dyn OutcomeSource,
    ) -> Result<(SpinMeasurement, StateVector)> {
        let plus = self.project_spin(nv, Spin::Plus);
        let minus = self.project_spin(nv, Spin::Minus);
        let total = plus.norm_sqr() + minus.norm_sqr();
        if total == 0.0 {
            return Err(Error::ZeroState);
        }
        let p_plus = plus.norm_sqr() / total;
        let outcome = source.choose(nv, p_plus);
        let branch = match outcome {
            Spin::Plus => plus,
            Spin::Minus => minus,
        };
        let probability = branch.norm_sqr();
        if probability == 0.0 {
            return Err(Error::ZeroState);
        }
        let scale = (self.tracked_norm / probability).sqrt();
        let state = &branch * C64::new(scale, 0.0);
        Ok((
            SpinMeasurement { nv, outcome, probability, conditional_probability: probability / total },
            state,
        ))
    }
}

fn local_port_flag(dim: usize) -> Result<bool> {
    match dim {
        16 => Ok(false),
        32 => Ok(true),
        other => Err(Error::Dimension { expected: 16, found: other }),
    }
}

impl Add for &StateVector {
    type Output = StateVector;

    fn add(self, rhs: &StateVector) -> StateVector {
        assert_eq!(
            (self.port_a, self.port_b),
            (rhs.port_a, rhs.port_b),
            "adding states over different spaces"
        );
        let amps = self.amps.iter().zip(&rhs.amps).map(|(x, y)| x + y).collect();
        StateVector::from_parts(amps, self.port_a, self.port_b)
    }
}

impl Mul<C64> for &StateVector {
    type Output = StateVector;

    fn mul(self, rhs: C64) -> StateVector {
        let amps = self.amps.iter().map(|x| x * rhs).collect();
        StateVector::from_parts(amps, self.port_a, self.port_b)
    }
}

/// Result of measuring one spin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinMeasurement {
    pub nv: Nv,
    pub outcome: Spin,
    /// Squared norm of the selected branch before rescaling.
    pub probability: f64,
    /// Probability of the outcome given that the photons survived.
    pub conditional_probability: f64,
}

/// Decides measurement outcomes.
pub trait OutcomeSource {
    /// `p_plus` is the conditional probability of `+` for this spin.
    fn choose(&mut self, nv: Nv, p_plus: f64) -> Spin;
}

/// Fixed outcomes, for deterministic projections.
#[derive(Clone, Copy, Debug)]
pub struct ForcedOutcomes(pub SpinConfig);

impl OutcomeSource for ForcedOutcomes {
    fn choose(&mut self, nv: Nv, _p_plus: f64) -> Spin {
        self.0.get(nv)
    }
}

/// Samples outcomes from the Born rule.
#[derive(Debug)]
pub struct SampledOutcomes<R>(pub R);

impl<R: Rng> OutcomeSource for SampledOutcomes<R> {
    fn choose(&mut self, _nv: Nv, p_plus: f64) -> Spin {
        if self.0.random::<f64>() < p_plus { Spin::Plus } else { Spin::Minus }
    }
}

/// Multiplies `amps` by the phase that makes the first amplitude with
/// magnitude above `1e-9` real and positive.
pub fn phase_gauge(amps: &[C64]) -> Vec<C64> {
    match amps.iter().find(|c| c.norm() > 1e-9) {
        Some(pivot) => {
            let phase = pivot.conj() / pivot.norm();
            amps.iter().map(|c| c * phase).collect()
        }
        None => amps.to_vec(),
    }
}

/// Largest amplitude difference after gauging both vectors by the pivot of
/// `reference`. Returns `f64::INFINITY` for mismatched lengths.
pub fn max_diff_up_to_phase(reference: &[C64], other: &[C64]) -> f64 {
    if reference.len() != other.len() {
        return f64::INFINITY;
    }
    let Some(pivot) = reference.iter().position(|c| c.norm() > 1e-9) else {
        return other.iter().map(|c| c.norm()).fold(0.0, f64::max);
    };
    let r = reference[pivot];
    let o = other[pivot];
    if o.norm() == 0.0 {
        return reference.iter().zip(other).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    }
    let rot = (r / r.norm()) * (o.conj() / o.norm());
    reference.iter().zip(other).map(|(x, y)| (x - y * rot).norm()).fold(0.0, f64::max)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AmplitudeEntry {
    index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateVectorRepr {
    packing: String,
    photon_a_port: bool,
    photon_b_port: bool,
    tracked_norm: f64,
    amplitudes: Vec<AmplitudeEntry>,
}

const PACKING: &str = "a + dim_a*(b + dim_b*spins); photon bits pol,freq,spatial,timebin[,port]; spins s1|s2<<1|s3<<2";

impl Serialize for StateVector {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let amplitudes = self
            .nonzero()
            .map(|(index, c)| {
                let (a, b, s) = self.label_of(index).expect("index in range");
                AmplitudeEntry { index, label: Some(format!("a[{a}] b[{b}] s[{s}]")), re: c.re, im: c.im }
            })
            .collect();
        StateVectorRepr {
            packing: PACKING.to_string(),
            photon_a_port: self.port_a,
            photon_b_port: self.port_b,
            tracked_norm: self.tracked_norm,
            amplitudes,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StateVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = StateVectorRepr::deserialize(deserializer)?;
        let mut state = StateVector::zeros(repr.photon_a_port, repr.photon_b_port);
        for e in repr.amplitudes {
            if e.index >= state.dim() {
                return Err(D::Error::custom(format!("amplitude index {} out of range", e.index)));
            }
            state.amps[e.index] = C64::new(e.re, e.im);
        }
        let state = StateVector::from_parts(state.amps, state.port_a, state.port_b);
        if (state.tracked_norm - repr.tracked_norm).abs() > EXACT_TOL {
            return Err(D::Error::custom("tracked_norm does not match amplitudes"));
        }
        Ok(state)
    }
}

/// Serde adapters writing complex numbers as `{"re": .., "im": ..}` objects.
pub mod reim {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::C64;

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct ReIm {
        re: f64,
        im: f64,
    }

    impl From<C64> for ReIm {
        fn from(c: C64) -> Self {
            ReIm { re: c.re, im: c.im }
        }
    }

    pub fn serialize<S: Serializer>(c: &C64, s: S) -> Result<S::Ok, S::Error> {
        ReIm::from(*c).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        let v = ReIm::deserialize(d)?;
        Ok(C64::new(v.re, v.im))
    }

    /// Fixed-length arrays of complex numbers.
    pub mod array {
        use serde::de::Error as _;
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        use super::{ReIm, C64};

        pub fn serialize<S: Serializer, const N: usize>(v: &[C64; N], s: S) -> Result<S::Ok, S::Error> {
            v.iter().map(|&c| ReIm::from(c)).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(d: D) -> Result<[C64; N], D::Error> {
            let v = Vec::<ReIm>::deserialize(d)?;
            let len = v.len();
            let v: Vec<C64> = v.into_iter().map(|x| C64::new(x.re, x.im)).collect();
            v.try_into().map_err(|_| D::Error::invalid_length(len, &format!("{N} complex numbers").as_str()))
        }
    }
}
