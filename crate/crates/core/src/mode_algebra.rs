//! Sparse complex-amplitude states over discrete mode labels.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type ComplexAmp = Complex64;

/// Intensity below which an entry is dropped.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-15;

/// Slack allowed when checking that power did not grow.
pub const POWER_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub fn swapped(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        }
    }
}

/// A discrete mode: polarization, OAM charge, radial index and time bin.
///
/// Ordering is lexicographic over `(pol, l, p, bin)`, which fixes the
/// iteration order of every state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeLabel {
    pub pol: Polarization,
    pub l: i32,
    pub p: u32,
    pub bin: i32,
}

impl ModeLabel {
    pub const fn new(pol: Polarization, l: i32, p: u32, bin: i32) -> Self {
        Self { pol, l, p, bin }
    }

    /// H-polarized, p = 0, bin 0 mode of charge `l`.
    pub const fn oam(l: i32) -> Self {
        Self::new(Polarization::H, l, 0, 0)
    }

    /// H-polarized Gaussian mode in time bin `bin`.
    pub const fn time_bin(bin: i32) -> Self {
        Self::new(Polarization::H, 0, 0, bin)
    }

    pub fn with_pol(self, pol: Polarization) -> Self {
        Self { pol, ..self }
    }

    pub fn with_l(self, l: i32) -> Self {
        Self { l, ..self }
    }

    pub fn with_bin(self, bin: i32) -> Self {
        Self { bin, ..self }
    }

    pub fn is_gaussian(&self) -> bool {
        self.l == 0 && self.p == 0
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({:?}, l={}, p={}, bin={})",
            self.pol, self.l, self.p, self.bin
        )
    }
}

/// A pure state: amplitudes over mode labels plus the reference time of bin 0.
///
/// Immutable once built; every operation returns a new state.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseState {
    amplitudes: BTreeMap<ModeLabel, ComplexAmp>,
    t0: f64,
    prune_threshold: f64,
}

impl Default for PulseState {
    fn default() -> Self {
        Self::empty(0.0)
    }
}

impl PulseState {
    pub fn empty(t0: f64) -> Self {
        Self {
            amplitudes: BTreeMap::new(),
            t0,
            prune_threshold: DEFAULT_PRUNE_THRESHOLD,
        }
    }

    /// Unit amplitude in a single mode.
    pub fn basis(label: ModeLabel) -> Self {
        let mut s = Self::empty(0.0);
        s.amplitudes.insert(label, Complex64::new(1.0, 0.0));
        s
    }

    /// Sums terms per label; entries that cancel below the prune threshold vanish.
    pub fn superpose<I>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ModeLabel, ComplexAmp)>,
    {
        let mut b = StateBuilder::new(0.0, DEFAULT_PRUNE_THRESHOLD);
        let mut any = false;
        for (label, amp) in terms {
            if !(amp.re.is_finite() && amp.im.is_finite()) {
                return Err(Error::NonFiniteAmplitude(label.to_string()));
            }
            b.add(label, amp);
            any = true;
        }
        if !any {
            return Err(Error::EmptySuperposition);
        }
        Ok(b.finish().0)
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    /// Sets the prune threshold and applies it immediately.
    pub fn with_prune_threshold(self, threshold: f64) -> Self {
        let mut b = StateBuilder::new(self.t0, threshold.max(0.0));
        for (l, a) in self.amplitudes {
            b.add(l, a);
        }
        b.finish().0
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune_threshold
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ModeLabel, &ComplexAmp)> {
        self.amplitudes.iter()
    }

    pub fn labels(&self) -> impl Iterator<Item = &ModeLabel> {
        self.amplitudes.keys()
    }

    pub fn amplitude(&self, label: &ModeLabel) -> ComplexAmp {
        self.amplitudes.get(label).copied().unwrap_or_default()
    }

    pub fn total_power(&self) -> f64 {
        self.amplitudes.values().fold(0.0, |s, a| s + a.norm_sqr())
    }

    pub fn power_in(&self, pred: impl Fn(&ModeLabel) -> bool) -> f64 {
        self.amplitudes
            .iter()
            .filter(|(l, _)| pred(l))
            .fold(0.0, |s, (_, a)| s + a.norm_sqr())
    }

    /// `Σ conj(self) · other` over shared labels.
    pub fn overlap(&self, other: &PulseState) -> ComplexAmp {
        self.amplitudes
            .iter()
            .filter_map(|(l, a)| other.amplitudes.get(l).map(|b| a.conj() * b))
            .sum()
    }

    /// Applies a linear map given per-label images. Returns the new state and
    /// the power removed by pruning.
    pub fn map_linear<F>(&self, mut f: F) -> (PulseState, f64)
    where
        F: FnMut(&ModeLabel, ComplexAmp, &mut StateBuilder),
    {
        let mut b = StateBuilder::new(self.t0, self.prune_threshold);
        for (l, a) in &self.amplitudes {
            f(l, *a, &mut b);
        }
        b.finish()
    }

    /// Relabels every term; amplitudes are multiplied by `factor`.
    pub fn relabel(&self, factor: f64, f: impl Fn(&ModeLabel) -> ModeLabel) -> (PulseState, f64) {
        self.map_linear(|l, a, b| b.add(f(l), a * factor))
    }

    pub fn scaled(&self, factor: ComplexAmp) -> PulseState {
        self.map_linear(|l, a, b| b.add(*l, a * factor)).0
    }

    /// Coherent sum.
    pub fn add(&self, other: &PulseState) -> PulseState {
        let mut b = StateBuilder::new(self.t0, self.prune_threshold);
        for (l, a) in self.amplitudes.iter().chain(other.amplitudes.iter()) {
            b.add(*l, *a);
        }
        b.finish().0
    }

    /// Splits into (matching, rest).
    pub fn partition(&self, pred: impl Fn(&ModeLabel) -> bool) -> (PulseState, PulseState) {
        let mut yes = Self::empty(self.t0);
        yes.prune_threshold = self.prune_threshold;
        let mut no = yes.clone();
        for (l, a) in &self.amplitudes {
            if pred(l) {
                yes.amplitudes.insert(*l, *a);
            } else {
                no.amplitudes.insert(*l, *a);
            }
        }
        (yes, no)
    }

    pub fn filter(&self, pred: impl Fn(&ModeLabel) -> bool) -> PulseState {
        self.partition(pred).0
    }

    /// The state rescaled to unit power, if it has any power.
    pub fn normalized(&self) -> Option<PulseState> {
        let p = self.total_power();
        (p > 0.0).then(|| self.scaled(Complex64::new(1.0 / p.sqrt(), 0.0)))
    }
}

/// Accumulates amplitudes per label, then prunes.
#[derive(Debug)]
pub struct StateBuilder {
    map: BTreeMap<ModeLabel, ComplexAmp>,
    t0: f64,
    threshold: f64,
}

impl StateBuilder {
    pub fn new(t0: f64, threshold: f64) -> Self {
        Self {
            map: BTreeMap::new(),
            t0,
            threshold,
        }
    }

    pub fn add(&mut self, label: ModeLabel, amp: ComplexAmp) {
        *self.map.entry(label).or_default() += amp;
    }

    /// Returns the pruned state and the power that pruning removed.
    pub fn finish(mut self) -> (PulseState, f64) {
        let mut pruned = 0.0;
        let th = self.threshold;
        self.map.retain(|_, a| {
            let p = a.norm_sqr();
            if p <= th {
                pruned += p;
                false
            } else {
                true
            }
        });
        (
            PulseState {
                amplitudes: self.map,
                t0: self.t0,
                prune_threshold: th,
            },
            pruned,
        )
    }
}

pub fn basis_state(label: ModeLabel) -> PulseState {
    PulseState::basis(label)
}

pub fn superpose<I>(terms: I) -> Result<PulseState>
where
    I: IntoIterator<Item = (ModeLabel, ComplexAmp)>,
{
    PulseState::superpose(terms)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Term {
    pol: Polarization,
    l: i32,
    p: u32,
    bin: i32,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Wire {
    t0_ns: f64,
    terms: Vec<Term>,
}

impl Serialize for PulseState {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        Wire {
            t0_ns: self.t0 * 1e9,
            terms: self
                .amplitudes
                .iter()
                .map(|(l, a)| Term {
                    pol: l.pol,
                    l: l.l,
                    p: l.p,
                    bin: l.bin,
                    re: a.re,
                    im: a.im,
                })
                .collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for PulseState {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let w = Wire::deserialize(de)?;
        let terms = w.terms.into_iter().map(|t| {
            (
                ModeLabel::new(t.pol, t.l, t.p, t.bin),
                Complex64::new(t.re, t.im),
            )
        });
        let s = PulseState::superpose(terms).map_err(serde::de::Error::custom)?;
        Ok(s.with_t0(w.t0_ns * 1e-9))
    }
}
