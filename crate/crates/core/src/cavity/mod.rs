//! Fabry–Pérot mode filter: Airy response, transverse-mode comb and lock servo.

mod lock;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{check_positive, check_unit, Error, Result};
use crate::mode_algebra::{ModeLabel, PulseState};

pub use lock::{lock_step, simulate_lock, LockRun, LockState, LockTrace};

/// CODATA speed of light, m/s.
pub const C_CODATA: f64 = 299_792_458.0;
/// Rounded value used for the published cavity numbers.
pub const C_ROUNDED: f64 = 3.0e8;

/// Upper end of the `max_clean_oam` scan.
pub const CLEAN_OAM_SCAN_LIMIT: u32 = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CavityParams {
    /// Mirror intensity reflectivity.
    pub reflectivity: f64,
    /// Mirror spacing, m.
    pub spacing: f64,
    pub refractive_index: f64,
    /// Mirror radii of curvature, m. `f64::INFINITY` is a plane mirror.
    pub curvature_1: f64,
    pub curvature_2: f64,
    /// Laser detuning from the LG00 resonance at the lock point, Hz.
    pub lock_offset: f64,
    pub speed_of_light: f64,
    /// Vacuum wavelength of the laser, m.
    pub wavelength: f64,
    /// Cap on the on-resonance intensity transmission.
    pub peak_transmission: f64,
    /// Cap on the off-resonance intensity reflection.
    pub reflection_cap: f64,
    /// Extra intensity factor on the transmission of modes with a given `|l|`.
    pub overlap_attenuation: BTreeMap<u32, f64>,
}

impl Default for CavityParams {
    fn default() -> Self {
        Self {
            reflectivity: 0.95,
            spacing: 10e-3,
            refractive_index: 1.0,
            curvature_1: 50e-3,
            curvature_2: 50e-3,
            lock_offset: 0.0,
            speed_of_light: C_CODATA,
            wavelength: 795e-9,
            peak_transmission: 0.90,
            reflection_cap: 0.95,
            overlap_attenuation: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CavitySpectrum {
    pub finesse: f64,
    pub fsr: f64,
    pub fwhm: f64,
    pub gouy_factor: f64,
}

/// `π√R/(1−R)`.
pub fn finesse(reflectivity: f64) -> Result<f64> {
    if !(reflectivity > 0.0 && reflectivity < 1.0) {
        return Err(Error::param(
            "reflectivity",
            format!("{reflectivity} must lie strictly between 0 and 1"),
        ));
    }
    Ok(PI * reflectivity.sqrt() / (1.0 - reflectivity))
}

/// Coefficient `4R/(1−R)²` of the Airy function.
fn airy_coefficient(reflectivity: f64) -> f64 {
    4.0 * reflectivity / ((1.0 - reflectivity) * (1.0 - reflectivity))
}

/// Airy transmission at a detuning `delta` from resonance, in units of FSR.
pub fn airy_at_detuning(reflectivity: f64, delta_fsr: f64) -> f64 {
    let s = (PI * delta_fsr).sin();
    1.0 / (1.0 + airy_coefficient(reflectivity) * s * s)
}

/// `cos⁻¹(√(g1 g2))/π`.
pub fn gouy_from_g(g1: f64, g2: f64) -> Result<f64> {
    let g = g1 * g2;
    if !(0.0..=1.0).contains(&g) {
        return Err(Error::UnstableCavity(g));
    }
    Ok(g.sqrt().acos() / PI)
}

/// Distance from `x` to the nearest integer.
fn distance_to_integer(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Which side of an LG00 resonance counts when measuring how close a
/// transverse mode sits to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OffsetSide {
    /// Nearest resonance, either side.
    #[default]
    Nearest,
    /// Only the resonance just below: the offset is `l·gouy mod 1`.
    Above,
}

/// Brute-force scan for the first `l >= 1` whose transverse offset
/// `|l|·gouy` (mod 1, nearest) is below `criterion · linewidth`; returns
/// that `l` minus one. Linewidth and offset are in FSR units.
pub fn clean_oam_scan(gouy: f64, linewidth_fsr: f64, criterion: f64, limit: u32) -> Result<u32> {
    clean_oam_scan_with(gouy, linewidth_fsr, criterion, limit, OffsetSide::Nearest)
}

pub fn clean_oam_scan_with(
    gouy: f64,
    linewidth_fsr: f64,
    criterion: f64,
    limit: u32,
    side: OffsetSide,
) -> Result<u32> {
    check_positive("criterion", criterion)?;
    let threshold = criterion * linewidth_fsr;
    for l in 1..=limit {
        let x = l as f64 * gouy;
        let d = match side {
            OffsetSide::Nearest => distance_to_integer(x),
            OffsetSide::Above => x - x.floor(),
        };
        if d < threshold {
            return Ok(l - 1);
        }
    }
    Ok(limit)
}

/// How the spectral width of a transform-limited pulse is quoted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinewidthConvention {
    /// `1/(4πτ)`.
    #[default]
    InverseFourPiTau,
    /// Gaussian time-bandwidth product `0.441/τ`.
    GaussianTbp,
}

pub fn pulse_linewidth(duration: f64, convention: LinewidthConvention) -> f64 {
    match convention {
        LinewidthConvention::InverseFourPiTau => 1.0 / (4.0 * PI * duration),
        LinewidthConvention::GaussianTbp => 2.0 * std::f64::consts::LN_2 / PI / duration,
    }
}

impl CavityParams {
    /// Cavity as built, with the rounded speed of light.
    pub fn paper_2016() -> Self {
        Self {
            speed_of_light: C_ROUNDED,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        finesse(self.reflectivity)?;
        check_positive("spacing", self.spacing)?;
        check_positive("refractive_index", self.refractive_index)?;
        check_positive("speed_of_light", self.speed_of_light)?;
        check_positive("wavelength", self.wavelength)?;
        for (name, r) in [
            ("curvature_1", self.curvature_1),
            ("curvature_2", self.curvature_2),
        ] {
            if !(r > 0.0) {
                return Err(Error::param(
                    name,
                    format!("{r} must be > 0 (inf for plane)"),
                ));
            }
        }
        check_unit("peak_transmission", self.peak_transmission)?;
        check_unit("reflection_cap", self.reflection_cap)?;
        if !self.lock_offset.is_finite() {
            return Err(Error::param("lock_offset", "must be finite"));
        }
        for (l, a) in &self.overlap_attenuation {
            check_unit(&format!("overlap_attenuation[{l}]"), *a)?;
        }
        self.gouy_factor().map(|_| ())
    }

    pub fn g_factors(&self) -> (f64, f64) {
        (
            1.0 - self.spacing / self.curvature_1,
            1.0 - self.spacing / self.curvature_2,
        )
    }

    pub fn finesse(&self) -> Result<f64> {
        finesse(self.reflectivity)
    }

    pub fn fsr(&self) -> Result<f64> {
        check_positive("spacing", self.spacing)?;
        check_positive("refractive_index", self.refractive_index)?;
        Ok(self.speed_of_light / (2.0 * self.refractive_index * self.spacing))
    }

    pub fn fwhm(&self) -> Result<f64> {
        Ok(self.fsr()? / self.finesse()?)
    }

    pub fn gouy_factor(&self) -> Result<f64> {
        let (g1, g2) = self.g_factors();
        gouy_from_g(g1, g2)
    }

    pub fn spectrum(&self) -> Result<CavitySpectrum> {
        Ok(CavitySpectrum {
            finesse: self.finesse()?,
            fsr: self.fsr()?,
            fwhm: self.fwhm()?,
            gouy_factor: self.gouy_factor()?,
        })
    }

    /// Airy transmission at absolute optical frequency `nu`.
    pub fn airy_transmission(&self, nu: f64) -> f64 {
        let s = (2.0 * PI * nu * self.refractive_index * self.spacing / self.speed_of_light).sin();
        1.0 / (1.0 + airy_coefficient(self.reflectivity) * s * s)
    }

    /// Resonance of transverse mode `(l, p)` on longitudinal order `m`.
    pub fn eigenfrequency(&self, l: i32, p: u32, m: i64) -> Result<f64> {
        let order = (2 * p as i64 + l.unsigned_abs() as i64 + 1) as f64;
        Ok(self.fsr()? * (m as f64 + order * self.gouy_factor()?))
    }

    /// Offset of mode `(l, p)` above the LG00 resonance, in FSR units.
    pub fn transverse_offset_fsr(&self, l: i32, p: u32) -> Result<f64> {
        Ok((2 * p + l.unsigned_abs()) as f64 * self.gouy_factor()?)
    }

    /// Laser frequency, Hz.
    pub fn laser_frequency(&self) -> f64 {
        self.speed_of_light / self.wavelength
    }

    /// Laser detuning from the LG00 resonance produced by a cavity length error.
    pub fn length_detuning(&self, length_error: f64) -> f64 {
        self.laser_frequency() * length_error / self.spacing
    }

    /// Length change that moves the resonance by one FWHM.
    pub fn fwhm_length(&self) -> Result<f64> {
        Ok(self.fwhm()? * self.spacing / self.laser_frequency())
    }

    /// Intensity transmission and reflection of a locked cavity for one mode.
    pub fn mode_power_response(&self, label: &ModeLabel, lock: &LockState) -> Result<(f64, f64)> {
        let fsr = self.fsr()?;
        let laser = (self.lock_offset + self.length_detuning(lock.length_error)) / fsr;
        let delta = laser - self.transverse_offset_fsr(label.l, label.p)?;
        let atten = self
            .overlap_attenuation
            .get(&label.l.unsigned_abs())
            .copied()
            .unwrap_or(1.0);
        let t = self.peak_transmission * airy_at_detuning(self.reflectivity, delta) * atten;
        let r = self.reflection_cap * (1.0 - t);
        Ok((t, r))
    }

    /// Amplitude transmission and reflection for one mode.
    pub fn mode_response(
        &self,
        label: &ModeLabel,
        lock: &LockState,
    ) -> Result<(Complex64, Complex64)> {
        let (t, r) = self.mode_power_response(label, lock)?;
        Ok((Complex64::new(t.sqrt(), 0.0), Complex64::new(r.sqrt(), 0.0)))
    }

    /// Largest OAM charge whose resonance stays `criterion` linewidths away
    /// from every LG00 resonance.
    pub fn max_clean_oam(&self, criterion: f64) -> Result<u32> {
        let sp = self.spectrum()?;
        clean_oam_scan(
            sp.gouy_factor,
            sp.fwhm / sp.fsr,
            criterion,
            CLEAN_OAM_SCAN_LIMIT,
        )
    }
}

/// Splits a state into cavity-transmitted and cavity-reflected parts.
pub trait ModeFilter: Sync {
    /// Amplitude factors `(t, r)` for a mode; `|t|² + |r|² <= 1`.
    fn response(&self, label: &ModeLabel) -> (Complex64, Complex64);

    fn split(&self, s: &PulseState) -> (PulseState, PulseState) {
        let (t, _) = s.map_linear(|l, a, b| b.add(*l, a * self.response(l).0));
        let (r, _) = s.map_linear(|l, a, b| b.add(*l, a * self.response(l).1));
        (t, r)
    }

    /// Two-port action of the mirror pair. `outside` arrives from the far
    /// side and transmits in, `inside` reflects off the near side. Returns
    /// the beam leaving on the near side and the one leaving on the far side.
    ///
    /// The far-side reflection is `−r̄·(t/|t|)²`, which keeps both outputs
    /// orthogonal so no power is created by the combination.
    fn combine(&self, outside: &PulseState, inside: &PulseState) -> (PulseState, PulseState) {
        let far_r = |t: Complex64, r: Complex64| {
            let u = if t.norm() > 0.0 {
                t / t.norm()
            } else {
                Complex64::new(1.0, 0.0)
            };
            -r.conj() * u * u
        };
        let (near, _) = outside.map_linear(|l, a, b| b.add(*l, a * self.response(l).0));
        let (near_r, _) = inside.map_linear(|l, a, b| b.add(*l, a * self.response(l).1));
        let (far, _) = outside.map_linear(|l, a, b| {
            let (t, r) = self.response(l);
            b.add(*l, a * far_r(t, r))
        });
        let (far_t, _) = inside.map_linear(|l, a, b| b.add(*l, a * self.response(l).0));
        (near.add(&near_r), far.add(&far_t))
    }
}

/// Textbook filter: the Gaussian mode passes with `peak_transmission`
/// and every other mode is reflected without loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealCavity {
    pub peak_transmission: f64,
}

impl Default for IdealCavity {
    fn default() -> Self {
        Self {
            peak_transmission: 1.0,
        }
    }
}

impl ModeFilter for IdealCavity {
    fn response(&self, label: &ModeLabel) -> (Complex64, Complex64) {
        if label.is_gaussian() {
            (
                Complex64::new(self.peak_transmission.sqrt(), 0.0),
                Complex64::new(0.0, 0.0),
            )
        } else {
            (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
        }
    }
}

/// Airy-model cavity held at a given lock state.
#[derive(Debug, Clone)]
pub struct LockedCavity {
    params: CavityParams,
    lock: LockState,
}

impl LockedCavity {
    pub fn new(params: CavityParams, lock: LockState) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, lock })
    }

    pub fn params(&self) -> &CavityParams {
        &self.params
    }
}

impl ModeFilter for LockedCavity {
    fn response(&self, label: &ModeLabel) -> (Complex64, Complex64) {
        // params were validated at construction
        self.params
            .mode_response(label, &self.lock)
            .expect("validated cavity")
    }
}
