use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::Serialize;

use crate::cavity::C_CODATA;
use crate::error::{check_positive, check_unit, Error, Result};
use crate::mode_algebra::{ModeLabel, PulseState};

/// Fraction of `T` by which the arm delay may miss a whole number of bins.
pub const BIN_ALIGNMENT_TOLERANCE: f64 = 0.01;

/// Unbalanced Mach–Zehnder interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MzParams {
    /// Extra delay of the long arm, s.
    pub arm_delay: f64,
    /// Intensity fraction sent to the short arm.
    pub splitting: f64,
    /// Phase of the long arm, rad.
    pub relative_phase: f64,
    /// Intensity transmission of the long arm.
    pub long_arm_transmission: f64,
    /// Mutual coherence of the two recombined components, 0..1.
    pub coherence: f64,
}

impl Default for MzParams {
    fn default() -> Self {
        Self {
            arm_delay: 3.3 / C_CODATA,
            splitting: 0.5,
            relative_phase: 0.0,
            long_arm_transmission: 1.0,
            coherence: 1.0,
        }
    }
}

impl MzParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("arm_delay", self.arm_delay)?;
        check_unit("splitting", self.splitting)?;
        check_unit("long_arm_transmission", self.long_arm_transmission)?;
        check_unit("coherence", self.coherence)?;
        if !self.relative_phase.is_finite() {
            return Err(Error::param("relative_phase", "must be finite"));
        }
        Ok(())
    }

    /// Arm delay in whole bins of period `round_trip`.
    pub fn bin_shift(&self, round_trip: f64) -> Result<i32> {
        self.validate()?;
        let k = (self.arm_delay / round_trip).round();
        if k < 1.0 || (self.arm_delay - k * round_trip).abs() > BIN_ALIGNMENT_TOLERANCE * round_trip
        {
            return Err(Error::ArmDelayMismatch {
                delay_ns: self.arm_delay * 1e9,
                period_ns: round_trip * 1e9,
            });
        }
        Ok(k as i32)
    }

    fn long_arm(&self, extra_phase: f64) -> Complex64 {
        Complex64::from_polar(
            ((1.0 - self.splitting) * self.long_arm_transmission).sqrt(),
            self.relative_phase + extra_phase,
        )
    }
}

/// Splits every term into an undelayed copy and a copy delayed by the arm.
pub fn mz_prepare(input: &PulseState, mz: &MzParams, round_trip: f64) -> Result<PulseState> {
    let shift = mz.bin_shift(round_trip)?;
    let short = mz.splitting.sqrt();
    let long = mz.long_arm(0.0);
    Ok(input
        .map_linear(|l, a, b| {
            b.add(*l, a * short);
            b.add(l.with_bin(l.bin + shift), a * long);
        })
        .0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReadoutPoint {
    pub phase: f64,
    /// Short-arm copy of the early bin.
    pub early: f64,
    /// Overlap bin where the two copies interfere.
    pub middle: f64,
    /// Long-arm copy of the late bin.
    pub late: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MzReadout {
    pub early_bin: i32,
    pub late_bin: i32,
    pub points: Vec<ReadoutPoint>,
}

/// Recombines bin `k` (long arm) with bin `k + Δ` (short arm) at each
/// extra long-arm phase in `phase_sweep`. Orthogonal modes add in
/// intensity; `coherence` scales the interference term.
pub fn mz_readout(
    output: &PulseState,
    mz: &MzParams,
    round_trip: f64,
    phase_sweep: &[f64],
) -> Result<MzReadout> {
    let shift = mz.bin_shift(round_trip)?;
    let bins: BTreeSet<i32> = output.labels().map(|l| l.bin).collect();
    let early = bins
        .iter()
        .copied()
        .find(|b| bins.contains(&(b + shift)))
        .ok_or_else(|| Error::param("output", format!("no two populated bins {shift} apart")))?;
    let late = early + shift;

    // pair up amplitudes of the same transverse mode and polarization
    let modes: BTreeSet<ModeLabel> = output
        .labels()
        .filter(|l| l.bin == early || l.bin == late)
        .map(|l| l.with_bin(0))
        .collect();
    let short = mz.splitting.sqrt();
    let pairs: Vec<(Complex64, Complex64)> = modes
        .iter()
        .map(|m| {
            let b = output.amplitude(&m.with_bin(early));
            let a = output.amplitude(&m.with_bin(late));
            (a, b)
        })
        .collect();

    let points = phase_sweep
        .iter()
        .map(|&phi| {
            let long = mz.long_arm(phi);
            let mut p = ReadoutPoint {
                phase: phi,
                early: 0.0,
                middle: 0.0,
                late: 0.0,
            };
            for (a, b) in &pairs {
                let x = a * short;
                let y = b * long;
                p.early += (b * short).norm_sqr();
                p.late += (a * long).norm_sqr();
                p.middle += x.norm_sqr() + y.norm_sqr() + 2.0 * mz.coherence * (x.conj() * y).re;
            }
            p
        })
        .collect();
    Ok(MzReadout {
        early_bin: early,
        late_bin: late,
        points,
    })
}
