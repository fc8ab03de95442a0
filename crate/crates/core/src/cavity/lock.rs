//! Side-of-fringe PI servo on the cavity length.
//!
//! The lock beam sits half a linewidth above the LG00 resonance, so its
//! reflected power is first order in the length error while the signal
//! stays on resonance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{airy_at_detuning, CavityParams};
use crate::error::{check_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockState {
    /// Cavity length minus the locked length, m.
    pub length_error: f64,
    /// Servo integrator, m per step.
    pub integrator: f64,
    /// RMS of the per-step length noise fed in by [`simulate_lock`], m.
    pub noise_rms: f64,
    pub gain_p: f64,
    pub gain_i: f64,
}

impl Default for LockState {
    fn default() -> Self {
        Self {
            length_error: 0.0,
            integrator: 0.0,
            noise_rms: 0.0,
            gain_p: 0.3,
            gain_i: 0.05,
        }
    }
}

impl LockState {
    pub fn open_loop() -> Self {
        Self {
            gain_p: 0.0,
            gain_i: 0.0,
            ..Self::default()
        }
    }
}

fn lock_reflection(cavity: &CavityParams, fsr: f64, fwhm: f64, length_error: f64) -> f64 {
    let delta = (fwhm / 2.0 + cavity.length_detuning(length_error)) / fsr;
    1.0 - airy_at_detuning(cavity.reflectivity, delta)
}

/// One servo update: measure, then correct the length.
///
/// The error signal is the reflected lock-beam power relative to its
/// setpoint, divided by the fringe slope so it reads in metres near lock.
pub fn lock_step(
    cavity: &CavityParams,
    lock: &LockState,
    dt: f64,
    disturbance: f64,
) -> Result<LockState> {
    check_positive("dt", dt)?;
    if !disturbance.is_finite() {
        return Err(Error::param("disturbance", "must be finite"));
    }
    let fsr = cavity.fsr()?;
    let fwhm = cavity.fwhm()?;
    let h = cavity.fwhm_length()? * 1e-3;
    let set = lock_reflection(cavity, fsr, fwhm, 0.0);
    let slope = (lock_reflection(cavity, fsr, fwhm, h) - lock_reflection(cavity, fsr, fwhm, -h))
        / (2.0 * h);
    let e = (lock_reflection(cavity, fsr, fwhm, lock.length_error) - set) / slope;

    let integrator = lock.integrator + lock.gain_i * e;
    let length_error = lock.length_error + disturbance - (lock.gain_p * e + integrator);
    Ok(LockState {
        length_error,
        integrator,
        ..*lock
    })
}

/// Disturbance sequence for [`simulate_lock`].
#[derive(Debug, Clone, PartialEq)]
pub struct LockRun {
    pub steps: usize,
    pub dt: f64,
    /// Constant length drift per step, m.
    pub drift: f64,
    /// Step disturbance `(index, size in m)`.
    pub step: Option<(usize, f64)>,
    pub seed: u64,
}

impl Default for LockRun {
    fn default() -> Self {
        Self {
            steps: 10_000,
            dt: 1e-5,
            drift: 0.0,
            step: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LockTrace {
    /// Length error after each step, m.
    pub length_error: Vec<f64>,
    /// Running sum of the applied disturbance, m.
    pub disturbance_sum: Vec<f64>,
}

impl LockTrace {
    /// RMS laser detuning over `length_error[from..]`, Hz.
    pub fn residual_rms_hz(&self, cavity: &CavityParams, from: usize) -> f64 {
        let tail = &self.length_error[from.min(self.length_error.len())..];
        if tail.is_empty() {
            return 0.0;
        }
        let ms = tail
            .iter()
            .map(|x| cavity.length_detuning(*x).powi(2))
            .sum::<f64>()
            / tail.len() as f64;
        ms.sqrt()
    }
}

/// Runs the servo against drift, an optional step and seeded Gaussian noise.
pub fn simulate_lock(
    cavity: &CavityParams,
    initial: &LockState,
    run: &LockRun,
) -> Result<LockTrace> {
    if !(initial.noise_rms >= 0.0 && initial.noise_rms.is_finite()) {
        return Err(Error::param("noise_rms", "must be finite and >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let noise = Normal::new(0.0, initial.noise_rms)
        .map_err(|e| Error::param("noise_rms", e.to_string()))?;
    let mut state = *initial;
    let mut sum = 0.0;
    let mut trace = LockTrace {
        length_error: Vec::with_capacity(run.steps),
        disturbance_sum: Vec::with_capacity(run.steps),
    };
    for n in 0..run.steps {
        let mut d = run.drift + noise.sample(&mut rng);
        if let Some((at, size)) = run.step {
            if n == at {
                d += size;
            }
        }
        sum += d;
        state = lock_step(cavity, &state, run.dt, d)?;
        trace.length_error.push(state.length_error);
        trace.disturbance_sum.push(sum);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cav() -> CavityParams {
        CavityParams::paper_2016()
    }

    #[test]
    fn fixed_point() {
        let s = lock_step(&cav(), &LockState::default(), 1e-5, 0.0).unwrap();
        assert_eq!(s.length_error, 0.0);
        assert_eq!(s.integrator, 0.0);
    }

    #[test]
    fn step_settles() {
        let c = cav();
        let fl = c.fwhm_length().unwrap();
        let run = LockRun {
            steps: 10_000,
            step: Some((100, 0.4 * fl)),
            ..LockRun::default()
        };
        let tr = simulate_lock(&c, &LockState::default(), &run).unwrap();
        let after = &tr.length_error[200..];
        assert!(after.iter().all(|x| x.abs() < fl / 20.0));
    }

    #[test]
    fn rejects_bad_dt() {
        assert!(lock_step(&cav(), &LockState::default(), 0.0, 0.0).is_err());
    }

    #[test]
    fn seeded_runs_repeat() {
        let c = cav();
        let init = LockState {
            noise_rms: 1e-11,
            ..LockState::default()
        };
        let run = LockRun {
            steps: 500,
            seed: 7,
            ..LockRun::default()
        };
        assert_eq!(
            simulate_lock(&c, &init, &run).unwrap(),
            simulate_lock(&c, &init, &run).unwrap()
        );
    }

    proptest! {
        #[test]
        fn open_loop_tracks_disturbance(seed in 0u64..1000, drift in -1e-11f64..1e-11) {
            let c = cav();
            let init = LockState { noise_rms: 2e-11, ..LockState::open_loop() };
            let run = LockRun { steps: 300, drift, seed, ..LockRun::default() };
            let tr = simulate_lock(&c, &init, &run).unwrap();
            for (x, d) in tr.length_error.iter().zip(&tr.disturbance_sum) {
                prop_assert!((x - d).abs() <= 1e-12 * d.abs().max(1e-9));
            }
        }
    }
}
