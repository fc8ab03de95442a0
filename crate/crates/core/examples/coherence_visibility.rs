//! Convert (|0> + e^{iφ}|1>)/√2 and read the phase back with an unbalanced
//! interferometer whose delay matches one loop.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use oam_transcoder::analysis::{fringe_fit, phase_sweep};
use oam_transcoder::cavity::IdealCavity;
use oam_transcoder::mode_algebra::{ModeLabel, PulseState};
use oam_transcoder::transcoder::{mz_readout, run_forward, LoopParams, MzParams};

fn main() -> oam_transcoder::Result<()> {
    // leaks off, so only the loss imbalance between the two bins remains
    let lp = LoopParams {
        vpp_unshifted_fraction: 0.0,
        reentry_neighbour_fraction: 0.0,
        port_neighbour_fraction: 0.0,
        ..LoopParams::paper_2016()
    };
    let cav = IdealCavity::default();
    let tau = lp.per_loop_transmission();
    let plain = MzParams {
        arm_delay: lp.round_trip,
        ..MzParams::default()
    };
    let balanced = MzParams {
        long_arm_transmission: tau,
        ..plain
    };
    let sweep = phase_sweep(64);

    println!("   φ     V(plain)  V(balanced)  fitted φ");
    for phi in [0.0, 0.5, 1.0, 2.0, 3.0] {
        let s = PulseState::superpose([
            (ModeLabel::oam(0), Complex64::new(FRAC_1_SQRT_2, 0.0)),
            (ModeLabel::oam(1), Complex64::from_polar(FRAC_1_SQRT_2, phi)),
        ])?;
        let (out, _) = run_forward(&s, &lp, &cav)?;
        let a = fringe_fit(&mz_readout(&out, &plain, lp.round_trip, &sweep)?)?;
        let b = fringe_fit(&mz_readout(&out, &balanced, lp.round_trip, &sweep)?)?;
        println!(
            "{phi:>5.2}   {:.5}   {:.5}      {:>+.5}",
            a.visibility()?,
            b.visibility()?,
            b.phase
        );
    }
    println!("per-loop transmission {tau:.4}");
    Ok(())
}
