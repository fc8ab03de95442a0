//! PI servo holding the cavity on the laser against drift, noise and a step.

use oam_transcoder::cavity::{simulate_lock, CavityParams, LockRun, LockState};

fn main() -> oam_transcoder::Result<()> {
    let c = CavityParams::paper_2016();
    let run = LockRun {
        steps: 10_000,
        drift: 0.001e-9,
        step: Some((2_000, 3e-9)),
        seed: 3,
        ..LockRun::default()
    };
    for (name, lock) in [
        ("servo on", LockState::default()),
        ("servo off", LockState::open_loop()),
    ] {
        let lock = LockState {
            noise_rms: 0.05e-9,
            ..lock
        };
        let tr = simulate_lock(&c, &lock, &run)?;
        println!(
            "{name:<9}: residual rms {:8.3} MHz after settling",
            tr.residual_rms_hz(&c, 2_500) / 1e6
        );
    }
    println!("fwhm/20 = {:.3} MHz", c.fwhm()? / 20e6);
    Ok(())
}
