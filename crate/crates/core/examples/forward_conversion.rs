//! OAM superposition in, time-bin train out.

use num_complex::Complex64;
use oam_transcoder::cavity::{CavityParams, LockState, LockedCavity};
use oam_transcoder::mode_algebra::{ModeLabel, PulseState};
use oam_transcoder::transcoder::{run_forward, LoopParams};

fn main() -> oam_transcoder::Result<()> {
    let lp = LoopParams::paper_2016();
    let cav = LockedCavity::new(CavityParams::paper_2016(), LockState::default())?;
    let input =
        PulseState::superpose((0..=3).map(|l| (ModeLabel::oam(l), Complex64::new(0.5, 0.0))))?;

    let (bins, trace) = run_forward(&input, &lp, &cav)?;
    println!("bin  t (ns)   power");
    for b in 0..=lp.max_loops as i32 {
        let p = bins.power_in(|m| m.bin == b);
        if p > 1e-6 {
            println!(
                "{b:>3}  {:>6.1}   {p:.5}",
                (lp.t0 + b as f64 * lp.round_trip) * 1e9
            );
        }
    }
    println!(
        "\nout {:.4} of {:.4}; largest losses:",
        bins.total_power(),
        trace.input_power
    );
    let mut losses: Vec<_> = trace.loss_by_element().into_iter().collect();
    losses.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (name, loss) in losses.iter().take(5) {
        println!("  {name:<16} {loss:.4}");
    }
    Ok(())
}
