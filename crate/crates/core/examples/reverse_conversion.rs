//! Time-bin train in, OAM charges out: the reverse of `forward_conversion`.

use oam_transcoder::cavity::IdealCavity;
use oam_transcoder::mode_algebra::{ModeLabel, PulseState};
use oam_transcoder::transcoder::{run_forward, run_reverse, time_reverse, LoopParams};

fn main() -> oam_transcoder::Result<()> {
    for (name, lp) in [
        ("lossless", LoopParams::lossless()),
        ("lossy", LoopParams::paper_2016()),
    ] {
        let cav = IdealCavity::default();
        println!("{name}:");
        for l in 0..=3 {
            let (bins, _) = run_forward(&PulseState::basis(ModeLabel::oam(l)), &lp, &cav)?;
            let (modes, _) = run_reverse(&time_reverse(&bins), &lp, &cav)?;
            let row: Vec<String> = (0..=3)
                .map(|k| format!("{:.4}", modes.power_in(|m| m.l == k && m.p == 0)))
                .collect();
            println!("  l={l} -> [{}]", row.join(", "));
        }
    }
    Ok(())
}
