//! Efficiency against charge, and how much the per-loop budget improves with
//! better coatings.

use oam_transcoder::cavity::IdealCavity;
use oam_transcoder::mode_algebra::{ModeLabel, PulseState};
use oam_transcoder::transcoder::{run_forward, LoopParams};

fn main() -> oam_transcoder::Result<()> {
    let cav = IdealCavity {
        peak_transmission: 0.9,
    };
    for refl in [0.97, 0.98, 0.99, 0.995] {
        let mut lp = LoopParams::paper_2016();
        lp.mirrors.transmission = refl;
        let eff: Vec<String> = (0..=5)
            .map(|l| {
                run_forward(&PulseState::basis(ModeLabel::oam(l)), &lp, &cav)
                    .map(|(o, _)| format!("{:.4}", o.total_power()))
            })
            .collect::<Result<_, _>>()?;
        println!(
            "R_mirror {refl:.3}: per loop {:.4}  gamma {:.3}  eff [{}]",
            lp.per_loop_transmission(),
            lp.gamma(),
            eff.join(", ")
        );
    }
    Ok(())
}
