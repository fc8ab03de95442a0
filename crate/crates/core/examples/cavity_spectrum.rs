//! Airy response of the mode-filter cavity and where the transverse modes land.

use oam_transcoder::cavity::{airy_at_detuning, CavityParams};
use oam_transcoder::mode_algebra::ModeLabel;

fn main() -> oam_transcoder::Result<()> {
    let c = CavityParams::paper_2016();
    let sp = c.spectrum()?;
    println!(
        "finesse {:.3}  fsr {:.3} GHz  fwhm {:.2} MHz  gouy {:.6}",
        sp.finesse,
        sp.fsr / 1e9,
        sp.fwhm / 1e6,
        sp.gouy_factor
    );

    let lock = Default::default();
    println!("\n  l   offset/FSR   T        R");
    for l in 0..=8 {
        let (t, r) = c.mode_power_response(&ModeLabel::oam(l), &lock)?;
        println!(
            "{l:>3}   {:>9.5}   {t:.5}  {r:.5}",
            c.transverse_offset_fsr(l, 0)?
        );
    }

    // half an FSR either side of the locked line, coarse
    println!("\n detuning/FSR  transmission");
    for k in -10..=10 {
        let d = k as f64 / 20.0;
        println!("{d:>+12.3}  {:.4}", airy_at_detuning(c.reflectivity, d));
    }
    Ok(())
}
