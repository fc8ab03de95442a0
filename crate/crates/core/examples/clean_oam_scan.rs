//! Largest charge whose transverse resonance stays clear of the fundamental
//! line, for a few separation criteria and both offset conventions.

use oam_transcoder::cavity::{clean_oam_scan_with, CavityParams, OffsetSide, CLEAN_OAM_SCAN_LIMIT};

fn main() -> oam_transcoder::Result<()> {
    let c = CavityParams::paper_2016();
    let g = c.gouy_factor()?;
    let lw = c.fwhm()? / c.fsr()?;
    println!("gouy {g:.6}, linewidth {lw:.5} FSR");
    for crit in [2.0, 1.0, 0.5, 0.25] {
        let near = clean_oam_scan_with(g, lw, crit, CLEAN_OAM_SCAN_LIMIT, OffsetSide::Nearest)?;
        let above = clean_oam_scan_with(g, lw, crit, CLEAN_OAM_SCAN_LIMIT, OffsetSide::Above)?;
        println!("criterion {crit:>4} FWHM: nearest {near:>4}, one-sided {above:>4}");
    }
    Ok(())
}
