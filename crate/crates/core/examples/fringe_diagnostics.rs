//! Interference of an LG beam with its mirror image: 2l fringes around the ring.
//! Pass a directory to also write PGM images.

use oam_transcoder::lg_fields::{count_fringes, mirror_interference_pattern, LgParams};

fn main() -> oam_transcoder::Result<()> {
    let out = std::env::args().nth(1);
    let lg = LgParams::new(61.6e-6, 795e-9)?;
    for l in 0..=5 {
        let g = mirror_interference_pattern(&lg, l, 0.0);
        println!("l={l}: {} fringes", count_fringes(&g)?);
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir).expect("output dir");
            std::fs::write(format!("{dir}/fringe_l{l}.pgm"), g.to_pgm()).expect("write pgm");
        }
    }
    Ok(())
}
