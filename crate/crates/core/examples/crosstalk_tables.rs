//! Conversion matrices and nearest-neighbour cross-talk in both directions.

use oam_transcoder::analysis::crosstalk_table;
use oam_transcoder::cavity::{CavityParams, LockState, LockedCavity};
use oam_transcoder::transcoder::{conversion_matrix, LoopParams, Mode};

fn main() -> oam_transcoder::Result<()> {
    let lp = LoopParams::paper_2016();
    let cav = LockedCavity::new(CavityParams::paper_2016(), LockState::default())?;
    for mode in [Mode::Forward, Mode::Reverse] {
        let m = conversion_matrix(mode, 0..=3, &lp, &cav)?;
        println!("{mode:?} efficiencies:\n{}", m.to_csv());
        let t = crosstalk_table(&m)?;
        let (lo, hi) = t.row_names();
        println!("{:>6} {lo:>12} {hi:>12}", "input");
        for (i, l) in t.inputs.iter().enumerate() {
            println!(
                "{l:>6} {:>12} {:>12}",
                show(t.before[i].value()),
                show(t.after[i].value())
            );
        }
        println!("mean {:.2} dB\n", t.mean_db().unwrap_or(f64::NAN));
    }
    Ok(())
}

fn show(v: Option<f64>) -> String {
    v.map_or("*".into(), |d| format!("{d:.2} dB"))
}
