use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::{RunConfig, SweepParameter};
use super::{write_file, Emitter};
use crate::analysis::{
    crosstalk_table, fringe_phase, phase_sweep, projective_measurement, render_waveform,
    visibility as visibility_ratio, visibility_from_sweep, CrosstalkTable, EfficiencyMatrix,
};
use crate::cavity::{airy_at_detuning, simulate_lock, LockState, ModeFilter};
use crate::elements::FibreCoupler;
use crate::error::{Error, Result};
use crate::lg_fields::{count_fringes, mirror_interference_pattern, mode_overlap_on};
use crate::mode_algebra::{ModeLabel, PulseState};
use crate::transcoder::{
    conversion_matrix, mz_prepare, mz_readout, run_forward, run_reverse, LoopParams, Mode,
    MzReadout, SimulationTrace,
};

/// Claimed upper limit on cleanly separated charges that the scan is
/// compared against.
const REFERENCE_CLEAN_OAM: u32 = 201;

/// `index,power,phase_rad` grouped by `key`; the phase is that of the
/// strongest term in the group.
fn grouped_csv(s: &PulseState, key: impl Fn(&ModeLabel) -> i32) -> String {
    let mut groups: BTreeMap<i32, (f64, Complex64)> = BTreeMap::new();
    for (l, a) in s.iter() {
        let g = groups
            .entry(key(l))
            .or_insert((0.0, Complex64::new(0.0, 0.0)));
        g.0 += a.norm_sqr();
        if a.norm_sqr() > g.1.norm_sqr() {
            g.1 = *a;
        }
    }
    let mut out = String::from("index,power,phase_rad\n");
    for (k, (p, a)) in groups {
        let _ = writeln!(out, "{k},{p},{}", a.arg());
    }
    out
}

fn equal_superposition(labels: impl Iterator<Item = ModeLabel> + Clone) -> Result<PulseState> {
    let n = labels.clone().count() as f64;
    PulseState::superpose(labels.map(|l| (l, Complex64::new(1.0 / n.sqrt(), 0.0))))
}

fn crosstalk_rows(t: &CrosstalkTable) -> Value {
    json!(t
        .before
        .iter()
        .zip(&t.after)
        .map(|(b, a)| json!([b, a]))
        .collect::<Vec<_>>())
}

fn loop_summary(
    lp: &LoopParams,
    mode: Mode,
    m: &EfficiencyMatrix,
    trace: &SimulationTrace,
) -> Result<Value> {
    let table = crosstalk_table(m)?;
    Ok(json!({
        "gamma": lp.gamma(),
        "per_loop_transmission": lp.per_loop_transmission_in(mode),
        "efficiencies": m.diagonal(),
        "crosstalk_db": crosstalk_rows(&table),
        "crosstalk_rows": table.row_names(),
        "crosstalk_mean_db": table.mean_db(),
        "input_power": trace.input_power,
        "output_power": trace.output_power(),
        "loss_by_element": trace.loss_by_element(),
    }))
}

pub(super) fn forward(cfg: &RunConfig, em: &mut Emitter) -> Result<Value> {
    let lp = &cfg.loop_params;
    let cav = cfg.mode_filter()?;
    let n = cfg.file.input.max_label;
    let input = cfg.input_state(|| equal_superposition((0..=n as i32).map(ModeLabel::oam)))?;
    let (out, trace) = run_forward(&input, lp, cav.as_ref())?;
    em.write("bins.csv", &grouped_csv(&out, |l| l.bin))?;
    em.write("trace.jsonl", &trace.to_jsonl())?;
    em.write(
        "waveform.csv",
        &render_waveform(&out, &cfg.waveform)?.to_csv(),
    )?;
    let m = conversion_matrix(Mode::Forward, 0..=n, lp, cav.as_ref())?;
    em.write("matrix.csv", &m.to_csv())?;
    let summary = loop_summary(lp, Mode::Forward, &m, &trace)?;
    em.write_json("summary.json", &summary)?;
    Ok(summary)
}

pub(super) fn reverse(cfg: &RunConfig, em: &mut Emitter) -> Result<Value> {
    let lp = &cfg.loop_params;
    let cav = cfg.mode_filter()?;
    let n = cfg.file.input.max_label;
    let input =
        cfg.input_state(|| equal_superposition((0..=n as i32).map(|b| ModeLabel::time_bin(-b))))?;
    let (out, trace) = run_reverse(&input, lp, cav.as_ref())?;
    em.write("modes.csv", &grouped_csv(&out, |l| l.l))?;
    em.write("trace.jsonl", &trace.to_jsonl())?;
    em.write(
        "waveform.csv",
        &render_waveform(&input.with_t0(lp.t0), &cfg.waveform)?.to_csv(),
    )?;
    let m = conversion_matrix(Mode::Reverse, 0..=n, lp, cav.as_ref())?;
    em.write("matrix.csv", &m.to_csv())?;
    let summary = loop_summary(lp, Mode::Reverse, &m, &trace)?;
    em.write_json("summary.json", &summary)?;
    Ok(summary)
}

pub(super) fn crosstalk(cfg: &RunConfig, em: &mut Emitter) -> Result<Value> {
    let lp = &cfg.loop_params;
    let cav = cfg.mode_filter()?;
    let n = cfg.file.input.max_label;
    let mut means = BTreeMap::new();
    for (mode, name) in [(Mode::Forward, "forward"), (Mode::Reverse, "reverse")] {
        let m = conversion_matrix(mode, 0..=n, lp, cav.as_ref())?;
        let t = crosstalk_table(&m)?;
        em.write(&format!("matrix_{name}.csv"), &m.to_csv())?;
        em.write_json(&format!("crosstalk_{name}.json"), &t)?;
        means.insert(name, t.mean_db());
    }
    let summary = json!({ "mean_db": means, "gamma": lp.gamma() });
    em.write_json("summary.json", &summary)?;
    Ok(summary)
}

pub(super) fn cavity_spectrum(cfg: &RunConfig, em: &mut Emitter) -> Result<Value> {
    let c = &cfg.cavity;
    let sp = c.spectrum()?;
    let span = cfg.file.cavity.spectrum_span_fsr;
    let points = cfg.file.cavity.spectrum_points;
    let mut csv = String::from("nu_hz,transmission\n");
    for i in 0..points {
        let d = span * (i as f64 / (points - 1) as f64 - 0.5);
        let _ = writeln!(
            csv,
            "{},{}",
            d * sp.fsr,
            airy_at_detuning(c.reflectivity, d)
        );
    }
    em.write("spectrum.csv", &csv)?;

    let lock0 = LockState::default();
    let mut modes = String::from("l,offset_fsr,offset_hz,transmission,reflection\n");
    for l in 0..=20 {
        let off = c.transverse_offset_fsr(l, 0)?;
        let folded = off - off.round();
        let (t, r) = c.mode_power_response(&ModeLabel::oam(l), &lock0)?;
        let _ = writeln!(modes, "{l},{folded},{},{t},{r}", folded * sp.fsr);
    }
    em.write("modes.csv", &modes)?;

    let on = simulate_lock(c, &cfg.lock, &cfg.lock_run)?;
    let off_state = LockState {
        gain_p: 0.0,
        gain_i: 0.0,
        ..cfg.lock
    };
    let off = simulate_lock(c, &off_state, &cfg.lock_run)?;
    let mut lock_csv = String::from("step,length_error_on_nm,length_error_off_nm,disturbance_nm\n");
    for i in 0..on.length_error.len() {
        let _ = writeln!(
            lock_csv,
            "{i},{},{},{}",
            on.length_error[i] * 1e9,
            off.length_error[i] * 1e9,
            on.disturbance_sum[i] * 1e9
        );
    }
    em.write("lock.csv", &lock_csv)?;

    let settle = cfg.file.lock.settle_steps;
    let clean = c.max_clean_oam(1.0)?;
    let summary = json!({
        "finesse": sp.finesse,
        "fsr_hz": sp.fsr,
        "fwhm_hz": sp.fwhm,
        "gouy_factor": sp.gouy_factor,
        "max_clean_oam": clean,
        "max_clean_oam_half_linewidth": c.max_clean_oam(0.5)?,
        "reference_bound": REFERENCE_CLEAN_OAM,
        "agrees_with_reference_bound": clean + 1 == REFERENCE_CLEAN_OAM,
        "lock_residual_rms_hz": on.residual_rms_hz(c, settle),
        "open_loop_residual_rms_hz": off.residual_rms_hz(c, settle),
        "lock_threshold_hz": sp.fwhm / 20.0,
    });
    em.write_json("summary.json", &summary)?;
    Ok(summary)
}

fn grid_csv(g: &crate::lg_fields::IntensityGrid) -> String {
    let mut s = String::from("r_m,alpha_rad,intensity\n");
    for i in 0..g.n_r {
        let r = g.radius(i);
        for (j, v) in g.row(i).iter().enumerate() {
            let _ = writeln!(s, "{r},{},{v}", g.angle(j));
        }
    }
    s
}

pub(super) fn fringe_pattern(cfg: &RunConfig, em: &mut Emitter) -> Result<Value> {
    let mut counts = BTreeMap::new();
    let mut norms = BTreeMap::new();
    for &l in &cfg.file.fringe.charges {
        let g = mirror_interference_pattern(&cfg.lg, l, cfg.lg_z);
        em.write(&format!("fringe_l{l}.csv"), &grid_csv(&g))?;
        em.write(&format!("fringe_l{l}.pgm"), &g.to_pgm())?;
        counts.insert(l.to_string(), count_fringes(&g)?);
        let norm = mode_overlap_on(
            &cfg.lg,
            (0, l as i32),
            &cfg.lg,
            (0, l as i32),
            cfg.lg_z,
            &cfg.grid,
        )?;
        norms.insert(l.to_string(), norm.re);
    }
    let summary = json!({ "fringes": counts, "normalization": norms, "waist_m": cfg.lg.waist });
    em.write_json("summary.json", &summary)?;
    Ok(summary)
}

fn readout_csv(r: &MzReadout) -> String {
    let mut s = String::from("phase_rad,early,middle,late\n");
    for p in &r.points {
        let _ = writeln!(s, "{},{},{},{}", p.phase, p.early, p.middle, p.late);
    }
    s
}

/// Mean readout over `runs` shots, each with the later bin's intensity
/// scaled by `max(0, 1 + jitter·N(0, 1))`.
fn jittered_readout(out: &PulseState, cfg: &RunConfig, sweep: &[f64]) -> Result<MzReadout> {
    let lp = &cfg.loop_params;
    let clean = mz_readout(out, &cfg.mz, lp.round_trip, sweep)?;
    let jitter = cfg.file.mz.intensity_jitter;
    let runs = cfg.file.mz.jitter_runs;
    if jitter == 0.0 {
        return Ok(clean);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.file.seed);
    let noise =
        Normal::new(0.0, jitter).map_err(|e| Error::param("mz.intensity_jitter", e.to_string()))?;
    let mut acc = clean.clone();
    for p in acc.points.iter_mut() {
        p.early = 0.0;
        p.middle = 0.0;
        p.late = 0.0;
    }
    for _ in 0..runs {
        let k = (1.0 + noise.sample(&mut rng)).max(0.0).sqrt();
        let shot = out
            .map_linear(|l, a, b| b.add(*l, if l.bin == clean.late_bin { a * k } else { a }))
            .0;
        let r = mz_readout(&shot, &cfg.mz, lp.round_trip, sweep)?;
        for (p, q) in acc.points.iter_mut().zip(&r.points) {
            p.early += q.early / runs as f64;
            p.middle += q.middle / runs as f64;
            p.late += q.late / runs as f64;
        }
    }
    Ok(acc)
}

pub(super) fn visibility(cfg: &RunConfig, em: &mut Emitter) -> Result<Value> {
    let lp = &cfg.loop_params;
    let cav = cfg.mode_filter()?;
    let sweep = phase_sweep(cfg.file.mz.phase_points);

    // forward: a charge superposition becomes two bins, read out by the interferometer
    let input = cfg
        .input_state(|| equal_superposition([ModeLabel::oam(0), ModeLabel::oam(1)].into_iter()))?;
    let (out, _) = run_forward(&input, lp, cav.as_ref())?;
    let readout = jittered_readout(&out, cfg, &sweep)?;
    em.write("readout.csv", &readout_csv(&readout))?;
    let early = out.power_in(|l| l.bin == readout.early_bin);
    let late = out.power_in(|l| l.bin == readout.late_bin);
    let s = cfg.mz.splitting;
    let r = ((1.0 - s) * cfg.mz.long_arm_transmission * early / (s * late)).sqrt();
    let predicted = cfg.mz.coherence * 2.0 * r / (1.0 + r * r);

    // reverse: one pulse split into two bins by the interferometer, then projected
    let pulse = PulseState::basis(ModeLabel::time_bin(-1)).with_t0(lp.t0);
    let prepared = mz_prepare(&pulse, &cfg.mz, lp.round_trip)?;
    let (modes, _) = run_reverse(&prepared, lp, cav.as_ref())?;
    let coupler = FibreCoupler::new(cfg.file.slm.fibre_coupling)?;
    let eta = cfg.file.slm.diffraction_efficiency;
    let mut proj = String::from("theta_rad,power\n");
    let (mut hi, mut lo) = (f64::MIN, f64::MAX);
    for &theta in &sweep {
        let target = [
            (0, Complex64::new(FRAC_1_SQRT_2, 0.0)),
            (1, Complex64::from_polar(FRAC_1_SQRT_2, theta)),
        ];
        let p = projective_measurement(&modes, &target, eta, &coupler)?;
        hi = hi.max(p);
        lo = lo.min(p);
        let _ = writeln!(proj, "{theta},{p}");
    }
    em.write("reverse_projection.csv", &proj)?;
    let plus = [
        (0, Complex64::new(FRAC_1_SQRT_2, 0.0)),
        (1, Complex64::new(FRAC_1_SQRT_2, 0.0)),
    ];
    let minus = [
        (0, Complex64::new(FRAC_1_SQRT_2, 0.0)),
        (1, Complex64::new(-FRAC_1_SQRT_2, 0.0)),
    ];

    let summary = json!({
        "visibility": visibility_from_sweep(&readout)?,
        "predicted_visibility": predicted,
        "amplitude_ratio": r,
        "fringe_phase_rad": fringe_phase(&readout)?,
        "early_bin": readout.early_bin,
        "late_bin": readout.late_bin,
        "reverse_plus": projective_measurement(&modes, &plus, eta, &coupler)?,
        "reverse_minus": projective_measurement(&modes, &minus, eta, &coupler)?,
        "reverse_visibility": visibility_ratio(hi, lo.max(0.0))?,
    });
    em.write_json("summary.json", &summary)?;
    Ok(summary)
}

fn sweep_point(cfg: &RunConfig, value: f64) -> Result<(f64, f64, f64)> {
    let mut lp = cfg.loop_params.clone();
    let mut cavity = cfg.cavity.clone();
    match cfg.file.sweep.parameter {
        SweepParameter::ReentryCoupling => {
            lp.reentry_coupling = value;
            lp.reentry_neighbour_fraction = lp
                .reentry_neighbour_fraction
                .min(crate::elements::ModeCoupler::max_neighbour_fraction(value));
        }
        SweepParameter::MirrorReflectivity => lp.mirrors.transmission = value,
        SweepParameter::EomTransmission => lp.eom.transmission = value,
        SweepParameter::Reflectivity => cavity.reflectivity = value,
    }
    lp.validate().map_err(|e| match e {
        Error::InvalidParameter { reason, .. } => Error::param("sweep.from", reason),
        e => e,
    })?;
    let point_cfg = RunConfig {
        cavity,
        loop_params: lp.clone(),
        ..cfg.clone()
    };
    let cav: Box<dyn ModeFilter> = point_cfg.mode_filter()?;
    let (out, _) = run_forward(&PulseState::basis(ModeLabel::oam(1)), &lp, cav.as_ref())?;
    Ok((
        lp.per_loop_transmission(),
        lp.gamma(),
        out.power_in(|l| l.bin == 1),
    ))
}

pub(super) fn sweep(cfg: &RunConfig, em: &mut Emitter, workers: usize) -> Result<Value> {
    let sw = &cfg.file.sweep;
    let values: Vec<f64> = (0..sw.points)
        .map(|i| {
            if sw.points == 1 {
                sw.from
            } else {
                sw.from + (sw.to - sw.from) * i as f64 / (sw.points - 1) as f64
            }
        })
        .collect();
    let header = "index,value,per_loop_transmission,gamma,efficiency_l1\n";
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let dir = em.dir().to_path_buf();
    let rows: Vec<Result<(String, String)>> = pool.install(|| {
        values
            .par_iter()
            .enumerate()
            .map(|(i, &v)| {
                let (tau, gamma, eff) = sweep_point(cfg, v)?;
                let row = format!("{i},{v},{tau},{gamma},{eff}\n");
                let rel = format!("points/point_{i:04}.csv");
                write_file(&dir, &rel, &format!("{header}{row}"))?;
                Ok((rel, row))
            })
            .collect()
    });
    let mut merged = String::from(header);
    let mut gammas = Vec::with_capacity(rows.len());
    for r in rows {
        let (rel, row) = r?;
        em.record(&rel);
        gammas.push(row.split(',').nth(3).and_then(|g| g.parse::<f64>().ok()));
        merged.push_str(&row);
    }
    em.write("sweep.csv", &merged)?;
    let summary = json!({
        "parameter": sw.parameter,
        "points": sw.points,
        "values": values,
        "gamma": gammas,
    });
    em.write_json("summary.json", &summary)?;
    Ok(summary)
}
