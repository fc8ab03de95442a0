use num_complex::Complex64;
use proptest::prelude::*;

use oam_transcoder::analysis::projective_measurement;
use oam_transcoder::cavity::{CavityParams, IdealCavity, LockState, LockedCavity};
use oam_transcoder::elements::FibreCoupler;
use oam_transcoder::mode_algebra::{ModeLabel, PulseState};
use oam_transcoder::transcoder::{
    conversion_matrix, run_forward, run_reverse, time_reverse, LoopParams, Mode,
};

fn paper_cavity() -> LockedCavity {
    LockedCavity::new(CavityParams::paper_2016(), LockState::default()).unwrap()
}

fn amp() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn state(amps: &[Complex64]) -> PulseState {
    PulseState::superpose(
        amps.iter()
            .enumerate()
            .map(|(l, a)| (ModeLabel::oam(l as i32), *a)),
    )
    .unwrap()
    .with_prune_threshold(0.0)
}

fn max_diff(a: &PulseState, b: &PulseState) -> f64 {
    a.labels()
        .chain(b.labels())
        .map(|l| (a.amplitude(l) - b.amplitude(l)).norm())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn forward_is_linear(a in prop::collection::vec(amp(), 4), b in prop::collection::vec(amp(), 4), k in amp()) {
        let lp = LoopParams::paper_2016();
        let cav = paper_cavity();
        let sum: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x + k * y).collect();
        let (fa, _) = run_forward(&state(&a), &lp, &cav).unwrap();
        let (fb, _) = run_forward(&state(&b), &lp, &cav).unwrap();
        let (fs, _) = run_forward(&state(&sum), &lp, &cav).unwrap();
        prop_assert!(max_diff(&fs, &fa.add(&fb.scaled(k))) < 1e-12);
    }

    #[test]
    fn reverse_is_linear(a in prop::collection::vec(amp(), 4), b in prop::collection::vec(amp(), 4)) {
        let lp = LoopParams::paper_2016();
        let cav = paper_cavity();
        let bins = |v: &[Complex64]| {
            PulseState::superpose(v.iter().enumerate().map(|(i, c)| (ModeLabel::time_bin(-(i as i32)), *c)))
                .unwrap()
                .with_prune_threshold(0.0)
        };
        let sum: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let (ra, _) = run_reverse(&bins(&a), &lp, &cav).unwrap();
        let (rb, _) = run_reverse(&bins(&b), &lp, &cav).unwrap();
        let (rs, _) = run_reverse(&bins(&sum), &lp, &cav).unwrap();
        prop_assert!(max_diff(&rs, &ra.add(&rb)) < 1e-12);
    }

    #[test]
    fn energy_is_accounted(a in prop::collection::vec(amp(), 4), reverse in any::<bool>()) {
        let lp = LoopParams::paper_2016();
        let cav = paper_cavity();
        let input = state(&a);
        let (out, tr) = if reverse {
            run_reverse(&time_reverse(&run_forward(&input, &lp, &cav).unwrap().0), &lp, &cav).unwrap()
        } else {
            run_forward(&input, &lp, &cav).unwrap()
        };
        let p_in = tr.input_power;
        prop_assert!((out.total_power() + tr.total_loss() - p_in).abs() <= 1e-9 * p_in.max(1.0));
        prop_assert!(out.total_power() <= p_in * (1.0 + 1e-12));
    }

    #[test]
    fn lossless_round_trip_restores_state(a in prop::collection::vec(amp(), 4)) {
        prop_assume!(a.iter().any(|c| c.norm() > 1e-3));
        let lp = LoopParams::lossless();
        let cav = IdealCavity::default();
        let input = state(&a);
        let (bins, _) = run_forward(&input, &lp, &cav).unwrap();
        let (back, _) = run_reverse(&time_reverse(&bins), &lp, &cav).unwrap();
        // a global phase is allowed; the overlap modulus must be the full norm
        let ov = input.overlap(&back).norm();
        prop_assert!((ov - input.total_power()).abs() < 1e-12);
    }
}

#[test]
fn output_times_follow_the_loop_period() {
    let lp = LoopParams::paper_2016();
    let cav = paper_cavity();
    for l in 0..=3 {
        let (out, tr) = run_forward(&PulseState::basis(ModeLabel::oam(l)), &lp, &cav).unwrap();
        for e in tr
            .events
            .iter()
            .filter(|e| e.element == "output" && e.power > 0.0)
        {
            let n = (e.time - lp.t0) / lp.round_trip;
            assert!((n - n.round()).abs() < 1e-9, "event at {} s", e.time);
        }
        let main = out.power_in(|m| m.bin == l);
        assert!(out
            .labels()
            .all(|m| out.power_in(|x| x.bin == m.bin) <= main));
    }
}

#[test]
fn adjacent_charges_lose_one_loop_each() {
    let lp = LoopParams::paper_2016();
    let cav = IdealCavity {
        peak_transmission: 0.9,
    };
    let lp = LoopParams {
        vpp_unshifted_fraction: 0.0,
        reentry_neighbour_fraction: 0.0,
        port_neighbour_fraction: 0.0,
        ..lp
    };
    let tau = lp.per_loop_transmission();
    let eff: Vec<f64> = (0..=6)
        .map(|l| {
            run_forward(&PulseState::basis(ModeLabel::oam(l)), &lp, &cav)
                .unwrap()
                .0
                .total_power()
        })
        .collect();
    for w in eff.windows(2) {
        assert!((w[1] / w[0] - tau).abs() < 1e-12);
    }
}

#[test]
fn projection_agrees_with_conversion_matrix() {
    let lp = LoopParams::paper_2016();
    let cav = paper_cavity();
    let m = conversion_matrix(Mode::Reverse, 0..=3, &lp, &cav).unwrap();
    let coupler = FibreCoupler::default();
    for (i, row) in m.values.iter().enumerate() {
        let input = PulseState::basis(ModeLabel::time_bin(-(i as i32)));
        let (modes, _) = run_reverse(&input, &lp, &cav).unwrap();
        for (j, want) in row.iter().enumerate() {
            let got = projective_measurement(
                &modes,
                &[(j as i32, Complex64::new(1.0, 0.0))],
                1.0,
                &coupler,
            )
            .unwrap();
            assert!(
                (got - want).abs() < 1e-12,
                "row {i} col {j}: {got} vs {want}"
            );
        }
    }
}
