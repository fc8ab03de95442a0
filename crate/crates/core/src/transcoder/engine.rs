//! Slot-by-slot propagation through the loop.
//!
//! All light inside the loop at a given moment shares one time bin, so the
//! engine advances one round trip per step and every element acts on a
//! single coherent state. Reverse-mode inputs are injected in the slot
//! matching their bin.

use super::{LoopParams, Mode, SimulationTrace};
use crate::cavity::ModeFilter;
use crate::elements::{
    Eom, FibreCoupler, FourF, GateWindows, Mirror, ModeCoupler, Pbs, VortexPlate, WavePlate,
};
use crate::error::{Error, Result};
use crate::mode_algebra::{Polarization, PulseState};

struct Chain {
    pbs: Pbs,
    eom: Eom,
    vpp: VortexPlate,
    qwp: WavePlate,
    hwp: WavePlate,
    four_f: FourF,
    mirror: Mirror,
    mirror_count: u32,
    reentry: ModeCoupler,
    port: ModeCoupler,
    output: FibreCoupler,
}

impl Chain {
    fn new(lp: &LoopParams, gates: &GateWindows) -> Result<Self> {
        lp.validate()?;
        Ok(Self {
            pbs: Pbs::new(lp.pbs_transmission)?,
            eom: Eom::new(lp.eom.total(), gates.clone())?,
            vpp: VortexPlate::new(
                lp.vpp_transmission,
                lp.vpp_charge_step,
                lp.vpp_unshifted_fraction,
            )?,
            qwp: WavePlate::new(lp.qwp.total())?,
            hwp: WavePlate::new(lp.hwp.total())?,
            four_f: FourF::new(lp.four_f.total())?,
            mirror: Mirror::new(lp.mirrors.transmission)?,
            mirror_count: lp.mirrors.passes,
            reentry: ModeCoupler::new(lp.reentry_coupling, lp.reentry_neighbour_fraction)?,
            port: ModeCoupler::new(lp.port_coupling, lp.port_neighbour_fraction)?,
            output: FibreCoupler::new(lp.output_coupling)?,
        })
    }
}

struct Run {
    trace: SimulationTrace,
}

impl Run {
    fn new(input_power: f64) -> Self {
        Self {
            trace: SimulationTrace {
                input_power,
                events: Vec::new(),
            },
        }
    }

    fn apply(
        &mut self,
        t: f64,
        name: &str,
        s: &PulseState,
        f: impl FnOnce(&PulseState) -> PulseState,
    ) -> PulseState {
        let before = s.total_power();
        let out = f(s);
        let after = out.total_power();
        self.trace.push(t, name, after, before - after);
        out
    }

    /// PBS visit keeping one polarization; the other port is recorded as `<name>.reject`.
    fn keep(
        &mut self,
        t: f64,
        name: &str,
        pbs: &Pbs,
        s: &PulseState,
        keep: Polarization,
    ) -> PulseState {
        let (kept, rejected) = Self::split(pbs, s, keep);
        let before = s.total_power();
        let (pk, pr) = (kept.total_power(), rejected.total_power());
        self.trace.push(t, name, pk, before - pk - pr);
        if pr > 0.0 {
            self.trace.push(t, &format!("{name}.reject"), pr, pr);
        }
        kept
    }

    fn split(pbs: &Pbs, s: &PulseState, keep: Polarization) -> (PulseState, PulseState) {
        let (h, v) = pbs.split(s);
        match keep {
            Polarization::H => (h, v),
            Polarization::V => (v, h),
        }
    }

    fn dump(&mut self, t: f64, name: &str, s: &PulseState) {
        let p = s.total_power();
        if p > 0.0 {
            self.trace.push(t, name, 0.0, p);
        }
    }

    fn output(&mut self, t: f64, s: &PulseState) {
        self.trace.push(t, "output", s.total_power(), 0.0);
    }
}

fn shift_bins(s: &PulseState, by: i32) -> PulseState {
    s.relabel(1.0, |l| l.with_bin(l.bin + by)).0
}

fn out_of_range(label: &crate::mode_algebra::ModeLabel, reason: impl Into<String>) -> Error {
    Error::InputOutOfRange {
        label: label.to_string(),
        reason: reason.into(),
    }
}

/// Forward conversion with the automatic EOM schedule.
pub fn run_forward(
    input: &PulseState,
    lp: &LoopParams,
    cavity: &dyn ModeFilter,
) -> Result<(PulseState, SimulationTrace)> {
    let gates = lp.gates(Mode::Forward)?;
    run_forward_with_gates(input, lp, cavity, &gates)
}

/// Forward conversion: charge `l` at bin 0 leaves the cavity in bin `l`.
pub fn run_forward_with_gates(
    input: &PulseState,
    lp: &LoopParams,
    cavity: &dyn ModeFilter,
    gates: &GateWindows,
) -> Result<(PulseState, SimulationTrace)> {
    for label in input.labels() {
        if label.l < 0 {
            return Err(out_of_range(label, "negative charges are not supported"));
        }
        if label.l as u32 > lp.max_loops {
            return Err(out_of_range(
                label,
                format!("charge exceeds max_loops = {}", lp.max_loops),
            ));
        }
        if label.bin != 0 {
            return Err(out_of_range(label, "forward inputs must sit in bin 0"));
        }
    }
    let ch = Chain::new(lp, gates)?;
    let period = lp.round_trip;
    let t0 = lp.t0;
    let lead = lp.eom_lead;
    let mut run = Run::new(input.total_power());
    let mut out = PulseState::empty(t0).with_prune_threshold(input.prune_threshold());

    let s = input.clone().with_t0(t0);
    let s = run.keep(
        t0 - lead - 0.05 * period,
        "pbs1",
        &ch.pbs,
        &s,
        Polarization::H,
    );
    let s = run.apply(t0 - lead, "eom", &s, |s| ch.eom.apply(s, t0 - lead));
    let s = run.keep(t0 - lead / 2.0, "pbs2", &ch.pbs, &s, Polarization::H);
    let mut s = run.apply(t0 - lead / 4.0, "port_coupler", &s, |s| ch.port.apply(s));

    for k in 0..=lp.max_loops {
        let tk = t0 + k as f64 * period;
        let at = |frac: f64| tk + frac * period;

        let (tr, rf) = cavity.split(&s);
        let (pt, pr) = (tr.total_power(), rf.total_power());
        run.trace
            .push(tk, "cavity", pt + pr, s.total_power() - pt - pr);
        let out_k = run.apply(tk, "fibre_coupler", &tr, |s| ch.output.apply(s));
        run.output(tk, &out_k);
        out = out.add(&out_k);

        if k == lp.max_loops {
            run.dump(at(0.05), "truncated", &rf);
            break;
        }
        let s1 = run.apply(at(0.05), "qwp", &rf, |s| ch.qwp.qwp_double_pass(s));
        let s1 = run.keep(at(0.10), "pbs2", &ch.pbs, &s1, Polarization::V);
        let s1 = run.apply(at(0.20), "vpp", &s1, |s| {
            ch.vpp.apply(s, Mode::Forward.vpp_direction())
        });
        let mut s1 = run.apply(at(0.30), "four_f", &s1, |s| ch.four_f.apply(s));
        for i in 0..ch.mirror_count {
            let t = at(0.40 + 0.2 * i as f64 / ch.mirror_count as f64);
            s1 = run.apply(t, "mirror", &s1, |s| ch.mirror.apply(s));
        }
        let s1 = run.keep(at(0.60), "pbs1", &ch.pbs, &s1, Polarization::V);
        let s1 = shift_bins(&s1, 1);
        let t_next = tk + period;
        let s1 = run.apply(t_next - lead, "eom", &s1, |s| {
            ch.eom.apply(s, t_next - lead)
        });
        let s1 = run.keep(t_next - lead / 2.0, "pbs2", &ch.pbs, &s1, Polarization::H);
        s = run.apply(t_next - lead / 4.0, "reentry_coupler", &s1, |s| {
            ch.reentry.apply(s)
        });
        if s.is_empty() {
            break;
        }
    }
    Ok((out, run.trace))
}

/// Reverse conversion with the automatic EOM schedule.
pub fn run_reverse(
    input: &PulseState,
    lp: &LoopParams,
    cavity: &dyn ModeFilter,
) -> Result<(PulseState, SimulationTrace)> {
    let gates = lp.gates(Mode::Reverse)?;
    run_reverse_with_gates(input, lp, cavity, &gates)
}

/// Reverse conversion: a Gaussian pulse in bin `−l` leaves through PBS 1 at
/// `t0` carrying charge `l`.
pub fn run_reverse_with_gates(
    input: &PulseState,
    lp: &LoopParams,
    cavity: &dyn ModeFilter,
    gates: &GateWindows,
) -> Result<(PulseState, SimulationTrace)> {
    for label in input.labels() {
        if label.l != 0 || label.p != 0 {
            return Err(out_of_range(
                label,
                "reverse inputs must be Gaussian (l = 0, p = 0)",
            ));
        }
        if label.bin > 0 {
            return Err(out_of_range(
                label,
                "bins later than t0 cannot be converted",
            ));
        }
        if label.bin.unsigned_abs() > lp.max_loops {
            return Err(out_of_range(
                label,
                format!("needs more than max_loops = {} passes", lp.max_loops),
            ));
        }
    }
    let ch = Chain::new(lp, gates)?;
    let period = lp.round_trip;
    let t0 = lp.t0;
    let mut run = Run::new(input.total_power());
    let threshold = input.prune_threshold();
    let mut out = PulseState::empty(t0).with_prune_threshold(threshold);

    let first = input.labels().map(|l| l.bin).min().unwrap_or(0);
    let last = first + lp.max_loops as i32;
    // light returning to the cavity from inside the loop, already in slot n
    let mut circulating = PulseState::empty(t0).with_prune_threshold(threshold);

    for n in first..=last {
        let tn = t0 + n as f64 * period;
        let at = |frac: f64| tn + frac * period;

        let fresh = input.filter(|l| l.bin == n).with_t0(t0);
        if fresh.is_empty() && circulating.is_empty() {
            continue;
        }
        let (inside, outside) = cavity.combine(&fresh, &circulating);
        let (pi, po) = (inside.total_power(), outside.total_power());
        let p_in = fresh.total_power() + circulating.total_power();
        run.trace.push(at(-0.05), "cavity", pi, p_in - pi - po);
        run.dump(at(-0.05), "cavity.outside", &outside);
        let s = run.keep(at(-0.02), "pbs2", &ch.pbs, &inside, Polarization::H);

        let s1 = run.apply(tn, "eom", &s, |s| ch.eom.apply(s, tn));
        let s1 = run.apply(at(0.02), "hwp", &s1, |s| ch.hwp.hwp(s));
        let (exit, stay) = Run::split(&ch.pbs, &s1, Polarization::H);
        let (pe, ps) = (exit.total_power(), stay.total_power());
        run.trace
            .push(at(0.05), "pbs1", ps, s1.total_power() - pe - ps);
        if pe > 0.0 {
            let e = run.apply(at(0.05), "port_coupler", &exit, |s| ch.port.apply(s));
            run.output(at(0.05), &e);
            out = out.add(&e);
        }
        if n == last {
            run.dump(at(0.06), "truncated", &stay);
            break;
        }

        let mut s1 = stay;
        for i in 0..ch.mirror_count {
            let t = at(0.10 + 0.2 * i as f64 / ch.mirror_count as f64);
            s1 = run.apply(t, "mirror", &s1, |s| ch.mirror.apply(s));
        }
        let s1 = run.apply(at(0.35), "four_f", &s1, |s| ch.four_f.apply(s));
        let s1 = run.apply(at(0.45), "vpp", &s1, |s| {
            ch.vpp.apply(s, Mode::Reverse.vpp_direction())
        });
        let s1 = run.keep(at(0.55), "pbs2", &ch.pbs, &s1, Polarization::V);
        let s1 = run.apply(at(0.65), "qwp", &s1, |s| ch.qwp.qwp_double_pass(s));
        let s1 = run.apply(at(0.80), "reentry_coupler", &s1, |s| ch.reentry.apply(s));
        circulating = shift_bins(&s1, 1);
    }
    Ok((out, run.trace))
}
