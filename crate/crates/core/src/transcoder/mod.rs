//! The optical loop: forward (OAM → time bin) and reverse (time bin → OAM)
//! conversion, plus the unbalanced Mach–Zehnder used to prepare and read
//! out bin superpositions.

mod engine;
mod mz;
mod trace;

use serde::Serialize;

use crate::analysis::EfficiencyMatrix;
use crate::cavity::ModeFilter;
use crate::elements::{Direction, GateWindows};
use crate::error::{check_positive, check_unit, Error, Result};
use crate::mode_algebra::{ModeLabel, PulseState};

pub use engine::{run_forward, run_forward_with_gates, run_reverse, run_reverse_with_gates};
pub use mz::{mz_prepare, mz_readout, MzParams, MzReadout, ReadoutPoint};
pub use trace::{SimulationTrace, TraceEvent};

/// Per-pass intensity transmission of one component and how many times
/// the pulse meets it per round trip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stage {
    pub transmission: f64,
    pub passes: u32,
}

impl Stage {
    pub const fn new(transmission: f64, passes: u32) -> Self {
        Self {
            transmission,
            passes,
        }
    }

    pub const fn lossless(passes: u32) -> Self {
        Self::new(1.0, passes)
    }

    /// Intensity transmission of all passes together.
    pub fn total(&self) -> f64 {
        self.transmission.powi(self.passes as i32)
    }
}

/// Which way the loop is being run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// OAM in, time bins out.
    Forward,
    /// Time bins in, OAM out.
    Reverse,
}

impl Mode {
    pub fn vpp_direction(self) -> Direction {
        match self {
            Mode::Forward => Direction::Forward,
            Mode::Reverse => Direction::Backward,
        }
    }
}

/// The loop and its components.
///
/// The PBS is visited three times per round trip, the VPP once. All other
/// multiplicities are configurable. Mirrors must come in an even number so
/// the net OAM sign is preserved.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopParams {
    /// Round-trip time `T`, s.
    pub round_trip: f64,
    /// Output time of bin 0 in forward mode, input-to-exit time in reverse, s.
    pub t0: f64,
    pub max_loops: u32,
    pub eom: Stage,
    pub vpp_transmission: f64,
    pub vpp_charge_step: i32,
    /// Intensity fraction the VPP leaves at the incoming charge per pass.
    pub vpp_unshifted_fraction: f64,
    pub qwp: Stage,
    pub hwp: Stage,
    pub four_f: Stage,
    pub mirrors: Stage,
    /// Per-visit PBS transmission.
    pub pbs_transmission: f64,
    /// Mode-match efficiency of the returning pulse into the cavity.
    pub reentry_coupling: f64,
    /// Intensity fraction scattered into each of `l ± 1` at re-entry.
    pub reentry_neighbour_fraction: f64,
    /// Mode matching at the loop port: injection in forward mode, exit in reverse.
    pub port_coupling: f64,
    pub port_neighbour_fraction: f64,
    /// Efficiency of the fibre coupler behind the cavity in forward mode.
    pub output_coupling: f64,
    /// How long before the cavity pass the pulse crosses the EOM in forward mode, s.
    pub eom_lead: f64,
    /// Width of each automatically generated EOM gate, s.
    pub gate_window: f64,
    /// Replaces the automatic schedule when set.
    pub manual_gates: Option<Vec<(f64, f64)>>,
}

impl LoopParams {
    /// Every component lossless and perfectly matched.
    pub fn lossless() -> Self {
        Self {
            round_trip: 11e-9,
            t0: 0.0,
            max_loops: 12,
            eom: Stage::lossless(2),
            vpp_transmission: 1.0,
            vpp_charge_step: 1,
            vpp_unshifted_fraction: 0.0,
            qwp: Stage::lossless(2),
            hwp: Stage::lossless(1),
            four_f: Stage::lossless(2),
            mirrors: Stage::lossless(12),
            pbs_transmission: 1.0,
            reentry_coupling: 1.0,
            reentry_neighbour_fraction: 0.0,
            port_coupling: 1.0,
            port_neighbour_fraction: 0.0,
            output_coupling: 1.0,
            eom_lead: 2e-9,
            gate_window: 8e-9,
            manual_gates: None,
        }
    }

    /// Component losses of the built loop: 90 % per EOM and VPP pass, 99 %
    /// for every other pass, re-entry coupling set so that the forward round
    /// trip transmits 0.485 of the intensity. Leaks: 0.5 % of the power left
    /// unshifted per VPP pass, 0.1 % into each neighbour at both couplers.
    pub fn paper_2016() -> Self {
        let mut p = Self {
            eom: Stage::new(0.9, 2),
            vpp_transmission: 0.9,
            qwp: Stage::new(0.99, 2),
            hwp: Stage::new(0.99, 1),
            four_f: Stage::new(0.99, 2),
            mirrors: Stage::new(0.99, 12),
            pbs_transmission: 0.99,
            vpp_unshifted_fraction: 0.005,
            port_coupling: 0.85,
            reentry_neighbour_fraction: 1e-3,
            port_neighbour_fraction: 1e-3,
            ..Self::lossless()
        };
        p.reentry_coupling = 0.485 / p.component_transmission(Mode::Forward);
        p
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("round_trip", self.round_trip)?;
        if !self.t0.is_finite() {
            return Err(Error::param("t0", "must be finite"));
        }
        if self.max_loops < 1 {
            return Err(Error::param("max_loops", "must be >= 1"));
        }
        for (name, st) in [
            ("eom", self.eom),
            ("qwp", self.qwp),
            ("hwp", self.hwp),
            ("four_f", self.four_f),
            ("mirrors", self.mirrors),
        ] {
            check_unit(&format!("{name}.transmission"), st.transmission)?;
        }
        if self.mirrors.passes % 2 != 0 {
            return Err(Error::param(
                "mirrors.passes",
                "an odd mirror count flips the OAM sign",
            ));
        }
        for (name, v) in [
            ("vpp.transmission", self.vpp_transmission),
            ("vpp.unshifted_fraction", self.vpp_unshifted_fraction),
            ("pbs.transmission", self.pbs_transmission),
            ("reentry_coupling", self.reentry_coupling),
            (
                "reentry_neighbour_fraction",
                self.reentry_neighbour_fraction,
            ),
            ("port_coupling", self.port_coupling),
            ("port_neighbour_fraction", self.port_neighbour_fraction),
            ("output_coupling", self.output_coupling),
        ] {
            check_unit(name, v)?;
        }
        if self.vpp_charge_step.abs() != 1 {
            return Err(Error::param("vpp.charge_step", "must be +1 or -1"));
        }
        crate::elements::ModeCoupler::new(self.reentry_coupling, self.reentry_neighbour_fraction)?;
        crate::elements::ModeCoupler::new(self.port_coupling, self.port_neighbour_fraction)?;
        check_positive("eom_lead", self.eom_lead)?;
        if self.eom_lead >= 0.3 * self.round_trip {
            return Err(Error::param("eom_lead", "must be shorter than 0.3 T"));
        }
        check_positive("gate_window", self.gate_window)?;
        if self.gate_window >= self.round_trip {
            return Err(Error::param(
                "gate_window",
                "a gate must be shorter than the round trip",
            ));
        }
        if let Some(w) = &self.manual_gates {
            let g = GateWindows::new(w.clone())?;
            if g.windows().iter().any(|(a, b)| b - a >= self.round_trip) {
                return Err(Error::param(
                    "gate_windows_ns",
                    "a gate must be shorter than the round trip",
                ));
            }
        }
        Ok(())
    }

    /// Product of per-round-trip component transmissions, without re-entry coupling.
    pub fn component_transmission(&self, mode: Mode) -> f64 {
        let base = self.eom.total()
            * self.vpp_transmission
            * self.qwp.total()
            * self.four_f.total()
            * self.mirrors.total()
            * self.pbs_transmission.powi(3);
        match mode {
            Mode::Forward => base,
            Mode::Reverse => base * self.hwp.total(),
        }
    }

    /// Forward round-trip intensity transmission `τ`; `γ = 1/τ`.
    pub fn per_loop_transmission(&self) -> f64 {
        self.per_loop_transmission_in(Mode::Forward)
    }

    pub fn per_loop_transmission_in(&self, mode: Mode) -> f64 {
        self.component_transmission(mode) * self.reentry_coupling
    }

    pub fn gamma(&self) -> f64 {
        1.0 / self.per_loop_transmission()
    }

    /// Automatically generated schedule for `mode`.
    pub fn auto_schedule(&self, mode: Mode) -> EomSchedule {
        let w = self.gate_window;
        match mode {
            Mode::Forward => EomSchedule {
                mode,
                trigger_time: self.t0 + self.round_trip - self.eom_lead - w / 2.0,
                window: w,
            },
            Mode::Reverse => EomSchedule {
                mode,
                trigger_time: self.t0 - w / 2.0,
                window: w,
            },
        }
    }

    /// Gate windows used for a run in `mode`.
    pub fn gates(&self, mode: Mode) -> Result<GateWindows> {
        match &self.manual_gates {
            Some(w) => GateWindows::new(w.clone()),
            None => Ok(self.auto_schedule(mode).windows(self)),
        }
    }
}

/// EOM trigger pattern.
///
/// Forward: the Pockels cell is pulsed on every return pass from the first
/// one on, for `max_loops` passes. Reverse: one window at `t0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EomSchedule {
    pub mode: Mode,
    pub trigger_time: f64,
    pub window: f64,
}

impl EomSchedule {
    pub fn windows(&self, lp: &LoopParams) -> GateWindows {
        let v = match self.mode {
            Mode::Forward => (0..lp.max_loops)
                .map(|k| {
                    let a = self.trigger_time + k as f64 * lp.round_trip;
                    (a, a + self.window)
                })
                .collect(),
            Mode::Reverse => vec![(self.trigger_time, self.trigger_time + self.window)],
        };
        GateWindows::new(v).expect("window < T keeps gates ordered")
    }
}

/// Runs each basis input through the loop and collects output powers.
///
/// Forward: row `i` is input charge `labels[i]`, column `j` is bin
/// `labels[j]`. Reverse: row `i` is the pulse at `t0 − labels[i]·T`, column
/// `j` is charge `labels[j]`.
pub fn conversion_matrix(
    mode: Mode,
    labels: std::ops::RangeInclusive<u32>,
    lp: &LoopParams,
    cavity: &dyn ModeFilter,
) -> Result<EfficiencyMatrix> {
    let labels: Vec<i32> = labels.map(|l| l as i32).collect();
    let mut values = Vec::with_capacity(labels.len());
    for &i in &labels {
        let row = match mode {
            Mode::Forward => {
                let (out, _) = run_forward(&PulseState::basis(ModeLabel::oam(i)), lp, cavity)?;
                labels
                    .iter()
                    .map(|&j| out.power_in(|m| m.bin == j))
                    .collect()
            }
            Mode::Reverse => {
                let (out, _) =
                    run_reverse(&PulseState::basis(ModeLabel::time_bin(-i)), lp, cavity)?;
                labels
                    .iter()
                    .map(|&j| out.power_in(|m| m.l == j && m.p == 0))
                    .collect()
            }
        };
        values.push(row);
    }
    EfficiencyMatrix::new(mode, labels.clone(), labels, values)
}

/// Maps forward output bins onto reverse inputs: bin `k` becomes bin `−k`.
/// Polarization, charge and radial index are kept.
pub fn time_reverse(s: &PulseState) -> PulseState {
    s.relabel(1.0, |l| l.with_bin(-l.bin)).0.with_t0(s.t0())
}
