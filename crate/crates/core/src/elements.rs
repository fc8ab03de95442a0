//! Linear optical elements acting on [`PulseState`].
//!
//! Every element scales amplitudes by the square root of its intensity
//! transmission and relabels modes. Removed light is absorbed.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::mode_algebra::{ModeLabel, Polarization, PulseState};

/// Propagation direction through a directional element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// Polarizing beam splitter with a per-visit transmission on both ports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pbs {
    pub transmission: f64,
}

impl Default for Pbs {
    fn default() -> Self {
        Self { transmission: 1.0 }
    }
}

impl Pbs {
    pub fn new(transmission: f64) -> Result<Self> {
        check_unit("pbs.transmission", transmission)?;
        Ok(Self { transmission })
    }

    /// Returns (transmitted H, reflected V).
    pub fn split(&self, s: &PulseState) -> (PulseState, PulseState) {
        let (h, v) = s.partition(|l| l.pol == Polarization::H);
        let k = Complex64::new(self.transmission.sqrt(), 0.0);
        if self.transmission == 1.0 {
            (h, v)
        } else {
            (h.scaled(k), v.scaled(k))
        }
    }
}

/// Sorted, non-overlapping half-open time windows `[start, end)` in seconds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GateWindows(Vec<(f64, f64)>);

impl GateWindows {
    pub fn new(windows: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(a, b)) in windows.iter().enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::param(
                    "gate_windows_ns",
                    format!("window {i} ({a}, {b}) must have start < end"),
                ));
            }
            if i > 0 && windows[i - 1].1 > a {
                return Err(Error::param(
                    "gate_windows_ns",
                    format!("window {i} overlaps or precedes window {}", i - 1),
                ));
            }
        }
        Ok(Self(windows))
    }

    pub fn none() -> Self {
        Self(Vec::new())
    }

    pub fn windows(&self) -> &[(f64, f64)] {
        &self.0
    }

    pub fn contains(&self, t: f64) -> bool {
        // windows are sorted, so binary search on the start
        let idx = self.0.partition_point(|&(a, _)| a <= t);
        idx > 0 && t < self.0[idx - 1].1
    }
}

/// Time-gated polarization switch.
#[derive(Debug, Clone, PartialEq)]
pub struct Eom {
    pub transmission: f64,
    pub gate: GateWindows,
}

impl Eom {
    pub fn new(transmission: f64, gate: GateWindows) -> Result<Self> {
        check_unit("eom.transmission", transmission)?;
        Ok(Self { transmission, gate })
    }

    pub fn apply(&self, s: &PulseState, t_arrival: f64) -> PulseState {
        let gated = self.gate.contains(t_arrival);
        let k = self.transmission.sqrt();
        s.relabel(k, |l| {
            if gated {
                l.with_pol(l.pol.swapped())
            } else {
                *l
            }
        })
        .0
    }
}

/// Vortex phase plate. `unshifted_fraction` is the intensity fraction left
/// at the incoming charge per pass; it is applied in contraction form, so the
/// shifted amplitude is scaled by `1 - sqrt(fraction)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VortexPlate {
    pub transmission: f64,
    pub charge_step: i32,
    pub unshifted_fraction: f64,
}

impl Default for VortexPlate {
    fn default() -> Self {
        Self {
            transmission: 1.0,
            charge_step: 1,
            unshifted_fraction: 0.0,
        }
    }
}

impl VortexPlate {
    pub fn new(transmission: f64, charge_step: i32, unshifted_fraction: f64) -> Result<Self> {
        check_unit("vpp.transmission", transmission)?;
        check_unit("vpp.unshifted_fraction", unshifted_fraction)?;
        if charge_step.abs() != 1 {
            return Err(Error::param("vpp.charge_step", "must be +1 or -1"));
        }
        Ok(Self {
            transmission,
            charge_step,
            unshifted_fraction,
        })
    }

    pub fn apply(&self, s: &PulseState, direction: Direction) -> PulseState {
        let step = match direction {
            Direction::Forward => -self.charge_step,
            Direction::Backward => self.charge_step,
        };
        let t = self.transmission.sqrt();
        let leak = self.unshifted_fraction.sqrt();
        s.map_linear(|l, a, b| {
            b.add(l.with_l(l.l + step), a * (t * (1.0 - leak)));
            if leak > 0.0 {
                b.add(*l, a * (t * leak));
            }
        })
        .0
    }
}

/// Plane mirror: inverts the OAM sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mirror {
    pub reflectivity: f64,
}

impl Default for Mirror {
    fn default() -> Self {
        Self { reflectivity: 1.0 }
    }
}

impl Mirror {
    pub fn new(reflectivity: f64) -> Result<Self> {
        check_unit("mirror.reflectivity", reflectivity)?;
        Ok(Self { reflectivity })
    }

    pub fn apply(&self, s: &PulseState) -> PulseState {
        s.relabel(self.reflectivity.sqrt(), |l| l.with_l(-l.l)).0
    }
}

/// Wave plate at its swap setting. `fast_axis` is carried but unused.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavePlate {
    pub transmission: f64,
    pub fast_axis: f64,
}

impl Default for WavePlate {
    fn default() -> Self {
        Self {
            transmission: 1.0,
            fast_axis: std::f64::consts::FRAC_PI_4,
        }
    }
}

impl WavePlate {
    pub fn new(transmission: f64) -> Result<Self> {
        check_unit("wave_plate.transmission", transmission)?;
        Ok(Self {
            transmission,
            ..Self::default()
        })
    }

    fn swap(&self, s: &PulseState) -> PulseState {
        s.relabel(self.transmission.sqrt(), |l| l.with_pol(l.pol.swapped()))
            .0
    }

    pub fn hwp(&self, s: &PulseState) -> PulseState {
        self.swap(s)
    }

    /// Round trip through a quarter-wave plate; `transmission` covers both passes.
    pub fn qwp_double_pass(&self, s: &PulseState) -> PulseState {
        self.swap(s)
    }
}

/// SLM fork hologram adding charge `pattern_charge` to the diffracted order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForkHologram {
    pub pattern_charge: i32,
    pub diffraction_efficiency: f64,
}

impl ForkHologram {
    pub fn new(pattern_charge: i32, diffraction_efficiency: f64) -> Result<Self> {
        check_unit("slm.diffraction_efficiency", diffraction_efficiency)?;
        Ok(Self {
            pattern_charge,
            diffraction_efficiency,
        })
    }

    pub fn apply(&self, s: &PulseState) -> PulseState {
        let q = self.pattern_charge;
        s.relabel(self.diffraction_efficiency.sqrt(), |l| l.with_l(l.l + q))
            .0
    }
}

/// Single-mode fibre coupler: projects onto `l = 0, p = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FibreCoupler {
    pub efficiency: f64,
}

impl Default for FibreCoupler {
    fn default() -> Self {
        Self { efficiency: 1.0 }
    }
}

impl FibreCoupler {
    pub fn new(efficiency: f64) -> Result<Self> {
        check_unit("fibre.efficiency", efficiency)?;
        Ok(Self { efficiency })
    }

    pub fn apply(&self, s: &PulseState) -> PulseState {
        let k = Complex64::new(self.efficiency.sqrt(), 0.0);
        s.filter(ModeLabel::is_gaussian).scaled(k)
    }
}

/// 4-f relay. Identity on labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourF {
    pub transmission: f64,
}

impl Default for FourF {
    fn default() -> Self {
        Self { transmission: 1.0 }
    }
}

impl FourF {
    pub fn new(transmission: f64) -> Result<Self> {
        check_unit("four_f.transmission", transmission)?;
        Ok(Self { transmission })
    }

    pub fn apply(&self, s: &PulseState) -> PulseState {
        s.scaled(Complex64::new(self.transmission.sqrt(), 0.0))
    }
}

/// Imperfect mode matching into the cavity.
///
/// Keeps `sqrt(efficiency)` of the amplitude in the incoming charge and
/// couples `sqrt(neighbour_fraction)` into each of `l ± 1`. The map is a
/// contraction when `sqrt(efficiency) + 2 sqrt(neighbour_fraction) <= 1`,
/// which is enforced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeCoupler {
    pub efficiency: f64,
    pub neighbour_fraction: f64,
}

impl Default for ModeCoupler {
    fn default() -> Self {
        Self {
            efficiency: 1.0,
            neighbour_fraction: 0.0,
        }
    }
}

impl ModeCoupler {
    pub fn new(efficiency: f64, neighbour_fraction: f64) -> Result<Self> {
        check_unit("coupling.efficiency", efficiency)?;
        check_unit("coupling.neighbour_fraction", neighbour_fraction)?;
        if efficiency.sqrt() + 2.0 * neighbour_fraction.sqrt() > 1.0 + 1e-12 {
            return Err(Error::param(
                "coupling.neighbour_fraction",
                format!(
                    "sqrt(efficiency) + 2 sqrt(neighbour_fraction) = {:.6} exceeds 1",
                    efficiency.sqrt() + 2.0 * neighbour_fraction.sqrt()
                ),
            ));
        }
        Ok(Self {
            efficiency,
            neighbour_fraction,
        })
    }

    /// Largest neighbour fraction that keeps the map a contraction.
    pub fn max_neighbour_fraction(efficiency: f64) -> f64 {
        let r = (1.0 - efficiency.sqrt()) / 2.0;
        r * r
    }

    pub fn apply(&self, s: &PulseState) -> PulseState {
        let a = self.efficiency.sqrt();
        let b = self.neighbour_fraction.sqrt();
        s.map_linear(|l, amp, out| {
            out.add(*l, amp * a);
            if b > 0.0 {
                out.add(l.with_l(l.l + 1), amp * b);
                out.add(l.with_l(l.l - 1), amp * b);
            }
        })
        .0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mode_algebra::{basis_state, superpose, ComplexAmp};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;
    use Polarization::{H, V};

    fn lab(pol: Polarization, l: i32) -> ModeLabel {
        ModeLabel::new(pol, l, 0, 0)
    }

    fn only(s: &PulseState) -> (ModeLabel, f64) {
        assert_eq!(s.len(), 1, "{s:?}");
        let (l, a) = s.iter().next().unwrap();
        (*l, a.norm_sqr())
    }

    #[test]
    fn pbs_ports() {
        let pbs = Pbs::default();
        let (t, r) = pbs.split(&basis_state(lab(H, 0)));
        assert_eq!((t.total_power(), r.total_power()), (1.0, 0.0));
        let (t, r) = pbs.split(&basis_state(lab(V, 0)));
        assert_eq!((t.total_power(), r.total_power()), (0.0, 1.0));
        let hv = superpose([
            (lab(H, 0), FRAC_1_SQRT_2.into()),
            (lab(V, 0), FRAC_1_SQRT_2.into()),
        ])
        .unwrap();
        let (t, r) = pbs.split(&hv);
        assert_abs_diff_eq!(t.total_power(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.total_power(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn eom_gating() {
        let gate = GateWindows::new(vec![(1e-9, 3e-9)]).unwrap();
        let eom = Eom::new(1.0, gate.clone()).unwrap();
        assert_eq!(
            only(&eom.apply(&basis_state(lab(H, 0)), 2e-9)),
            (lab(V, 0), 1.0)
        );
        assert_eq!(
            only(&eom.apply(&basis_state(lab(H, 0)), 5e-9)),
            (lab(H, 0), 1.0)
        );
        let lossy = Eom::new(0.9, gate).unwrap();
        let (l, p) = only(&lossy.apply(&basis_state(lab(H, 0)), 2e-9));
        assert_eq!(l, lab(V, 0));
        assert_abs_diff_eq!(p, 0.9, epsilon = 1e-15);
    }

    #[test]
    fn gate_windows_validate() {
        assert!(GateWindows::new(vec![(0.0, 2.0), (1.0, 3.0)]).is_err());
        assert!(GateWindows::new(vec![(2.0, 1.0)]).is_err());
        let g = GateWindows::new(vec![(0.0, 1.0), (2.0, 3.0)]).unwrap();
        assert!(g.contains(0.0) && g.contains(2.5));
        assert!(!g.contains(1.0) && !g.contains(1.5) && !g.contains(-0.1) && !g.contains(3.0));
    }

    #[test]
    fn vpp_steps() {
        let vpp = VortexPlate::default();
        assert_eq!(
            only(&vpp.apply(&basis_state(lab(V, 3)), Direction::Forward)).0,
            lab(V, 2)
        );
        assert_eq!(
            only(&vpp.apply(&basis_state(lab(V, 0)), Direction::Backward)).0,
            lab(V, 1)
        );
        let s = basis_state(lab(H, 2));
        let back = vpp.apply(&vpp.apply(&s, Direction::Forward), Direction::Backward);
        assert_eq!(back, s);
    }

    #[test]
    fn vpp_leak_is_contraction() {
        let vpp = VortexPlate::new(1.0, 1, 0.01).unwrap();
        let s = vpp.apply(&basis_state(lab(H, 2)), Direction::Forward);
        assert_abs_diff_eq!(s.power_in(|l| l.l == 2), 0.01, epsilon = 1e-15);
        assert!(s.total_power() <= 1.0);
    }

    #[test]
    fn mirror_examples() {
        let m = Mirror::default();
        assert_eq!(only(&m.apply(&basis_state(lab(H, 2)))).0, lab(H, -2));
        assert_eq!(only(&m.apply(&basis_state(lab(H, 0)))).0, lab(H, 0));
        let s = basis_state(lab(V, 4));
        assert_eq!(m.apply(&m.apply(&s)), s);
    }

    #[test]
    fn wave_plates() {
        let w = WavePlate::default();
        assert_eq!(only(&w.hwp(&basis_state(lab(H, 1)))).0, lab(V, 1));
        assert_eq!(
            only(&w.qwp_double_pass(&basis_state(lab(H, 1)))).0,
            lab(V, 1)
        );
        let s = basis_state(lab(H, 3));
        assert_eq!(w.hwp(&w.hwp(&s)), s);
        let lossy = WavePlate::new(0.99).unwrap();
        let (l, p) = only(&lossy.hwp(&basis_state(lab(H, 0))));
        assert_eq!(l, lab(V, 0));
        assert_abs_diff_eq!(p, 0.99, epsilon = 1e-15);
    }

    #[test]
    fn fork_and_coupler() {
        let f = ForkHologram::new(2, 1.0).unwrap();
        assert_eq!(only(&f.apply(&basis_state(lab(H, 0)))).0, lab(H, 2));
        let flat = ForkHologram::new(-3, 1.0)
            .unwrap()
            .apply(&basis_state(lab(H, 3)));
        assert_eq!(only(&flat).0, lab(H, 0));
        let s = basis_state(lab(H, 1));
        let half = ForkHologram::new(0, 0.5).unwrap().apply(&s);
        assert_eq!(only(&half).0, lab(H, 1));
        assert_abs_diff_eq!(half.total_power(), 0.5, epsilon = 1e-15);

        let coupler = FibreCoupler::default();
        let g = basis_state(lab(H, 0));
        assert_eq!(coupler.apply(&g), g);
        assert!(coupler.apply(&basis_state(lab(H, 1))).is_empty());
        assert_abs_diff_eq!(
            coupler.apply(&flat).total_power(),
            flat.power_in(|l| l.l == 0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn four_f_losses() {
        let s = basis_state(lab(H, 1));
        assert_eq!(FourF::default().apply(&s), s);
        let f = FourF::new(0.99).unwrap();
        assert_abs_diff_eq!(f.apply(&s).total_power(), 0.99, epsilon = 1e-15);
        assert_abs_diff_eq!(f.apply(&f.apply(&s)).total_power(), 0.9801, epsilon = 1e-15);
    }

    #[test]
    fn mode_coupler_bound() {
        assert!(ModeCoupler::new(0.9, 0.01).is_err());
        let m = ModeCoupler::max_neighbour_fraction(0.81);
        assert_abs_diff_eq!(m, 0.0025, epsilon = 1e-15);
        assert!(ModeCoupler::new(0.81, m).is_ok());
    }

    fn arb_state() -> impl Strategy<Value = PulseState> {
        prop::collection::vec(
            (
                any::<bool>(),
                -3i32..=3,
                0u32..=1,
                -2i32..=2,
                -1.0f64..1.0,
                -1.0f64..1.0,
            ),
            1..8,
        )
        .prop_map(|v| {
            superpose(v.into_iter().map(|(h, l, p, bin, re, im)| {
                (
                    ModeLabel::new(if h { H } else { V }, l, p, bin),
                    ComplexAmp::new(re, im),
                )
            }))
            .unwrap()
            .with_prune_threshold(0.0)
        })
    }

    fn all_ops(t: f64) -> Vec<Box<dyn Fn(&PulseState) -> PulseState>> {
        let gate = GateWindows::new(vec![(0.0, 1.0)]).unwrap();
        let eom = Eom::new(t, gate).unwrap();
        let vpp = VortexPlate::new(t, 1, 0.0).unwrap();
        let leaky = VortexPlate::new(t, 1, 0.02).unwrap();
        let mirror = Mirror::new(t).unwrap();
        let wp = WavePlate::new(t).unwrap();
        let fork = ForkHologram::new(-2, t).unwrap();
        let coupler = FibreCoupler::new(t).unwrap();
        let four_f = FourF::new(t).unwrap();
        let mc = ModeCoupler::new(t * 0.8, ModeCoupler::max_neighbour_fraction(t * 0.8)).unwrap();
        let pbs = Pbs::new(t).unwrap();
        vec![
            Box::new(move |s| eom.apply(s, 0.5)),
            Box::new(move |s| vpp.apply(s, Direction::Forward)),
            Box::new(move |s| leaky.apply(s, Direction::Backward)),
            Box::new(move |s| mirror.apply(s)),
            Box::new(move |s| wp.hwp(s)),
            Box::new(move |s| fork.apply(s)),
            Box::new(move |s| coupler.apply(s)),
            Box::new(move |s| four_f.apply(s)),
            Box::new(move |s| mc.apply(s)),
            Box::new(move |s| pbs.split(s).0),
            Box::new(move |s| pbs.split(s).1),
        ]
    }

    proptest! {
        #[test]
        fn elements_are_linear(a in arb_state(), b in arb_state(), ka in -1.0f64..1.0, kb in -1.0f64..1.0, t in 0.0f64..=1.0) {
            let (ka, kb) = (ComplexAmp::new(ka, 0.3), ComplexAmp::new(kb, -0.2));
            let mix = a.scaled(ka).add(&b.scaled(kb));
            for op in all_ops(t) {
                let lhs = op(&mix);
                let rhs = op(&a).scaled(ka).add(&op(&b).scaled(kb));
                let diff = lhs.add(&rhs.scaled((-1.0).into()));
                prop_assert!(diff.iter().all(|(_, d)| d.norm() < 1e-12));
            }
        }

        #[test]
        fn elements_do_not_gain_power(a in arb_state(), t in 0.0f64..=1.0) {
            for op in all_ops(t) {
                prop_assert!(op(&a).total_power() <= a.total_power() + 1e-12);
            }
        }

        #[test]
        fn unit_transmission_preserves_norm(a in arb_state()) {
            let p = a.total_power();
            let gate = GateWindows::new(vec![(0.0, 1.0)]).unwrap();
            let w = WavePlate::default();
            let outs = [
                Eom::new(1.0, gate).unwrap().apply(&a, 0.5),
                VortexPlate::default().apply(&a, Direction::Forward),
                Mirror::default().apply(&a),
                w.hwp(&a),
                w.qwp_double_pass(&a),
                ForkHologram::new(3, 1.0).unwrap().apply(&a),
                FourF::default().apply(&a),
            ];
            for o in outs {
                prop_assert!((o.total_power() - p).abs() < 1e-12);
            }
            let (h, v) = Pbs::default().split(&a);
            prop_assert!((h.total_power() + v.total_power() - p).abs() < 1e-12);
            prop_assert!(h.labels().all(|l| l.pol == H) && v.labels().all(|l| l.pol == V));
        }

        #[test]
        fn vpp_inverse_pair(a in arb_state()) {
            let vpp = VortexPlate::default();
            let back = vpp.apply(&vpp.apply(&a, Direction::Backward), Direction::Forward);
            prop_assert_eq!(back.labels().collect::<Vec<_>>(), a.labels().collect::<Vec<_>>());
        }
    }
}
