//! Reported quantities: efficiency matrices, cross-talk tables, waveforms,
//! visibilities and projective measurements.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::elements::{FibreCoupler, ForkHologram};
use crate::error::{check_positive, Error, Result};
use crate::mode_algebra::{ModeLabel, PulseState};
use crate::transcoder::{Mode, MzReadout};

/// Reporting floor for cross-talk, dB.
pub const DB_FLOOR: f64 = -60.0;

/// Input × output intensity fractions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyMatrix {
    pub mode: Mode,
    /// Input charge (forward) or input delay in bins (reverse) per row.
    pub rows: Vec<i32>,
    /// Output bin (forward) or output charge (reverse) per column.
    pub cols: Vec<i32>,
    pub values: Vec<Vec<f64>>,
}

impl EfficiencyMatrix {
    pub fn new(mode: Mode, rows: Vec<i32>, cols: Vec<i32>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != rows.len() || values.iter().any(|r| r.len() != cols.len()) {
            return Err(Error::param(
                "values",
                "shape does not match row and column labels",
            ));
        }
        for (i, r) in values.iter().enumerate() {
            if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::param(
                    "values",
                    format!("row {i} has a negative or non-finite entry"),
                ));
            }
            if r.iter().sum::<f64>() > 1.0 + 1e-9 {
                return Err(Error::param("values", format!("row {i} sums above 1")));
            }
        }
        Ok(Self {
            mode,
            rows,
            cols,
            values,
        })
    }

    /// Column index of the correct output for row `i`.
    pub fn diagonal_col(&self, i: usize) -> Option<usize> {
        self.cols.iter().position(|&c| c == self.rows[i])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.len())
            .map(|i| self.diagonal_col(i).map_or(0.0, |j| self.values[i][j]))
            .collect()
    }

    pub fn scaled(&self, k: f64) -> EfficiencyMatrix {
        EfficiencyMatrix {
            values: self
                .values
                .iter()
                .map(|r| r.iter().map(|v| v * k).collect())
                .collect(),
            ..self.clone()
        }
    }

    /// Rows as CSV with a header of column labels.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("input");
        for c in &self.cols {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
        for (r, vals) in self.rows.iter().zip(&self.values) {
            out.push_str(&r.to_string());
            for v in vals {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// One cross-talk table cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrosstalkEntry {
    /// The neighbour lies outside the matrix (`*`).
    Undefined,
    /// Ratio below [`DB_FLOOR`].
    BelowFloor,
    Db(f64),
}

impl CrosstalkEntry {
    /// Value used when averaging; `BelowFloor` counts as the floor.
    pub fn value(&self) -> Option<f64> {
        match self {
            CrosstalkEntry::Undefined => None,
            CrosstalkEntry::BelowFloor => Some(DB_FLOOR),
            CrosstalkEntry::Db(v) => Some(*v),
        }
    }
}

impl Serialize for CrosstalkEntry {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CrosstalkEntry::Undefined => s.serialize_str("*"),
            CrosstalkEntry::BelowFloor => s.serialize_str("below_floor"),
            CrosstalkEntry::Db(v) => s.serialize_f64(*v),
        }
    }
}

/// Nearest-neighbour cross-talk per input.
#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkTable {
    pub mode: Mode,
    pub inputs: Vec<i32>,
    /// Leakage into the earlier bin or lower charge.
    pub before: Vec<CrosstalkEntry>,
    /// Leakage into the later bin or higher charge.
    pub after: Vec<CrosstalkEntry>,
}

impl CrosstalkTable {
    pub fn row_names(&self) -> (&'static str, &'static str) {
        match self.mode {
            Mode::Forward => ("t(l)-T", "t(l)+T"),
            Mode::Reverse => ("l-1", "l+1"),
        }
    }

    /// Mean over defined entries, dB.
    pub fn mean_db(&self) -> Option<f64> {
        let v: Vec<f64> = self
            .before
            .iter()
            .chain(&self.after)
            .filter_map(|e| e.value())
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

impl Serialize for CrosstalkTable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (b, a) = self.row_names();
        let mut rows = BTreeMap::new();
        rows.insert(b, &self.before);
        rows.insert(a, &self.after);
        let mut m = s.serialize_map(Some(4))?;
        m.serialize_entry("mode", &self.mode)?;
        m.serialize_entry("inputs", &self.inputs)?;
        m.serialize_entry("rows", &rows)?;
        m.serialize_entry("mean_db", &self.mean_db())?;
        m.end()
    }
}

fn db_entry(ratio: f64) -> CrosstalkEntry {
    if ratio <= 0.0 {
        return CrosstalkEntry::BelowFloor;
    }
    let db = 10.0 * ratio.log10();
    if db < DB_FLOOR {
        CrosstalkEntry::BelowFloor
    } else {
        CrosstalkEntry::Db(db)
    }
}

/// Ratio of each neighbouring output to the correct output, in dB.
pub fn crosstalk_table(m: &EfficiencyMatrix) -> Result<CrosstalkTable> {
    let mut before = Vec::new();
    let mut after = Vec::new();
    for i in 0..m.rows.len() {
        let d = m.diagonal_col(i).map_or(0.0, |j| m.values[i][j]);
        if !(d > 0.0) {
            return Err(Error::ZeroDiagonal(i));
        }
        let neighbour = |offset: i32| match m.cols.iter().position(|&c| c == m.rows[i] + offset) {
            Some(j) => db_entry(m.values[i][j] / d),
            None => CrosstalkEntry::Undefined,
        };
        before.push(neighbour(-1));
        after.push(neighbour(1));
    }
    Ok(CrosstalkTable {
        mode: m.mode,
        inputs: m.rows.clone(),
        before,
        after,
    })
}

/// `(I_max − I_min)/(I_max + I_min)`.
pub fn visibility(i_max: f64, i_min: f64) -> Result<f64> {
    if !(i_max >= i_min && i_min >= 0.0 && i_max.is_finite()) {
        return Err(Error::Visibility(format!(
            "need I_max >= I_min >= 0, got {i_max}, {i_min}"
        )));
    }
    if i_max + i_min == 0.0 {
        return Err(Error::Visibility("no light".into()));
    }
    Ok((i_max - i_min) / (i_max + i_min))
}

fn sweep_span_ok(phases: &[f64]) -> bool {
    let (lo, hi) = phases
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(*p), b.max(*p)));
    hi - lo >= 2.0 * PI * (1.0 - 1e-9)
}

/// Visibility of the overlap bin over a sweep covering at least 2π.
pub fn visibility_from_sweep(readout: &MzReadout) -> Result<f64> {
    let phases: Vec<f64> = readout.points.iter().map(|p| p.phase).collect();
    if !sweep_span_ok(&phases) {
        return Err(Error::Visibility("phase sweep must cover 2π".into()));
    }
    let (lo, hi) = readout
        .points
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), p| {
            (a.min(p.middle), b.max(p.middle))
        });
    visibility(hi, lo.max(0.0))
}

/// Least-squares fit `mean + amplitude·cos(φ − phase)` of the overlap bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FringeFit {
    pub mean: f64,
    pub amplitude: f64,
    /// Sweep phase of the maximum, in `(−π, π]`.
    pub phase: f64,
}

impl FringeFit {
    /// `amplitude / mean`, the visibility of the fitted fringe.
    pub fn visibility(&self) -> Result<f64> {
        if !(self.mean > 0.0) {
            return Err(Error::Visibility("no light".into()));
        }
        Ok(self.amplitude / self.mean)
    }
}

pub fn fringe_fit(readout: &MzReadout) -> Result<FringeFit> {
    if readout.points.len() < 3 {
        return Err(Error::Visibility("need at least three sweep points".into()));
    }
    let mut a = [[0.0f64; 3]; 3];
    let mut y = [0.0f64; 3];
    for p in &readout.points {
        let basis = [1.0, p.phase.cos(), p.phase.sin()];
        for r in 0..3 {
            for c in 0..3 {
                a[r][c] += basis[r] * basis[c];
            }
            y[r] += basis[r] * p.middle;
        }
    }
    let c = solve3(a, y).ok_or_else(|| Error::Visibility("degenerate sweep".into()))?;
    Ok(FringeFit {
        mean: c[0],
        amplitude: c[1].hypot(c[2]),
        phase: c[2].atan2(c[1]),
    })
}

/// Sweep phase at which the overlap bin is brightest, from [`fringe_fit`].
pub fn fringe_phase(readout: &MzReadout) -> Result<f64> {
    let f = fringe_fit(readout)?;
    if f.amplitude == 0.0 {
        return Err(Error::Visibility("no fringe".into()));
    }
    Ok(f.phase)
}

fn solve3(mut a: [[f64; 3]; 3], mut y: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        y.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = a[r][col] / a[col][col];
                for k in 0..3 {
                    a[r][k] -= f * a[col][k];
                }
                y[r] -= f * y[col];
            }
        }
    }
    Some([y[0] / a[0][0], y[1] / a[1][1], y[2] / a[2][2]])
}

/// Uniform sweep of `n` steps over `[0, 2π]`, both ends included.
pub fn phase_sweep(n: usize) -> Vec<f64> {
    (0..=n).map(|j| 2.0 * PI * j as f64 / n as f64).collect()
}

/// Power behind an SLM hologram for `target` and a single-mode fibre.
///
/// A single charge uses the fork pattern `−l` followed by the coupler. A
/// superposition target uses the summed pattern, which maps the target
/// onto the Gaussian mode: the result is `Σ_groups |⟨target|state⟩|²`
/// over polarization and time bin, times both efficiencies.
pub fn projective_measurement(
    output: &PulseState,
    target: &[(i32, Complex64)],
    slm_efficiency: f64,
    coupler: &FibreCoupler,
) -> Result<f64> {
    let norm: f64 = target.iter().map(|(_, c)| c.norm_sqr()).sum();
    if target.is_empty() || !(norm > 0.0) {
        return Err(Error::param(
            "target",
            "needs at least one non-zero coefficient",
        ));
    }
    if let [(l, c)] = target {
        if (c.norm_sqr() - 1.0).abs() < 1e-12 {
            let fork = ForkHologram::new(-l, slm_efficiency)?;
            return Ok(coupler.apply(&fork.apply(output)).total_power());
        }
    }
    crate::error::check_unit("slm.diffraction_efficiency", slm_efficiency)?;
    let mut groups: BTreeMap<ModeLabel, Complex64> = BTreeMap::new();
    for (label, a) in output.iter() {
        if label.p != 0 {
            continue;
        }
        for (l, c) in target {
            if label.l == *l {
                *groups.entry(label.with_l(0)).or_default() += c.conj() * a / norm.sqrt();
            }
        }
    }
    let p: f64 = groups.values().map(|a| a.norm_sqr()).sum();
    Ok(p * slm_efficiency * coupler.efficiency)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseShape {
    #[default]
    Gaussian,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformParams {
    /// Round-trip time that spaces the bins, s.
    pub round_trip: f64,
    /// Pulse FWHM (Gaussian) or full width (square), s.
    pub pulse_fwhm: f64,
    /// Detector bandwidth, Hz; `None` for an ideal detector.
    pub bandwidth: Option<f64>,
    pub sample_period: f64,
    pub shape: PulseShape,
}

impl Default for WaveformParams {
    fn default() -> Self {
        Self {
            round_trip: 11e-9,
            pulse_fwhm: 5e-9,
            bandwidth: Some(500e6),
            sample_period: 0.5e-9,
            shape: PulseShape::Gaussian,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    /// Time of the first sample, s.
    pub start: f64,
    pub sample_period: f64,
    pub intensity: Vec<f64>,
}

impl Waveform {
    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 * self.sample_period
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.intensity
            .iter()
            .enumerate()
            .map(|(i, v)| (self.time(i), *v))
    }

    /// `∫ I dt` by the rectangle rule.
    pub fn integral(&self) -> f64 {
        self.intensity.iter().sum::<f64>() * self.sample_period
    }

    /// Indices of local maxima above `fraction` of the global maximum.
    pub fn peaks(&self, fraction: f64) -> Vec<usize> {
        let max = self.intensity.iter().copied().fold(0.0, f64::max);
        let v = &self.intensity;
        (1..v.len().saturating_sub(1))
            .filter(|&i| v[i] > fraction * max && v[i] >= v[i - 1] && v[i] > v[i + 1])
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_ns,intensity\n");
        for (t, v) in self.samples() {
            out.push_str(&format!("{},{}\n", t * 1e9, v));
        }
        out
    }
}

/// Detector trace of a bin train: unit-area pulses at `t0 + bin·T` scaled
/// by bin power, optionally through a single-pole low-pass.
pub fn render_waveform(bins: &PulseState, params: &WaveformParams) -> Result<Waveform> {
    check_positive("round_trip", params.round_trip)?;
    check_positive("pulse_fwhm", params.pulse_fwhm)?;
    check_positive("sample_period", params.sample_period)?;
    if params.pulse_fwhm >= params.round_trip {
        return Err(Error::param(
            "pulse_fwhm",
            "pulses must be shorter than the bin spacing",
        ));
    }
    if let Some(bw) = params.bandwidth {
        check_positive("bandwidth", bw)?;
    }
    let mut power: BTreeMap<i32, f64> = BTreeMap::new();
    for (l, a) in bins.iter() {
        *power.entry(l.bin).or_default() += a.norm_sqr();
    }
    let (first, last) = match (power.keys().next(), power.keys().next_back()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => (0, 0),
    };
    let t0 = bins.t0();
    let pad = 3.0 * params.pulse_fwhm;
    let tail = params.bandwidth.map_or(0.0, |bw| 12.0 / (2.0 * PI * bw));
    let start = t0 + first as f64 * params.round_trip - pad;
    let stop = t0 + last as f64 * params.round_trip + pad + tail;
    let n = ((stop - start) / params.sample_period).ceil() as usize + 1;

    let sigma = params.pulse_fwhm / (2.0 * (2.0 * LN_2).sqrt());
    let mut intensity: Vec<f64> = (0..n)
        .map(|i| {
            let t = start + i as f64 * params.sample_period;
            power
                .iter()
                .map(|(b, p)| {
                    let dt = t - (t0 + *b as f64 * params.round_trip);
                    p * match params.shape {
                        PulseShape::Gaussian => {
                            (-dt * dt / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt())
                        }
                        PulseShape::Square => {
                            if dt.abs() < params.pulse_fwhm / 2.0 {
                                1.0 / params.pulse_fwhm
                            } else {
                                0.0
                            }
                        }
                    }
                })
                .sum()
        })
        .collect();

    if let Some(bw) = params.bandwidth {
        let k = 1.0 - (-2.0 * PI * bw * params.sample_period).exp();
        let mut y = 0.0;
        for v in intensity.iter_mut() {
            y += k * (*v - y);
            *v = y;
        }
    }
    Ok(Waveform {
        start,
        sample_period: params.sample_period,
        intensity,
    })
}
