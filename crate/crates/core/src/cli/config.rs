//! Run configuration: TOML with unit-suffixed keys, layered over a built-in
//! profile.
//!
//! A profile is itself a complete document. The user file is merged on top
//! of it key by key and the result is parsed strictly, so a misspelt key is
//! an error rather than a silently ignored line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{PulseShape, WaveformParams};
use crate::cavity::{
    CavityParams, IdealCavity, LockRun, LockState, LockedCavity, ModeFilter, C_CODATA,
};
use crate::error::{Error, Result};
use crate::lg_fields::{LgParams, OverlapGrid};
use crate::mode_algebra::PulseState;
use crate::transcoder::{LoopParams, MzParams, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Parameters of the built loop and cavity.
    #[serde(rename = "paper-2016")]
    Paper2016,
    /// Lossless loop around a perfect mode filter.
    Ideal,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Paper2016 => "paper-2016",
            Profile::Ideal => "ideal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "paper-2016" => Ok(Profile::Paper2016),
            "ideal" => Ok(Profile::Ideal),
            other => Err(Error::Config(format!(
                "unknown profile `{other}` (expected paper-2016 or ideal)"
            ))),
        }
    }

    pub fn file(self) -> ConfigFile {
        match self {
            Profile::Paper2016 => ConfigFile::paper_2016(),
            Profile::Ideal => ConfigFile::ideal(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Forward,
    Reverse,
    CavitySpectrum,
    FringePattern,
    Crosstalk,
    Visibility,
    Sweep,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Forward => "forward",
            Scenario::Reverse => "reverse",
            Scenario::CavitySpectrum => "cavity-spectrum",
            Scenario::FringePattern => "fringe-pattern",
            Scenario::Crosstalk => "crosstalk",
            Scenario::Visibility => "visibility",
            Scenario::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CavityModel {
    /// Airy response of the configured mirrors at the lock point.
    Airy,
    /// Gaussian passes, everything else reflects.
    Ideal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub model: CavityModel,
    pub reflectivity: f64,
    pub d_mm: f64,
    pub refractive_index: f64,
    /// Radii of curvature; 0 means a plane mirror.
    pub rc1_mm: f64,
    pub rc2_mm: f64,
    pub lock_offset_mhz: f64,
    pub speed_of_light_m_per_s: f64,
    pub wavelength_nm: f64,
    pub peak_transmission: f64,
    pub reflection_cap: f64,
    /// Extra transmission factor per `|l|`, keyed by the charge as a string.
    pub overlap_attenuation: BTreeMap<String, f64>,
    /// Span of the emitted spectrum around the LG00 resonance, in FSR.
    pub spectrum_span_fsr: f64,
    pub spectrum_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSection {
    #[serde(rename = "T_ns")]
    pub t_ns: f64,
    pub t0_ns: f64,
    pub max_loops: u32,
    pub eom_transmission: f64,
    pub eom_passes: u32,
    pub vpp_transmission: f64,
    pub charge_step: i32,
    pub vpp_unshifted_fraction: f64,
    pub qwp_transmission: f64,
    pub qwp_passes: u32,
    pub hwp_transmission: f64,
    pub hwp_passes: u32,
    pub four_f_transmission: f64,
    pub four_f_passes: u32,
    pub mirror_reflectivity: f64,
    pub mirror_count: u32,
    pub pbs_transmission: f64,
    /// Omitted: chosen so the forward round trip transmits `target_per_loop`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reentry_coupling: Option<f64>,
    pub target_per_loop: f64,
    /// Intensity fraction coupled into each of `l ± 1`.
    pub reentry_neighbour_fraction: f64,
    pub port_coupling: f64,
    pub port_neighbour_fraction: f64,
    pub output_coupling: f64,
    pub eom_lead_ns: f64,
    pub gate_window_ns: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gate_windows_ns: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MzSection {
    pub arm_delay_m: f64,
    pub splitting: f64,
    pub relative_phase_rad: f64,
    /// Omitted: 1, or the per-loop transmission when `compensate` is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub long_arm_transmission: Option<f64>,
    pub compensate: bool,
    /// Mutual coherence of the recombined bins per loop pass, 0..1.
    pub coherence_per_loop: f64,
    /// Relative RMS of run-to-run intensity noise on the late bin.
    pub intensity_jitter: f64,
    pub jitter_runs: usize,
    pub phase_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LgSection {
    /// Omitted: the waist of the cavity eigenmode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub waist_um: Option<f64>,
    /// Omitted: the cavity wavelength.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavelength_nm: Option<f64>,
    pub z_mm: f64,
    pub n_r: usize,
    pub n_alpha: usize,
    pub extent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub fwhm_ns: f64,
    pub shape: PulseShape,
    /// 0 disables the detector low-pass.
    pub bandwidth_mhz: f64,
    pub sample_period_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockSection {
    pub gain_p: f64,
    pub gain_i: f64,
    pub steps: usize,
    pub dt_us: f64,
    pub noise_nm: f64,
    pub drift_nm: f64,
    pub step_nm: f64,
    pub step_at: usize,
    /// Index from which the residual is evaluated.
    pub settle_steps: usize,
    /// Use the final length error of the lock run as the cavity state.
    pub apply_to_cavity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    /// Largest charge (forward) or delay (reverse) in the basis tables.
    pub max_label: u32,
    /// Path to a state JSON; omitted for the equal superposition of the basis.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<PathBuf>,
    pub prune_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlmSection {
    pub diffraction_efficiency: f64,
    pub fibre_coupling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FringeSection {
    pub charges: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    ReentryCoupling,
    MirrorReflectivity,
    EomTransmission,
    Reflectivity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

/// The document as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub cavity: CavitySection,
    #[serde(rename = "loop")]
    pub loop_: LoopSection,
    pub mz: MzSection,
    pub lg: LgSection,
    pub pulse: PulseSection,
    pub lock: LockSection,
    pub input: InputSection,
    pub slm: SlmSection,
    pub fringe: FringeSection,
    pub sweep: SweepSection,
}

impl ConfigFile {
    pub fn paper_2016() -> Self {
        Self {
            scenario: None,
            seed: 0,
            output_dir: None,
            cavity: CavitySection {
                model: CavityModel::Airy,
                reflectivity: 0.95,
                d_mm: 10.0,
                refractive_index: 1.0,
                rc1_mm: 50.0,
                rc2_mm: 50.0,
                lock_offset_mhz: 0.0,
                speed_of_light_m_per_s: 3.0e8,
                wavelength_nm: 795.0,
                peak_transmission: 0.90,
                reflection_cap: 0.95,
                overlap_attenuation: BTreeMap::new(),
                spectrum_span_fsr: 1.0,
                spectrum_points: 4001,
            },
            loop_: LoopSection {
                t_ns: 11.0,
                t0_ns: 0.0,
                max_loops: 12,
                eom_transmission: 0.90,
                eom_passes: 2,
                vpp_transmission: 0.90,
                charge_step: 1,
                vpp_unshifted_fraction: 0.005,
                qwp_transmission: 0.99,
                qwp_passes: 2,
                hwp_transmission: 0.99,
                hwp_passes: 1,
                four_f_transmission: 0.99,
                four_f_passes: 2,
                mirror_reflectivity: 0.99,
                mirror_count: 12,
                pbs_transmission: 0.99,
                reentry_coupling: None,
                target_per_loop: 0.485,
                reentry_neighbour_fraction: 1e-3,
                port_coupling: 0.85,
                port_neighbour_fraction: 1e-3,
                output_coupling: 1.0,
                eom_lead_ns: 2.0,
                gate_window_ns: 8.0,
                gate_windows_ns: None,
            },
            mz: MzSection {
                arm_delay_m: 3.3,
                splitting: 0.5,
                relative_phase_rad: 0.0,
                long_arm_transmission: None,
                compensate: false,
                coherence_per_loop: 1.0,
                intensity_jitter: 0.0,
                jitter_runs: 1,
                phase_points: 64,
            },
            lg: LgSection {
                waist_um: None,
                wavelength_nm: None,
                z_mm: 0.0,
                n_r: 256,
                n_alpha: 512,
                extent: 4.0,
            },
            pulse: PulseSection {
                fwhm_ns: 5.0,
                shape: PulseShape::Gaussian,
                bandwidth_mhz: 500.0,
                sample_period_ns: 0.5,
            },
            lock: LockSection {
                gain_p: 0.3,
                gain_i: 0.05,
                steps: 10_000,
                dt_us: 10.0,
                noise_nm: 0.05,
                drift_nm: 0.001,
                step_nm: 3.0,
                step_at: 2_000,
                settle_steps: 2_500,
                apply_to_cavity: false,
            },
            input: InputSection {
                max_label: 3,
                state: None,
                prune_threshold: crate::mode_algebra::DEFAULT_PRUNE_THRESHOLD,
            },
            slm: SlmSection {
                diffraction_efficiency: 1.0,
                fibre_coupling: 1.0,
            },
            fringe: FringeSection {
                charges: (0..=5).collect(),
            },
            sweep: SweepSection {
                parameter: SweepParameter::ReentryCoupling,
                from: 0.5,
                to: 1.0,
                points: 11,
            },
        }
    }

    pub fn ideal() -> Self {
        let mut f = Self::paper_2016();
        f.cavity.model = CavityModel::Ideal;
        f.cavity.peak_transmission = 1.0;
        f.cavity.reflection_cap = 1.0;
        f.cavity.speed_of_light_m_per_s = C_CODATA;
        let l = &mut f.loop_;
        for t in [
            &mut l.eom_transmission,
            &mut l.vpp_transmission,
            &mut l.qwp_transmission,
            &mut l.hwp_transmission,
            &mut l.four_f_transmission,
            &mut l.mirror_reflectivity,
            &mut l.pbs_transmission,
            &mut l.port_coupling,
        ] {
            *t = 1.0;
        }
        l.target_per_loop = 1.0;
        l.vpp_unshifted_fraction = 0.0;
        l.reentry_neighbour_fraction = 0.0;
        l.port_neighbour_fraction = 0.0;
        f.lock.noise_nm = 0.0;
        f.lock.drift_nm = 0.0;
        f
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub profile: Profile,
    pub file: ConfigFile,
    pub cavity: CavityParams,
    pub cavity_model: CavityModel,
    pub loop_params: LoopParams,
    pub mz: MzParams,
    pub lg: LgParams,
    pub lg_z: f64,
    pub grid: OverlapGrid,
    pub waveform: WaveformParams,
    pub lock: LockState,
    pub lock_run: LockRun,
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_table() && v.is_table() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// Parses `text` over `profile` and validates the result.
pub fn parse_config(text: &str, profile: Profile) -> Result<RunConfig> {
    let user: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut base =
        toml::Value::try_from(profile.file()).map_err(|e| Error::Config(e.to_string()))?;
    merge(&mut base, user);
    let file: ConfigFile = base
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    resolve(file, profile)
}

/// Reads and validates a config file; a missing path gives the profile as is.
pub fn load_config(path: Option<&Path>, profile: Profile) -> Result<RunConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|source| Error::Io {
            path: p.display().to_string(),
            source,
        })?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text, profile)?;
    // relative state paths are taken relative to the config file
    if let (Some(p), Some(state)) = (path, cfg.file.input.state.clone()) {
        if state.is_relative() {
            if let Some(dir) = p.parent() {
                cfg.file.input.state = Some(dir.join(state));
            }
        }
    }
    Ok(cfg)
}

fn named(field: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { reason, .. } => Error::param(field, reason),
        other => other,
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    crate::error::check_positive(field, v)
}

fn curvature(field: &str, mm: f64) -> Result<f64> {
    if mm == 0.0 {
        Ok(f64::INFINITY)
    } else if mm > 0.0 && mm.is_finite() {
        Ok(mm / 1e3)
    } else {
        Err(Error::param(
            field,
            format!("{mm} must be > 0 (0 for a plane mirror)"),
        ))
    }
}

/// Waist of the fundamental mode of a two-mirror cavity.
pub fn cavity_mode_waist(c: &CavityParams) -> Result<f64> {
    let (g1, g2) = c.g_factors();
    let g = g1 * g2;
    if !(g > 0.0 && g < 1.0) {
        return Err(Error::UnstableCavity(g));
    }
    let lambda = c.wavelength / c.refractive_index;
    let w4 = (lambda * c.spacing / std::f64::consts::PI).powi(2) * g1 * g2 * (1.0 - g)
        / ((g1 + g2 - 2.0 * g).powi(2));
    Ok(w4.sqrt().sqrt())
}

fn resolve(file: ConfigFile, profile: Profile) -> Result<RunConfig> {
    let c = &file.cavity;
    positive("cavity.d_mm", c.d_mm)?;
    positive("cavity.wavelength_nm", c.wavelength_nm)?;
    positive("cavity.speed_of_light_m_per_s", c.speed_of_light_m_per_s)?;
    let mut attenuation = BTreeMap::new();
    for (k, v) in &c.overlap_attenuation {
        let l: u32 = k.parse().map_err(|_| {
            Error::param(
                "cavity.overlap_attenuation",
                format!("key `{k}` is not a charge"),
            )
        })?;
        attenuation.insert(l, *v);
    }
    let cavity = CavityParams {
        reflectivity: c.reflectivity,
        spacing: c.d_mm / 1e3,
        refractive_index: c.refractive_index,
        curvature_1: curvature("cavity.rc1_mm", c.rc1_mm)?,
        curvature_2: curvature("cavity.rc2_mm", c.rc2_mm)?,
        lock_offset: c.lock_offset_mhz * 1e6,
        speed_of_light: c.speed_of_light_m_per_s,
        wavelength: c.wavelength_nm / 1e9,
        peak_transmission: c.peak_transmission,
        reflection_cap: c.reflection_cap,
        overlap_attenuation: attenuation,
    };
    cavity.validate().map_err(|e| match &e {
        Error::InvalidParameter { field, .. } => {
            let f = match field.as_str() {
                "spacing" => "cavity.d_mm".to_string(),
                "reflectivity" => "cavity.reflectivity".to_string(),
                other => format!("cavity.{other}"),
            };
            named(&f, e)
        }
        _ => e,
    })?;
    positive("cavity.spectrum_span_fsr", c.spectrum_span_fsr)?;
    if c.spectrum_points < 2 {
        return Err(Error::param("cavity.spectrum_points", "need at least 2"));
    }

    let l = &file.loop_;
    positive("loop.T_ns", l.t_ns)?;
    let mut lp = LoopParams {
        round_trip: l.t_ns / 1e9,
        t0: l.t0_ns / 1e9,
        max_loops: l.max_loops,
        eom: Stage::new(l.eom_transmission, l.eom_passes),
        vpp_transmission: l.vpp_transmission,
        vpp_charge_step: l.charge_step,
        vpp_unshifted_fraction: l.vpp_unshifted_fraction,
        qwp: Stage::new(l.qwp_transmission, l.qwp_passes),
        hwp: Stage::new(l.hwp_transmission, l.hwp_passes),
        four_f: Stage::new(l.four_f_transmission, l.four_f_passes),
        mirrors: Stage::new(l.mirror_reflectivity, l.mirror_count),
        pbs_transmission: l.pbs_transmission,
        reentry_coupling: 1.0,
        reentry_neighbour_fraction: 0.0,
        port_coupling: l.port_coupling,
        port_neighbour_fraction: 0.0,
        output_coupling: l.output_coupling,
        eom_lead: l.eom_lead_ns / 1e9,
        gate_window: l.gate_window_ns / 1e9,
        manual_gates: l
            .gate_windows_ns
            .as_ref()
            .map(|w| w.iter().map(|[a, b]| (a / 1e9, b / 1e9)).collect()),
    };
    lp.reentry_coupling = match l.reentry_coupling {
        Some(v) => v,
        None => {
            crate::error::check_unit("loop.target_per_loop", l.target_per_loop)?;
            let comp = lp.component_transmission(crate::transcoder::Mode::Forward);
            if !(comp > 0.0) || l.target_per_loop > comp {
                return Err(Error::param(
                    "loop.target_per_loop",
                    format!(
                        "{} exceeds the component transmission {comp}",
                        l.target_per_loop
                    ),
                ));
            }
            l.target_per_loop / comp
        }
    };
    lp.reentry_neighbour_fraction = l.reentry_neighbour_fraction;
    lp.port_neighbour_fraction = l.port_neighbour_fraction;
    lp.validate().map_err(|e| match &e {
        Error::InvalidParameter { field, .. } => {
            let f = match field.as_str() {
                "round_trip" => "loop.T_ns",
                "gate_window" => "loop.gate_window_ns",
                "gate_windows_ns" => "loop.gate_windows_ns",
                "eom_lead" => "loop.eom_lead_ns",
                "t0" => "loop.t0_ns",
                "mirrors.passes" => "loop.mirror_count",
                "mirrors.transmission" => "loop.mirror_reflectivity",
                "vpp.charge_step" => "loop.charge_step",
                other => return named(&format!("loop.{}", other.replace('.', "_")), e),
            };
            named(f, e)
        }
        _ => e,
    })?;

    let m = &file.mz;
    positive("mz.arm_delay_m", m.arm_delay_m)?;
    crate::error::check_unit("mz.coherence_per_loop", m.coherence_per_loop)?;
    if !(m.intensity_jitter >= 0.0 && m.intensity_jitter.is_finite()) {
        return Err(Error::param(
            "mz.intensity_jitter",
            "must be finite and >= 0",
        ));
    }
    if m.jitter_runs == 0 {
        return Err(Error::param("mz.jitter_runs", "must be >= 1"));
    }
    if m.phase_points < 4 {
        return Err(Error::param("mz.phase_points", "need at least 4"));
    }
    let long = match (m.long_arm_transmission, m.compensate) {
        (Some(v), _) => v,
        (None, true) => lp.per_loop_transmission(),
        (None, false) => 1.0,
    };
    let mz = MzParams {
        arm_delay: m.arm_delay_m / C_CODATA,
        splitting: m.splitting,
        relative_phase: m.relative_phase_rad,
        long_arm_transmission: long,
        coherence: m.coherence_per_loop,
    };
    mz.validate().map_err(|e| match &e {
        Error::InvalidParameter { field, .. } => named(&format!("mz.{field}"), e),
        _ => e,
    })?;
    mz.bin_shift(lp.round_trip).map_err(|e| match e {
        Error::ArmDelayMismatch { .. } => Error::param("mz.arm_delay_m", e.to_string()),
        e => e,
    })?;

    let g = &file.lg;
    let waist = match g.waist_um {
        Some(w) => {
            positive("lg.waist_um", w)?;
            w / 1e6
        }
        None => cavity_mode_waist(&cavity)?,
    };
    let wavelength = match g.wavelength_nm {
        Some(w) => {
            positive("lg.wavelength_nm", w)?;
            w / 1e9
        }
        None => cavity.wavelength,
    };
    let lg = LgParams::new(waist, wavelength)?;
    if !g.z_mm.is_finite() {
        return Err(Error::param("lg.z_mm", "must be finite"));
    }
    let grid = OverlapGrid {
        n_r: g.n_r,
        n_alpha: g.n_alpha,
        extent: g.extent,
    };
    if g.n_r < 8 || g.n_alpha < 8 || g.n_alpha % 2 != 0 {
        return Err(Error::param(
            "lg.n_r",
            "grid needs n_r >= 8 and an even n_alpha >= 8",
        ));
    }
    positive("lg.extent", g.extent)?;

    let p = &file.pulse;
    positive("pulse.fwhm_ns", p.fwhm_ns)?;
    positive("pulse.sample_period_ns", p.sample_period_ns)?;
    if p.fwhm_ns >= l.t_ns {
        return Err(Error::param(
            "pulse.fwhm_ns",
            "pulses must be shorter than loop.T_ns",
        ));
    }
    if !(p.bandwidth_mhz >= 0.0 && p.bandwidth_mhz.is_finite()) {
        return Err(Error::param(
            "pulse.bandwidth_mhz",
            "must be finite and >= 0",
        ));
    }
    let waveform = WaveformParams {
        round_trip: lp.round_trip,
        pulse_fwhm: p.fwhm_ns / 1e9,
        bandwidth: (p.bandwidth_mhz > 0.0).then_some(p.bandwidth_mhz * 1e6),
        sample_period: p.sample_period_ns / 1e9,
        shape: p.shape,
    };

    let k = &file.lock;
    positive("lock.dt_us", k.dt_us)?;
    for (name, v) in [
        ("lock.gain_p", k.gain_p),
        ("lock.gain_i", k.gain_i),
        ("lock.noise_nm", k.noise_nm),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::param(name, "must be finite and >= 0"));
        }
    }
    let lock = LockState {
        noise_rms: k.noise_nm / 1e9,
        gain_p: k.gain_p,
        gain_i: k.gain_i,
        ..LockState::default()
    };
    let lock_run = LockRun {
        steps: k.steps,
        dt: k.dt_us / 1e6,
        drift: k.drift_nm / 1e9,
        step: (k.step_nm != 0.0).then_some((k.step_at, k.step_nm / 1e9)),
        seed: file.seed,
    };

    if !(file.input.prune_threshold >= 0.0 && file.input.prune_threshold.is_finite()) {
        return Err(Error::param(
            "input.prune_threshold",
            "must be finite and >= 0",
        ));
    }
    if file.input.max_label > lp.max_loops {
        return Err(Error::param("input.max_label", "exceeds loop.max_loops"));
    }
    crate::error::check_unit(
        "slm.diffraction_efficiency",
        file.slm.diffraction_efficiency,
    )?;
    crate::error::check_unit("slm.fibre_coupling", file.slm.fibre_coupling)?;
    let s = &file.sweep;
    if s.points < 1 {
        return Err(Error::param("sweep.points", "must be >= 1"));
    }
    if !(s.from.is_finite() && s.to.is_finite()) {
        return Err(Error::param("sweep.from", "bounds must be finite"));
    }

    Ok(RunConfig {
        profile,
        cavity_model: c.model,
        cavity,
        loop_params: lp,
        mz,
        lg,
        lg_z: g.z_mm / 1e3,
        grid,
        waveform,
        lock,
        lock_run,
        file,
    })
}

impl RunConfig {
    /// The mode filter used by loop scenarios. With `lock.apply_to_cavity`
    /// the seeded lock run decides the length error at injection.
    pub fn mode_filter(&self) -> Result<Box<dyn ModeFilter>> {
        match self.cavity_model {
            CavityModel::Ideal => Ok(Box::new(IdealCavity {
                peak_transmission: self.cavity.peak_transmission,
            })),
            CavityModel::Airy => {
                let mut lock = LockState {
                    noise_rms: 0.0,
                    ..self.lock
                };
                if self.file.lock.apply_to_cavity {
                    let tr =
                        crate::cavity::simulate_lock(&self.cavity, &self.lock, &self.lock_run)?;
                    lock.length_error = tr.length_error.last().copied().unwrap_or(0.0);
                }
                Ok(Box::new(LockedCavity::new(self.cavity.clone(), lock)?))
            }
        }
    }

    /// Input state from `input.state`, or `default` when none is given.
    pub fn input_state(&self, default: impl FnOnce() -> Result<PulseState>) -> Result<PulseState> {
        let s = match &self.file.input.state {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| Error::Io {
                    path: p.display().to_string(),
                    source,
                })?;
                serde_json::from_str::<PulseState>(&text)?
            }
            None => default()?,
        };
        Ok(s.with_prune_threshold(self.file.input.prune_threshold))
    }
}
