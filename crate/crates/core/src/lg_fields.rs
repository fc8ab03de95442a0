//! Laguerre–Gaussian transverse fields, overlaps and mirror-image fringes.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::Arc;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{check_positive, Error, Result};

/// Beam parameters of an LG family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LgParams {
    /// Waist radius, m.
    pub waist: f64,
    /// Rayleigh range, m.
    pub rayleigh_range: f64,
    /// Wavenumber, 1/m.
    pub wavenumber: f64,
    /// Wavelength, m.
    pub wavelength: f64,
}

impl LgParams {
    pub fn new(waist: f64, wavelength: f64) -> Result<Self> {
        check_positive("waist", waist)?;
        check_positive("wavelength", wavelength)?;
        Ok(Self {
            waist,
            rayleigh_range: PI * waist * waist / wavelength,
            wavenumber: 2.0 * PI / wavelength,
            wavelength,
        })
    }

    /// Checks a fully specified parameter set for consistency.
    pub fn validate(&self) -> Result<()> {
        let expect = Self::new(self.waist, self.wavelength)?;
        for (name, got, want) in [
            ("rayleigh_range", self.rayleigh_range, expect.rayleigh_range),
            ("wavenumber", self.wavenumber, expect.wavenumber),
        ] {
            if !((got - want).abs() <= 1e-9 * want) {
                return Err(Error::param(
                    name,
                    format!("{got} inconsistent with waist/wavelength ({want})"),
                ));
            }
        }
        Ok(())
    }

    pub fn beam_radius(&self, z: f64) -> f64 {
        let u = z / self.rayleigh_range;
        self.waist * (1.0 + u * u).sqrt()
    }
}

/// Generalised Laguerre polynomial `L_p^a(x)` by the three-term recurrence.
pub fn laguerre(p: u32, a: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if p == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - x;
    for k in 1..p {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + a - x) * cur - (k + a) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

fn ln_factorial(n: u32) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Radial part normalised so that `∫|u|² dA = 1`, without the azimuthal
/// and propagation phases.
fn radial_amplitude(w: f64, p: u32, al: u32, r: f64) -> f64 {
    let ln_norm = 0.5 * ((2.0f64).ln() + ln_factorial(p) - PI.ln() - ln_factorial(p + al));
    let rho = r * 2f64.sqrt() / w;
    let x = 2.0 * r * r / (w * w);
    ln_norm.exp() / w * rho.powi(al as i32) * (-r * r / (w * w)).exp() * laguerre(p, al as f64, x)
}

/// Complex field of `LG_{p,l}` at `(r, α, z)`.
pub fn lg_field(params: &LgParams, p: u32, l: i32, z: f64, r: f64, alpha: f64) -> Complex64 {
    let w = params.beam_radius(z);
    let al = l.unsigned_abs();
    let zr = params.rayleigh_range;
    let amp = radial_amplitude(w, p, al, r);
    let curvature = params.wavenumber * r * r * z / (2.0 * (z * z + zr * zr));
    let gouy = (2 * p + al + 1) as f64 * (z / zr).atan();
    Complex64::from_polar(amp, l as f64 * alpha + curvature - gouy)
}

/// Polar quadrature: Gauss–Legendre in `r`, uniform in `α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapGrid {
    pub n_r: usize,
    pub n_alpha: usize,
    /// Radial extent as a multiple of the larger beam radius.
    pub extent: f64,
}

impl Default for OverlapGrid {
    fn default() -> Self {
        Self {
            n_r: 256,
            n_alpha: 512,
            extent: 4.0,
        }
    }
}

fn check_grid(grid: &OverlapGrid, (pa, la): (u32, i32), (pb, lb): (u32, i32)) -> Result<()> {
    if grid.extent < 4.0 {
        return Err(Error::UnderResolvedGrid(format!(
            "radial extent {} beam radii is below 4",
            grid.extent
        )));
    }
    let dl = (la - lb).unsigned_abs() as usize;
    if grid.n_alpha == 0
        || 2 * dl
            .max(la.unsigned_abs() as usize)
            .max(lb.unsigned_abs() as usize)
            >= grid.n_alpha
    {
        return Err(Error::UnderResolvedGrid(format!(
            "{} angular points cannot resolve l = {la}, {lb}",
            grid.n_alpha
        )));
    }
    let order = (2 * pa.max(pb) + la.unsigned_abs().max(lb.unsigned_abs()) + 1) as usize;
    if grid.n_r < 8 * order {
        return Err(Error::UnderResolvedGrid(format!(
            "{} radial points are too few for mode order {order}",
            grid.n_r
        )));
    }
    Ok(())
}

/// `⟨a|b⟩ = ∫ conj(LG_a) LG_b dA` at plane `z` on the default grid.
pub fn mode_overlap(
    a: &LgParams,
    (pa, la): (u32, i32),
    b: &LgParams,
    (pb, lb): (u32, i32),
    z: f64,
) -> Result<Complex64> {
    mode_overlap_on(a, (pa, la), b, (pb, lb), z, &OverlapGrid::default())
}

pub fn mode_overlap_on(
    a: &LgParams,
    (pa, la): (u32, i32),
    b: &LgParams,
    (pb, lb): (u32, i32),
    z: f64,
    grid: &OverlapGrid,
) -> Result<Complex64> {
    check_grid(grid, (pa, la), (pb, lb))?;
    let rmax = grid.extent * a.beam_radius(z).max(b.beam_radius(z));
    let rule = GaussLegendre::new(NonZeroUsize::new(grid.n_r).expect("checked above"));
    let da = 2.0 * PI / grid.n_alpha as f64;
    let sum: Complex64 = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, wt)| {
            let r = 0.5 * rmax * (x + 1.0);
            let ring: Complex64 = (0..grid.n_alpha)
                .map(|j| {
                    let alpha = j as f64 * da;
                    lg_field(a, pa, la, z, r, alpha).conj() * lg_field(b, pb, lb, z, r, alpha)
                })
                .sum();
            ring * (wt * 0.5 * rmax * r * da)
        })
        .sum();
    Ok(sum)
}

/// Gram matrix `⟨m_i|m_j⟩` of one beam family on `grid`, each field
/// evaluated once.
pub fn overlap_matrix(
    params: &LgParams,
    modes: &[(u32, i32)],
    z: f64,
    grid: &OverlapGrid,
) -> Result<Vec<Vec<Complex64>>> {
    for &a in modes {
        for &b in modes {
            check_grid(grid, a, b)?;
        }
    }
    let rmax = grid.extent * params.beam_radius(z);
    let rule = GaussLegendre::new(
        NonZeroUsize::new(grid.n_r).ok_or_else(|| Error::UnderResolvedGrid("n_r = 0".into()))?,
    );
    let da = 2.0 * PI / grid.n_alpha as f64;
    let nodes: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, wt)| {
            let r = 0.5 * rmax * (x + 1.0);
            (r, (wt * 0.5 * rmax * r * da).sqrt())
        })
        .collect();
    // fields pre-multiplied by the square root of the quadrature weight
    let fields: Vec<Vec<Complex64>> = modes
        .par_iter()
        .map(|&(p, l)| {
            nodes
                .iter()
                .flat_map(|&(r, w)| {
                    (0..grid.n_alpha).map(move |j| lg_field(params, p, l, z, r, j as f64 * da) * w)
                })
                .collect()
        })
        .collect();
    Ok((0..modes.len())
        .into_par_iter()
        .map(|i| {
            (0..modes.len())
                .map(|j| {
                    fields[i]
                        .iter()
                        .zip(&fields[j])
                        .map(|(a, b)| a.conj() * b)
                        .sum()
                })
                .collect()
        })
        .collect())
}

/// Intensity samples on a uniform polar grid. Row `i` is radius
/// `(i + 0.5)·extent/n_r`, column `j` is angle `2πj/n_alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityGrid {
    pub n_r: usize,
    pub n_alpha: usize,
    pub radial_extent: f64,
    values: Vec<f64>,
}

impl IntensityGrid {
    pub fn new(n_r: usize, n_alpha: usize, radial_extent: f64, values: Vec<f64>) -> Result<Self> {
        if n_alpha == 0 || n_alpha % 2 != 0 {
            return Err(Error::param("n_alpha", "must be even and > 0"));
        }
        if values.len() != n_r * n_alpha {
            return Err(Error::param("values", "length must be n_r * n_alpha"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::param(
                "values",
                "intensities must be finite and >= 0",
            ));
        }
        check_positive("radial_extent", radial_extent)?;
        Ok(Self {
            n_r,
            n_alpha,
            radial_extent,
            values,
        })
    }

    pub fn radius(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.radial_extent / self.n_r as f64
    }

    pub fn angle(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_alpha as f64
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_alpha..(i + 1) * self.n_alpha]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// The grid rotated by `angle` about the axis, by band-limited
    /// interpolation of each ring.
    pub fn rotated(&self, angle: f64) -> IntensityGrid {
        let n = self.n_alpha;
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..self.n_r {
            let mut buf: Vec<Complex64> = self
                .row(i)
                .iter()
                .map(|v| Complex64::new(*v, 0.0))
                .collect();
            fwd.process(&mut buf);
            for (m, c) in buf.iter_mut().enumerate() {
                // the Nyquist term is dropped to keep the row real
                if m == n / 2 {
                    *c = Complex64::new(0.0, 0.0);
                } else {
                    let k = if m < n / 2 {
                        m as f64
                    } else {
                        m as f64 - n as f64
                    };
                    *c *= Complex64::from_polar(1.0, -k * angle);
                }
            }
            inv.process(&mut buf);
            values.extend(buf.iter().map(|c| (c.re / n as f64).max(0.0)));
        }
        IntensityGrid {
            values,
            ..self.clone()
        }
    }

    /// ASCII PGM (P2) rendering with the rows as radii and columns as angles.
    pub fn to_pgm(&self) -> String {
        let max = self.max_value();
        let mut out = format!("P2\n{} {}\n255\n", self.n_alpha, self.n_r);
        for i in 0..self.n_r {
            let line: Vec<String> = self
                .row(i)
                .iter()
                .map(|v| {
                    let g = if max > 0.0 {
                        (v / max * 255.0).round()
                    } else {
                        0.0
                    };
                    (g as u32).to_string()
                })
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Default pattern resolution.
pub const PATTERN_N_R: usize = 128;
pub const PATTERN_N_ALPHA: usize = 256;

/// `|LG_{0,l} + LG_{0,−l}|²` over a disk of radius `4 w(z)`.
pub fn mirror_interference_pattern(params: &LgParams, l: u32, z: f64) -> IntensityGrid {
    mirror_interference_pattern_on(params, l, z, PATTERN_N_R, PATTERN_N_ALPHA)
}

pub fn mirror_interference_pattern_on(
    params: &LgParams,
    l: u32,
    z: f64,
    n_r: usize,
    n_alpha: usize,
) -> IntensityGrid {
    let extent = 4.0 * params.beam_radius(z);
    let l = l as i32;
    let values: Vec<f64> = (0..n_r)
        .into_par_iter()
        .flat_map_iter(|i| {
            let r = (i as f64 + 0.5) * extent / n_r as f64;
            (0..n_alpha).map(move |j| {
                let a = 2.0 * PI * j as f64 / n_alpha as f64;
                (lg_field(params, 0, l, z, r, a) + lg_field(params, 0, -l, z, r, a)).norm_sqr()
            })
        })
        .collect();
    IntensityGrid {
        n_r,
        n_alpha,
        radial_extent: extent,
        values,
    }
}

/// Dominant non-zero azimuthal harmonic on the brightest ring, or 0 when
/// the ring is uniform to one part in 10⁶.
pub fn count_fringes(grid: &IntensityGrid) -> Result<u32> {
    let n = grid.n_alpha;
    let (best, mean) = (0..grid.n_r)
        .map(|i| (i, grid.row(i).iter().sum::<f64>() / n as f64))
        .fold((0, 0.0), |acc, (i, m)| if m > acc.1 { (i, m) } else { acc });
    if !(mean > 0.0) {
        return Err(Error::NoBrightRing);
    }
    let fft: Arc<dyn rustfft::Fft<f64>> = FftPlanner::new().plan_fft_forward(n);
    let mut buf: Vec<Complex64> = grid
        .row(best)
        .iter()
        .map(|v| Complex64::new(*v, 0.0))
        .collect();
    fft.process(&mut buf);
    let dc = buf[0].norm();
    let (m, mag) = (1..=n / 2)
        .map(|m| (m, buf[m].norm()))
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    Ok(if mag <= 1e-6 * dc { 0 } else { m as u32 })
}
