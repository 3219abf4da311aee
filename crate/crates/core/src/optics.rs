//! Transverse optical fields for OAM eigenstates and their superpositions.
//!
//! Every OAM charge `m` is given the Laguerre-Gauss radial profile with
//! radial index 0, sampled at the waist plane with a single common waist.
//! Fields live on a square `n x n` grid centred on pixel `(n/2, n/2)`;
//! column index is `x`, row index is `y`.

use std::f64::consts::{PI, TAU};

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mub::{norm, State};

/// OAM charges of the qutrit rows `|-1>, |0>, |+1>`.
pub const QUTRIT_CHARGES: [i32; 3] = [-1, 0, 1];

/// OAM charges of the pure-OAM qusix logical basis.
pub const QUSIX_CHARGES: [i32; 6] = [-3, -2, -1, 1, 2, 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Pixels per side, a power of two, at least 64.
    pub n: usize,
    /// Half-width of the window in units of the waist.
    pub window: f64,
    /// Beam waist (length unit).
    pub waist: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n: 512,
            window: 8.0,
            waist: 1.0,
        }
    }
}

impl GridSpec {
    /// Grid for hologram simulation: 512 px over `+-4 w0`, i.e. 64 px per
    /// waist, four fringes per waist at the default 16 px grating period.
    pub fn hologram_default() -> Self {
        Self {
            n: 512,
            window: 4.0,
            waist: 1.0,
        }
    }

    pub fn new(n: usize, window: f64) -> Result<Self> {
        let spec = Self {
            n,
            window,
            waist: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 64 || !self.n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n = {} must be a power of two >= 64",
                self.n
            )));
        }
        if !(self.window > 0.0) || !self.window.is_finite() {
            return Err(Error::InvalidGrid(format!("window = {}", self.window)));
        }
        if !(self.waist > 0.0) || !self.waist.is_finite() {
            return Err(Error::InvalidGrid(format!("waist = {}", self.waist)));
        }
        Ok(())
    }

    /// Pixel pitch in length units.
    pub fn pixel(&self) -> f64 {
        2.0 * self.window * self.waist / self.n as f64
    }

    pub fn pixel_area(&self) -> f64 {
        self.pixel() * self.pixel()
    }

    /// Physical coordinate of pixel index `k` along either axis.
    pub fn coord(&self, k: usize) -> f64 {
        (k as f64 - (self.n / 2) as f64) * self.pixel()
    }
}

/// Sampled complex field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub spec: GridSpec,
    pub amplitudes: Array2<Complex64>,
}

impl FieldGrid {
    pub fn new(spec: GridSpec, amplitudes: Array2<Complex64>) -> Result<Self> {
        if amplitudes.dim() != (spec.n, spec.n) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { spec, amplitudes })
    }

    /// `f(x, y)` sampled at every pixel centre.
    pub fn from_fn(spec: GridSpec, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let amplitudes = Array2::from_shape_fn((spec.n, spec.n), |(row, col)| {
            f(spec.coord(col), spec.coord(row))
        });
        Self { spec, amplitudes }
    }

    /// Unit amplitude everywhere.
    pub fn plane_wave(spec: GridSpec) -> Self {
        Self::from_fn(spec, |_, _| Complex64::new(1.0, 0.0))
    }

    /// Gaussian `exp(-r^2 / w^2)` with the given waist.
    pub fn gaussian(spec: GridSpec, waist: f64) -> Self {
        Self::from_fn(spec, |x, y| {
            Complex64::new((-(x * x + y * y) / (waist * waist)).exp(), 0.0)
        })
    }

    /// `sum |f|^2 dA`.
    pub fn power(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.spec.pixel_area()
    }

    /// Rescaled to unit power; a zero field is returned unchanged.
    pub fn normalized(mut self) -> Self {
        let p = self.power();
        if p > 0.0 {
            let s = 1.0 / p.sqrt();
            self.amplitudes.mapv_inplace(|z| z * s);
        }
        self
    }
}

/// Finite superposition of OAM eigenstates.
#[derive(Debug, Clone, PartialEq)]
pub struct OamSuperposition {
    terms: Vec<(i32, Complex64)>,
}

impl OamSuperposition {
    /// Terms must carry distinct charges and a unit-norm coefficient vector.
    pub fn new(terms: Vec<(i32, Complex64)>) -> Result<Self> {
        let mut charges: Vec<i32> = terms.iter().map(|t| t.0).collect();
        charges.sort_unstable();
        charges.dedup();
        if charges.len() != terms.len() {
            return Err(Error::Parse("repeated OAM charge".into()));
        }
        let coeffs: Vec<Complex64> = terms.iter().map(|t| t.1).collect();
        let n = norm(&coeffs);
        if terms.is_empty() || (n - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized { norm: n });
        }
        Ok(Self { terms })
    }

    /// Normalizes the coefficients first.
    pub fn normalized(terms: Vec<(i32, Complex64)>) -> Result<Self> {
        let coeffs: Vec<Complex64> = terms.iter().map(|t| t.1).collect();
        let n = norm(&coeffs);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::NotNormalized { norm: n });
        }
        Self::new(terms.into_iter().map(|(m, c)| (m, c / n)).collect())
    }

    pub fn eigenstate(m: i32) -> Self {
        Self {
            terms: vec![(m, Complex64::new(1.0, 0.0))],
        }
    }

    /// Maps the amplitudes of `state` onto the given charges; zero
    /// amplitudes are dropped.
    pub fn from_state(state: &State, charges: &[i32]) -> Result<Self> {
        if state.dim() != charges.len() {
            return Err(Error::DimensionMismatch {
                expected: charges.len(),
                found: state.dim(),
            });
        }
        let terms = charges
            .iter()
            .zip(state.amplitudes())
            .filter(|(_, c)| c.norm() > 1e-15)
            .map(|(m, c)| (*m, *c))
            .collect();
        Self::normalized(terms)
    }

    pub fn terms(&self) -> &[(i32, Complex64)] {
        &self.terms
    }

    /// Coefficient-space inner product `<self|other>`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.terms
            .iter()
            .flat_map(|(m, a)| {
                other
                    .terms
                    .iter()
                    .filter(move |(k, _)| k == m)
                    .map(move |(_, b)| a.conj() * b)
            })
            .sum()
    }
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Normalized `LG_{0,m}` at the waist plane, written with `(x +- i y)^|m|`
/// so that it stays smooth through the axis.
pub fn laguerre_gauss(m: i32, waist: f64, x: f64, y: f64) -> Complex64 {
    let am = m.unsigned_abs();
    let norm = (2.0 / (PI * factorial(am))).sqrt() / waist;
    let sign = if m < 0 { -1.0 } else { 1.0 };
    let z = Complex64::new(x, sign * y) * (2f64.sqrt() / waist);
    let gauss = (-(x * x + y * y) / (waist * waist)).exp();
    z.powu(am) * (norm * gauss)
}

/// `sum_k c_k LG_{0,m_k}` sampled on the grid, normalized to unit power.
pub fn synthesize_mode(sup: &OamSuperposition, spec: &GridSpec) -> Result<FieldGrid> {
    spec.validate()?;
    let w = spec.waist;
    let field = FieldGrid::from_fn(*spec, |x, y| {
        sup.terms
            .iter()
            .map(|(m, c)| c * laguerre_gauss(*m, w, x, y))
            .sum()
    });
    Ok(field.normalized())
}

/// `sum conj(a) b dA`.
pub fn grid_inner_product(a: &FieldGrid, b: &FieldGrid) -> Result<Complex64> {
    if a.spec != b.spec || a.amplitudes.dim() != b.amplitudes.dim() {
        return Err(Error::GridMismatch);
    }
    let s: Complex64 = a
        .amplitudes
        .iter()
        .zip(b.amplitudes.iter())
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok(s * a.spec.pixel_area())
}

/// `|<a|b>|^2 / (<a|a><b|b>)`.
pub fn normalized_overlap(a: &FieldGrid, b: &FieldGrid) -> Result<f64> {
    let ab = grid_inner_product(a, b)?;
    let pa = a.power();
    let pb = b.power();
    if pa == 0.0 || pb == 0.0 {
        return Ok(0.0);
    }
    Ok(ab.norm_sqr() / (pa * pb))
}

/// Pointwise `|f|^2`.
pub fn intensity_map(f: &FieldGrid) -> Array2<f64> {
    f.amplitudes.mapv(|z| z.norm_sqr())
}

/// Pointwise `arg f` wrapped into `[0, 2 pi)`.
pub fn phase_map(f: &FieldGrid) -> Array2<f64> {
    f.amplitudes.mapv(|z| wrap_phase(z.arg()))
}

pub(crate) fn wrap_phase(p: f64) -> f64 {
    let w = p.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mub::oam_qutrit_mubs;

    fn spec(n: usize) -> GridSpec {
        GridSpec::new(n, 8.0).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(32, 8.0).is_err());
        assert!(GridSpec::new(100, 8.0).is_err());
        assert!(GridSpec::new(64, 0.0).is_err());
        assert!(GridSpec::new(64, 8.0).is_ok());
    }

    #[test]
    fn gaussian_mode_has_flat_phase() {
        let f = synthesize_mode(&OamSuperposition::eigenstate(0), &spec(128)).unwrap();
        assert!((f.power() - 1.0).abs() < 1e-12);
        let phase = phase_map(&f);
        assert!(phase.iter().all(|p| *p == 0.0));
        let inten = intensity_map(&f);
        let total = inten.sum() * f.spec.pixel_area();
        assert!((total - 1.0).abs() < 1e-12);
        let max = inten.iter().cloned().fold(0.0, f64::max);
        assert_eq!(inten[[64, 64]], max);
    }

    #[test]
    fn vortex_has_null_and_single_winding() {
        let s = spec(128);
        let f = synthesize_mode(&OamSuperposition::eigenstate(1), &s).unwrap();
        assert_eq!(f.amplitudes[[64, 64]].norm(), 0.0);
        // walk a square loop around the axis and accumulate phase steps
        let r = 10usize;
        let mut path = Vec::new();
        for k in 0..2 * r {
            path.push((64 - r, 64 - r + k));
        }
        for k in 0..2 * r {
            path.push((64 - r + k, 64 + r));
        }
        for k in 0..2 * r {
            path.push((64 + r, 64 + r - k));
        }
        for k in 0..2 * r {
            path.push((64 + r - k, 64 - r));
        }
        path.push(path[0]);
        let mut winding = 0.0;
        for w in path.windows(2) {
            let a = f.amplitudes[w[0]];
            let b = f.amplitudes[w[1]];
            winding += (b / a).arg();
        }
        assert!((winding.abs() - TAU).abs() < 1e-9, "winding {winding}");
    }

    #[test]
    fn distinct_charges_are_orthogonal() {
        let s = spec(256);
        let a = synthesize_mode(&OamSuperposition::eigenstate(1), &s).unwrap();
        let b = synthesize_mode(&OamSuperposition::eigenstate(-1), &s).unwrap();
        assert!(grid_inner_product(&a, &b).unwrap().norm() < 1e-10);
        assert!((grid_inner_product(&a, &a).unwrap().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qutrit_superpositions_follow_coefficients() {
        let s = spec(256);
        let set = oam_qutrit_mubs();
        let alpha1 = OamSuperposition::from_state(set.bases[1].column(0), &QUTRIT_CHARGES).unwrap();
        let alpha2 = OamSuperposition::from_state(set.bases[1].column(1), &QUTRIT_CHARGES).unwrap();
        let beta1 = OamSuperposition::from_state(set.bases[2].column(0), &QUTRIT_CHARGES).unwrap();
        let fa1 = synthesize_mode(&alpha1, &s).unwrap();
        let fa2 = synthesize_mode(&alpha2, &s).unwrap();
        let fb1 = synthesize_mode(&beta1, &s).unwrap();
        assert!(grid_inner_product(&fa1, &fa2).unwrap().norm() < 1e-6);
        let ov = grid_inner_product(&fa1, &fb1).unwrap().norm_sqr();
        assert!((ov - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn spec_mismatch_is_an_error() {
        let a = FieldGrid::plane_wave(spec(64));
        let b = FieldGrid::plane_wave(spec(128));
        assert!(matches!(grid_inner_product(&a, &b), Err(Error::GridMismatch)));
    }

    #[test]
    fn superposition_validation() {
        let one = Complex64::new(1.0, 0.0);
        assert!(OamSuperposition::new(vec![(1, one), (1, one * 0.0)]).is_err());
        assert!(OamSuperposition::new(vec![(1, one), (2, one)]).is_err());
        assert!(OamSuperposition::normalized(vec![(1, one), (2, one)]).is_ok());
        assert!(OamSuperposition::normalized(vec![]).is_err());
    }

    #[test]
    fn wrap_phase_range() {
        for p in [-1e-18, -PI, 0.0, PI, TAU, 3.0 * TAU + 0.1] {
            let w = wrap_phase(p);
            assert!((0.0..TAU).contains(&w), "{p} -> {w}");
        }
    }
}
