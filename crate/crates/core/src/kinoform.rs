//! Phase-only holograms that write both amplitude and phase into the first
//! diffraction order, and a far-field model to measure what they produce.
//!
//! For a target field `A exp(i Phi)` with `0 <= A <= 1` the mask is
//!
//! ```text
//! M = Mod(Phi - pi I + 2 pi x / period, 2 pi) * I,   I = 1 + sinc^-1(A) / pi
//! ```
//!
//! where `sinc^-1` is taken on `[-pi, 0]`. The fringe depth `I` sets the
//! first-order efficiency to exactly `A`, and the fringe offset carries `Phi`.

use std::f64::consts::{PI, TAU};

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fft::{fft2, ifft2, signed_bin};
use crate::optics::{
    normalized_overlap, synthesize_mode, wrap_phase, FieldGrid, GridSpec, OamSuperposition,
};

/// Accuracy of [`inverse_sinc`] in `y`.
pub const INVERSE_SINC_TOL: f64 = 1e-7;

/// Default grating period in pixels.
pub const DEFAULT_PERIOD: f64 = 16.0;

/// Smallest grating period accepted, in pixels.
pub const MIN_PERIOD: f64 = 4.0;

/// `sin(x)/x`, with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

fn sinc_derivative(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        -x / 3.0 + x * x * x / 30.0
    } else {
        (x * x.cos() - x.sin()) / (x * x)
    }
}

/// Solves `sinc(x) = y` for `x` in `[-pi, 0]`.
///
/// Newton iteration from `x0 = -pi (1 - y)`, falling back to bisection
/// whenever a step leaves the current bracket. `sinc` is increasing on
/// `[-pi, 0]`, so the bracket is maintained from the sign of the residual.
pub fn inverse_sinc(y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::OutOfDomain { value: y });
    }
    if y == 1.0 {
        return Ok(0.0);
    }
    if y == 0.0 {
        return Ok(-PI);
    }

    let (mut lo, mut hi) = (-PI, 0.0);
    let mut x = -PI * (1.0 - y);
    for _ in 0..100 {
        let r = sinc(x) - y;
        if r.abs() < 1e-13 {
            return Ok(x);
        }
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let slope = sinc_derivative(x);
        let newton = x - r / slope;
        x = if slope != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(x)
}

/// Normalized target amplitude (`max = 1`) and phase.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMode {
    pub amplitude: Array2<f64>,
    pub phase: Array2<f64>,
}

impl TargetMode {
    pub fn new(amplitude: Array2<f64>, phase: Array2<f64>) -> Result<Self> {
        if amplitude.dim() != phase.dim() {
            return Err(Error::ShapeMismatch("amplitude and phase grids differ".into()));
        }
        let max = amplitude.iter().cloned().fold(0.0, f64::max);
        if amplitude.iter().any(|a| !a.is_finite() || *a < 0.0) || phase.iter().any(|p| !p.is_finite()) {
            return Err(Error::Parse("non-finite or negative target".into()));
        }
        let amplitude = if max > 0.0 { amplitude / max } else { amplitude };
        Ok(Self { amplitude, phase })
    }

    pub fn from_field(field: &FieldGrid) -> Self {
        let amp = field.amplitudes.mapv(|z| z.norm());
        let max = amp.iter().cloned().fold(0.0, f64::max);
        let amplitude = if max > 0.0 { amp / max } else { amp };
        Self {
            amplitude,
            phase: field.amplitudes.mapv(|z| z.arg()),
        }
    }
}

/// SLM phase mask with values in `[0, 2 pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinoform {
    pub spec: GridSpec,
    pub phase: Array2<f64>,
    /// Grating period in pixels.
    pub grating_period: f64,
}

fn check_period(period: f64, n: usize) -> Result<()> {
    let radius = n as f64 / (2.0 * period);
    if !(period >= MIN_PERIOD) || !period.is_finite() || radius < 4.0 {
        return Err(Error::OrdersOverlap { period, radius });
    }
    Ok(())
}

pub fn make_kinoform(target: &TargetMode, period: f64, spec: &GridSpec) -> Result<Kinoform> {
    spec.validate()?;
    if target.amplitude.dim() != (spec.n, spec.n) {
        return Err(Error::GridMismatch);
    }
    if !(period > 0.0) || !period.is_finite() {
        return Err(Error::InvalidGrid(format!("grating period {period} px")));
    }

    let mut phase = Array2::zeros((spec.n, spec.n));
    Zip::indexed(&mut phase)
        .and(&target.amplitude)
        .and(&target.phase)
        .par_for_each(|(_, col), m, &a, &phi| {
            let depth = 1.0 + inverse_sinc(a.clamp(0.0, 1.0)).expect("clamped") / PI;
            let carrier = TAU * col as f64 / period;
            let v = (phi - PI * depth + carrier).rem_euclid(TAU) * depth;
            *m = if v >= TAU { 0.0 } else { v };
        });
    Ok(Kinoform {
        spec: *spec,
        phase,
        grating_period: period,
    })
}

/// Kinoform for an OAM superposition synthesized on `spec`.
pub fn kinoform_for(sup: &OamSuperposition, period: f64, spec: &GridSpec) -> Result<Kinoform> {
    let field = synthesize_mode(sup, spec)?;
    make_kinoform(&TargetMode::from_field(&field), period, spec)
}

/// Illumination of the SLM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputBeam {
    PlaneWave,
    Gaussian { waist: f64 },
}

impl InputBeam {
    pub fn field(&self, spec: &GridSpec) -> FieldGrid {
        match *self {
            InputBeam::PlaneWave => FieldGrid::plane_wave(*spec),
            InputBeam::Gaussian { waist } => FieldGrid::gaussian(*spec, waist),
        }
    }
}

/// First-order field together with the power bookkeeping.
#[derive(Debug, Clone)]
pub struct FirstOrder {
    /// Unit-power first-order field (left unscaled when its power is zero).
    pub field: FieldGrid,
    /// Power inside the first-order window before normalization.
    pub power: f64,
    /// Power leaving the SLM.
    pub total_power: f64,
}

/// Far-field filtering of the first diffraction order.
///
/// The far field of the modulated input is windowed by a disc of radius
/// `n / (2 period)` bins centred on the carrier `n / period`, re-centred on
/// the optical axis and transformed back to the SLM plane.
pub fn first_order(k: &Kinoform, input: &FieldGrid) -> Result<FirstOrder> {
    if k.spec != input.spec || k.phase.dim() != input.amplitudes.dim() {
        return Err(Error::GridMismatch);
    }
    let n = k.spec.n;
    check_period(k.grating_period, n)?;

    let mut modulated = Array2::zeros((n, n));
    Zip::from(&mut modulated)
        .and(&k.phase)
        .and(&input.amplitudes)
        .par_for_each(|out, &m, &e| *out = e * Complex64::from_polar(1.0, m));
    let total_power = modulated.iter().map(|z: &Complex64| z.norm_sqr()).sum::<f64>()
        * k.spec.pixel_area();

    // disc around the (possibly fractional) carrier bin, moved by the nearest
    // whole bin; the fractional remainder is removed as a tilt afterwards
    let spectrum = fft2(&modulated);
    let carrier = n as f64 / k.grating_period;
    let shift = carrier.round();
    let radius = n as f64 / (2.0 * k.grating_period);
    let r2 = radius * radius;
    let mut centred = Array2::zeros((n, n));
    Zip::indexed(&mut centred).par_for_each(|(row, col), z| {
        let fy = signed_bin(row, n);
        let fx = signed_bin(col, n);
        let dx = fx + shift - carrier;
        if dx * dx + fy * fy <= r2 {
            let src = (col as i64 + shift as i64).rem_euclid(n as i64) as usize;
            *z = spectrum[[row, src]];
        }
    });
    let mut filtered = ifft2(&centred);
    let residual = carrier - shift;
    if residual != 0.0 {
        Zip::indexed(&mut filtered).par_for_each(|(_, col), z| {
            *z *= Complex64::from_polar(1.0, -TAU * residual * col as f64 / n as f64);
        });
    }
    let field = FieldGrid::new(k.spec, filtered)?;
    let power = field.power();
    Ok(FirstOrder {
        field: field.normalized(),
        power,
        total_power,
    })
}

/// Normalized first-order field produced by `k` under `input`.
pub fn simulate_first_order(k: &Kinoform, input: &FieldGrid) -> Result<FieldGrid> {
    first_order(k, input).map(|fo| fo.field)
}

/// Kinoform plus simulated output for one state.
pub fn generate_field(
    sup: &OamSuperposition,
    period: f64,
    spec: &GridSpec,
    input: InputBeam,
) -> Result<FieldGrid> {
    let k = kinoform_for(sup, period, spec)?;
    simulate_first_order(&k, &input.field(spec))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationReport {
    /// `overlaps[i][j] = |<ideal_j|generated_i>|^2`, both normalized.
    pub overlaps: Vec<Vec<f64>>,
    /// Diagonal of `overlaps`.
    pub fidelities: Vec<f64>,
}

/// Simulates every state through its own kinoform and compares against the
/// ideal synthesized fields.
pub fn generation_report(
    states: &[OamSuperposition],
    period: f64,
    spec: &GridSpec,
    input: InputBeam,
) -> Result<GenerationReport> {
    let ideal: Vec<FieldGrid> = states
        .par_iter()
        .map(|s| synthesize_mode(s, spec))
        .collect::<Result<_>>()?;
    let generated: Vec<FieldGrid> = states
        .par_iter()
        .map(|s| generate_field(s, period, spec, input))
        .collect::<Result<_>>()?;
    let overlaps: Vec<Vec<f64>> = generated
        .par_iter()
        .map(|g| {
            ideal
                .iter()
                .map(|f| normalized_overlap(f, g))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let fidelities = overlaps.iter().enumerate().map(|(i, row)| row[i]).collect();
    Ok(GenerationReport {
        overlaps,
        fidelities,
    })
}

/// Wraps every value into `[0, 2 pi)`; used when importing masks.
pub fn wrap_mask(phase: &Array2<f64>) -> Array2<f64> {
    phase.mapv(wrap_phase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mub::oam_qutrit_mubs;
    use crate::optics::QUTRIT_CHARGES;

    /// Independent reference: plain bisection on `[-pi, 0]`.
    fn bisect_inverse_sinc(y: f64) -> f64 {
        let (mut lo, mut hi) = (-PI, 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let s = if mid == 0.0 { 1.0 } else { mid.sin() / mid };
            if s < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn inverse_sinc_endpoints_and_midpoint() {
        assert_eq!(inverse_sinc(1.0).unwrap(), 0.0);
        assert_eq!(inverse_sinc(0.0).unwrap(), -PI);
        // frozen from the bisection reference
        let x = inverse_sinc(0.5).unwrap();
        assert!((x - (-1.895494267033981)).abs() < 1e-9, "{x}");
        assert!((x - bisect_inverse_sinc(0.5)).abs() < 1e-10);
    }

    #[test]
    fn inverse_sinc_matches_bisection_on_sweep() {
        for k in 0..=200 {
            let y = k as f64 / 200.0;
            let x = inverse_sinc(y).unwrap();
            assert!((x - bisect_inverse_sinc(y)).abs() < 1e-7, "y={y}");
        }
    }

    #[test]
    fn inverse_sinc_domain() {
        assert!(matches!(inverse_sinc(-0.1), Err(Error::OutOfDomain { .. })));
        assert!(matches!(inverse_sinc(1.5), Err(Error::OutOfDomain { .. })));
        assert!(inverse_sinc(f64::NAN).is_err());
    }

    fn spec(n: usize) -> GridSpec {
        GridSpec::new(n, 8.0).unwrap()
    }

    #[test]
    fn unit_amplitude_gives_full_blazed_grating() {
        let s = spec(64);
        let t = TargetMode::new(Array2::ones((64, 64)), Array2::zeros((64, 64))).unwrap();
        let k = make_kinoform(&t, 8.0, &s).unwrap();
        for col in 0..64 {
            let expected = (-PI + TAU * col as f64 / 8.0).rem_euclid(TAU);
            assert!((k.phase[[3, col]] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_amplitude_gives_flat_mask_and_no_first_order() {
        let s = spec(64);
        let t = TargetMode::new(Array2::zeros((64, 64)), Array2::zeros((64, 64))).unwrap();
        let k = make_kinoform(&t, 8.0, &s).unwrap();
        assert!(k.phase.iter().all(|m| *m == 0.0));
        let fo = first_order(&k, &FieldGrid::plane_wave(s)).unwrap();
        assert!(fo.power / fo.total_power < 1e-20);
    }

    #[test]
    fn mask_range_and_period_checks() {
        let s = spec(64);
        let t = TargetMode::new(
            Array2::from_shape_fn((64, 64), |(i, j)| ((i * j) % 7) as f64 / 6.0),
            Array2::from_shape_fn((64, 64), |(i, j)| (i as f64 - j as f64) * 0.37),
        )
        .unwrap();
        let k = make_kinoform(&t, 8.0, &s).unwrap();
        assert!(k.phase.iter().all(|m| (0.0..TAU).contains(m)));
        assert!(make_kinoform(&t, 0.0, &s).is_err());

        // masks with unusable periods are still drawn; filtering rejects them
        let plane = FieldGrid::plane_wave(s);
        let fine = make_kinoform(&t, 3.0, &s).unwrap();
        assert!(fine.phase.iter().all(|m| (0.0..TAU).contains(m)));
        assert!(matches!(first_order(&fine, &plane), Err(Error::OrdersOverlap { .. })));
        // 64 / (2 * 16) = 2 bins: too narrow to hold a mode
        let coarse = make_kinoform(&t, 16.0, &s).unwrap();
        assert!(matches!(first_order(&coarse, &plane), Err(Error::OrdersOverlap { .. })));
    }

    #[test]
    fn gaussian_target_reproduced() {
        let s = spec(256);
        let sup = OamSuperposition::eigenstate(0);
        let ideal = synthesize_mode(&sup, &s).unwrap();
        let out = generate_field(&sup, 8.0, &s, InputBeam::PlaneWave).unwrap();
        let f = normalized_overlap(&ideal, &out).unwrap();
        assert!(f > 0.99, "fidelity {f}");
    }

    #[test]
    fn first_order_never_amplifies() {
        let s = spec(128);
        let set = oam_qutrit_mubs();
        let sup = OamSuperposition::from_state(set.bases[2].column(1), &QUTRIT_CHARGES).unwrap();
        let k = kinoform_for(&sup, 8.0, &s).unwrap();
        let fo = first_order(&k, &FieldGrid::plane_wave(s)).unwrap();
        assert!(fo.power <= fo.total_power * (1.0 + 1e-12));
        assert!(fo.power > 0.0);
    }

    #[test]
    fn empty_report() {
        let r = generation_report(&[], 16.0, &spec(64), InputBeam::PlaneWave).unwrap();
        assert!(r.overlaps.is_empty() && r.fidelities.is_empty());
    }
}
