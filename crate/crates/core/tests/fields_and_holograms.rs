use std::f64::consts::{PI, TAU};

use mublab::io::{decode_raw, encode_raw_complex, encode_raw_real, parse_raw_header, raw_header_json, RawData};
use mublab::kinoform::{
    first_order, generation_report, inverse_sinc, make_kinoform, sinc, InputBeam, TargetMode,
    DEFAULT_PERIOD,
};
use mublab::mub::oam_qutrit_mubs;
use mublab::optics::{
    grid_inner_product, synthesize_mode, FieldGrid, GridSpec, OamSuperposition, QUTRIT_CHARGES,
};
use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;

fn qutrit_states(bases: usize) -> Vec<OamSuperposition> {
    oam_qutrit_mubs()
        .bases
        .iter()
        .take(bases)
        .flat_map(|b| b.columns().iter().map(|s| OamSuperposition::from_state(s, &QUTRIT_CHARGES).unwrap()))
        .collect()
}

#[test]
fn synthesized_gram_matrices_are_identity() {
    let spec = GridSpec::default();
    let states = qutrit_states(3);
    let fields: Vec<FieldGrid> = states.iter().map(|s| synthesize_mode(s, &spec).unwrap()).collect();
    for b in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                let z = grid_inner_product(&fields[3 * b + i], &fields[3 * b + j]).unwrap();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((z - Complex64::new(expect, 0.0)).norm() < 1e-6, "O{} ({i},{j}): {z}", b + 1);
            }
        }
    }
}

#[test]
fn grid_inner_products_follow_coefficients() {
    let spec = GridSpec::new(256, 5.0).unwrap();
    let states = qutrit_states(4);
    let fields: Vec<FieldGrid> = states.iter().map(|s| synthesize_mode(s, &spec).unwrap()).collect();
    for (a, fa) in states.iter().zip(&fields) {
        for (b, fb) in states.iter().zip(&fields) {
            let grid = grid_inner_product(fa, fb).unwrap();
            assert!((grid - a.inner(b)).norm() < 1e-6);
        }
    }
}

#[test]
fn field_overlaps_converge_under_refinement() {
    let states = qutrit_states(4);
    let coarse = GridSpec::default();
    let fine = GridSpec::new(1024, coarse.window).unwrap();
    let f: Vec<(FieldGrid, FieldGrid)> = states
        .iter()
        .map(|s| (synthesize_mode(s, &coarse).unwrap(), synthesize_mode(s, &fine).unwrap()))
        .collect();
    for (a, b) in f.iter().zip(f.iter().skip(1)) {
        let c = grid_inner_product(&a.0, &b.0).unwrap().norm_sqr();
        let d = grid_inner_product(&a.1, &b.1).unwrap().norm_sqr();
        assert!((c - d).abs() < 1e-6);
    }
}

/// Doubling the field of view at fixed pixel pitch (n 512 -> 1024, window
/// 4 -> 8) moves each simulated fidelity by less than 1e-3.
#[test]
fn hologram_fidelities_converge_when_grid_doubles() {
    let states = qutrit_states(4);
    let base = GridSpec::hologram_default();
    let doubled = GridSpec::new(2 * base.n, 2.0 * base.window).unwrap();
    let a = generation_report(&states, DEFAULT_PERIOD, &base, InputBeam::PlaneWave).unwrap();
    let b = generation_report(&states, DEFAULT_PERIOD, &doubled, InputBeam::PlaneWave).unwrap();
    for (x, y) in a.fidelities.iter().zip(&b.fidelities) {
        assert!((x - y).abs() < 1e-3, "{x} vs {y}");
        assert!(*x >= 0.99);
    }
}

#[test]
fn gaussian_input_also_reproduces_the_modes() {
    let spec = GridSpec::hologram_default();
    let states = qutrit_states(2);
    let rep = generation_report(&states, DEFAULT_PERIOD, &spec, InputBeam::Gaussian { waist: 3.0 }).unwrap();
    assert!(rep.fidelities.iter().all(|f| *f > 0.95), "{:?}", rep.fidelities);
}

#[test]
fn first_order_power_bounded_by_output_power() {
    let spec = GridSpec::new(256, 4.0).unwrap();
    for s in qutrit_states(4) {
        let field = synthesize_mode(&s, &spec).unwrap();
        let k = make_kinoform(&TargetMode::from_field(&field), 8.0, &spec).unwrap();
        for input in [InputBeam::PlaneWave, InputBeam::Gaussian { waist: 2.0 }] {
            let fo = first_order(&k, &input.field(&spec)).unwrap();
            assert!(fo.power <= fo.total_power * (1.0 + 1e-12));
        }
    }
}

#[test]
fn raw_field_dump_round_trips() {
    let spec = GridSpec::new(128, 4.0).unwrap();
    let f = synthesize_mode(&qutrit_states(2)[4], &spec).unwrap();
    let header = parse_raw_header(&raw_header_json(&spec).unwrap()).unwrap();
    let RawData::Complex(back) = decode_raw(&header, &encode_raw_complex(&f.amplitudes)).unwrap() else {
        panic!("expected a complex map");
    };
    let max = f.amplitudes.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for (a, b) in back.iter().zip(f.amplitudes.iter()) {
        assert!((a - b).norm() <= max * 1e-7);
    }
}

proptest! {
    #[test]
    fn inverse_sinc_is_monotone_and_inverts(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (xl, xh) = (inverse_sinc(lo).unwrap(), inverse_sinc(hi).unwrap());
        prop_assert!(xl <= xh);
        prop_assert!((-PI..=0.0).contains(&xl));
        prop_assert!((sinc(xl) - lo).abs() < 1e-7);
    }

    /// With x-independent targets the mask repeats every grating period.
    #[test]
    fn mask_is_translation_symmetric(amp in 0.0f64..=1.0, phi in -PI..PI, period in 4usize..24) {
        let spec = GridSpec::new(64, 4.0).unwrap();
        let t = TargetMode::new(Array2::from_elem((64, 64), amp), Array2::from_elem((64, 64), phi)).unwrap();
        let k = make_kinoform(&t, period as f64, &spec).unwrap();
        for row in [0usize, 31] {
            for col in 0..(64 - period) {
                let d = (k.phase[[row, col]] - k.phase[[row, col + period]]).abs();
                prop_assert!(d < 1e-9 || (TAU - d) < 1e-9, "col {} d {}", col, d);
            }
        }
    }

    #[test]
    fn real_raw_round_trip(values in proptest::collection::vec(-1e3f64..1e3, 64 * 64)) {
        let spec = GridSpec::new(64, 2.0).unwrap();
        let map = Array2::from_shape_vec((64, 64), values).unwrap();
        let RawData::Real(back) = decode_raw(&spec, &encode_raw_real(&map)).unwrap() else {
            panic!("expected a real map");
        };
        for (a, b) in back.iter().zip(map.iter()) {
            prop_assert!((a - b).abs() <= b.abs() * 1e-7 + 1e-30);
        }
    }
}
