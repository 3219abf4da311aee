//! 2D FFT helpers around rustfft.
//!
//! Forward transform is unnormalized, inverse is scaled by `1/(rows*cols)`
//! (numpy convention). Frequencies are in FFT order, no shifting.

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rustfft::FftPlanner;

fn transform(data: &mut Array2<Complex64>, inverse: bool) {
    let (rows, cols) = data.dim();
    let mut planner = FftPlanner::new();
    let (row_plan, col_plan) = if inverse {
        (planner.plan_fft_inverse(cols), planner.plan_fft_inverse(rows))
    } else {
        (planner.plan_fft_forward(cols), planner.plan_fft_forward(rows))
    };

    for mut row in data.axis_iter_mut(Axis(0)) {
        match row.as_slice_mut() {
            Some(slice) => row_plan.process(slice),
            None => {
                let mut buf = row.to_vec();
                row_plan.process(&mut buf);
                row.assign(&ndarray::ArrayView1::from(&buf));
            }
        }
    }

    let mut buf = vec![Complex64::new(0.0, 0.0); rows];
    for mut col in data.axis_iter_mut(Axis(1)) {
        buf.iter_mut().zip(col.iter()).for_each(|(b, v)| *b = *v);
        col_plan.process(&mut buf);
        col.iter_mut().zip(&buf).for_each(|(v, b)| *v = *b);
    }
}

pub fn fft2(input: &Array2<Complex64>) -> Array2<Complex64> {
    let mut data = input.as_standard_layout().to_owned();
    transform(&mut data, false);
    data
}

pub fn ifft2(input: &Array2<Complex64>) -> Array2<Complex64> {
    let mut data = input.as_standard_layout().to_owned();
    transform(&mut data, true);
    let scale = 1.0 / data.len() as f64;
    data.mapv_inplace(|z| z * scale);
    data
}

/// Signed integer frequency of FFT bin `k` out of `n`.
pub fn signed_bin(k: usize, n: usize) -> f64 {
    if k < n.div_ceil(2) {
        k as f64
    } else {
        k as f64 - n as f64
    }
}
