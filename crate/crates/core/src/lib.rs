#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod fft;
pub mod io;
pub mod kinoform;
pub mod labels;
pub mod mub;
pub mod optics;
pub mod search;
pub mod tomography;

pub use error::{Error, Result};
