//! Prepare-and-measure simulation over the 18 qusix MUB states.
//!
//! Row `i` of every 18x18 matrix is the generated state, column `j` the
//! detection state, so `P_ij = |<psi_j|psi_i>|^2`. States are ordered
//! basis-major `I:1..I:6, II:1..II:6, III:1..III:6`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kinoform::{generate_field, InputBeam, DEFAULT_PERIOD};
use crate::mub::{oam_qutrit_mubs, polarization_mubs, qusix_mubs, MubSet, State};
use crate::optics::{grid_inner_product, FieldGrid, GridSpec, OamSuperposition, QUSIX_CHARGES, QUTRIT_CHARGES};
use crate::search::restart_rng;

pub const STATE_COUNT: usize = 18;
pub const BLOCK: usize = 6;
pub const BASIS_LABELS: [&str; 3] = ["I", "II", "III"];

const PROB_SLACK: f64 = 1e-9;

/// Detected photon rate of the source, Hz.
pub const DEFAULT_RATE: f64 = 7000.0;
/// Seconds per prepare/measure setting.
pub const DEFAULT_EXPOSURE: f64 = 1.0;

/// `I:1` .. `III:6`.
pub fn state_labels() -> Vec<String> {
    BASIS_LABELS
        .iter()
        .flat_map(|b| (1..=BLOCK).map(move |k| format!("{b}:{k}")))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncodingKind {
    /// Polarization (x) OAM qutrit `{-1, 0, +1}`.
    Hybrid,
    /// OAM charges `{-3, -2, -1, 1, 2, 3}` at fixed polarization.
    PureOam,
}

impl std::str::FromStr for EncodingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hybrid" => Ok(Self::Hybrid),
            "pure-oam" => Ok(Self::PureOam),
            other => Err(Error::Parse(format!("unknown encoding `{other}`"))),
        }
    }
}

/// The 18 qusix states of one physical encoding.
#[derive(Debug, Clone)]
pub struct QusixEncoding {
    pub kind: EncodingKind,
    pub set: MubSet,
    /// Hybrid only: `(polarization, OAM qutrit)` factors per state.
    factors: Vec<(State, State)>,
}

impl QusixEncoding {
    pub fn new(kind: EncodingKind) -> Self {
        let pol = polarization_mubs();
        let oam = oam_qutrit_mubs();
        let factors = (0..3)
            .flat_map(|k| {
                let p = pol.bases[k].clone();
                let o = oam.bases[k].clone();
                (0..BLOCK).map(move |c| (p.column(c / 3).clone(), o.column(c % 3).clone()))
            })
            .collect();
        Self {
            kind,
            set: qusix_mubs(),
            factors,
        }
    }

    pub fn states(&self) -> Vec<&State> {
        self.set.states().collect()
    }

    /// Polarization and OAM factors of state `index` (basis-major).
    pub fn factors(&self, index: usize) -> (&State, &State) {
        let (p, o) = &self.factors[index];
        (p, o)
    }

    /// The OAM superposition a hologram has to produce for state `index`.
    pub fn oam_part(&self, index: usize) -> Result<OamSuperposition> {
        match self.kind {
            EncodingKind::Hybrid => OamSuperposition::from_state(&self.factors[index].1, &QUTRIT_CHARGES),
            EncodingKind::PureOam => {
                let state = self.states()[index];
                OamSuperposition::from_state(state, &QUSIX_CHARGES)
            }
        }
    }
}

/// How generation and detection are modelled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OpticsModel {
    /// Exact coefficient vectors.
    Ideal,
    /// Every OAM part replaced by its kinoform-simulated first-order field.
    SimulatedOptics {
        spec: GridSpec,
        grating_period: f64,
        input: InputBeam,
    },
}

impl OpticsModel {
    pub fn simulated_default() -> Self {
        OpticsModel::SimulatedOptics {
            spec: GridSpec::hologram_default(),
            grating_period: DEFAULT_PERIOD,
            input: InputBeam::PlaneWave,
        }
    }
}

pub fn probability_matrix(enc: &QusixEncoding, model: &OpticsModel) -> Result<DMatrix<f64>> {
    match model {
        OpticsModel::Ideal => {
            let states = enc.states();
            let mut p = DMatrix::zeros(STATE_COUNT, STATE_COUNT);
            for (i, gen) in states.iter().enumerate() {
                for (j, det) in states.iter().enumerate() {
                    p[(i, j)] = det.overlap(gen)?;
                }
            }
            Ok(p)
        }
        OpticsModel::SimulatedOptics {
            spec,
            grating_period,
            input,
        } => {
            let fields: Vec<FieldGrid> = (0..STATE_COUNT)
                .into_par_iter()
                .map(|i| generate_field(&enc.oam_part(i)?, *grating_period, spec, *input))
                .collect::<Result<_>>()?;
            let mut amp = vec![Complex64::new(0.0, 0.0); STATE_COUNT * STATE_COUNT];
            amp.par_iter_mut().enumerate().try_for_each(|(idx, a)| -> Result<()> {
                let (i, j) = (idx / STATE_COUNT, idx % STATE_COUNT);
                let mut z = grid_inner_product(&fields[j], &fields[i])?;
                if enc.kind == EncodingKind::Hybrid {
                    z *= enc.factors(j).0.inner(enc.factors(i).0)?;
                }
                *a = z;
                Ok(())
            })?;
            Ok(DMatrix::from_fn(STATE_COUNT, STATE_COUNT, |i, j| {
                amp[i * STATE_COUNT + j].norm_sqr()
            }))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountsMatrix {
    pub counts: DMatrix<u64>,
    /// Seconds per setting.
    pub exposure: f64,
    /// Mean detected rate, Hz.
    pub rate: f64,
}

/// Poisson sample with mean `mean`; zero mean gives zero.
pub(crate) fn poisson_sample(mean: f64, rng: &mut rand_chacha::ChaCha8Rng) -> Result<u64> {
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| Error::Parse(format!("poisson mean {mean}: {e}")))?;
    Ok(dist.sample(rng) as u64)
}

/// `counts_ij ~ Poisson(rate * exposure * P_ij)`, one random stream per
/// cell derived from `(seed, i, j)`.
pub fn poissonize(p: &DMatrix<f64>, rate: f64, exposure: f64, seed: u64) -> Result<CountsMatrix> {
    if !(exposure > 0.0) || !(rate >= 0.0) || !rate.is_finite() || !exposure.is_finite() {
        return Err(Error::Parse(format!("rate {rate} / exposure {exposure}")));
    }
    // rounding in overlap evaluation may overshoot [0, 1] by a few ulps
    if let Some(bad) = p.iter().find(|v| !(-PROB_SLACK..=1.0 + PROB_SLACK).contains(*v)) {
        return Err(Error::OutOfDomain { value: *bad });
    }
    let (rows, cols) = p.shape();
    let cells: Vec<u64> = (0..rows * cols)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / cols, idx % cols);
            let mut rng = restart_rng(seed, idx as u64);
            poisson_sample(rate * exposure * p[(i, j)].clamp(0.0, 1.0), &mut rng)
        })
        .collect::<Result<_>>()?;
    Ok(CountsMatrix {
        counts: DMatrix::from_row_slice(rows, cols, &cells),
        exposure,
        rate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCounts {
    pub estimate: DMatrix<f64>,
    /// `(row, detection block)` pairs with no counts; left at zero.
    pub zero_blocks: Vec<(usize, usize)>,
}

/// Divides every 6-entry detection block of every row by its sum.
pub fn normalize_counts(c: &CountsMatrix) -> NormalizedCounts {
    let (rows, cols) = c.counts.shape();
    let mut estimate = DMatrix::zeros(rows, cols);
    let mut zero_blocks = Vec::new();
    for i in 0..rows {
        for b in 0..cols.div_ceil(BLOCK) {
            let range = (b * BLOCK)..((b + 1) * BLOCK).min(cols);
            let total: u64 = range.clone().map(|j| c.counts[(i, j)]).sum();
            if total == 0 {
                zero_blocks.push((i, b));
                continue;
            }
            for j in range {
                estimate[(i, j)] = c.counts[(i, j)] as f64 / total as f64;
            }
        }
    }
    NormalizedCounts {
        estimate,
        zero_blocks,
    }
}

/// `S = (sum sqrt(P P'))^2 / (sum P * sum P')`.
pub fn similarity(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<f64> {
    if p.shape() != q.shape() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", p.shape(), q.shape())));
    }
    if p.iter().chain(q.iter()).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Parse("similarity needs nonnegative finite entries".into()));
    }
    let sp: f64 = p.iter().sum();
    let sq: f64 = q.iter().sum();
    if sp == 0.0 || sq == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let cross: f64 = p.iter().zip(q.iter()).map(|(a, b)| (a * b).sqrt()).sum();
    Ok((cross * cross / (sp * sq)).min(1.0))
}

/// Largest `|a - b|` inside each of the 3x3 blocks, row-major over blocks.
pub fn block_deviations(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let blocks = a.nrows().div_ceil(BLOCK);
    let mut out = vec![0.0f64; blocks * blocks];
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let k = (i / BLOCK) * blocks + j / BLOCK;
            out[k] = out[k].max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    out
}

/// CSV with a header of state labels; the first column labels rows.
pub fn matrix_csv<T: std::fmt::Display + nalgebra::Scalar>(m: &DMatrix<T>) -> String {
    let labels = state_labels();
    let label = |k: usize| labels.get(k).cloned().unwrap_or_else(|| k.to_string());
    let mut out = String::from("state");
    for j in 0..m.ncols() {
        out.push(',');
        out.push_str(&label(j));
    }
    out.push('\n');
    for i in 0..m.nrows() {
        out.push_str(&label(i));
        for j in 0..m.ncols() {
            out.push(',');
            out.push_str(&m[(i, j)].to_string());
        }
        out.push('\n');
    }
    out
}
