//! Qusix state tomography from the 72 product projectors `pi_a (x) O_b`,
//! `a in 1..=3`, `b in 1..=4`.
//!
//! Two estimators are provided. [`linear_inversion`] solves the Born-rule
//! system by trace-constrained least squares and is exact on noiseless
//! data, but may return a non-positive matrix. [`mle_reconstruction`] runs
//! the multiplicative `R rho R` iteration on the per-setting multinomial
//! likelihood, which keeps the estimate positive with unit trace.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::poisson_sample;
use crate::mub::{oam_qutrit_mubs, polarization_mubs, State};
use crate::search::restart_rng;

pub const DIM: usize = 6;
pub const PROJECTOR_COUNT: usize = 72;
pub const SETTING_COUNT: usize = 12;
/// Real parameters of a Hermitian 6x6 matrix.
pub const OPERATOR_DIM: usize = DIM * DIM;

const RANK_THRESHOLD: f64 = 1e-10;
/// Negative frequencies down to this are treated as rounding and zeroed.
const FREQ_SLACK: f64 = 1e-12;

const POL_NAMES: [[&str; 2]; 3] = [["H", "V"], ["A", "D"], ["L", "R"]];
const OAM_NAMES: [[&str; 3]; 4] = [
    ["-1", "0", "+1"],
    ["alpha1", "alpha2", "alpha3"],
    ["beta1", "beta2", "beta3"],
    ["gamma1", "gamma2", "gamma3"],
];

/// `d x d` density operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::ShapeMismatch("density matrix must be square".into()));
        }
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn pure(state: &State) -> Self {
        let v = DVector::from_column_slice(state.amplitudes());
        Self {
            entries: &v * v.adjoint(),
        }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            entries: DMatrix::identity(d, d) / Complex64::new(d as f64, 0.0),
        }
    }

    /// `G G^dagger / tr`, with `G` a complex Gaussian matrix.
    pub fn random_wishart(d: usize, rng: &mut ChaCha8Rng) -> Self {
        let g = DMatrix::from_fn(d, d, |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im)
        });
        let m = &g * g.adjoint();
        let tr = m.trace();
        Self { entries: m / tr }
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    /// Largest `|rho - rho^dagger|` entry.
    pub fn hermiticity_error(&self) -> f64 {
        (&self.entries - self.entries.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Ascending eigenvalues of the Hermitian part.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.entries + self.entries.adjoint()) * Complex64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        (&self.entries - &other.entries)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// `<psi|rho|psi>`.
pub fn fidelity(rho: &DensityMatrix, psi: &State) -> Result<f64> {
    if psi.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: psi.dim(),
        });
    }
    let v = DVector::from_column_slice(psi.amplitudes());
    Ok((v.adjoint() * &rho.entries * &v)[(0, 0)].re.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    /// e.g. `H:+1`, `A:alpha2`, `R:gamma3`.
    pub label: String,
    pub state: State,
    /// Measurement setting (basis) index; projectors of one setting resolve
    /// the identity.
    pub setting: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorSet {
    pub projectors: Vec<Projector>,
    pub settings: usize,
    pub dim: usize,
}

/// Real-parameter row of `<phi|rho|phi>` for the Hermitian coordinates used
/// throughout: diagonal entries, then `(Re, Im)` of each upper entry.
fn born_row(phi: &[Complex64]) -> Vec<f64> {
    let d = phi.len();
    let mut row = Vec::with_capacity(d * d);
    row.extend(phi.iter().map(|z| z.norm_sqr()));
    for a in 0..d {
        for b in (a + 1)..d {
            let c = phi[a].conj() * phi[b];
            row.push(2.0 * c.re);
            row.push(-2.0 * c.im);
        }
    }
    row
}

fn to_params(rho: &DMatrix<Complex64>) -> Vec<f64> {
    let d = rho.nrows();
    let mut x = Vec::with_capacity(d * d);
    x.extend((0..d).map(|a| rho[(a, a)].re));
    for a in 0..d {
        for b in (a + 1)..d {
            x.push(rho[(a, b)].re);
            x.push(rho[(a, b)].im);
        }
    }
    x
}

fn from_params(x: &[f64], d: usize) -> DMatrix<Complex64> {
    let mut rho = DMatrix::zeros(d, d);
    for a in 0..d {
        rho[(a, a)] = Complex64::new(x[a], 0.0);
    }
    let mut k = d;
    for a in 0..d {
        for b in (a + 1)..d {
            let z = Complex64::new(x[k], x[k + 1]);
            rho[(a, b)] = z;
            rho[(b, a)] = z.conj();
            k += 2;
        }
    }
    rho
}

impl ProjectorSet {
    pub fn new(projectors: Vec<Projector>) -> Result<Self> {
        let dim = projectors
            .first()
            .map(|p| p.state.dim())
            .ok_or_else(|| Error::Parse("empty projector set".into()))?;
        if let Some(bad) = projectors.iter().find(|p| p.state.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.state.dim(),
            });
        }
        let settings = projectors.iter().map(|p| p.setting + 1).max().unwrap_or(0);
        Ok(Self {
            projectors,
            settings,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.projectors.iter().map(|p| p.label.as_str()).collect()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.projectors.iter().position(|p| p.label == label)
    }

    /// Rows are Born-rule maps on the real Hermitian coordinates.
    pub fn measurement_matrix(&self) -> DMatrix<f64> {
        let cols = self.dim * self.dim;
        let data: Vec<f64> = self
            .projectors
            .iter()
            .flat_map(|p| born_row(p.state.amplitudes()))
            .collect();
        DMatrix::from_row_slice(self.len(), cols, &data)
    }

    /// Numerical rank of the measurement matrix.
    pub fn rank(&self) -> usize {
        let m = self.measurement_matrix();
        let sv = m.singular_values();
        sv.iter().filter(|s| **s > RANK_THRESHOLD).count()
    }
}

/// All 72 products `(pi_a state) (x) (O_b state)`, grouped into 12 settings
/// `(a, b)`, polarization index major inside each setting.
pub fn build_projector_set() -> ProjectorSet {
    let pol = polarization_mubs();
    let oam = oam_qutrit_mubs();
    let mut projectors = Vec::with_capacity(PROJECTOR_COUNT);
    for (a, pb) in pol.bases.iter().enumerate() {
        for (b, ob) in oam.bases.iter().enumerate() {
            let setting = a * 4 + b;
            for (i, ps) in pb.columns().iter().enumerate() {
                for (j, os) in ob.columns().iter().enumerate() {
                    projectors.push(Projector {
                        label: format!("{}:{}", POL_NAMES[a][i], OAM_NAMES[b][j]),
                        state: ps.tensor(os),
                        setting,
                    });
                }
            }
        }
    }
    ProjectorSet::new(projectors).expect("72 projectors in C^6")
}

/// Product name such as `L:beta1` of qusix state `position` (0..18,
/// basis-major), matching the projector labels.
pub fn qusix_product_label(position: usize) -> String {
    let (basis, k) = (position / 6, position % 6);
    format!("{}:{}", POL_NAMES[basis][k / 3], OAM_NAMES[basis][k % 3])
}

/// `p_k = <phi_k|rho|phi_k>`.
pub fn predict_probabilities(rho: &DensityMatrix, ps: &ProjectorSet) -> Vec<f64> {
    ps.projectors
        .iter()
        .map(|p| {
            let v = DVector::from_column_slice(p.state.amplitudes());
            (v.adjoint() * &rho.entries * &v)[(0, 0)].re
        })
        .collect()
}

/// Trace-one least-squares solution of the Born-rule system.
pub fn linear_inversion(p: &[f64], ps: &ProjectorSet) -> Result<DensityMatrix> {
    if p.len() != ps.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} probabilities for {} projectors",
            p.len(),
            ps.len()
        )));
    }
    let needed = ps.dim * ps.dim;
    let rank = ps.rank();
    if rank < needed {
        return Err(Error::RankDeficient { rank, needed });
    }
    let a = ps.measurement_matrix();
    let n = a.ncols();
    // KKT system for min |A x - p|^2 subject to sum of diagonal = 1
    let mut kkt = DMatrix::zeros(n + 1, n + 1);
    kkt.view_mut((0, 0), (n, n)).copy_from(&(a.transpose() * &a));
    for k in 0..ps.dim {
        kkt[(k, n)] = 1.0;
        kkt[(n, k)] = 1.0;
    }
    let mut rhs = DVector::zeros(n + 1);
    rhs.rows_mut(0, n)
        .copy_from(&(a.transpose() * DVector::from_column_slice(p)));
    rhs[n] = 1.0;
    let sol = kkt
        .lu()
        .solve(&rhs)
        .ok_or(Error::RankDeficient { rank, needed })?;
    Ok(DensityMatrix {
        entries: from_params(&sol.as_slice()[..n], ps.dim),
    })
}

/// Per-setting relative frequencies; settings with no counts get weight 0.
pub fn setting_frequencies(counts: &[u64], ps: &ProjectorSet) -> Result<Vec<f64>> {
    if counts.len() != ps.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} counts for {} projectors",
            counts.len(),
            ps.len()
        )));
    }
    if counts.iter().all(|c| *c == 0) {
        return Err(Error::ZeroCounts);
    }
    let mut totals = vec![0u64; ps.settings];
    for (c, p) in counts.iter().zip(&ps.projectors) {
        totals[p.setting] += c;
    }
    Ok(counts
        .iter()
        .zip(&ps.projectors)
        .map(|(c, p)| match totals[p.setting] {
            0 => 0.0,
            t => *c as f64 / t as f64,
        })
        .collect())
}

fn log_likelihood(freq: &[f64], probs: &[f64]) -> f64 {
    freq.iter()
        .zip(probs)
        .map(|(f, p)| {
            if *f == 0.0 {
                0.0
            } else if *p <= 0.0 {
                f64::NEG_INFINITY
            } else {
                f * p.ln()
            }
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MleConfig {
    pub max_iterations: usize,
    /// Stop once the log-likelihood gain of an accepted step drops below this.
    pub tolerance: f64,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            max_iterations: 20_000,
            tolerance: 1e-13,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub rho: DensityMatrix,
    pub iterations: usize,
    /// Frequency-weighted log-likelihood `sum_k f_k ln p_k` at `rho`.
    pub log_likelihood: f64,
    /// Log-likelihood after every accepted step, starting with the initial
    /// `I/d`.
    pub trace: Vec<f64>,
}

fn hermitize(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let t = m.trace();
    let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h / Complex64::new(t.re, 0.0)
}

/// Maximum-likelihood estimate by the `R rho R` fixed-point iteration.
///
/// A plain step that would lower the likelihood is replaced by the diluted
/// operator `(I + eps R) / (1 + eps)`, starting at `eps = 0.5` and halving
/// until the likelihood does not decrease; if no such step exists the
/// iteration stops.
pub fn mle_reconstruction(counts: &[u64], ps: &ProjectorSet, cfg: &MleConfig) -> Result<MleResult> {
    mle_from_frequencies(&setting_frequencies(counts, ps)?, ps, cfg)
}

/// [`mle_reconstruction`] on per-setting frequencies, e.g. exact Born
/// probabilities.
pub fn mle_from_frequencies(freq: &[f64], ps: &ProjectorSet, cfg: &MleConfig) -> Result<MleResult> {
    if freq.len() != ps.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} frequencies for {} projectors",
            freq.len(),
            ps.len()
        )));
    }
    if let Some(bad) = freq.iter().find(|f| !(**f >= -FREQ_SLACK) || !f.is_finite()) {
        return Err(Error::Parse(format!("frequency {bad}")));
    }
    let freq: Vec<f64> = freq.iter().map(|f| f.max(0.0)).collect();
    let mut setting_mass = vec![0.0; ps.settings];
    for (f, p) in freq.iter().zip(&ps.projectors) {
        setting_mass[p.setting] += f;
    }
    let active = setting_mass.iter().filter(|m| **m > 0.0).count();
    if active == 0 {
        return Err(Error::ZeroCounts);
    }
    let freq: Vec<f64> = freq
        .iter()
        .zip(&ps.projectors)
        .map(|(f, p)| match setting_mass[p.setting] {
            m if m > 0.0 => f / m,
            _ => 0.0,
        })
        .collect();
    let d = ps.dim;
    let outer: Vec<DMatrix<Complex64>> = ps
        .projectors
        .iter()
        .map(|p| DensityMatrix::pure(&p.state).entries)
        .collect();

    let mut rho = DensityMatrix::maximally_mixed(d);
    let mut probs = predict_probabilities(&rho, ps);
    let mut loglik = log_likelihood(&freq, &probs);
    let mut trace = vec![loglik];
    let mut iterations = 0;
    let eye = DMatrix::<Complex64>::identity(d, d);

    while iterations < cfg.max_iterations {
        iterations += 1;
        let mut r = DMatrix::<Complex64>::zeros(d, d);
        for ((f, p), proj) in freq.iter().zip(&probs).zip(&outer) {
            if *f > 0.0 && *p > 0.0 {
                r += proj * Complex64::new(f / p / active as f64, 0.0);
            }
        }

        let step = |op: &DMatrix<Complex64>| -> (DensityMatrix, Vec<f64>, f64) {
            let next = DensityMatrix {
                entries: hermitize(op * &rho.entries * op),
            };
            let probs = predict_probabilities(&next, ps);
            let ll = log_likelihood(&freq, &probs);
            (next, probs, ll)
        };

        let mut accepted = None;
        let candidate = step(&r);
        if candidate.2 >= loglik {
            accepted = Some(candidate);
        } else {
            let mut eps = 0.5;
            for _ in 0..40 {
                let op = (&eye + &r * Complex64::new(eps, 0.0)) / Complex64::new(1.0 + eps, 0.0);
                let candidate = step(&op);
                if candidate.2 >= loglik {
                    accepted = Some(candidate);
                    break;
                }
                eps *= 0.5;
            }
        }
        let Some((next, next_probs, next_ll)) = accepted else {
            break;
        };
        let gain = next_ll - loglik;
        rho = next;
        probs = next_probs;
        loglik = next_ll;
        trace.push(loglik);
        if gain < cfg.tolerance {
            break;
        }
    }

    Ok(MleResult {
        rho,
        iterations,
        log_likelihood: loglik,
        trace,
    })
}

/// Per-projector counts `Poisson(rate * exposure * p_k)`, one stream per
/// projector derived from `seed`.
pub fn simulate_counts(
    rho: &DensityMatrix,
    ps: &ProjectorSet,
    rate: f64,
    exposure: f64,
    seed: u64,
) -> Result<Vec<u64>> {
    predict_probabilities(rho, ps)
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut rng = restart_rng(seed, k as u64);
            poisson_sample(rate * exposure * p.max(0.0), &mut rng)
        })
        .collect()
}

/// Noiseless integer counts proportional to the Born probabilities.
pub fn expected_counts(rho: &DensityMatrix, ps: &ProjectorSet, per_setting: f64) -> Vec<u64> {
    predict_probabilities(rho, ps)
        .iter()
        .map(|p| (p.max(0.0) * per_setting).round() as u64)
        .collect()
}

/// Parses `label,count` rows (an optional `label,count` header is skipped,
/// `#` starts a comment line) and orders them like `ps`. Every projector must
/// appear exactly once.
pub fn parse_counts_csv(text: &str, ps: &ProjectorSet) -> Result<Vec<u64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut counts: Vec<Option<u64>> = vec![None; ps.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let line = record.position().map_or(row as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let [label, value] = [record.get(0), record.get(1)];
        let (Some(label), Some(value), 2) = (label, value, record.len()) else {
            return Err(Error::Parse(format!("line {line}: expected `label,count`")));
        };
        if row == 0 && label.eq_ignore_ascii_case("label") {
            continue;
        }
        let idx = ps
            .index_of(label)
            .ok_or_else(|| Error::Parse(format!("line {line}: unknown projector `{label}`")))?;
        let count: u64 = value
            .parse()
            .map_err(|_| Error::Parse(format!("line {line}: bad count `{value}`")))?;
        if counts[idx].replace(count).is_some() {
            return Err(Error::Parse(format!("line {line}: duplicate projector `{label}`")));
        }
    }
    counts
        .into_iter()
        .zip(&ps.projectors)
        .map(|(c, p)| c.ok_or_else(|| Error::MissingProjector(p.label.clone())))
        .collect()
}

pub fn counts_csv(counts: &[u64], ps: &ProjectorSet) -> String {
    let mut out = String::from("label,count\n");
    for (c, p) in counts.iter().zip(&ps.projectors) {
        out.push_str(&format!("{},{}\n", p.label, c));
    }
    out
}

/// `row,col,re,im` for every entry.
pub fn density_csv(rho: &DensityMatrix) -> String {
    let mut out = String::from("row,col,re,im\n");
    for i in 0..rho.dim() {
        for j in 0..rho.dim() {
            let z = rho.entries[(i, j)];
            out.push_str(&format!("{i},{j},{},{}\n", z.re, z.im));
        }
    }
    out
}

/// Hermitian coordinates of `rho`, exposed for round-trip checks.
pub fn hermitian_params(rho: &DensityMatrix) -> Vec<f64> {
    to_params(&rho.entries)
}
