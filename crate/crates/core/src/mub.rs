//! Mutually unbiased bases in small dimensions.
//!
//! Bases are stored column-wise: each column is a normalized [`State`]. Two
//! orthonormal bases `{a_i}` and `{b_j}` of `C^d` are mutually unbiased when
//! `|<a_i|b_j>|^2 = 1/d` for every pair of indices.
//!
//! Besides the generic computational and Fourier bases, this module carries
//! the explicit sets used for the photonic qusix: the three polarization
//! bases `pi_1..pi_3`, the four OAM qutrit bases `O_1..O_4` (rows ordered
//! `|-1>, |0>, |+1>`) and the product triple `I, II, III` in `C^6`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default tolerance for closed-form constructions.
pub const EXACT_TOL: f64 = 1e-12;

const NORM_TOL: f64 = 1e-12;

/// `exp(i 2 pi k / d)`.
pub fn root_of_unity(d: usize, k: i64) -> Complex64 {
    let k = k.rem_euclid(d as i64);
    Complex64::from_polar(1.0, 2.0 * PI * k as f64 / d as f64)
}

/// Pure qudit state: a unit vector in `C^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    amplitudes: Vec<Complex64>,
}

impl State {
    /// Wraps amplitudes that are already normalized.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = norm(&amplitudes);
        if amplitudes.is_empty() || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = norm(&amplitudes);
        if amplitudes.is_empty() || !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self {
            amplitudes: amplitudes.into_iter().map(|a| a / norm).collect(),
        })
    }

    /// Computational basis vector `|k>` in `C^d`.
    pub fn basis_vector(d: usize, k: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); d];
        amplitudes[k] = Complex64::new(1.0, 0.0);
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &State) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(inner(&self.amplitudes, &other.amplitudes))
    }

    /// `|<self|other>|^2`.
    pub fn overlap(&self, other: &State) -> Result<f64> {
        self.inner(other).map(|z| z.norm_sqr())
    }

    /// Kronecker product, `self` as the major index.
    pub fn tensor(&self, other: &State) -> State {
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        State { amplitudes }
    }

    /// Same ray with the first nonzero amplitude made real positive.
    pub fn canonical_phase(&self) -> State {
        let pivot = self
            .amplitudes
            .iter()
            .find(|a| a.norm() > 1e-14)
            .copied()
            .unwrap_or(Complex64::new(1.0, 0.0));
        let phase = pivot.conj() / pivot.norm();
        State {
            amplitudes: self.amplitudes.iter().map(|a| a * phase).collect(),
        }
    }
}

pub(crate) fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `sum conj(a_k) b_k`.
pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Orthonormal basis of `C^d`, stored as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub label: String,
    columns: Vec<State>,
}

impl Basis {
    /// Builds a basis from columns, checking orthonormality to `EXACT_TOL`.
    pub fn new(label: impl Into<String>, columns: Vec<State>) -> Result<Self> {
        let basis = Self::from_columns_unchecked(label, columns)?;
        let dev = basis.gram_deviation().0;
        if dev > EXACT_TOL {
            return Err(Error::Parse(format!(
                "basis `{}` is not orthonormal (Gram deviation {dev:e})",
                basis.label
            )));
        }
        Ok(basis)
    }

    /// Only checks shape: `d` columns of dimension `d`.
    pub fn from_columns_unchecked(label: impl Into<String>, columns: Vec<State>) -> Result<Self> {
        let d = columns.len();
        if d == 0 {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        if let Some(bad) = columns.iter().find(|c| c.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.dim(),
            });
        }
        Ok(Self {
            label: label.into(),
            columns,
        })
    }

    /// Builds a basis from a row-major matrix scaled by `scale`; columns of
    /// the matrix become basis states.
    fn from_rows(label: &str, scale: f64, rows: &[&[Complex64]]) -> Self {
        let d = rows.len();
        let columns = (0..d)
            .map(|j| State {
                amplitudes: rows.iter().map(|r| r[j] * scale).collect(),
            })
            .collect();
        Self {
            label: label.to_string(),
            columns,
        }
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[State] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> &State {
        &self.columns[j]
    }

    /// Entry at `(row, col)` of the column matrix.
    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.columns[col].amplitudes[row]
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |r, c| self.entry(r, c))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Largest `|<c_i|c_j> - delta_ij|` and its location.
    fn gram_deviation(&self) -> (f64, usize, usize) {
        let mut worst = (0.0, 0, 0);
        for (i, a) in self.columns.iter().enumerate() {
            for (j, b) in self.columns.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                let dev = (inner(&a.amplitudes, &b.amplitudes) - target).norm();
                if dev > worst.0 {
                    worst = (dev, i, j);
                }
            }
        }
        worst
    }
}

/// Bases claimed pairwise unbiased.
#[derive(Debug, Clone, PartialEq)]
pub struct MubSet {
    pub dim: usize,
    pub bases: Vec<Basis>,
}

impl MubSet {
    pub fn new(dim: usize, bases: Vec<Basis>) -> Result<Self> {
        if let Some(b) = bases.iter().find(|b| b.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: b.dim(),
            });
        }
        Ok(Self { dim, bases })
    }

    pub fn basis(&self, label: &str) -> Option<&Basis> {
        self.bases.iter().find(|b| b.label == label)
    }

    /// All basis states, basis-major.
    pub fn states(&self) -> impl Iterator<Item = &State> {
        self.bases.iter().flat_map(|b| b.columns.iter())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn computational_basis(d: usize) -> Basis {
    Basis {
        label: "computational".into(),
        columns: (0..d).map(|k| State::basis_vector(d, k)).collect(),
    }
}

/// Discrete Fourier basis: column `j` has entries `w^(ij)/sqrt(d)`.
pub fn fourier_basis(d: usize) -> Basis {
    let scale = 1.0 / (d as f64).sqrt();
    let columns = (0..d)
        .map(|j| State {
            amplitudes: (0..d)
                .map(|i| root_of_unity(d, (i * j) as i64) * scale)
                .collect(),
        })
        .collect();
    Basis {
        label: "fourier".into(),
        columns,
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Eigenbases of the three Pauli operators: `pi_1` (H/V), `pi_2` (A/D),
/// `pi_3` (L/R).
pub fn polarization_mubs() -> MubSet {
    let one = c(1.0, 0.0);
    let zero = c(0.0, 0.0);
    let i = c(0.0, 1.0);
    let bases = vec![
        Basis::from_rows("pi_1", 1.0, &[&[one, zero], &[zero, one]]),
        Basis::from_rows("pi_2", FRAC_1_SQRT_2, &[&[one, one], &[one, -one]]),
        Basis::from_rows("pi_3", FRAC_1_SQRT_2, &[&[one, one], &[i, -i]]),
    ];
    MubSet { dim: 2, bases }
}

/// Complete set of four qutrit bases `O_1..O_4`. Rows are `|-1>, |0>, |+1>`;
/// columns follow the alpha/beta/gamma numbering.
pub fn oam_qutrit_mubs() -> MubSet {
    let one = c(1.0, 0.0);
    let zero = c(0.0, 0.0);
    let w = root_of_unity(3, 1);
    let w2 = root_of_unity(3, 2);
    let s = 1.0 / 3f64.sqrt();
    let bases = vec![
        Basis::from_rows(
            "O_1",
            1.0,
            &[&[one, zero, zero], &[zero, one, zero], &[zero, zero, one]],
        ),
        Basis::from_rows("O_2", s, &[&[one, one, one], &[one, w, w2], &[one, w2, w]]),
        Basis::from_rows("O_3", s, &[&[one, one, one], &[w, w2, one], &[w, one, w2]]),
        Basis::from_rows("O_4", s, &[&[one, one, one], &[w2, w, one], &[w2, one, w]]),
    ];
    MubSet { dim: 3, bases }
}

/// Kronecker product basis; column `(i, j)` lands at `i * dim(b) + j`.
pub fn tensor_basis(a: &Basis, b: &Basis) -> Basis {
    let columns = a
        .columns
        .iter()
        .flat_map(|ca| b.columns.iter().map(move |cb| ca.tensor(cb)))
        .collect();
    Basis {
        label: format!("{}x{}", a.label, b.label),
        columns,
    }
}

/// The qusix triple `I = pi_1 (x) O_1`, `II = pi_2 (x) O_2`,
/// `III = pi_3 (x) O_3`, polarization as the major index.
pub fn qusix_mubs() -> MubSet {
    let pol = polarization_mubs();
    let oam = oam_qutrit_mubs();
    let bases = ["I", "II", "III"]
        .iter()
        .enumerate()
        .map(|(k, label)| tensor_basis(&pol.bases[k], &oam.bases[k]).with_label(*label))
        .collect();
    MubSet { dim: 6, bases }
}

/// `|<a_i|b_j>|^2` for all `i, j`.
pub fn overlap_matrix(a: &Basis, b: &Basis) -> Result<DMatrix<f64>> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let d = a.dim();
    Ok(DMatrix::from_fn(d, d, |i, j| {
        inner(&a.columns[i].amplitudes, &b.columns[j].amplitudes).norm_sqr()
    }))
}

/// Where the worst deviation of a verification was found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeviationSite {
    /// `|<c_i|c_j> - delta_ij|` inside one basis.
    Gram { basis: usize, i: usize, j: usize },
    /// `| |<a_i|b_j>|^2 - 1/d |` between two bases.
    Cross {
        basis_a: usize,
        basis_b: usize,
        i: usize,
        j: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MubReport {
    pub pass: bool,
    pub tolerance: f64,
    pub max_deviation: f64,
    pub worst: Option<DeviationSite>,
}

/// Checks orthonormality of every basis and unbiasedness of every pair.
pub fn verify_mub_set(set: &MubSet, tol: f64) -> MubReport {
    let mut max_deviation = 0.0;
    let mut worst = None;
    let mut record = |dev: f64, site: DeviationSite| {
        // NaN counts as a failure
        if !(dev <= max_deviation) {
            max_deviation = dev;
            worst = Some(site);
        }
    };

    for (k, basis) in set.bases.iter().enumerate() {
        if basis.dim() != set.dim {
            record(f64::INFINITY, DeviationSite::Gram { basis: k, i: 0, j: 0 });
            continue;
        }
        let (dev, i, j) = basis.gram_deviation();
        record(dev, DeviationSite::Gram { basis: k, i, j });
    }

    let target = 1.0 / set.dim as f64;
    for (ka, a) in set.bases.iter().enumerate() {
        for (kb, b) in set.bases.iter().enumerate().skip(ka + 1) {
            let Ok(overlaps) = overlap_matrix(a, b) else {
                continue;
            };
            for i in 0..overlaps.nrows() {
                for j in 0..overlaps.ncols() {
                    let dev = (overlaps[(i, j)] - target).abs();
                    record(
                        dev,
                        DeviationSite::Cross {
                            basis_a: ka,
                            basis_b: kb,
                            i,
                            j,
                        },
                    );
                }
            }
        }
    }

    MubReport {
        pass: max_deviation <= tol,
        tolerance: tol,
        max_deviation,
        worst,
    }
}

// JSON layout: {dim, bases: [{label, columns: [[[re, im], ...], ...]}]}

#[derive(Serialize, Deserialize)]
struct BasisDoc {
    label: String,
    columns: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct MubSetDoc {
    dim: usize,
    bases: Vec<BasisDoc>,
}

impl From<&Basis> for BasisDoc {
    fn from(b: &Basis) -> Self {
        BasisDoc {
            label: b.label.clone(),
            columns: b
                .columns
                .iter()
                .map(|s| s.amplitudes.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        }
    }
}

impl TryFrom<BasisDoc> for Basis {
    type Error = Error;

    fn try_from(doc: BasisDoc) -> Result<Self> {
        let columns = doc
            .columns
            .into_iter()
            .map(|col| State::new(col.into_iter().map(|[re, im]| c(re, im)).collect()))
            .collect::<Result<Vec<_>>>()?;
        Basis::from_columns_unchecked(doc.label, columns)
    }
}

impl Serialize for Basis {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        BasisDoc::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Basis {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = BasisDoc::deserialize(deserializer)?;
        Basis::try_from(doc).map_err(serde::de::Error::custom)
    }
}

impl Serialize for MubSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MubSetDoc {
            dim: self.dim,
            bases: self.bases.iter().map(BasisDoc::from).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MubSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = MubSetDoc::deserialize(deserializer)?;
        let bases = doc
            .bases
            .into_iter()
            .map(Basis::try_from)
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        MubSet::new(doc.dim, bases).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: Complex64, b: Complex64, tol: f64) {
        assert!((a - b).norm() <= tol, "{a} vs {b}");
    }

    #[test]
    fn computational_basis_is_identity() {
        let b = computational_basis(2);
        assert_eq!(b.column(0).amplitudes(), &[c(1.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(b.column(1).amplitudes(), &[c(0.0, 0.0), c(1.0, 0.0)]);
        let b1 = computational_basis(1);
        assert_eq!(b1.dim(), 1);
        assert_eq!(b1.entry(0, 0), c(1.0, 0.0));
        let i6 = computational_basis(6);
        let basis_i = &qusix_mubs().bases[0];
        assert_eq!(i6.to_matrix(), basis_i.to_matrix());
    }

    #[test]
    fn fourier_matches_reference_entries() {
        let f2 = fourier_basis(2);
        let pi2 = &polarization_mubs().bases[1];
        let f3 = fourier_basis(3);
        let o2 = &oam_qutrit_mubs().bases[1];
        for r in 0..2 {
            for col in 0..2 {
                assert_close(f2.entry(r, col), pi2.entry(r, col), 1e-15);
            }
        }
        for r in 0..3 {
            for col in 0..3 {
                assert_close(f3.entry(r, col), o2.entry(r, col), 1e-15);
            }
        }
        assert_eq!(fourier_basis(1).entry(0, 0), c(1.0, 0.0));
    }

    #[test]
    fn polarization_set() {
        let set = polarization_mubs();
        assert_eq!(set.bases.len(), 3);
        let h = set.bases[0].column(0);
        let r = set.bases[2].column(1);
        assert!((h.overlap(r).unwrap() - 0.5).abs() < 1e-15);
        assert!(verify_mub_set(&set, EXACT_TOL).pass);
    }

    #[test]
    fn qutrit_set_columns() {
        let set = oam_qutrit_mubs();
        let w2 = root_of_unity(3, 2);
        let s = 1.0 / 3f64.sqrt();
        let beta2 = set.bases[2].column(1);
        assert_close(beta2.amplitudes()[0], c(s, 0.0), 1e-15);
        assert_close(beta2.amplitudes()[1], w2 * s, 1e-15);
        assert_close(beta2.amplitudes()[2], c(s, 0.0), 1e-15);
        let alpha1 = set.bases[1].column(0);
        let beta1 = set.bases[2].column(0);
        assert!((alpha1.overlap(beta1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(verify_mub_set(&set, EXACT_TOL).pass);
    }

    #[test]
    fn qusix_reference_entries() {
        let set = qusix_mubs();
        let s6 = 1.0 / 6f64.sqrt();
        for r in 0..6 {
            assert_close(set.bases[1].entry(r, 0), c(s6, 0.0), 1e-15);
        }
        assert_close(set.bases[2].entry(3, 0), c(0.0, s6), 1e-15);
        let report = verify_mub_set(&set, EXACT_TOL);
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn overlap_matrix_cases() {
        let set = qusix_mubs();
        let m = overlap_matrix(&set.bases[0], &set.bases[0]).unwrap();
        assert!((m - DMatrix::identity(6, 6)).abs().max() < 1e-15);
        let m = overlap_matrix(&set.bases[0], &set.bases[1]).unwrap();
        assert!(m.iter().all(|v| (v - 1.0 / 6.0).abs() < 1e-15));
        let oam = oam_qutrit_mubs();
        let m = overlap_matrix(&oam.bases[0], &oam.bases[3]).unwrap();
        assert!(m.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert!(matches!(
            overlap_matrix(&oam.bases[0], &set.bases[0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn repeated_basis_fails_verification() {
        let o1 = oam_qutrit_mubs().bases[0].clone();
        let set = MubSet::new(3, vec![o1.clone(), o1]).unwrap();
        let report = verify_mub_set(&set, EXACT_TOL);
        assert!(!report.pass);
        assert!((report.max_deviation - 2.0 / 3.0).abs() < 1e-15);
        assert!(matches!(report.worst, Some(DeviationSite::Cross { .. })));
    }

    #[test]
    fn non_orthonormal_basis_rejected() {
        let s = State::normalized(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(Basis::new("bad", vec![s.clone(), s]).is_err());
    }

    #[test]
    fn state_normalization_checks() {
        assert!(State::new(vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
        assert!(State::normalized(vec![c(0.0, 0.0)]).is_err());
        assert!(State::new(vec![]).is_err());
    }

    #[test]
    fn canonical_phase_removes_global_phase() {
        let s = State::normalized(vec![c(0.0, 0.0), c(0.0, 2.0), c(1.0, 1.0)]).unwrap();
        let canon = s.canonical_phase();
        assert_eq!(canon.amplitudes()[0], c(0.0, 0.0));
        assert!(canon.amplitudes()[1].im.abs() < 1e-15);
        assert!(canon.amplitudes()[1].re > 0.0);
        let shifted = State::new(
            s.amplitudes()
                .iter()
                .map(|a| a * Complex64::from_polar(1.0, 0.7))
                .collect(),
        )
        .unwrap();
        for (x, y) in shifted
            .canonical_phase()
            .amplitudes()
            .iter()
            .zip(canon.amplitudes())
        {
            assert_close(*x, *y, 1e-15);
        }
    }

    #[test]
    fn json_layout_and_round_trip() {
        let set = oam_qutrit_mubs();
        let text = set.to_json().unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["dim"], 3);
        assert_eq!(value["bases"][1]["label"], "O_2");
        assert_eq!(value["bases"][0]["columns"][0][0][0], 1.0);
        assert_eq!(MubSet::from_json(&text).unwrap(), set);
    }

    #[test]
    fn json_rejects_unnormalized_and_mismatched() {
        let bad = r#"{"dim":2,"bases":[{"label":"x","columns":[[[2,0],[0,0]],[[0,0],[1,0]]]}]}"#;
        assert!(MubSet::from_json(bad).is_err());
        let mismatch = r#"{"dim":3,"bases":[{"label":"x","columns":[[[1,0],[0,0]],[[0,0],[1,0]]]}]}"#;
        assert!(MubSet::from_json(mismatch).is_err());
    }
}
