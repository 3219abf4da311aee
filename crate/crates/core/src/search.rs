//! Numerical search for states and bases unbiased to a given set.
//!
//! The objective for a single vector `v` against a set of bases is the
//! quartic residual `sum_b (|<b|v>|^2 - 1/d)^2` over every basis state `b`.
//! It is minimized on the unit sphere by projected gradient descent with a
//! backtracking line search, from Haar-random starting points.
//!
//! A residual floor that stays away from zero is evidence only; the search
//! never claims nonexistence.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mub::{computational_basis, inner, norm, Basis, MubSet, State};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Gradient-norm threshold for declaring a restart converged.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iterations: 5000,
            tolerance: 1e-12,
            seed: 0,
        }
    }
}

impl SearchConfig {
    fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iterations == 0 || !(self.tolerance > 0.0) {
            return Err(Error::Parse(format!("invalid search config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best_vector: State,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Index of the restart that produced the best vector.
    pub restart: usize,
}

/// Independent random stream for one restart.
pub(crate) fn restart_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Haar-random unit vector: normalized complex Gaussian.
pub fn random_state(d: usize, rng: &mut ChaCha8Rng) -> State {
    loop {
        let amps: Vec<Complex64> = (0..d)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re, im)
            })
            .collect();
        if let Ok(s) = State::normalized(amps) {
            return s;
        }
    }
}

fn check_dim(v: &[Complex64], set: &MubSet) -> Result<()> {
    if v.len() != set.dim {
        return Err(Error::DimensionMismatch {
            expected: set.dim,
            found: v.len(),
        });
    }
    Ok(())
}

fn residual_raw(v: &[Complex64], set: &MubSet) -> f64 {
    let target = 1.0 / set.dim as f64;
    set.states()
        .map(|b| {
            let e = inner(b.amplitudes(), v).norm_sqr() - target;
            e * e
        })
        .sum()
}

/// `sum_b (|<b|v>|^2 - 1/d)^2` over every state of every basis in `set`.
pub fn unbiasedness_residual(v: &State, set: &MubSet) -> Result<f64> {
    check_dim(v.amplitudes(), set)?;
    Ok(residual_raw(v.amplitudes(), set))
}

/// The same residual for an arbitrary, not necessarily normalized, vector.
pub fn residual_value(v: &[Complex64], set: &MubSet) -> Result<f64> {
    check_dim(v, set)?;
    Ok(residual_raw(v, set))
}

/// Euclidean gradient of the residual, packed as `d/dx + i d/dy` for
/// `v = x + i y`. Not projected onto the sphere.
pub fn residual_gradient(v: &[Complex64], set: &MubSet) -> Result<Vec<Complex64>> {
    check_dim(v, set)?;
    Ok(gradient_raw(v, set))
}

fn gradient_raw(v: &[Complex64], set: &MubSet) -> Vec<Complex64> {
    let target = 1.0 / set.dim as f64;
    let mut g = vec![Complex64::new(0.0, 0.0); v.len()];
    for b in set.states() {
        let amp = inner(b.amplitudes(), v);
        let scale = 4.0 * (amp.norm_sqr() - target) * amp;
        for (gk, bk) in g.iter_mut().zip(b.amplitudes()) {
            *gk += bk * scale;
        }
    }
    g
}

struct Descent {
    v: Vec<Complex64>,
    iterations: usize,
    converged: bool,
}

fn normalize(v: &mut [Complex64]) {
    let n = norm(v);
    v.iter_mut().for_each(|z| *z /= n);
}

/// Projected gradient with Armijo backtracking and step re-expansion.
fn descend(mut v: Vec<Complex64>, set: &MubSet, cfg: &SearchConfig) -> Descent {
    const ARMIJO: f64 = 1e-4;
    let mut f = residual_raw(&v, set);
    let mut step = 1.0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let mut g = gradient_raw(&v, set);
        // tangent projection: remove the radial component Re<v|g> v
        let radial = inner(&v, &g).re;
        for (gk, vk) in g.iter_mut().zip(&v) {
            *gk -= vk * radial;
        }
        let gnorm2: f64 = g.iter().map(|z| z.norm_sqr()).sum();
        if gnorm2.sqrt() < cfg.tolerance || f == 0.0 {
            converged = true;
            break;
        }

        let mut accepted = false;
        while step > 1e-20 {
            let mut trial: Vec<Complex64> = v.iter().zip(&g).map(|(a, b)| a - b * step).collect();
            normalize(&mut trial);
            let ft = residual_raw(&trial, set);
            if ft <= f - ARMIJO * step * gnorm2 {
                v = trial;
                f = ft;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no descent possible at machine precision
            converged = gnorm2.sqrt() < cfg.tolerance.sqrt();
            break;
        }
        step *= 2.0;
    }

    Descent {
        v,
        iterations,
        converged,
    }
}

/// Best vector over `cfg.restarts` Haar-random starts. Restarts run in
/// parallel; ties are broken by the lower restart index.
pub fn search_extension_vector(set: &MubSet, cfg: &SearchConfig) -> Result<SearchResult> {
    cfg.validate()?;
    let d = set.dim;
    (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(cfg.seed, r as u64);
            let start = random_state(d, &mut rng);
            let run = descend(start.amplitudes().to_vec(), set, cfg);
            let best_vector = State::normalized(run.v).expect("descent stays on the sphere");
            SearchResult {
                residual: residual_raw(best_vector.amplitudes(), set),
                best_vector,
                iterations: run.iterations,
                converged: run.converged,
                restart: r,
            }
        })
        .reduce_with(pick_better)
        .ok_or_else(|| Error::Parse("no restarts".into()))
}

fn pick_better(a: SearchResult, b: SearchResult) -> SearchResult {
    match a.residual.total_cmp(&b.residual) {
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Greater => b,
        std::cmp::Ordering::Equal if a.restart <= b.restart => a,
        std::cmp::Ordering::Equal => b,
    }
}

// ---------------------------------------------------------------------------
// Full-set search

#[derive(Debug, Clone, PartialEq)]
pub struct MubSearchResult {
    pub set: MubSet,
    /// Pairwise unbiasedness residual of the orthonormalized set.
    pub residual: f64,
    /// Objective (unbiasedness + orthonormality penalty) before the final
    /// orthonormalization.
    pub penalized_objective: f64,
    pub iterations: usize,
    pub restart: usize,
}

type CMat = DMatrix<Complex64>;

/// Pairwise unbiasedness residual `sum_{k<l} sum_ij (|<u_ki|u_lj>|^2 - 1/d)^2`.
pub fn set_residual(set: &MubSet) -> f64 {
    let mats: Vec<CMat> = set.bases.iter().map(Basis::to_matrix).collect();
    cross_residual(&mats, set.dim)
}

fn cross_residual(mats: &[CMat], d: usize) -> f64 {
    let target = 1.0 / d as f64;
    let mut cross = 0.0;
    for k in 0..mats.len() {
        for l in (k + 1)..mats.len() {
            let m = mats[k].adjoint() * &mats[l];
            cross += m
                .iter()
                .map(|z| {
                    let e = z.norm_sqr() - target;
                    e * e
                })
                .sum::<f64>();
        }
    }
    cross
}

/// Penalized objective and its gradient with respect to every basis matrix.
/// The first matrix is held fixed by the caller; its gradient is still
/// returned.
pub fn penalized_objective(mats: &[CMat], d: usize) -> (f64, Vec<CMat>) {
    let target = 1.0 / d as f64;
    let eye = CMat::identity(d, d);
    let mut grads: Vec<CMat> = mats.iter().map(|_| CMat::zeros(d, d)).collect();
    let mut value = 0.0;
    for k in 0..mats.len() {
        let uk_adj = mats[k].adjoint();
        for l in (k + 1)..mats.len() {
            let m = &uk_adj * &mats[l];
            let mut w = m.clone();
            for z in w.iter_mut() {
                let e = z.norm_sqr() - target;
                value += e * e;
                *z *= 4.0 * e;
            }
            grads[l] += &mats[k] * &w;
            grads[k] += &mats[l] * w.adjoint();
        }
        let p = &uk_adj * &mats[k] - &eye;
        value += p.iter().map(|z| z.norm_sqr()).sum::<f64>();
        grads[k] += &mats[k] * p * Complex64::new(4.0, 0.0);
    }
    (value, grads)
}

fn pack(mats: &[CMat]) -> Vec<f64> {
    mats.iter()
        .flat_map(|m| m.iter().flat_map(|z| [z.re, z.im]))
        .collect()
}

fn unpack(x: &[f64], d: usize) -> Vec<CMat> {
    x.chunks(2 * d * d)
        .map(|chunk| {
            CMat::from_iterator(
                d,
                d,
                chunk.chunks(2).map(|p| Complex64::new(p[0], p[1])),
            )
        })
        .collect()
}

/// Nearest unitary (polar factor) via SVD.
fn nearest_unitary(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    u * v_t
}

fn random_matrix(d: usize, rng: &mut ChaCha8Rng) -> CMat {
    CMat::from_fn(d, d, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    })
}

/// Limited-memory BFGS with Armijo backtracking over the packed free bases.
fn lbfgs_minimize(
    x0: Vec<f64>,
    fixed: &CMat,
    d: usize,
    cfg: &SearchConfig,
) -> (Vec<f64>, f64, usize) {
    const MEMORY: usize = 12;
    const ARMIJO: f64 = 1e-4;

    let eval = |x: &[f64]| -> (f64, Vec<f64>) {
        let mut mats = vec![fixed.clone()];
        mats.extend(unpack(x, d));
        let (f, grads) = penalized_objective(&mats, d);
        (f, pack(&grads[1..]))
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let mut x = x0;
    let (mut f, mut g) = eval(&x);
    let mut history: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        if dot(&g, &g).sqrt() < cfg.tolerance || f < 1e-30 {
            break;
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            history.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        let mut step = 1.0;
        let mut next = None;
        while step > 1e-16 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            let (ft, gt) = eval(&trial);
            if ft <= f + ARMIJO * step * slope {
                next = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gn)) = next else {
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        f = fnew;
        g = gn;
    }
    (x, f, iterations)
}

/// Searches for `target_count` pairwise unbiased bases in `C^d`. The first
/// basis is pinned to the computational basis (every MUB set is unitarily
/// equivalent to one containing it); the others are free complex matrices
/// driven toward unitarity by a Frobenius penalty and toward unbiasedness by
/// the pairwise residual. Restarts run in parallel.
pub fn search_full_mub_set(
    d: usize,
    target_count: usize,
    cfg: &SearchConfig,
) -> Result<MubSearchResult> {
    cfg.validate()?;
    if target_count < 2 {
        return Err(Error::Parse(format!(
            "target_count must be at least 2, got {target_count}"
        )));
    }
    if d == 0 {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    }
    let fixed = computational_basis(d).to_matrix();

    (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(cfg.seed, r as u64);
            let start: Vec<CMat> = (1..target_count)
                .map(|_| nearest_unitary(&random_matrix(d, &mut rng)))
                .collect();
            let (x, penalized, iterations) = lbfgs_minimize(pack(&start), &fixed, d, cfg);

            let mut bases = vec![computational_basis(d).with_label("B1")];
            for (k, m) in unpack(&x, d).iter().enumerate() {
                let u = nearest_unitary(m);
                let columns = (0..d)
                    .map(|j| {
                        State::normalized(u.column(j).iter().copied().collect())
                            .expect("unitary columns are nonzero")
                    })
                    .collect();
                bases.push(
                    Basis::from_columns_unchecked(format!("B{}", k + 2), columns)
                        .expect("square by construction"),
                );
            }
            let set = MubSet { dim: d, bases };
            MubSearchResult {
                residual: set_residual(&set),
                set,
                penalized_objective: penalized,
                iterations,
                restart: r,
            }
        })
        .reduce_with(|a, b| match a.residual.total_cmp(&b.residual) {
            std::cmp::Ordering::Greater => b,
            std::cmp::Ordering::Equal if b.restart < a.restart => b,
            _ => a,
        })
        .ok_or_else(|| Error::Parse("no restarts".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mub::{fourier_basis, oam_qutrit_mubs, polarization_mubs};

    #[test]
    fn residual_of_unbiased_column_is_zero() {
        let set = MubSet::new(3, vec![computational_basis(3)]).unwrap();
        for col in fourier_basis(3).columns() {
            assert!(unbiasedness_residual(col, &set).unwrap() < 1e-12);
        }
    }

    #[test]
    fn residual_direct_evaluation() {
        let set = MubSet::new(6, vec![computational_basis(6)]).unwrap();
        let v = State::basis_vector(6, 0);
        let r = unbiasedness_residual(&v, &set).unwrap();
        assert!((r - 30.0 / 36.0).abs() < 1e-15);
    }

    #[test]
    fn o4_columns_extend_first_three() {
        let full = oam_qutrit_mubs();
        let set = MubSet::new(3, full.bases[..3].to_vec()).unwrap();
        for col in full.bases[3].columns() {
            assert!(unbiasedness_residual(col, &set).unwrap() < 1e-12);
        }
    }

    #[test]
    fn residual_dimension_mismatch() {
        let set = polarization_mubs();
        let v = State::basis_vector(3, 0);
        assert!(matches!(
            unbiasedness_residual(&v, &set),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn qubit_equator_found() {
        let set = MubSet::new(2, vec![computational_basis(2)]).unwrap();
        for seed in 0..5 {
            let cfg = SearchConfig {
                restarts: 1,
                seed,
                ..Default::default()
            };
            let res = search_extension_vector(&set, &cfg).unwrap();
            assert!(res.residual < 1e-10, "seed {seed}: {}", res.residual);
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let set = polarization_mubs();
        let cfg = SearchConfig {
            restarts: 0,
            ..Default::default()
        };
        assert!(search_extension_vector(&set, &cfg).is_err());
        assert!(search_full_mub_set(2, 1, &SearchConfig::default()).is_err());
    }

    #[test]
    fn penalized_gradient_matches_finite_differences() {
        let d = 3;
        let mut rng = restart_rng(11, 0);
        let mats: Vec<CMat> = (0..3).map(|_| random_matrix(d, &mut rng)).collect();
        let (_, grads) = penalized_objective(&mats, d);
        let x = pack(&mats);
        let g = pack(&grads);
        let h = 1e-6;
        for idx in (0..x.len()).step_by(5) {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[idx] += h;
            xm[idx] -= h;
            let fp = penalized_objective(&unpack(&xp, d), d).0;
            let fm = penalized_objective(&unpack(&xm, d), d).0;
            let fd = (fp - fm) / (2.0 * h);
            assert!(
                (fd - g[idx]).abs() <= 1e-5 * g[idx].abs().max(1.0),
                "idx {idx}: fd {fd} vs {}",
                g[idx]
            );
        }
    }

    #[test]
    fn qubit_complete_set_found() {
        let res = search_full_mub_set(2, 3, &SearchConfig::default()).unwrap();
        assert!(res.residual < 1e-8, "{}", res.residual);
        assert_eq!(res.set.bases.len(), 3);
    }
}
