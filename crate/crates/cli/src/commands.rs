use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, ValueEnum};
use mublab::experiment::{
    block_deviations, matrix_csv, normalize_counts, poissonize, probability_matrix, similarity,
    state_labels, EncodingKind, OpticsModel, QusixEncoding, DEFAULT_EXPOSURE, DEFAULT_RATE,
    STATE_COUNT,
};
use mublab::io::{encode_raw_complex, encode_raw_real, field_intensity_png, field_phase_png, phase_png, raw_header_json};
use mublab::kinoform::{first_order, kinoform_for, InputBeam, DEFAULT_PERIOD};
use mublab::labels::{parse_coefficients, BasisName, StateLabel};
use mublab::mub::{oam_qutrit_mubs, polarization_mubs, qusix_mubs, verify_mub_set, MubSet, EXACT_TOL};
use mublab::optics::{normalized_overlap, synthesize_mode, GridSpec, OamSuperposition};
use mublab::search::{search_extension_vector, search_full_mub_set, SearchConfig};
use mublab::tomography::{
    build_projector_set, counts_csv, density_csv, expected_counts, fidelity, linear_inversion,
    mle_from_frequencies, mle_reconstruction, parse_counts_csv, predict_probabilities,
    qusix_product_label, setting_frequencies, simulate_counts, DensityMatrix, MleConfig,
    ProjectorSet,
};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::manifest::{OutputDir, RunManifest, MANIFEST_NAME};

/// Bad arguments; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn parse_encoding(s: &str) -> Result<EncodingKind, String> {
    s.parse().map_err(|e: mublab::Error| e.to_string())
}

fn grid(n: usize, window: f64) -> anyhow::Result<GridSpec> {
    GridSpec::new(n, window).map_err(|e| usage(e.to_string()))
}

#[derive(Debug, Args, Serialize)]
pub struct BasesArgs {
    /// Hilbert-space dimension: 2, 3 or 6.
    #[arg(long)]
    pub dim: usize,
    /// Verification tolerance.
    #[arg(long, default_value_t = EXACT_TOL)]
    pub tol: f64,
}

pub fn bases(out: &Path, args: BasesArgs) -> anyhow::Result<ExitCode> {
    let set = match args.dim {
        2 => polarization_mubs(),
        3 => oam_qutrit_mubs(),
        6 => qusix_mubs(),
        d => return Err(usage(format!("no built-in MUB set for dimension {d} (use 2, 3 or 6)"))),
    };
    let report = verify_mub_set(&set, args.tol);
    let mut dir = OutputDir::create(out.to_path_buf(), "bases", serde_json::to_value(&args)?, None)?;
    dir.write("bases.json", set.to_json()?)?;
    dir.write_json("report.json", &report)?;
    dir.finish()?;
    println!(
        "dim {}: {} bases, max deviation {:.3e}, {}",
        set.dim,
        set.bases.len(),
        report.max_deviation,
        if report.pass { "pass" } else { "FAIL" }
    );
    Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

#[derive(Debug, Args, Serialize)]
pub struct KinoformArgs {
    /// State label such as `O2:alpha1` or `II:4`.
    #[arg(long, required_unless_present = "coeffs", conflicts_with = "coeffs")]
    pub state: Option<String>,
    /// Explicit OAM superposition `charge:coeff,...`, e.g. `-1:1,1:1i`.
    #[arg(long, allow_hyphen_values = true)]
    pub coeffs: Option<String>,
    /// Physical encoding of qusix labels: hybrid or pure-oam.
    #[arg(long, default_value = "hybrid", value_parser = parse_encoding)]
    pub encoding: EncodingKind,
    /// Grating period in pixels.
    #[arg(long, default_value_t = DEFAULT_PERIOD)]
    pub grating_period: f64,
    /// Pixels per side.
    #[arg(long, default_value_t = 512)]
    pub grid_size: usize,
    /// Half-width of the window in beam waists.
    #[arg(long, default_value_t = 4.0)]
    pub window: f64,
    /// Also simulate the filtered first diffraction order.
    #[arg(long)]
    pub simulate: bool,
}

pub fn kinoform(out: &Path, args: KinoformArgs) -> anyhow::Result<ExitCode> {
    let spec = grid(args.grid_size, args.window)?;
    let (name, sup): (String, OamSuperposition) = match (&args.state, &args.coeffs) {
        (Some(s), _) => {
            let label: StateLabel = s.parse().map_err(|e: mublab::Error| usage(e.to_string()))?;
            let sup = label
                .oam_superposition(&QusixEncoding::new(args.encoding))
                .map_err(|e| usage(e.to_string()))?;
            (label.to_string(), sup)
        }
        (None, Some(c)) => (c.clone(), parse_coefficients(c).map_err(|e| usage(e.to_string()))?),
        (None, None) => return Err(usage("one of --state or --coeffs is required")),
    };

    let target = synthesize_mode(&sup, &spec)?;
    let mask = kinoform_for(&sup, args.grating_period, &spec)?;

    let mut dir = OutputDir::create(out.to_path_buf(), "kinoform", serde_json::to_value(&args)?, None)?;
    let header = raw_header_json(&spec)?;
    dir.write("kinoform.png", phase_png(&mask.phase)?)?;
    dir.write("kinoform.raw", encode_raw_real(&mask.phase))?;
    dir.write("kinoform.json", &header)?;
    dir.write("target_intensity.png", field_intensity_png(&target)?)?;
    dir.write("target_phase.png", field_phase_png(&target)?)?;

    let mut report = json!({
        "state": name,
        "terms": sup.terms().iter().map(|(m, c)| json!({"charge": m, "re": c.re, "im": c.im})).collect::<Vec<_>>(),
        "grating_period": args.grating_period,
        "grid": spec,
    });
    if args.simulate {
        let fo = first_order(&mask, &InputBeam::PlaneWave.field(&spec))?;
        let fid = normalized_overlap(&target, &fo.field)?;
        dir.write("first_order_intensity.png", field_intensity_png(&fo.field)?)?;
        dir.write("first_order_phase.png", field_phase_png(&fo.field)?)?;
        dir.write("first_order.raw", encode_raw_complex(&fo.field.amplitudes))?;
        dir.write("first_order.json", &header)?;
        report["fidelity"] = json!(fid);
        report["first_order_efficiency"] = json!(fo.power / fo.total_power);
        println!("{name}: first-order fidelity {fid:.6}");
    } else {
        println!("{name}: kinoform written");
    }
    dir.write_json("report.json", &report)?;
    dir.finish()?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Ideal,
    SimulatedOptics,
}

#[derive(Debug, Args, Serialize)]
pub struct ExperimentArgs {
    /// hybrid or pure-oam.
    #[arg(long, default_value = "hybrid", value_parser = parse_encoding)]
    pub encoding: EncodingKind,
    #[arg(long, value_enum, default_value = "simulated-optics")]
    pub model: ModelKind,
    /// Detected photons per second.
    #[arg(long, default_value_t = DEFAULT_RATE)]
    pub rate: f64,
    /// Seconds per setting.
    #[arg(long, default_value_t = DEFAULT_EXPOSURE)]
    pub exposure: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_PERIOD)]
    pub grating_period: f64,
    #[arg(long, default_value_t = 512)]
    pub grid_size: usize,
    #[arg(long, default_value_t = 4.0)]
    pub window: f64,
}

pub fn experiment(out: &Path, args: ExperimentArgs) -> anyhow::Result<ExitCode> {
    if !(args.rate >= 0.0 && args.rate.is_finite()) || !(args.exposure > 0.0 && args.exposure.is_finite()) {
        return Err(usage(format!("invalid rate {} / exposure {}", args.rate, args.exposure)));
    }
    let enc = QusixEncoding::new(args.encoding);
    let model = match args.model {
        ModelKind::Ideal => OpticsModel::Ideal,
        ModelKind::SimulatedOptics => OpticsModel::SimulatedOptics {
            spec: grid(args.grid_size, args.window)?,
            grating_period: args.grating_period,
            input: InputBeam::PlaneWave,
        },
    };
    let ideal = probability_matrix(&enc, &OpticsModel::Ideal)?;
    let modelled = probability_matrix(&enc, &model)?;
    let counts = poissonize(&modelled, args.rate, args.exposure, args.seed)?;
    let normalized = normalize_counts(&counts);
    let s = similarity(&normalized.estimate, &ideal)?;
    let s_model = similarity(&modelled, &ideal)?;

    let mut dir = OutputDir::create(out.to_path_buf(), "experiment", serde_json::to_value(&args)?, Some(args.seed))?;
    dir.write("ideal.csv", matrix_csv(&ideal))?;
    dir.write("model.csv", matrix_csv(&modelled))?;
    dir.write("counts.csv", matrix_csv(&counts.counts))?;
    dir.write("estimate.csv", matrix_csv(&normalized.estimate))?;
    dir.write_json(
        "summary.json",
        &json!({
            "similarity": s,
            "model_similarity": s_model,
            "block_deviations": block_deviations(&normalized.estimate, &ideal),
            "zero_blocks": normalized.zero_blocks,
            "states": state_labels(),
        }),
    )?;
    dir.finish()?;
    println!("S = {s:.6} (model without noise: {s_model:.6})");
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimulationMode {
    Noiseless,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mle,
    Linear,
}

#[derive(Debug, Args, Serialize)]
pub struct TomographyArgs {
    /// Counts CSV with 72 `label,count` rows.
    #[arg(long, required_unless_present = "simulate", conflicts_with = "simulate")]
    pub counts: Option<PathBuf>,
    /// Qusix state label to report the fidelity against (with --counts).
    #[arg(long, requires = "counts")]
    pub target: Option<String>,
    /// Simulate data for all 18 hybrid MUB states.
    #[arg(long, value_enum)]
    pub simulate: Option<SimulationMode>,
    #[arg(long, value_enum, default_value = "mle")]
    pub method: Method,
    #[arg(long, default_value_t = DEFAULT_RATE)]
    pub rate: f64,
    #[arg(long, default_value_t = DEFAULT_EXPOSURE)]
    pub exposure: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Independent Poisson repetitions used for the spread.
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = MleConfig::default().max_iterations)]
    pub max_iter: usize,
    #[arg(long, default_value_t = MleConfig::default().tolerance)]
    pub tol: f64,
}

#[derive(Debug, Serialize)]
struct Reconstruction {
    rho_re: Vec<Vec<f64>>,
    rho_im: Vec<Vec<f64>>,
    fidelity: Option<f64>,
    iterations: usize,
    loglik: Option<f64>,
    min_eigenvalue: f64,
}

fn reconstruct_from(freq: &[f64], ps: &ProjectorSet, args: &TomographyArgs) -> anyhow::Result<(DensityMatrix, usize, Option<f64>)> {
    match args.method {
        Method::Mle => {
            let cfg = MleConfig {
                max_iterations: args.max_iter,
                tolerance: args.tol,
            };
            let res = mle_from_frequencies(freq, ps, &cfg)?;
            Ok((res.rho, res.iterations, Some(res.log_likelihood)))
        }
        Method::Linear => Ok((linear_inversion(freq, ps)?, 0, None)),
    }
}

fn reconstruction(rho: &DensityMatrix, fidelity: Option<f64>, iterations: usize, loglik: Option<f64>) -> Reconstruction {
    let d = rho.dim();
    let part = |f: fn(&num_complex::Complex64) -> f64| -> Vec<Vec<f64>> {
        (0..d).map(|i| (0..d).map(|j| f(&rho.entries[(i, j)])).collect()).collect()
    };
    Reconstruction {
        rho_re: part(|z| z.re),
        rho_im: part(|z| z.im),
        fidelity,
        iterations,
        loglik,
        min_eigenvalue: rho.min_eigenvalue(),
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn tomography(out: &Path, args: TomographyArgs) -> anyhow::Result<ExitCode> {
    if args.max_iter == 0 || !(args.tol > 0.0) {
        return Err(usage("--max-iter must be positive and --tol > 0"));
    }
    let ps = build_projector_set();
    let seed = args.simulate.map(|_| args.seed);
    let mut dir = OutputDir::create(out.to_path_buf(), "tomography", serde_json::to_value(&args)?, seed)?;

    if let Some(path) = &args.counts {
        let target = match &args.target {
            Some(t) => {
                let label: StateLabel = t.parse().map_err(|e: mublab::Error| usage(e.to_string()))?;
                if label.qusix_position().is_none() {
                    return Err(usage(format!("target `{label}` is not a qusix state")));
                }
                Some(label.state())
            }
            None => None,
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let counts = parse_counts_csv(&text, &ps).with_context(|| format!("parsing {}", path.display()))?;
        let (rho, iterations, loglik) = match args.method {
            Method::Mle => {
                let cfg = MleConfig {
                    max_iterations: args.max_iter,
                    tolerance: args.tol,
                };
                let res = mle_reconstruction(&counts, &ps, &cfg)?;
                (res.rho, res.iterations, Some(res.log_likelihood))
            }
            Method::Linear => (linear_inversion(&setting_frequencies(&counts, &ps)?, &ps)?, 0, None),
        };
        let fid = target.as_ref().map(|psi| fidelity(&rho, psi)).transpose()?;
        dir.write_json("rho.json", &reconstruction(&rho, fid, iterations, loglik))?;
        dir.write("rho.csv", density_csv(&rho))?;
        dir.finish()?;
        match fid {
            Some(f) => println!("fidelity {f:.6} after {iterations} iterations"),
            None => println!("reconstructed after {iterations} iterations"),
        }
        return Ok(ExitCode::SUCCESS);
    }

    let mode = args.simulate.ok_or_else(|| usage("one of --counts or --simulate is required"))?;
    let trials = match mode {
        SimulationMode::Noiseless => 1,
        SimulationMode::Poisson if args.trials == 0 => return Err(usage("--trials must be positive")),
        SimulationMode::Poisson => args.trials,
    };
    if !(args.rate > 0.0 && args.rate.is_finite()) || !(args.exposure > 0.0 && args.exposure.is_finite()) {
        return Err(usage(format!("invalid rate {} / exposure {}", args.rate, args.exposure)));
    }
    let per_setting = args.rate * args.exposure;
    let states: Vec<_> = qusix_mubs().states().cloned().collect();
    let labels = state_labels();
    let mut master = ChaCha8Rng::seed_from_u64(args.seed);
    let mut fid = vec![vec![0.0; trials]; STATE_COUNT];

    #[allow(clippy::needless_range_loop)]
    for t in 0..trials {
        for (k, psi) in states.iter().enumerate() {
            let truth = DensityMatrix::pure(psi);
            let (counts, freq) = match mode {
                SimulationMode::Noiseless => (expected_counts(&truth, &ps, per_setting), predict_probabilities(&truth, &ps)),
                SimulationMode::Poisson => {
                    let c = simulate_counts(&truth, &ps, args.rate, args.exposure, master.next_u64())?;
                    let f = setting_frequencies(&c, &ps)?;
                    (c, f)
                }
            };
            let (rho, iterations, loglik) = reconstruct_from(&freq, &ps, &args)?;
            fid[k][t] = fidelity(&rho, psi)?;
            if t == 0 {
                let stem = labels[k].replace(':', "_");
                dir.write(&format!("counts_{stem}.csv"), counts_csv(&counts, &ps))?;
                dir.write_json(&format!("rho_{stem}.json"), &reconstruction(&rho, Some(fid[k][t]), iterations, loglik))?;
                dir.write(&format!("rho_{stem}.csv"), density_csv(&rho))?;
            }
        }
    }

    let mut table = String::from("state,product,fidelity,spread\n");
    for (k, per_trial) in fid.iter().enumerate() {
        let (m, s) = mean_std(per_trial);
        table.push_str(&format!("{},|{}>,{m:.6},{s:.6}\n", labels[k], qusix_product_label(k).replace(':', ">|")));
    }
    let trial_means: Vec<f64> = (0..trials)
        .map(|t| fid.iter().map(|f| f[t]).sum::<f64>() / STATE_COUNT as f64)
        .collect();
    let (mean, spread) = mean_std(&trial_means);
    let min = fid.iter().flatten().copied().fold(1.0, f64::min);
    table.push_str(&format!("average,,{mean:.6},{spread:.6}\n"));
    dir.write("fidelities.csv", table)?;
    dir.write_json(
        "summary.json",
        &json!({"mean_fidelity": mean, "spread": spread, "min_fidelity": min, "trials": trials}),
    )?;
    dir.finish()?;
    println!("mean fidelity {mean:.6} +- {spread:.6} over {trials} trial(s), min {min:.6}");
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Args, Serialize)]
pub struct SearchArgs {
    #[arg(long)]
    pub dim: usize,
    /// Comma-separated basis names to extend, e.g. `O1,O2,O3`. Without it a
    /// complete set of `--count` bases is searched for.
    #[arg(long, value_delimiter = ',')]
    pub extend: Vec<String>,
    /// Number of bases for a full-set search (default `dim + 1`).
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, default_value_t = SearchConfig::default().restarts)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = SearchConfig::default().max_iterations)]
    pub max_iter: usize,
    #[arg(long, default_value_t = SearchConfig::default().tolerance)]
    pub tol: f64,
}

pub fn search(out: &Path, args: SearchArgs) -> anyhow::Result<ExitCode> {
    if args.dim < 2 {
        return Err(usage(format!("dimension {} too small", args.dim)));
    }
    if args.restarts == 0 || args.max_iter == 0 || !(args.tol > 0.0) {
        return Err(usage("--restarts and --max-iter must be positive and --tol > 0"));
    }
    let cfg = SearchConfig {
        restarts: args.restarts,
        max_iterations: args.max_iter,
        tolerance: args.tol,
        seed: args.seed,
    };
    let mut dir = OutputDir::create(out.to_path_buf(), "search", serde_json::to_value(&args)?, Some(args.seed))?;

    if !args.extend.is_empty() {
        let mut bases = Vec::new();
        for name in &args.extend {
            let b: BasisName = name.trim().parse().map_err(|e: mublab::Error| usage(e.to_string()))?;
            if b.size() != args.dim {
                return Err(usage(format!("basis {b} lives in dimension {}, not {}", b.size(), args.dim)));
            }
            bases.push(b.basis());
        }
        let set = MubSet::new(args.dim, bases)?;
        let res = search_extension_vector(&set, &cfg)?;
        let vector: Vec<[f64; 2]> = res.best_vector.amplitudes().iter().map(|z| [z.re, z.im]).collect();
        dir.write_json(
            "search.json",
            &json!({
                "dim": args.dim,
                "bases_in": args.extend,
                "restarts": args.restarts,
                "best_residual": res.residual,
                "best_vector": vector,
                "converged": res.converged,
                "iterations": res.iterations,
                "restart": res.restart,
            }),
        )?;
        dir.finish()?;
        println!("best residual {:.3e} (restart {}, {} restarts)", res.residual, res.restart, args.restarts);
        return Ok(ExitCode::SUCCESS);
    }

    let count = args.count.unwrap_or(args.dim + 1);
    if count < 2 {
        return Err(usage("--count must be at least 2"));
    }
    let res = search_full_mub_set(args.dim, count, &cfg)?;
    dir.write("found_bases.json", res.set.to_json()?)?;
    dir.write_json(
        "search.json",
        &json!({
            "dim": args.dim,
            "bases_in": Vec::<String>::new(),
            "count": count,
            "restarts": args.restarts,
            "best_residual": res.residual,
            "penalized_objective": res.penalized_objective,
            "iterations": res.iterations,
            "restart": res.restart,
        }),
    )?;
    dir.finish()?;
    println!("best residual {:.3e} for {count} bases (restart {})", res.residual, res.restart);
    Ok(ExitCode::SUCCESS)
}

pub fn verify(dir: &Path) -> anyhow::Result<ExitCode> {
    let manifest = RunManifest::read(&dir.join(MANIFEST_NAME))
        .with_context(|| format!("reading manifest in {}", dir.display()))?;
    let problems = manifest.verify(dir);
    if problems.is_empty() {
        println!("{} files verified", manifest.outputs.len());
        Ok(ExitCode::SUCCESS)
    } else {
        for p in &problems {
            eprintln!("{p}");
        }
        Ok(ExitCode::from(1))
    }
}
