//! End-to-end experiment orchestration: dataset, model, and report
//! artifacts with content digests, all reproducible from one seed.

use crate::applications::{
    default_eps_prime, noise_benchmark, observable_basis, predict_mean_value, train_classifier,
    BenchReport, ClassicalState,
};
use crate::cluster::{truncation_bound, truncation_order, TruncationPlan};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::hamiltonian::{digest_hex, interaction_graph, plan_digest, EvolutionPlan};
use crate::learner::{learn_local_operators, model_to_json, LearnConfig, LearnedModel};
use crate::pauli::{Axis, PauliSum, PauliTerm};
use crate::reconstruct::{reconstruction_error, ErrorReport, LocalOperators};
use crate::rng::{substream, Domain};
use crate::simulator::{exact_heisenberg_of_sum, sample_dataset, NoiseModel};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    Learn,
    Evaluate,
    Verify,
    Classify,
    BenchNoise,
    Full,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Mode> {
        match s {
            "simulate" => Ok(Mode::Simulate),
            "learn" => Ok(Mode::Learn),
            "evaluate" => Ok(Mode::Evaluate),
            "verify" => Ok(Mode::Verify),
            "classify" => Ok(Mode::Classify),
            "bench-noise" => Ok(Mode::BenchNoise),
            "full" => Ok(Mode::Full),
            other => Err(Error::Invalid {
                what: "mode",
                message: format!("unrecognized mode {other:?}"),
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Learn => "learn",
            Mode::Evaluate => "evaluate",
            Mode::Verify => "verify",
            Mode::Classify => "classify",
            Mode::BenchNoise => "bench-noise",
            Mode::Full => "full",
        }
    }
}

/// Fully resolved experiment description; every field maps to one CLI flag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub plan_path: PathBuf,
    pub seed: u64,
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub trunc_m: Option<u32>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    /// Dataset location override; defaults to out_dir/dataset.bin.
    #[serde(default)]
    pub dataset_path: Option<PathBuf>,
}

/// Echo of the values a run actually used after defaulting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub mode: String,
    pub seed: u64,
    pub n: usize,
    pub k: usize,
    pub shots: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub gamma: f64,
    pub eps_prime: f64,
    pub m: u32,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub pairs: usize,
    pub max_gap: f64,
    pub mean_gap: f64,
    pub tolerance: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub basis_len: usize,
    pub training_states: usize,
    pub residual: f64,
    pub ridged: bool,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub params: ResolvedParams,
    pub plan_digest: String,
    #[serde(default)]
    pub dataset_sha256: Option<String>,
    #[serde(default)]
    pub model_sha256: Option<String>,
    pub truncation_bound: f64,
    #[serde(default)]
    pub error_report: Option<ErrorReport>,
    #[serde(default)]
    pub verify: Option<VerifyReport>,
    #[serde(default)]
    pub classify: Option<ClassifyReport>,
    #[serde(default)]
    pub bench: Option<BenchReport>,
}

/// Stage wall-clock timings, written to a sidecar so the report itself
/// stays byte-identical across reruns.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub stages: Vec<(String, f64)>,
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub report: Report,
    pub timings: Timings,
    pub written: Vec<PathBuf>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest: [u8; 32] = Sha256::digest(bytes).into();
    digest_hex(&digest)
}

fn resolve(cfg: &ExperimentConfig, plan: &EvolutionPlan) -> (LearnConfig, f64) {
    let mut learn = LearnConfig::default();
    if let Some(e) = cfg.epsilon {
        learn.epsilon = e;
    }
    if let Some(d) = cfg.delta {
        learn.delta = d;
    }
    if let Some(k) = cfg.kappa {
        learn.cluster.kappa = k;
    }
    learn.shots_override = cfg.shots;
    learn.m_override = cfg.trunc_m;
    let eps_prime = default_eps_prime(learn.epsilon, plan.n);
    (learn, eps_prime)
}

fn truncation_for(
    plan: &EvolutionPlan,
    learn: &LearnConfig,
    eps_prime: f64,
) -> Result<TruncationPlan> {
    match learn.m_override {
        Some(m) => Ok(TruncationPlan::manual(m)),
        None => {
            let graph = interaction_graph(plan);
            truncation_order(plan, &graph, eps_prime, &learn.cluster)
        }
    }
}

fn shots_for(plan: &EvolutionPlan, learn: &LearnConfig, trunc: &TruncationPlan) -> Result<u64> {
    match learn.shots_override {
        Some(s) => Ok(s),
        None => {
            let graph = interaction_graph(plan);
            crate::learner::sample_size(
                plan.n,
                plan.k(),
                plan.locality(),
                graph.max_degree,
                trunc.m,
                learn.epsilon,
                learn.delta,
                learn.c,
            )
        }
    }
}

fn write_artifact(dir: &Path, name: &str, bytes: &[u8], written: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, bytes)?;
    written.push(path);
    Ok(())
}

/// Random product-state panel paired with single- and two-qubit
/// observables; deterministic in the seed.
pub fn verification_pairs(
    plan: &EvolutionPlan,
    seed: u64,
    count: usize,
) -> Result<Vec<(ClassicalState, PauliSum)>> {
    let n = plan.n;
    let mut pairs = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = substream(seed, Domain::TrialState, i as u64);
        let configs: Vec<(u64, Complex64)> = (0..(1u64 << n.min(12)))
            .map(|idx| {
                let re: f64 = rng.random::<f64>() - 0.5;
                let im: f64 = rng.random::<f64>() - 0.5;
                (idx, Complex64::new(re, im))
            })
            .collect();
        let phi = ClassicalState::new(n, configs)?;
        let q = rng.random_range(0..n);
        let axis = Axis::from_code(rng.random_range(0..3u8)).expect("code < 3");
        let mut o = PauliSum::from_term(&PauliTerm::single(n, q, axis)?, Complex64::new(1.0, 0.0));
        if n > 1 && rng.random_range(0..2u8) == 1 {
            let mut q2 = rng.random_range(0..n);
            while q2 == q {
                q2 = rng.random_range(0..n);
            }
            let axis2 = Axis::from_code(rng.random_range(0..3u8)).expect("code < 3");
            o = PauliSum::from_term(
                &PauliTerm::from_word(n, &[q.min(q2), q.max(q2)], &[axis, axis2])?,
                Complex64::new(1.0, 0.0),
            );
        }
        pairs.push((phi, o));
    }
    Ok(pairs)
}

/// Statistical error budget propagated through the factor products for one
/// observable term: each local contributes its summed coefficient stderr,
/// scaled by the coefficient mass of the other factors.
pub fn propagated_stderr(model: &LearnedModel, o: &PauliSum) -> Result<f64> {
    let mut total = 0.0;
    for (&(x, z), &coeff) in o.iter() {
        let term = crate::dense::pauli_term_from_masks(model.n, x, z);
        if term.is_identity_string() {
            continue;
        }
        let mut budgets = Vec::new();
        let mut masses = Vec::new();
        for q in term.support_qubits() {
            let axis = term.axis_at(q).expect("support qubit has an axis");
            let local = model.local(q, axis)?;
            let budget: f64 = local
                .estimates
                .iter()
                .filter(|e| e.kept)
                .map(|e| e.stderr)
                .sum();
            let mass: f64 = local
                .estimates
                .iter()
                .filter(|e| e.kept)
                .map(|e| e.alpha.abs())
                .sum();
            budgets.push(budget);
            masses.push(mass.max(1.0));
        }
        let mut term_err = 0.0;
        for i in 0..budgets.len() {
            let mut scale = 1.0;
            for (j, m) in masses.iter().enumerate() {
                if j != i {
                    scale *= m;
                }
            }
            term_err += budgets[i] * scale;
        }
        total += coeff.norm() * term_err;
    }
    Ok(total)
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let started = Instant::now();
    let mut timings = Timings::default();
    let mut written = Vec::new();
    let plan = crate::hamiltonian::load_plan(&cfg.plan_path)?;
    let digest = plan_digest(&plan);
    let (learn, eps_prime) = resolve(cfg, &plan);
    let trunc = truncation_for(&plan, &learn, eps_prime)?;
    let shots = shots_for(&plan, &learn, &trunc)?;
    let gamma = cfg.gamma.unwrap_or(0.0);
    let noise = if gamma > 0.0 {
        Some(NoiseModel::new(gamma)?)
    } else {
        None
    };
    timings
        .stages
        .push(("setup".into(), started.elapsed().as_secs_f64()));

    let graph = interaction_graph(&plan);
    let bound = truncation_bound(&trunc, &plan, &graph);
    let mut report = Report {
        params: ResolvedParams {
            mode: cfg.mode.name().to_string(),
            seed: cfg.seed,
            n: plan.n,
            k: plan.k(),
            shots,
            epsilon: learn.epsilon,
            delta: learn.delta,
            gamma,
            eps_prime,
            m: trunc.m,
            kappa: learn.cluster.kappa,
        },
        plan_digest: digest_hex(&digest),
        dataset_sha256: None,
        model_sha256: None,
        truncation_bound: bound,
        error_report: None,
        verify: None,
        classify: None,
        bench: None,
    };

    let dataset_path = cfg
        .dataset_path
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join("dataset.bin"));

    let needs_dataset = matches!(cfg.mode, Mode::Simulate | Mode::Learn | Mode::Full);
    let mut dataset: Option<Dataset> = None;
    if matches!(cfg.mode, Mode::Simulate | Mode::Full) {
        let t = Instant::now();
        let ds = sample_dataset(&plan, shots, cfg.seed, noise)?;
        let bytes = ds.to_bytes();
        report.dataset_sha256 = Some(sha256_hex(&bytes));
        std::fs::create_dir_all(
            dataset_path.parent().unwrap_or_else(|| Path::new(".")),
        )?;
        std::fs::write(&dataset_path, &bytes)?;
        written.push(dataset_path.clone());
        dataset = Some(ds);
        timings
            .stages
            .push(("simulate".into(), t.elapsed().as_secs_f64()));
    } else if cfg.mode == Mode::Learn {
        let t = Instant::now();
        let ds = Dataset::read(&dataset_path)?;
        report.dataset_sha256 = Some(sha256_hex(&ds.to_bytes()));
        dataset = Some(ds);
        timings
            .stages
            .push(("load-dataset".into(), t.elapsed().as_secs_f64()));
    }

    let mut model: Option<LearnedModel> = None;
    if needs_dataset && cfg.mode != Mode::Simulate {
        let ds = dataset.as_ref().expect("dataset staged above");
        let t = Instant::now();
        let m = learn_local_operators(&plan, ds, &trunc, &learn)?;
        let json = model_to_json(&m)?;
        report.model_sha256 = Some(sha256_hex(json.as_bytes()));
        write_artifact(&cfg.out_dir, "model.json", json.as_bytes(), &mut written)?;
        model = Some(m);
        timings
            .stages
            .push(("learn".into(), t.elapsed().as_secs_f64()));
    }

    match cfg.mode {
        Mode::Simulate | Mode::Learn => {}
        Mode::Evaluate | Mode::Full => {
            // Evaluate mode without a fresh dataset relearns from disk.
            let m = match model.take() {
                Some(m) => m,
                None => {
                    let ds = Dataset::read(&dataset_path)?;
                    report.dataset_sha256 = Some(sha256_hex(&ds.to_bytes()));
                    let t = Instant::now();
                    let m = learn_local_operators(&plan, &ds, &trunc, &learn)?;
                    let json = model_to_json(&m)?;
                    report.model_sha256 = Some(sha256_hex(json.as_bytes()));
                    write_artifact(&cfg.out_dir, "model.json", json.as_bytes(), &mut written)?;
                    timings
                        .stages
                        .push(("learn".into(), t.elapsed().as_secs_f64()));
                    m
                }
            };
            let t = Instant::now();
            let err = reconstruction_error(&plan, &m, &trunc, 20, cfg.seed)?;
            let csv = per_local_csv(&m, &err);
            write_artifact(&cfg.out_dir, "locals_errors.csv", csv.as_bytes(), &mut written)?;
            report.error_report = Some(err);
            timings
                .stages
                .push(("evaluate".into(), t.elapsed().as_secs_f64()));
            model = Some(m);
        }
        Mode::Verify => {
            let ds = Dataset::read(&dataset_path)?;
            report.dataset_sha256 = Some(sha256_hex(&ds.to_bytes()));
            let t = Instant::now();
            let m = learn_local_operators(&plan, &ds, &trunc, &learn)?;
            let json = model_to_json(&m)?;
            report.model_sha256 = Some(sha256_hex(json.as_bytes()));
            write_artifact(&cfg.out_dir, "model.json", json.as_bytes(), &mut written)?;
            let locals = LocalOperators::from_model(&m);
            let pairs = verification_pairs(&plan, cfg.seed, 30)?;
            let mut max_gap = 0.0f64;
            let mut sum_gap = 0.0;
            let mut tolerance = 0.0f64;
            let mut all_within = true;
            for (phi, o) in &pairs {
                let predicted = predict_mean_value(&locals, phi, o)?;
                let heis = exact_heisenberg_of_sum(&plan, o)?;
                let psi = phi.to_state_vector()?;
                let truth = (psi.amps.adjoint() * &heis.mat * &psi.amps)[(0, 0)].re;
                let gap = (predicted - truth).abs();
                let pair_tol = bound.max(3.0 * propagated_stderr(&m, o)?);
                max_gap = max_gap.max(gap);
                sum_gap += gap;
                tolerance = tolerance.max(pair_tol);
                all_within &= gap <= pair_tol;
            }
            report.verify = Some(VerifyReport {
                pairs: pairs.len(),
                max_gap,
                mean_gap: sum_gap / pairs.len() as f64,
                tolerance,
                within_tolerance: all_within,
            });
            model = Some(m);
            timings
                .stages
                .push(("verify".into(), t.elapsed().as_secs_f64()));
        }
        Mode::Classify => {
            let t = Instant::now();
            // Oracle-labelled regression against the exact dynamics on a
            // panel of random states.
            let o = PauliSum::from_term(
                &PauliTerm::single(plan.n, 0, Axis::Z)?,
                Complex64::new(1.0, 0.0),
            );
            let basis = observable_basis(
                &graph,
                plan.n,
                &o,
                &trunc,
                plan.k(),
                plan.locality(),
                graph.max_degree,
                &learn.cluster,
            )?;
            let heis = exact_heisenberg_of_sum(&plan, &o)?;
            let count = 3 * basis.len().max(4);
            let mut features = Vec::with_capacity(count);
            let mut labels = Vec::with_capacity(count);
            for (phi, _) in verification_pairs(&plan, cfg.seed, count)? {
                let psi = phi.to_state_vector()?;
                labels.push((psi.amps.adjoint() * &heis.mat * &psi.amps)[(0, 0)].re);
                features.push(phi);
            }
            let clf = train_classifier(&features, &labels, basis)?;
            let mut loss = 0.0;
            for (phi, y) in features.iter().zip(&labels) {
                loss += (clf.predict(phi)? - y).powi(2);
            }
            report.classify = Some(ClassifyReport {
                basis_len: clf.basis.len(),
                training_states: features.len(),
                residual: clf.residual,
                ridged: clf.ridged,
                mean_loss: loss / features.len() as f64,
            });
            timings
                .stages
                .push(("classify".into(), t.elapsed().as_secs_f64()));
        }
        Mode::BenchNoise => {
            let t = Instant::now();
            let bench = noise_benchmark(&plan, NoiseModel::new(gamma)?, &learn, cfg.seed)?;
            let csv = noise_sweep_csv(std::slice::from_ref(&bench));
            write_artifact(&cfg.out_dir, "noise_sweep.csv", csv.as_bytes(), &mut written)?;
            report.bench = Some(bench);
            timings
                .stages
                .push(("bench-noise".into(), t.elapsed().as_secs_f64()));
        }
    }
    drop(model);

    let report_json = report_to_json(&report)?;
    if cfg.mode != Mode::Simulate {
        write_artifact(&cfg.out_dir, "report.json", report_json.as_bytes(), &mut written)?;
    }
    let timings_json = serde_json::to_string_pretty(&timings)? + "\n";
    write_artifact(&cfg.out_dir, "timings.json", timings_json.as_bytes(), &mut written)?;
    Ok(RunArtifacts {
        report,
        timings,
        written,
    })
}

pub fn report_to_json(report: &Report) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

pub fn report_from_json(text: &str) -> Result<Report> {
    Ok(serde_json::from_str(text)?)
}

/// Per-local error table: one row per (qubit, axis).
pub fn per_local_csv(model: &LearnedModel, err: &ErrorReport) -> String {
    let mut out = String::from("qubit,axis,inf_norm_error,stderr_budget,kept_terms\n");
    for (idx, local) in model.locals.iter().enumerate() {
        let budget: f64 = local
            .estimates
            .iter()
            .filter(|e| e.kept)
            .map(|e| 2.0 * e.stderr)
            .sum();
        let kept = local.estimates.iter().filter(|e| e.kept).count();
        let inf = err
            .per_local_inf_norms
            .get(idx)
            .copied()
            .unwrap_or(f64::NAN);
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            local.qubit,
            local.axis.symbol(),
            inf,
            budget,
            kept
        ));
    }
    out
}

/// Noise sweep table: {gamma, max_gap, reference} per row.
pub fn noise_sweep_csv(rows: &[BenchReport]) -> String {
    let mut out = String::from("gamma,max_gap,reference\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.gamma, r.max_gap, r.reference));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n_records: u64,
    pub mean_stderr: f64,
    pub mean_abs_error: f64,
}

/// Error-vs-N sweep against the exact coefficients; stderr should shrink
/// like 1/sqrt(N).
pub fn error_vs_n_sweep(
    plan: &EvolutionPlan,
    counts: &[u64],
    seed: u64,
    learn: &LearnConfig,
    trunc: &TruncationPlan,
) -> Result<Vec<SweepRow>> {
    let exact = crate::simulator::exact_local_operators(plan)?;
    let mut rows = Vec::with_capacity(counts.len());
    for (i, &n_records) in counts.iter().enumerate() {
        let ds = sample_dataset(plan, n_records, seed.wrapping_add(i as u64), None)?;
        let model = learn_local_operators(plan, &ds, trunc, learn)?;
        let mut stderr_sum = 0.0;
        let mut err_sum = 0.0;
        let mut count = 0usize;
        for (local, (_, _, truth)) in model.locals.iter().zip(&exact) {
            for e in &local.estimates {
                stderr_sum += e.stderr;
                err_sum += (e.alpha - truth.coeff(e.term.key()).re).abs();
                count += 1;
            }
        }
        rows.push(SweepRow {
            n_records,
            mean_stderr: stderr_sum / count as f64,
            mean_abs_error: err_sum / count as f64,
        });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("n_records,mean_stderr,mean_abs_error\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            r.n_records, r.mean_stderr, r.mean_abs_error
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::builders;

    fn temp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "hamlearn-pipeline-{tag}-{}",
            std::process::id()
        ));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn write_plan(dir: &Path, plan: &EvolutionPlan) -> PathBuf {
        let path = dir.join("plan.json");
        std::fs::write(&path, crate::hamiltonian::plan_to_json(plan)).unwrap();
        path
    }

    fn base_config(mode: Mode, dir: &Path, plan_path: &Path) -> ExperimentConfig {
        ExperimentConfig {
            mode,
            plan_path: plan_path.to_path_buf(),
            seed: 5,
            shots: Some(4_000),
            epsilon: None,
            delta: None,
            gamma: None,
            trunc_m: Some(1),
            kappa: None,
            threads: None,
            out_dir: dir.to_path_buf(),
            dataset_path: None,
        }
    }

    #[test]
    fn full_mode_writes_all_artifacts() {
        let dir = temp_dir("full");
        let plan = builders::zz_chain(2, 0.9, 0.05);
        let plan_path = write_plan(&dir, &plan);
        let cfg = base_config(Mode::Full, &dir, &plan_path);
        let artifacts = run(&cfg).unwrap();
        assert!(dir.join("dataset.bin").is_file());
        assert!(dir.join("model.json").is_file());
        assert!(dir.join("report.json").is_file());
        assert!(dir.join("locals_errors.csv").is_file());
        assert!(dir.join("timings.json").is_file());
        let report = artifacts.report;
        assert_eq!(report.params.shots, 4_000);
        assert!(report.dataset_sha256.is_some());
        assert!(report.model_sha256.is_some());
        assert!(report.error_report.is_some());
        let csv = std::fs::read_to_string(dir.join("locals_errors.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 6);
        assert!(csv.starts_with("qubit,axis,"));
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn rerun_is_byte_identical_except_timings() {
        let dir1 = temp_dir("rerun1");
        let dir2 = temp_dir("rerun2");
        let plan = builders::tfim_chain(2, 1.0, 0.6, 0.05);
        let plan_path = write_plan(&dir1, &plan);
        let mut cfg1 = base_config(Mode::Full, &dir1, &plan_path);
        cfg1.seed = 42;
        let mut cfg2 = cfg1.clone();
        cfg2.out_dir = dir2.clone();
        run(&cfg1).unwrap();
        run(&cfg2).unwrap();
        for name in ["dataset.bin", "model.json", "report.json", "locals_errors.csv"] {
            let a = std::fs::read(dir1.join(name)).unwrap();
            let b = std::fs::read(dir2.join(name)).unwrap();
            assert_eq!(a, b, "artifact {name} differs between identical runs");
        }
        let _ = std::fs::remove_dir_all(&dir1);
        let _ = std::fs::remove_dir_all(&dir2);
    }

    #[test]
    fn learn_mode_requires_dataset_with_exit_code_two() {
        let dir = temp_dir("missing");
        let plan = builders::zz_chain(2, 0.9, 0.05);
        let plan_path = write_plan(&dir, &plan);
        let cfg = base_config(Mode::Learn, &dir, &plan_path);
        let err = run(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let message = err.to_string();
        assert!(
            message.contains("dataset.bin"),
            "error must name the missing path: {message}"
        );
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn simulate_then_learn_round_trip() {
        let dir = temp_dir("two-stage");
        let plan = builders::zz_chain(2, 0.9, 0.05);
        let plan_path = write_plan(&dir, &plan);
        let cfg = base_config(Mode::Simulate, &dir, &plan_path);
        let first = run(&cfg).unwrap();
        assert!(first.report.model_sha256.is_none());
        let cfg2 = base_config(Mode::Learn, &dir, &plan_path);
        let second = run(&cfg2).unwrap();
        assert_eq!(first.report.dataset_sha256, second.report.dataset_sha256);
        assert!(second.report.model_sha256.is_some());
        assert!(dir.join("model.json").is_file());
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn verify_mode_reports_tolerance_hit() {
        let dir = temp_dir("verify");
        let plan = builders::zz_chain(2, 0.9, 0.04);
        let plan_path = write_plan(&dir, &plan);
        let mut cfg = base_config(Mode::Simulate, &dir, &plan_path);
        cfg.shots = Some(30_000);
        run(&cfg).unwrap();
        let mut vcfg = base_config(Mode::Verify, &dir, &plan_path);
        vcfg.shots = Some(30_000);
        let artifacts = run(&vcfg).unwrap();
        let verify = artifacts.report.verify.unwrap();
        assert_eq!(verify.pairs, 30);
        assert!(verify.within_tolerance, "max gap {}", verify.max_gap);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn classify_mode_interpolates_oracle_labels() {
        let dir = temp_dir("classify");
        let plan = builders::zz_chain(2, 0.9, 0.04);
        let plan_path = write_plan(&dir, &plan);
        let cfg = base_config(Mode::Classify, &dir, &plan_path);
        let artifacts = run(&cfg).unwrap();
        let classify = artifacts.report.classify.unwrap();
        assert!(classify.residual < 1e-8, "residual {}", classify.residual);
        assert!(classify.mean_loss < 1e-14);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn report_json_round_trips() {
        let dir = temp_dir("report-rt");
        let plan = builders::zz_chain(2, 0.9, 0.05);
        let plan_path = write_plan(&dir, &plan);
        let cfg = base_config(Mode::Full, &dir, &plan_path);
        let artifacts = run(&cfg).unwrap();
        let text = std::fs::read_to_string(dir.join("report.json")).unwrap();
        let parsed = report_from_json(&text).unwrap();
        assert_eq!(parsed, artifacts.report);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn sweep_stderr_scales_inverse_sqrt() {
        let plan = builders::single_qubit(Axis::Z, 1.0, 0.1);
        let learn = LearnConfig::default();
        let trunc = TruncationPlan::manual(1);
        let rows = error_vs_n_sweep(&plan, &[2_000, 8_000, 32_000], 3, &learn, &trunc).unwrap();
        assert_eq!(rows.len(), 3);
        for pair in rows.windows(2) {
            let ratio = pair[1].mean_stderr / pair[0].mean_stderr;
            assert!(
                (ratio - 0.5).abs() < 0.08,
                "stderr ratio {ratio} should be near 1/2"
            );
        }
        let csv = sweep_csv(&rows);
        assert_eq!(csv.lines().count(), 4);
        let empty = sweep_csv(&[]);
        assert_eq!(empty, "n_records,mean_stderr,mean_abs_error\n");
    }
}
