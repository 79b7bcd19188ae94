//! A small ReLU network that maps durations to start times, trained with a
//! Lagrangian dual loop.
//!
//! The architecture mirrors the problem structure: one affine+ReLU block per
//! job (over that job's durations) and one per machine (over the durations
//! of the tasks it hosts), concatenated into a vector of width 2*J*T, then
//! two shared affine+ReLU layers of that width and an affine output layer
//! back to J*T start predictions.
//!
//! Training minimizes MSE plus multiplier-weighted constraint violations.
//! After each epoch the multipliers climb by `dual_learning_rate` times the
//! epoch's mean violation of their group: one multiplier shared by all
//! precedence constraints, one per machine for overlaps. Violations enter
//! the loss through the same hinge formulas the feasibility checker uses,
//! evaluated on the (normalized) predictions; the subgradient at a hinge
//! kink is zero, and a tied min takes its first argument.

use crate::datagen::Dataset;
use crate::instance::{JssInstance, Schedule};
use crate::project::{project_feasible, ProjectError};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("model was built for shape {model:?} but the data has shape {data:?}")]
    ShapeMismatch { model: (usize, usize), data: (usize, usize) },
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("multipliers must be nonnegative")]
    NegativeMultiplier,
    #[error("expected {expected} overlap multipliers, got {got}")]
    MultiplierCount { expected: usize, got: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Project(#[from] ProjectError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Dense affine map, weights row-major `[out x in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Affine {
    inp: usize,
    out: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Affine {
    fn seeded(inp: usize, out: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / inp as f64).sqrt();
        let w = (0..inp * out).map(|_| rng.random_range(-bound..bound)).collect();
        Affine { inp, out, w, b: vec![0.0; out] }
    }

    fn zeros(inp: usize, out: usize) -> Self {
        Affine { inp, out, w: vec![0.0; inp * out], b: vec![0.0; out] }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.out)
            .map(|o| {
                self.b[o]
                    + self.w[o * self.inp..(o + 1) * self.inp]
                        .iter()
                        .zip(x)
                        .map(|(w, x)| w * x)
                        .sum::<f64>()
            })
            .collect()
    }

    /// Accumulate weight/bias gradients for upstream `dz` at input `x` and
    /// return the gradient with respect to `x`.
    fn backward(&self, x: &[f64], dz: &[f64], grad: &mut Affine) -> Vec<f64> {
        let mut dx = vec![0.0; self.inp];
        for o in 0..self.out {
            grad.b[o] += dz[o];
            for i in 0..self.inp {
                grad.w[o * self.inp + i] += dz[o] * x[i];
                dx[i] += self.w[o * self.inp + i] * dz[o];
            }
        }
        dx
    }
}

fn relu(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| v.max(0.0)).collect()
}

fn relu_mask(z: &[f64], d: &[f64]) -> Vec<f64> {
    z.iter().zip(d).map(|(&z, &d)| if z > 0.0 { d } else { 0.0 }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    jobs: usize,
    tasks: usize,
    job_blocks: Vec<Affine>,
    machine_blocks: Vec<Affine>,
    shared: Vec<Affine>,
    output: Affine,
}

/// Fresh model for `(jobs, tasks)`-shaped instances: weights uniform in
/// `±sqrt(6/fan_in)` drawn from a seeded stream, biases zero.
pub fn build_model(shape: (usize, usize), seed: u64) -> Model {
    let (jobs, tasks) = shape;
    assert!(jobs >= 1 && tasks >= 1, "model needs at least one job and one task");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = 2 * jobs * tasks;
    Model {
        jobs,
        tasks,
        job_blocks: (0..jobs).map(|_| Affine::seeded(tasks, tasks, &mut rng)).collect(),
        machine_blocks: (0..tasks).map(|_| Affine::seeded(jobs, jobs, &mut rng)).collect(),
        shared: (0..2).map(|_| Affine::seeded(width, width, &mut rng)).collect(),
        output: Affine::seeded(width, jobs * tasks, &mut rng),
    }
}

impl Model {
    pub fn jobs(&self) -> usize {
        self.jobs
    }

    pub fn tasks(&self) -> usize {
        self.tasks
    }

    fn zeros_like(&self) -> Model {
        Model {
            jobs: self.jobs,
            tasks: self.tasks,
            job_blocks: self.job_blocks.iter().map(|a| Affine::zeros(a.inp, a.out)).collect(),
            machine_blocks: self.machine_blocks.iter().map(|a| Affine::zeros(a.inp, a.out)).collect(),
            shared: self.shared.iter().map(|a| Affine::zeros(a.inp, a.out)).collect(),
            output: Affine::zeros(self.output.inp, self.output.out),
        }
    }

    /// `param <- param - step * grad`, walking both models in lockstep.
    fn descend(&mut self, grad: &Model, step: f64) {
        let pairs = self
            .job_blocks
            .iter_mut()
            .zip(&grad.job_blocks)
            .chain(self.machine_blocks.iter_mut().zip(&grad.machine_blocks))
            .chain(self.shared.iter_mut().zip(&grad.shared))
            .chain(std::iter::once((&mut self.output, &grad.output)));
        for (a, g) in pairs {
            for (w, gw) in a.w.iter_mut().zip(&g.w) {
                *w -= step * gw;
            }
            for (b, gb) in a.b.iter_mut().zip(&g.b) {
                *b -= step * gb;
            }
        }
    }

    fn check_instance(&self, inst: &JssInstance) -> Result<(), LearnError> {
        if inst.jobs() != self.jobs || inst.tasks_per_job() != self.tasks {
            return Err(LearnError::ShapeMismatch {
                model: (self.jobs, self.tasks),
                data: (inst.jobs(), inst.tasks_per_job()),
            });
        }
        Ok(())
    }
}

struct Cache {
    job_x: Vec<Vec<f64>>,
    job_z: Vec<Vec<f64>>,
    mach_x: Vec<Vec<f64>>,
    mach_z: Vec<Vec<f64>>,
    h0: Vec<f64>,
    z1: Vec<f64>,
    h1: Vec<f64>,
    z2: Vec<f64>,
    h2: Vec<f64>,
    pred: Vec<f64>,
}

fn forward_cached(model: &Model, inst: &JssInstance, durations: &[f64]) -> Cache {
    let (jobs, tasks) = (model.jobs, model.tasks);
    let job_x: Vec<Vec<f64>> =
        (0..jobs).map(|j| durations[j * tasks..(j + 1) * tasks].to_vec()).collect();
    // machine m's input: for each job, the duration of its task on m
    let mach_x: Vec<Vec<f64>> = (0..tasks)
        .map(|m| {
            (0..jobs)
                .map(|j| {
                    let t = (0..tasks)
                        .find(|&t| inst.machine(j, t) == m)
                        .expect("every job visits every machine");
                    durations[j * tasks + t]
                })
                .collect()
        })
        .collect();
    let job_z: Vec<Vec<f64>> =
        model.job_blocks.iter().zip(&job_x).map(|(a, x)| a.apply(x)).collect();
    let mach_z: Vec<Vec<f64>> =
        model.machine_blocks.iter().zip(&mach_x).map(|(a, x)| a.apply(x)).collect();
    let mut h0 = Vec::with_capacity(2 * jobs * tasks);
    for z in &job_z {
        h0.extend(relu(z));
    }
    for z in &mach_z {
        h0.extend(relu(z));
    }
    let z1 = model.shared[0].apply(&h0);
    let h1 = relu(&z1);
    let z2 = model.shared[1].apply(&h1);
    let h2 = relu(&z2);
    let pred = model.output.apply(&h2);
    Cache { job_x, job_z, mach_x, mach_z, h0, z1, h1, z2, h2, pred }
}

/// Predicted start times for `durations` (flat, row-major, at whatever scale
/// the model was trained on).
pub fn forward(model: &Model, inst: &JssInstance, durations: &[f64]) -> Result<Vec<f64>, LearnError> {
    model.check_instance(inst)?;
    let expected = model.jobs * model.tasks;
    if durations.len() != expected {
        return Err(LearnError::Length { expected, got: durations.len() });
    }
    Ok(forward_cached(model, inst, durations).pred)
}

fn backprop(model: &Model, cache: &Cache, dpred: &[f64], grad: &mut Model) {
    let (jobs, tasks) = (model.jobs, model.tasks);
    let dh2 = model.output.backward(&cache.h2, dpred, &mut grad.output);
    let dz2 = relu_mask(&cache.z2, &dh2);
    let dh1 = model.shared[1].backward(&cache.h1, &dz2, &mut grad.shared[1]);
    let dz1 = relu_mask(&cache.z1, &dh1);
    let dh0 = model.shared[0].backward(&cache.h0, &dz1, &mut grad.shared[0]);
    for j in 0..jobs {
        let dz = relu_mask(&cache.job_z[j], &dh0[j * tasks..(j + 1) * tasks]);
        model.job_blocks[j].backward(&cache.job_x[j], &dz, &mut grad.job_blocks[j]);
    }
    let base = jobs * tasks;
    for m in 0..tasks {
        let dz = relu_mask(&cache.mach_z[m], &dh0[base + m * jobs..base + (m + 1) * jobs]);
        model.machine_blocks[m].backward(&cache.mach_x[m], &dz, &mut grad.machine_blocks[m]);
    }
}

/// One multiplier for every precedence constraint, one per machine for the
/// overlap constraints on it. All nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub precedence: f64,
    pub overlap: Vec<f64>,
}

impl Multipliers {
    pub fn zeros(machines: usize) -> Self {
        Multipliers { precedence: 0.0, overlap: vec![0.0; machines] }
    }

    fn validate(&self, machines: usize) -> Result<(), LearnError> {
        if self.overlap.len() != machines {
            return Err(LearnError::MultiplierCount { expected: machines, got: self.overlap.len() });
        }
        if self.precedence < 0.0 || self.overlap.iter().any(|&l| l < 0.0) {
            return Err(LearnError::NegativeMultiplier);
        }
        Ok(())
    }
}

/// MSE plus weighted hinge penalties, with its gradient in `pred`. The
/// penalties evaluate the violation formulas at `pred` with the durations
/// taken from `inst` at raw scale; training uses the same core on normalized
/// values. With all multipliers zero the result is bit-for-bit the plain
/// mean squared error.
pub fn lagrangian_loss(
    pred: &[f64],
    target: &[f64],
    inst: &JssInstance,
    mult: &Multipliers,
) -> Result<(f64, Vec<f64>), LearnError> {
    mult.validate(inst.machines())?;
    let expected = inst.jobs() * inst.tasks_per_job();
    if pred.len() != expected || target.len() != expected {
        return Err(LearnError::Length { expected, got: pred.len() });
    }
    Ok(loss_core(pred, target, &inst.flat_durations(), inst, mult))
}

fn loss_core(
    pred: &[f64],
    target: &[f64],
    durations: &[f64],
    inst: &JssInstance,
    mult: &Multipliers,
) -> (f64, Vec<f64>) {
    let n = pred.len();
    let mut grad = vec![0.0; n];
    let mut sq = 0.0;
    for i in 0..n {
        let e = pred[i] - target[i];
        sq += e * e;
        grad[i] = 2.0 * e / n as f64;
    }
    let mut loss = sq / n as f64;
    let t = inst.tasks_per_job();
    if mult.precedence != 0.0 {
        let lam = mult.precedence;
        for j in 0..inst.jobs() {
            for k in 0..t - 1 {
                let u = j * t + k;
                let v = pred[u] + durations[u] - pred[u + 1];
                if v > 0.0 {
                    loss += lam * v;
                    grad[u] += lam;
                    grad[u + 1] -= lam;
                }
            }
        }
    }
    for (m, (j1, t1), (j2, t2)) in inst.same_machine_pairs() {
        let lam = mult.overlap[m];
        if lam == 0.0 {
            continue;
        }
        let (u, v) = (j1 * t + t1, j2 * t + t2);
        if durations[u] == 0.0 || durations[v] == 0.0 {
            continue; // empty intervals never overlap
        }
        let left = pred[u] + durations[u] - pred[v];
        let right = pred[v] + durations[v] - pred[u];
        if left > 0.0 && right > 0.0 {
            if left <= right {
                loss += lam * left;
                grad[u] += lam;
                grad[v] -= lam;
            } else {
                loss += lam * right;
                grad[v] += lam;
                grad[u] -= lam;
            }
        }
    }
    (loss, grad)
}

/// Violation sums at `pred`, independent of any multipliers: total
/// precedence hinge, and per-machine total overlap hinge.
fn violation_sums(pred: &[f64], durations: &[f64], inst: &JssInstance) -> (f64, Vec<f64>) {
    let t = inst.tasks_per_job();
    let mut prec = 0.0;
    for j in 0..inst.jobs() {
        for k in 0..t - 1 {
            let u = j * t + k;
            prec += (pred[u] + durations[u] - pred[u + 1]).max(0.0);
        }
    }
    let mut overlap = vec![0.0; inst.machines()];
    for (m, (j1, t1), (j2, t2)) in inst.same_machine_pairs() {
        let (u, v) = (j1 * t + t1, j2 * t + t2);
        if durations[u] == 0.0 || durations[v] == 0.0 {
            continue;
        }
        let left = (pred[u] + durations[u] - pred[v]).max(0.0);
        let right = (pred[v] + durations[v] - pred[u]).max(0.0);
        overlap[m] += left.min(right);
    }
    (prec, overlap)
}

/// Scale divisor for durations and targets. Fit to a dataset it is the
/// family's largest completion time, so normalized values stay near [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub scale: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization { scale: 1.0 }
    }
}

impl Normalization {
    pub fn fit(ds: &Dataset) -> Self {
        let scale = ds.entries().iter().map(|e| e.objective).max().unwrap_or(1).max(1) as f64;
        Normalization { scale }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dual_learning_rate: f64,
    pub seed: u64,
    pub normalization: Normalization,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            batch_size: 16,
            learning_rate: 1e-3,
            dual_learning_rate: 1e-3,
            seed: 0,
            normalization: Normalization::default(),
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), LearnError> {
        if self.batch_size == 0 {
            return Err(LearnError::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(LearnError::Config("learning_rate must be positive".into()));
        }
        if !(self.dual_learning_rate >= 0.0) {
            return Err(LearnError::Config("dual_learning_rate must be nonnegative".into()));
        }
        if !(self.normalization.scale > 0.0) {
            return Err(LearnError::Config("normalization scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean penalized loss over the epoch's samples, at the weights each
    /// batch saw.
    pub loss: f64,
    /// Mean hinge violation per constraint across all groups.
    pub mean_violation: f64,
    pub lambda_precedence: f64,
    pub lambda_overlap: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// How constraints share multipliers.
    pub multiplier_grouping: String,
    pub epochs: Vec<EpochStats>,
}

const GROUPING: &str = "precedence: one shared multiplier; overlap: one multiplier per machine";

/// Mini-batch SGD on the penalized loss, then a dual ascent step on the
/// multipliers from the epoch's mean violations. Multipliers start at zero.
/// Durations and targets are divided by `cfg.normalization.scale` before
/// they reach the network or the hinges. Deterministic given `cfg.seed`.
pub fn train(model: &mut Model, ds: &Dataset, cfg: &TrainConfig) -> Result<TrainHistory, LearnError> {
    cfg.validate()?;
    let first = &ds.entries()[0].instance;
    model.check_instance(first)?;
    let scale = cfg.normalization.scale;
    let entries = ds.entries();
    let n = entries.len();
    let inputs: Vec<Vec<f64>> = entries
        .iter()
        .map(|e| e.instance.flat_durations().iter().map(|d| d / scale).collect())
        .collect();
    let targets: Vec<Vec<f64>> = entries
        .iter()
        .map(|e| e.schedule().flat().iter().map(|s| s / scale).collect())
        .collect();

    let jobs = first.jobs();
    let tasks = first.tasks_per_job();
    let prec_count = (jobs * tasks.saturating_sub(1) * n).max(1) as f64;
    let pair_count = ((jobs * (jobs - 1) / 2) * n).max(1) as f64;

    let mut mult = Multipliers::zeros(first.machines());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = TrainHistory { multiplier_grouping: GROUPING.into(), epochs: Vec::new() };
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut prec_sum = 0.0;
        let mut overlap_sum = vec![0.0; first.machines()];
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = model.zeros_like();
            for &i in batch {
                let inst = &entries[i].instance;
                let cache = forward_cached(model, inst, &inputs[i]);
                let (loss, dpred) = loss_core(&cache.pred, &targets[i], &inputs[i], inst, &mult);
                loss_sum += loss;
                let (pv, ov) = violation_sums(&cache.pred, &inputs[i], inst);
                prec_sum += pv;
                for (acc, v) in overlap_sum.iter_mut().zip(&ov) {
                    *acc += v;
                }
                backprop(model, &cache, &dpred, &mut grad);
            }
            // descend on the batch's summed loss (classical mini-batch SGD)
            model.descend(&grad, cfg.learning_rate);
        }
        if cfg.dual_learning_rate != 0.0 {
            mult.precedence =
                (mult.precedence + cfg.dual_learning_rate * prec_sum / prec_count).max(0.0);
            for (lam, s) in mult.overlap.iter_mut().zip(&overlap_sum) {
                *lam = (*lam + cfg.dual_learning_rate * s / pair_count).max(0.0);
            }
        }
        let total_constraints = prec_count + pair_count * first.machines() as f64;
        history.epochs.push(EpochStats {
            epoch,
            loss: loss_sum / n as f64,
            mean_violation: (prec_sum + overlap_sum.iter().sum::<f64>()) / total_constraints,
            lambda_precedence: mult.precedence,
            lambda_overlap: mult.overlap.clone(),
        });
    }
    Ok(history)
}

/// Evaluation metrics, each a mean over dataset entries and expressed as a
/// percentage: L1 error of the projected prediction against the target and
/// L1 movement caused by projection, both relative to the instance's average
/// task duration, plus the relative makespan regret of the projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub prediction_error: f64,
    pub constraint_violation: f64,
    pub optimality_gap: f64,
}

/// The three metrics for one entry, from raw-scale predicted starts.
pub fn entry_metrics(
    inst: &JssInstance,
    raw_pred: &[f64],
    target: &Schedule,
) -> Result<Metrics, LearnError> {
    let projected = project_feasible(inst, raw_pred)?;
    let avg = inst.flat_durations().iter().sum::<f64>() / raw_pred.len() as f64;
    let pred_err: f64 = projected.l1_distance(target) as f64;
    let viol: f64 = projected
        .flat()
        .iter()
        .zip(raw_pred)
        .map(|(p, r)| (p - r).abs())
        .sum();
    let gap = (projected.makespan() - target.makespan()) as f64 / target.makespan() as f64;
    Ok(Metrics {
        prediction_error: pred_err / avg * 100.0,
        constraint_violation: viol / avg * 100.0,
        optimality_gap: gap * 100.0,
    })
}

/// Run the model over every entry (denormalizing its outputs), project, and
/// average the per-entry metrics.
pub fn evaluate(model: &Model, ds: &Dataset, norm: &Normalization) -> Result<Metrics, LearnError> {
    model.check_instance(&ds.entries()[0].instance)?;
    let per_entry: Vec<Metrics> = ds
        .entries()
        .par_iter()
        .map(|e| {
            let scaled: Vec<f64> =
                e.instance.flat_durations().iter().map(|d| d / norm.scale).collect();
            let raw: Vec<f64> = forward(model, &e.instance, &scaled)?
                .into_iter()
                .map(|p| p * norm.scale)
                .collect();
            entry_metrics(&e.instance, &raw, &e.schedule())
        })
        .collect::<Result<_, _>>()?;
    let n = per_entry.len() as f64;
    Ok(Metrics {
        prediction_error: per_entry.iter().map(|m| m.prediction_error).sum::<f64>() / n,
        constraint_violation: per_entry.iter().map(|m| m.constraint_violation).sum::<f64>() / n,
        optimality_gap: per_entry.iter().map(|m| m.optimality_gap).sum::<f64>() / n,
    })
}

/// JSON checkpoint: architecture header plus every weight, exact round-trip.
pub fn save_model(model: &Model, path: &Path) -> Result<(), LearnError> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(file, model)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model, LearnError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let model: Model = serde_json::from_reader(file)?;
    let (jobs, tasks) = (model.jobs, model.tasks);
    let width = 2 * jobs * tasks;
    let layer_ok = |a: &Affine, inp: usize, out: usize| {
        a.inp == inp && a.out == out && a.w.len() == inp * out && a.b.len() == out
    };
    let ok = jobs >= 1
        && tasks >= 1
        && model.job_blocks.len() == jobs
        && model.job_blocks.iter().all(|a| layer_ok(a, tasks, tasks))
        && model.machine_blocks.len() == tasks
        && model.machine_blocks.iter().all(|a| layer_ok(a, jobs, jobs))
        && model.shared.len() == 2
        && model.shared.iter().all(|a| layer_ok(a, width, width))
        && layer_ok(&model.output, width, jobs * tasks);
    if !ok {
        return Err(LearnError::Checkpoint("inconsistent architecture header".into()));
    }
    Ok(model)
}
