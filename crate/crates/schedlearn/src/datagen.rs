//! Families of solved instances, generated two ways.
//!
//! Standard mode solves every instance of a slowdown family independently,
//! each with its own derived seed, so consecutive solutions land on whatever
//! co-optimal corner the search happens to reach. OD mode solves the hardest
//! instance once, then walks backwards: each earlier instance is solved for
//! the schedule closest (in L1) to its successor's among all schedules
//! matching the optimal makespan. Both produce datasets with identical
//! objective values; they differ only in how much the solutions move between
//! neighbors, which `total_variation` and `lipschitz_constant` quantify.

use crate::instance::{is_feasible, JssInstance, Schedule};
use crate::solver::{solve_makespan, solve_proximal, SolveBudget, SolveError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset has no entries")]
    Empty,
    #[error("dataset needs at least two entries for pairwise metrics")]
    TooShort,
    #[error("entry {index}: {reason}")]
    Entry { index: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetMode {
    Standard,
    Od,
}

/// Norm used by `total_variation`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
}

/// One solved instance. `index` is the 1-based position in the family,
/// `solution` the start-time matrix, `objective` its makespan, `optimal`
/// whether the solves proved it minimal, and `seed` the RNG seed the solve
/// actually used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub index: usize,
    pub instance: JssInstance,
    pub solution: Vec<Vec<i64>>,
    pub objective: i64,
    pub optimal: bool,
    pub mode: DatasetMode,
    pub seed: u64,
}

impl DatasetEntry {
    /// The solution as a validated schedule.
    pub fn schedule(&self) -> Schedule {
        Schedule::new(self.solution.clone(), &self.instance)
            .expect("dataset entries are validated on construction")
    }
}

/// A validated, ordered family of solved instances. Construction checks the
/// invariants every consumer relies on: contiguous 1-based indices, one mode
/// throughout, a shared machine layout, componentwise nondecreasing
/// durations, and feasible solutions whose makespans match `objective`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    entries: Vec<DatasetEntry>,
}

impl Dataset {
    pub fn new(entries: Vec<DatasetEntry>) -> Result<Self, DatasetError> {
        let first = entries.first().ok_or(DatasetError::Empty)?;
        let mode = first.mode;
        let (jobs, machines) = (first.instance.jobs(), first.instance.machines());
        for (pos, e) in entries.iter().enumerate() {
            let idx = pos + 1;
            let fail =
                |reason: String| DatasetError::Entry { index: idx, reason };
            if e.index != idx {
                return Err(fail(format!("expected index {idx}, found {}", e.index)));
            }
            if e.mode != mode {
                return Err(fail("mode differs from the first entry".into()));
            }
            if e.instance.jobs() != jobs || e.instance.machines() != machines {
                return Err(fail("instance shape differs from the first entry".into()));
            }
            for j in 0..jobs {
                for t in 0..e.instance.tasks_per_job() {
                    if e.instance.machine(j, t) != first.instance.machine(j, t) {
                        return Err(fail("machine layout differs from the first entry".into()));
                    }
                    if pos > 0 && e.instance.duration(j, t) < entries[pos - 1].instance.duration(j, t)
                    {
                        return Err(fail("durations are not nondecreasing along the family".into()));
                    }
                }
            }
            let sched = Schedule::new(e.solution.clone(), &e.instance)
                .map_err(|err| fail(err.to_string()))?;
            if !is_feasible(&e.instance, &sched).expect("shape already validated") {
                return Err(fail("solution violates a constraint".into()));
            }
            if e.objective != sched.makespan() {
                return Err(fail(format!(
                    "objective {} does not match the solution's makespan {}",
                    e.objective,
                    sched.makespan()
                )));
            }
        }
        Ok(Dataset { entries })
    }

    pub fn entries(&self) -> &[DatasetEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn mode(&self) -> DatasetMode {
        self.entries[0].mode
    }

    pub fn schedules(&self) -> Vec<Schedule> {
        self.entries.iter().map(DatasetEntry::schedule).collect()
    }
}

/// Solve each instance on its own, seeding solve `i` (1-based) with
/// `budget.seed + i`. Solves run in parallel; the family order is kept.
pub fn generate_standard(
    family: &[JssInstance],
    budget: &SolveBudget,
) -> Result<Dataset, DatasetError> {
    if family.is_empty() {
        return Err(DatasetError::Empty);
    }
    let entries = family
        .par_iter()
        .enumerate()
        .map(|(pos, inst)| {
            let seed = budget.seed.wrapping_add(pos as u64 + 1);
            let b = SolveBudget { seed, ..budget.clone() };
            let r = solve_makespan(inst, &b, None)?;
            Ok(DatasetEntry {
                index: pos + 1,
                instance: inst.clone(),
                solution: r.schedule.starts().to_vec(),
                objective: r.objective,
                optimal: r.optimal,
                mode: DatasetMode::Standard,
                seed,
            })
        })
        .collect::<Result<Vec<_>, SolveError>>()?;
    Dataset::new(entries)
}

/// The ordered-descent generator. Solves the last (slowest) instance, then
/// for each predecessor finds the makespan-optimal schedule closest to its
/// successor's solution:
///
/// 1. `y[N] = argmin makespan(inst[N])`
/// 2. for `i = N-1 .. 1`:
///    `cap = min makespan(inst[i])`, hot-started from `y[i+1]`, which stays
///    feasible because durations only shrink going backwards;
///    `y[i] = argmin ||y - y[i+1]||_1` over schedules with makespan <= cap.
///
/// Every solve shares `budget.seed`; the proximal step is deterministic, so
/// the only freedom the seed exercises is inside the makespan solves.
pub fn generate_od(family: &[JssInstance], budget: &SolveBudget) -> Result<Dataset, DatasetError> {
    if family.is_empty() {
        return Err(DatasetError::Empty);
    }
    let n = family.len();
    let mut entries: Vec<DatasetEntry> = Vec::with_capacity(n);
    let last = solve_makespan(&family[n - 1], budget, None)?;
    entries.push(DatasetEntry {
        index: n,
        instance: family[n - 1].clone(),
        solution: last.schedule.starts().to_vec(),
        objective: last.objective,
        optimal: last.optimal,
        mode: DatasetMode::Od,
        seed: budget.seed,
    });
    let mut successor = last.schedule;
    let mut proved = last.optimal;
    for pos in (0..n - 1).rev() {
        let inst = &family[pos];
        let capped = solve_makespan(inst, budget, Some(&successor))?;
        let prox = solve_proximal(inst, &successor, Some(capped.objective), budget)?;
        proved = proved && capped.optimal && prox.optimal;
        entries.push(DatasetEntry {
            index: pos + 1,
            instance: inst.clone(),
            solution: prox.schedule.starts().to_vec(),
            objective: prox.schedule.makespan(),
            optimal: proved,
            mode: DatasetMode::Od,
            seed: budget.seed,
        });
        successor = prox.schedule;
    }
    entries.reverse();
    Dataset::new(entries)
}

fn delta(a: &Schedule, b: &Schedule, norm: Norm) -> f64 {
    match norm {
        Norm::L1 => a.l1_distance(b) as f64,
        Norm::L2 => a
            .flat()
            .iter()
            .zip(b.flat())
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt(),
    }
}

/// Half the summed distance between consecutive solutions,
/// `1/2 * sum_i ||y[i+1] - y[i]||`. Zero for a single entry.
pub fn total_variation(ds: &Dataset, norm: Norm) -> f64 {
    let schedules = ds.schedules();
    0.5 * schedules.windows(2).map(|w| delta(&w[0], &w[1], norm)).sum::<f64>()
}

/// The largest ratio `||y[i+1] - y[i]||_1 / ||x[i+1] - x[i]||_1` over
/// consecutive entries, where `x` is the flat duration vector: an empirical
/// Lipschitz constant of the solution map along the family. Errors if two
/// consecutive instances have identical durations.
pub fn lipschitz_constant(ds: &Dataset) -> Result<f64, DatasetError> {
    if ds.len() < 2 {
        return Err(DatasetError::TooShort);
    }
    let mut best = 0.0f64;
    for pair in ds.entries().windows(2) {
        let dx: f64 = pair[0]
            .instance
            .flat_durations()
            .iter()
            .zip(pair[1].instance.flat_durations())
            .map(|(a, b)| (a - b).abs())
            .sum();
        if dx == 0.0 {
            return Err(DatasetError::Entry {
                index: pair[1].index,
                reason: "consecutive instances have identical durations".into(),
            });
        }
        let dy = pair[0].schedule().l1_distance(&pair[1].schedule());
        best = best.max(dy as f64 / dx);
    }
    Ok(best)
}

/// Split a dataset into train and test parts, sending every `test_every`-th
/// entry (by 1-based family index) to the test side. The interleaved rule
/// keeps both sides spread across the whole family rather than cutting off
/// one end of the trajectory. Both sides are reindexed from 1.
pub fn split_dataset(ds: &Dataset, test_every: usize) -> Result<(Dataset, Dataset), DatasetError> {
    if test_every < 2 || ds.len() < test_every {
        return Err(DatasetError::TooShort);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for entry in ds.entries() {
        let side = if entry.index % test_every == 0 { &mut test } else { &mut train };
        let mut entry = entry.clone();
        entry.index = side.len() + 1;
        side.push(entry);
    }
    Ok((Dataset::new(train)?, Dataset::new(test)?))
}

/// One JSON object per line, in family order.
pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<(), DatasetError> {
    let mut out = BufWriter::new(File::create(path)?);
    for entry in ds.entries() {
        serde_json::to_writer(&mut out, entry)
            .map_err(|source| DatasetError::Json { line: entry.index, source })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Parse and fully revalidate a JSONL dataset file.
pub fn read_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let reader = BufReader::new(File::open(path)?);
    let mut entries = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: DatasetEntry = serde_json::from_str(&line)
            .map_err(|source| DatasetError::Json { line: i + 1, source })?;
        entries.push(entry);
    }
    Dataset::new(entries)
}
