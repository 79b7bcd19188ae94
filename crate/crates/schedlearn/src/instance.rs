//! Instances, schedules, violation degrees, and slowdown families.
//!
//! An instance is `jobs x machines` with exactly one task per (job, machine)
//! pair; task `t` of a job runs on `machine[j][t]` for `duration[j][t]` time
//! units. A schedule assigns integer start times. Feasibility means every
//! within-job precedence holds and no two tasks overlap on a machine, and
//! both kinds of violation come with a degree (by how many time units the
//! constraint is missed), not just a flag.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("instance must have at least one job and one machine")]
    Empty,
    #[error("job {job} has {got} tasks, expected {expected}")]
    BadJobLength { job: usize, got: usize, expected: usize },
    #[error("negative duration {value} at job {job}, task {task}")]
    NegativeDuration { job: usize, task: usize, value: i64 },
    #[error("job {job} visits machine {machine} more than once")]
    DuplicateMachine { job: usize, machine: usize },
    #[error("machine index {machine} out of range at job {job}, task {task}")]
    MachineOutOfRange { job: usize, task: usize, machine: usize },
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line 1 must be two integers `jobs machines`")]
    BadHeader,
    #[error("line {line}: expected {expected} integers, found {got}")]
    BadRow { line: usize, expected: usize, got: usize },
    #[error("line {line}: `{token}` is not an integer")]
    BadToken { line: usize, token: String },
    #[error("expected {expected} job rows, found {got}")]
    MissingRows { expected: usize, got: usize },
    #[error(transparent)]
    Invalid(#[from] InstanceError),
}

#[derive(Debug, Error)]
#[error("schedule shape does not match instance ({jobs} jobs x {tasks} tasks expected)")]
pub struct ShapeError {
    pub jobs: usize,
    pub tasks: usize,
}

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("negative start {value} at job {job}, task {task}")]
    NegativeStart { job: usize, task: usize, value: i64 },
}

/// A job-shop instance. `duration[j][t]` and `machine[j][t]` describe task
/// `t` of job `j`; each job visits each machine exactly once, so the number
/// of tasks per job equals the number of machines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct JssInstance {
    jobs: usize,
    machines: usize,
    duration: Vec<Vec<i64>>,
    machine: Vec<Vec<usize>>,
}

/// Wire form: flat row-major `[machine, duration]` pairs.
#[derive(Serialize, Deserialize)]
struct RawInstance {
    jobs: usize,
    machines: usize,
    tasks: Vec<(usize, i64)>,
}

impl From<JssInstance> for RawInstance {
    fn from(inst: JssInstance) -> Self {
        let tasks = inst
            .machine
            .iter()
            .zip(&inst.duration)
            .flat_map(|(ms, ds)| ms.iter().copied().zip(ds.iter().copied()))
            .collect();
        RawInstance { jobs: inst.jobs, machines: inst.machines, tasks }
    }
}

impl TryFrom<RawInstance> for JssInstance {
    type Error = InstanceError;

    fn try_from(raw: RawInstance) -> Result<Self, Self::Error> {
        if raw.tasks.len() != raw.jobs * raw.machines {
            return Err(InstanceError::BadJobLength {
                job: 0,
                got: raw.tasks.len(),
                expected: raw.jobs * raw.machines,
            });
        }
        let mut duration = Vec::with_capacity(raw.jobs);
        let mut machine = Vec::with_capacity(raw.jobs);
        for chunk in raw.tasks.chunks(raw.machines.max(1)) {
            machine.push(chunk.iter().map(|&(m, _)| m).collect());
            duration.push(chunk.iter().map(|&(_, d)| d).collect());
        }
        JssInstance::new(duration, machine)
    }
}

impl JssInstance {
    pub fn new(duration: Vec<Vec<i64>>, machine: Vec<Vec<usize>>) -> Result<Self, InstanceError> {
        let jobs = duration.len();
        if jobs == 0 || machine.len() != jobs {
            return Err(InstanceError::Empty);
        }
        let machines = duration[0].len();
        if machines == 0 {
            return Err(InstanceError::Empty);
        }
        for (j, (ds, ms)) in duration.iter().zip(&machine).enumerate() {
            if ds.len() != machines {
                return Err(InstanceError::BadJobLength { job: j, got: ds.len(), expected: machines });
            }
            if ms.len() != machines {
                return Err(InstanceError::BadJobLength { job: j, got: ms.len(), expected: machines });
            }
            let mut seen = vec![false; machines];
            for (t, (&d, &m)) in ds.iter().zip(ms).enumerate() {
                if d < 0 {
                    return Err(InstanceError::NegativeDuration { job: j, task: t, value: d });
                }
                if m >= machines {
                    return Err(InstanceError::MachineOutOfRange { job: j, task: t, machine: m });
                }
                if seen[m] {
                    return Err(InstanceError::DuplicateMachine { job: j, machine: m });
                }
                seen[m] = true;
            }
        }
        Ok(JssInstance { jobs, machines, duration, machine })
    }

    /// Uniform random instance: durations in `lo..=hi`, each job's machine
    /// sequence an independent random permutation.
    pub fn random(jobs: usize, machines: usize, lo: i64, hi: i64, seed: u64) -> Self {
        assert!(jobs > 0 && machines > 0 && 0 <= lo && lo <= hi);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut duration = Vec::with_capacity(jobs);
        let mut machine = Vec::with_capacity(jobs);
        for _ in 0..jobs {
            duration.push((0..machines).map(|_| rng.random_range(lo..=hi)).collect());
            let mut row: Vec<usize> = (0..machines).collect();
            row.shuffle(&mut rng);
            machine.push(row);
        }
        JssInstance::new(duration, machine).expect("construction is valid")
    }

    pub fn jobs(&self) -> usize {
        self.jobs
    }

    pub fn machines(&self) -> usize {
        self.machines
    }

    /// Tasks per job; equal to `machines()` by construction.
    pub fn tasks_per_job(&self) -> usize {
        self.machines
    }

    pub fn duration(&self, job: usize, task: usize) -> i64 {
        self.duration[job][task]
    }

    pub fn machine(&self, job: usize, task: usize) -> usize {
        self.machine[job][task]
    }

    pub fn durations(&self) -> &[Vec<i64>] {
        &self.duration
    }

    pub fn machines_of(&self) -> &[Vec<usize>] {
        &self.machine
    }

    /// Row-major flattened durations, the learner's input vector.
    pub fn flat_durations(&self) -> Vec<f64> {
        self.duration.iter().flatten().map(|&d| d as f64).collect()
    }

    /// All unordered pairs of tasks sharing a machine, each pair exactly once,
    /// sorted by (machine, first task, second task) with tasks in (job, task)
    /// order.
    pub fn same_machine_pairs(&self) -> Vec<(usize, (usize, usize), (usize, usize))> {
        let mut on_machine = vec![Vec::new(); self.machines];
        for j in 0..self.jobs {
            for t in 0..self.machines {
                on_machine[self.machine[j][t]].push((j, t));
            }
        }
        let mut pairs = Vec::new();
        for (m, tasks) in on_machine.iter().enumerate() {
            for i in 0..tasks.len() {
                for k in i + 1..tasks.len() {
                    pairs.push((m, tasks[i], tasks[k]));
                }
            }
        }
        pairs
    }

    fn check_shape(&self, starts: &[Vec<i64>]) -> Result<(), ShapeError> {
        let bad = ShapeError { jobs: self.jobs, tasks: self.machines };
        if starts.len() != self.jobs {
            return Err(bad);
        }
        if starts.iter().any(|row| row.len() != self.machines) {
            return Err(bad);
        }
        Ok(())
    }
}

/// Integer start times for every task, plus the makespan they induce. A
/// schedule is not necessarily feasible; see [`is_feasible`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    start: Vec<Vec<i64>>,
    makespan: i64,
}

impl Schedule {
    /// Attach start times to an instance. Starts must be nonnegative; the
    /// makespan (max completion of each job's last task) is computed here.
    pub fn new(start: Vec<Vec<i64>>, inst: &JssInstance) -> Result<Self, ScheduleError> {
        inst.check_shape(&start)?;
        for (j, row) in start.iter().enumerate() {
            for (t, &s) in row.iter().enumerate() {
                if s < 0 {
                    return Err(ScheduleError::NegativeStart { job: j, task: t, value: s });
                }
            }
        }
        let last = inst.tasks_per_job() - 1;
        let makespan = start
            .iter()
            .enumerate()
            .map(|(j, row)| row[last] + inst.duration(j, last))
            .max()
            .expect("at least one job");
        Ok(Schedule { start, makespan })
    }

    pub fn start(&self, job: usize, task: usize) -> i64 {
        self.start[job][task]
    }

    pub fn starts(&self) -> &[Vec<i64>] {
        &self.start
    }

    pub fn makespan(&self) -> i64 {
        self.makespan
    }

    /// Row-major flattened starts.
    pub fn flat(&self) -> Vec<f64> {
        self.start.iter().flatten().map(|&s| s as f64).collect()
    }

    /// L1 distance between two schedules of the same shape.
    pub fn l1_distance(&self, other: &Schedule) -> i64 {
        self.start
            .iter()
            .flatten()
            .zip(other.start.iter().flatten())
            .map(|(&a, &b)| (a - b).abs())
            .sum()
    }
}

/// Recompute the makespan of `sched` under `inst`.
pub fn makespan(inst: &JssInstance, sched: &Schedule) -> Result<i64, ShapeError> {
    inst.check_shape(sched.starts())?;
    let last = inst.tasks_per_job() - 1;
    Ok((0..inst.jobs())
        .map(|j| sched.start(j, last) + inst.duration(j, last))
        .max()
        .expect("at least one job"))
}

/// One overlap violation: two tasks on `machine` whose half-open execution
/// intervals intersect, by `amount` time units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapEntry {
    pub machine: usize,
    pub first: (usize, usize),
    pub second: (usize, usize),
    pub amount: i64,
}

/// Per-constraint violation degrees. `precedence[j][t]` is by how much task
/// `t+1` of job `j` starts too early; `overlap` holds every unordered
/// same-machine pair exactly once. `total` sums everything.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViolationReport {
    pub precedence: Vec<Vec<i64>>,
    pub overlap: Vec<OverlapEntry>,
    pub total: i64,
}

/// Violation degrees of a schedule: precedence slack shortfalls within each
/// job and pairwise overlap on each machine. The overlap degree of two tasks
/// is the smaller of the two one-sided shifts that would separate them, so
/// zero-duration tasks never overlap anything.
pub fn violation_degrees(inst: &JssInstance, sched: &Schedule) -> Result<ViolationReport, ShapeError> {
    inst.check_shape(sched.starts())?;
    let mut total = 0i64;
    let mut precedence = Vec::with_capacity(inst.jobs());
    for j in 0..inst.jobs() {
        let mut row = Vec::with_capacity(inst.tasks_per_job() - 1);
        for t in 0..inst.tasks_per_job() - 1 {
            let v = (sched.start(j, t) + inst.duration(j, t) - sched.start(j, t + 1)).max(0);
            total += v;
            row.push(v);
        }
        precedence.push(row);
    }
    let mut overlap = Vec::new();
    for (m, (j, t), (j2, t2)) in inst.same_machine_pairs() {
        // an empty interval [s, s) cannot intersect anything
        let amount = if inst.duration(j, t) == 0 || inst.duration(j2, t2) == 0 {
            0
        } else {
            let left = (sched.start(j, t) + inst.duration(j, t) - sched.start(j2, t2)).max(0);
            let right = (sched.start(j2, t2) + inst.duration(j2, t2) - sched.start(j, t)).max(0);
            left.min(right)
        };
        total += amount;
        overlap.push(OverlapEntry { machine: m, first: (j, t), second: (j2, t2), amount });
    }
    Ok(ViolationReport { precedence, overlap, total })
}

/// True iff every violation degree is zero.
pub fn is_feasible(inst: &JssInstance, sched: &Schedule) -> Result<bool, ShapeError> {
    Ok(violation_degrees(inst, sched)?.total == 0)
}

/// A machine-slowdown family: instance `i` (1-based) scales every duration by
/// `scale` and additionally slows the tasks on one machine by up to
/// `max_increase`, linearly interpolated across the family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    /// Machine whose tasks slow down.
    pub machine: usize,
    /// Number of instances in the family.
    pub steps: usize,
    /// Relative slowdown reached by the last instance.
    pub max_increase: f64,
    /// Multiplicative factor applied to every duration first, so fractional
    /// slowdowns resolve to distinct integers.
    pub scale: i64,
}

impl PerturbationSpec {
    pub fn new(machine: usize, steps: usize) -> Self {
        PerturbationSpec { machine, steps, max_increase: 0.5, scale: 100 }
    }
}

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("slowdown machine {machine} out of range (instance has {machines})")]
    MachineOutOfRange { machine: usize, machines: usize },
    #[error("family needs at least one step")]
    NoSteps,
    #[error("max_increase must be finite and nonnegative, got {0}")]
    BadIncrease(f64),
    #[error("scale must be positive, got {0}")]
    BadScale(i64),
}

/// Build the slowdown family. Durations are nondecreasing in the family
/// index, so any schedule feasible for instance `i+1` stays feasible for
/// instance `i`. Instance 1 is the base instance with durations scaled.
pub fn perturb_family(inst: &JssInstance, spec: &PerturbationSpec) -> Result<Vec<JssInstance>, PerturbError> {
    if spec.machine >= inst.machines() {
        return Err(PerturbError::MachineOutOfRange { machine: spec.machine, machines: inst.machines() });
    }
    if spec.steps == 0 {
        return Err(PerturbError::NoSteps);
    }
    if !spec.max_increase.is_finite() || spec.max_increase < 0.0 {
        return Err(PerturbError::BadIncrease(spec.max_increase));
    }
    if spec.scale <= 0 {
        return Err(PerturbError::BadScale(spec.scale));
    }
    let mut family = Vec::with_capacity(spec.steps);
    for i in 1..=spec.steps {
        let duration = inst
            .durations()
            .iter()
            .enumerate()
            .map(|(j, row)| {
                row.iter()
                    .enumerate()
                    .map(|(t, &d)| {
                        let base = d * spec.scale;
                        if inst.machine(j, t) == spec.machine && spec.steps > 1 {
                            let frac = (i - 1) as f64 / (spec.steps - 1) as f64;
                            // round half up
                            base + (base as f64 * spec.max_increase * frac + 0.5).floor() as i64
                        } else {
                            base
                        }
                    })
                    .collect()
            })
            .collect();
        family.push(
            JssInstance::new(duration, inst.machines_of().to_vec()).expect("scaled instance is valid"),
        );
    }
    Ok(family)
}

/// Parse the plain text format: line 1 is `jobs machines`, then one line per
/// job of `machine duration` pairs, machines 0-indexed.
pub fn parse_instance(text: &str) -> Result<JssInstance, ParseError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(ParseError::BadHeader)?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 2 {
        return Err(ParseError::BadHeader);
    }
    let jobs: usize = head[0].parse().map_err(|_| ParseError::BadHeader)?;
    let machines: usize = head[1].parse().map_err(|_| ParseError::BadHeader)?;
    if jobs == 0 || machines == 0 {
        return Err(ParseError::Invalid(InstanceError::Empty));
    }
    let mut duration = Vec::with_capacity(jobs);
    let mut machine = Vec::with_capacity(jobs);
    let mut rows = 0;
    for (idx, line) in lines.by_ref().take(jobs) {
        rows += 1;
        let nums: Vec<i64> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<i64>()
                    .map_err(|_| ParseError::BadToken { line: idx + 1, token: tok.to_string() })
            })
            .collect::<Result<_, _>>()?;
        if nums.len() != 2 * machines {
            return Err(ParseError::BadRow { line: idx + 1, expected: 2 * machines, got: nums.len() });
        }
        let mut ms = Vec::with_capacity(machines);
        let mut ds = Vec::with_capacity(machines);
        for pair in nums.chunks(2) {
            let m = usize::try_from(pair[0]).map_err(|_| ParseError::BadToken {
                line: idx + 1,
                token: pair[0].to_string(),
            })?;
            ms.push(m);
            ds.push(pair[1]);
        }
        machine.push(ms);
        duration.push(ds);
    }
    if rows < jobs {
        return Err(ParseError::MissingRows { expected: jobs, got: rows });
    }
    Ok(JssInstance::new(duration, machine)?)
}

/// Canonical text form; `parse_instance(&serialize_instance(i)) == i`.
pub fn serialize_instance(inst: &JssInstance) -> String {
    let mut out = format!("{} {}\n", inst.jobs(), inst.machines());
    for j in 0..inst.jobs() {
        let row: Vec<String> = (0..inst.tasks_per_job())
            .map(|t| format!("{} {}", inst.machine(j, t), inst.duration(j, t)))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const INSTANCE_A: &str = "2 2\n0 2 1 2\n1 1 0 3\n";

    fn inst_a() -> JssInstance {
        parse_instance(INSTANCE_A).unwrap()
    }

    fn sched(inst: &JssInstance, start: &[&[i64]]) -> Schedule {
        Schedule::new(start.iter().map(|r| r.to_vec()).collect(), inst).unwrap()
    }

    #[test]
    fn parses_the_two_by_two_instance() {
        let a = inst_a();
        assert_eq!(a.jobs(), 2);
        assert_eq!(a.machines(), 2);
        assert_eq!(a.durations(), &[vec![2, 2], vec![1, 3]]);
        assert_eq!(a.machines_of(), &[vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn round_trips_through_text() {
        let a = inst_a();
        assert_eq!(serialize_instance(&a), INSTANCE_A);
        assert_eq!(parse_instance(&serialize_instance(&a)).unwrap(), a);
        let messy = "2 2\n\n  0 2  1 2\n1 1 0 3  \n\n";
        assert_eq!(parse_instance(messy).unwrap(), a);
    }

    #[test]
    fn rejects_malformed_text() {
        assert!(matches!(parse_instance(""), Err(ParseError::BadHeader)));
        assert!(matches!(parse_instance("2\n"), Err(ParseError::BadHeader)));
        assert!(matches!(parse_instance("1 2\n0 1 1"), Err(ParseError::BadRow { .. })));
        assert!(matches!(parse_instance("1 2\n0 1 x 1"), Err(ParseError::BadToken { .. })));
        assert!(matches!(parse_instance("2 1\n0 1\n"), Err(ParseError::MissingRows { .. })));
        assert!(matches!(
            parse_instance("1 2\n0 1 0 1\n"),
            Err(ParseError::Invalid(InstanceError::DuplicateMachine { .. }))
        ));
        assert!(matches!(
            parse_instance("1 2\n0 1 2 1\n"),
            Err(ParseError::Invalid(InstanceError::MachineOutOfRange { .. }))
        ));
        assert!(matches!(
            parse_instance("1 2\n0 -1 1 1\n"),
            Err(ParseError::Invalid(InstanceError::NegativeDuration { .. }))
        ));
    }

    #[test]
    fn makespan_of_known_schedules() {
        let a = inst_a();
        assert_eq!(sched(&a, &[&[0, 2], &[0, 2]]).makespan(), 5);
        assert_eq!(sched(&a, &[&[0, 3], &[0, 2]]).makespan(), 5);
        let s = sched(&a, &[&[0, 2], &[0, 2]]);
        assert_eq!(makespan(&a, &s).unwrap(), 5);
    }

    #[test]
    fn violation_degrees_of_a_tight_prediction() {
        let a = inst_a();
        let v = violation_degrees(&a, &sched(&a, &[&[0, 1], &[0, 2]])).unwrap();
        assert_eq!(v.precedence, vec![vec![1], vec![0]]);
        assert!(v.overlap.iter().all(|e| e.amount == 0));
        assert_eq!(v.total, 1);
    }

    #[test]
    fn overlap_degree_is_the_smaller_one_sided_shift() {
        // two tasks on one machine: [0, 5) and [3, 7) overlap by 2
        let inst = JssInstance::new(vec![vec![5], vec![4]], vec![vec![0], vec![0]]).unwrap();
        let v = violation_degrees(&inst, &sched(&inst, &[&[0], &[3]])).unwrap();
        assert_eq!(v.overlap.len(), 1);
        assert_eq!(v.overlap[0].amount, 2);
        assert_eq!(v.total, 2);
    }

    #[test]
    fn zero_duration_tasks_never_overlap() {
        let inst = JssInstance::new(vec![vec![0], vec![4]], vec![vec![0], vec![0]]).unwrap();
        let v = violation_degrees(&inst, &sched(&inst, &[&[1], &[0]])).unwrap();
        assert_eq!(v.total, 0);
        assert!(is_feasible(&inst, &sched(&inst, &[&[1], &[0]])).unwrap());
    }

    #[test]
    fn all_zero_durations_at_origin_are_feasible() {
        let inst = JssInstance::new(
            vec![vec![0, 0], vec![0, 0]],
            vec![vec![0, 1], vec![1, 0]],
        )
        .unwrap();
        assert!(is_feasible(&inst, &sched(&inst, &[&[0, 0], &[0, 0]])).unwrap());
    }

    #[test]
    fn violations_are_translation_invariant() {
        let a = inst_a();
        let base = sched(&a, &[&[0, 1], &[0, 2]]);
        let shifted = sched(&a, &[&[7, 8], &[7, 9]]);
        let v0 = violation_degrees(&a, &base).unwrap();
        let v1 = violation_degrees(&a, &shifted).unwrap();
        assert_eq!(v0, v1);
    }

    #[test]
    fn violations_are_job_relabel_equivariant() {
        let a = inst_a();
        // swap the two jobs
        let b = JssInstance::new(
            vec![a.durations()[1].clone(), a.durations()[0].clone()],
            vec![a.machines_of()[1].clone(), a.machines_of()[0].clone()],
        )
        .unwrap();
        let sa = sched(&a, &[&[0, 1], &[0, 2]]);
        let sb = sched(&b, &[&[0, 2], &[0, 1]]);
        let va = violation_degrees(&a, &sa).unwrap();
        let vb = violation_degrees(&b, &sb).unwrap();
        assert_eq!(va.precedence[0], vb.precedence[1]);
        assert_eq!(va.precedence[1], vb.precedence[0]);
        assert_eq!(va.total, vb.total);
        let amount = |v: &ViolationReport, x: (usize, usize), y: (usize, usize)| {
            v.overlap
                .iter()
                .find(|e| (e.first == x && e.second == y) || (e.first == y && e.second == x))
                .map(|e| e.amount)
        };
        for e in &va.overlap {
            let swap = |(j, t): (usize, usize)| (1 - j, t);
            assert_eq!(amount(&vb, swap(e.first), swap(e.second)), Some(e.amount));
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let a = inst_a();
        let other = JssInstance::new(vec![vec![1]], vec![vec![0]]).unwrap();
        let s = sched(&other, &[&[0]]);
        assert!(makespan(&a, &s).is_err());
        assert!(violation_degrees(&a, &s).is_err());
    }

    #[test]
    fn negative_starts_are_rejected() {
        let a = inst_a();
        assert!(matches!(
            Schedule::new(vec![vec![0, -1], vec![0, 2]], &a),
            Err(ScheduleError::NegativeStart { .. })
        ));
    }

    #[test]
    fn slowdown_family_matches_the_worked_example() {
        let a = inst_a();
        let spec = PerturbationSpec { machine: 0, steps: 2, max_increase: 0.5, scale: 1 };
        let fam = perturb_family(&a, &spec).unwrap();
        assert_eq!(fam[0], a);
        // machine 0 hosts task (0,0) with d=2 -> 3 and task (1,1) with d=3 -> 5 (half up)
        assert_eq!(fam[1].durations(), &[vec![3, 2], vec![1, 5]]);
        assert_eq!(fam[1].machines_of(), a.machines_of());
    }

    #[test]
    fn slowdown_is_scale_first_and_monotone() {
        let inst = JssInstance::random(3, 3, 1, 9, 11);
        let spec = PerturbationSpec::new(1, 7);
        let fam = perturb_family(&inst, &spec).unwrap();
        assert_eq!(fam.len(), 7);
        for j in 0..3 {
            for t in 0..3 {
                assert_eq!(fam[0].duration(j, t), inst.duration(j, t) * 100);
                for i in 1..fam.len() {
                    assert!(fam[i].duration(j, t) >= fam[i - 1].duration(j, t));
                    if inst.machine(j, t) != 1 {
                        assert_eq!(fam[i].duration(j, t), fam[0].duration(j, t));
                    }
                }
                let last = fam.last().unwrap().duration(j, t);
                if inst.machine(j, t) == 1 {
                    let base = inst.duration(j, t) * 100;
                    assert_eq!(last, base + (base as f64 * 0.5 + 0.5).floor() as i64);
                }
            }
        }
    }

    #[test]
    fn single_step_family_is_the_scaled_base() {
        let a = inst_a();
        let spec = PerturbationSpec { machine: 0, steps: 1, max_increase: 0.5, scale: 10 };
        let fam = perturb_family(&a, &spec).unwrap();
        assert_eq!(fam.len(), 1);
        assert_eq!(fam[0].durations(), &[vec![20, 20], vec![10, 30]]);
    }

    #[test]
    fn perturb_rejects_bad_specs() {
        let a = inst_a();
        assert!(perturb_family(&a, &PerturbationSpec::new(2, 3)).is_err());
        assert!(perturb_family(&a, &PerturbationSpec { machine: 0, steps: 0, max_increase: 0.5, scale: 1 }).is_err());
        assert!(perturb_family(&a, &PerturbationSpec { machine: 0, steps: 2, max_increase: -0.1, scale: 1 }).is_err());
        assert!(perturb_family(&a, &PerturbationSpec { machine: 0, steps: 2, max_increase: 0.5, scale: 0 }).is_err());
    }

    #[test]
    fn random_instances_are_valid_and_reproducible() {
        let x = JssInstance::random(4, 3, 1, 9, 99);
        let y = JssInstance::random(4, 3, 1, 9, 99);
        let z = JssInstance::random(4, 3, 1, 9, 100);
        assert_eq!(x, y);
        assert_ne!(x, z);
        for j in 0..4 {
            let mut ms: Vec<usize> = (0..3).map(|t| x.machine(j, t)).collect();
            ms.sort_unstable();
            assert_eq!(ms, vec![0, 1, 2]);
            assert!((0..3).all(|t| (1..=9).contains(&x.duration(j, t))));
        }
    }

    #[test]
    fn json_wire_form_is_flat_row_major() {
        let a = inst_a();
        let js = serde_json::to_string(&a).unwrap();
        assert_eq!(
            js,
            r#"{"jobs":2,"machines":2,"tasks":[[0,2],[1,2],[1,1],[0,3]]}"#
        );
        let back: JssInstance = serde_json::from_str(&js).unwrap();
        assert_eq!(back, a);
    }
}
