//! Exact branch and bound over disjunctive orderings.
//!
//! Nodes fix the direction of some same-machine pairs; the relaxation's
//! earliest-start schedule gives a lower bound, and whenever that schedule
//! happens to be conflict-free it is optimal for its whole subtree, so the
//! search both bounds and finds incumbents from the same longest path. The
//! seed scrambles which co-optimal corner is reached first: it shuffles the
//! branching pair among duration-sum ties and the order the two directions
//! are explored. `solve_proximal` runs the same tree with an L1 projection
//! as the bound, which makes it exact for the closest-schedule problem.

use crate::instance::{is_feasible, makespan, JssInstance, Schedule, ShapeError};
use crate::lp::{flatten, makespan_of, unflatten, DiffSystem, MachineOrdering};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("hotstart schedule is not feasible for this instance")]
    InvalidHotstart,
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("no schedule meets the makespan cap {cap}")]
    CapInfeasible { cap: i64 },
    #[error("search was truncated before finding any feasible candidate")]
    Truncated,
    #[error("instance has {tasks} tasks; brute force enumerates at most {max}")]
    TooLarge { tasks: usize, max: usize },
}

/// Limits for one solve. Node and time limits truncate the search (the
/// result is then marked non-optimal); the seed only affects which of
/// several co-optimal schedules is found, never the objective.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveBudget {
    pub time_limit: Duration,
    pub node_limit: Option<u64>,
    pub seed: u64,
}

impl SolveBudget {
    /// A budget that desk-scale instances never exhaust.
    pub fn exhaustive(seed: u64) -> Self {
        SolveBudget { time_limit: Duration::from_secs(3600), node_limit: None, seed }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub schedule: Schedule,
    /// Makespan for `solve_makespan`, L1 distance for `solve_proximal`.
    pub objective: i64,
    /// True iff the search ran to completion, proving optimality.
    pub optimal: bool,
    pub nodes_explored: u64,
    pub elapsed: Duration,
}

struct Pair {
    u: usize,
    v: usize,
    du: i64,
    dv: i64,
}

struct Search<'a> {
    inst: &'a JssInstance,
    pairs: Vec<Pair>,
    budget: &'a SolveBudget,
    started: Instant,
    nodes: u64,
    truncated: bool,
}

impl<'a> Search<'a> {
    fn new(inst: &'a JssInstance, budget: &'a SolveBudget) -> Self {
        let t = inst.tasks_per_job();
        let pairs = inst
            .same_machine_pairs()
            .into_iter()
            .filter(|&(_, (j, tt), (j2, t2))| inst.duration(j, tt) > 0 && inst.duration(j2, t2) > 0)
            .map(|(_, (j, tt), (j2, t2))| Pair {
                u: j * t + tt,
                v: j2 * t + t2,
                du: inst.duration(j, tt),
                dv: inst.duration(j2, t2),
            })
            .collect();
        Search { inst, pairs, budget, started: Instant::now(), nodes: 0, truncated: true }
    }

    fn out_of_budget(&mut self) -> bool {
        if self.budget.node_limit.is_some_and(|l| self.nodes >= l)
            || self.started.elapsed() >= self.budget.time_limit
        {
            self.truncated = true;
            return true;
        }
        false
    }

    /// Indices of pairs whose tasks overlap under `starts`.
    fn conflicts(&self, starts: &[i64]) -> Vec<usize> {
        self.pairs
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                let left = (starts[p.u] + p.du - starts[p.v]).max(0);
                let right = (starts[p.v] + p.dv - starts[p.u]).max(0);
                left.min(right) > 0
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// The conflicting pair with maximal duration sum; `rng` breaks ties.
    fn pick_pair(&self, conflicts: &[usize], rng: &mut Option<&mut ChaCha8Rng>) -> usize {
        let best = conflicts
            .iter()
            .map(|&i| self.pairs[i].du + self.pairs[i].dv)
            .max()
            .expect("at least one conflict");
        let ties: Vec<usize> = conflicts
            .iter()
            .copied()
            .filter(|&i| self.pairs[i].du + self.pairs[i].dv == best)
            .collect();
        match rng {
            Some(rng) => ties[rng.random_range(0..ties.len())],
            None => ties[0],
        }
    }

    fn dfs_makespan(
        &mut self,
        sys: &mut DiffSystem,
        rng: &mut ChaCha8Rng,
        incumbent: &mut Option<(i64, Vec<i64>)>,
    ) {
        if self.out_of_budget() {
            return;
        }
        self.nodes += 1;
        let Some(starts) = sys.earliest() else {
            return; // cyclic: no schedule extends this node
        };
        let lb = makespan_of(self.inst, &starts);
        if incumbent.as_ref().is_some_and(|(best, _)| lb >= *best) {
            return;
        }
        let conflicts = self.conflicts(&starts);
        if conflicts.is_empty() {
            *incumbent = Some((lb, starts));
            return;
        }
        let p = self.pick_pair(&conflicts, &mut Some(rng));
        let Pair { u, v, du, dv } = self.pairs[p];
        let mut children = [(u, v, du), (v, u, dv)];
        if rng.random_bool(0.5) {
            children.swap(0, 1);
        }
        for (a, b, w) in children {
            sys.push_edge(a, b, w);
            self.dfs_makespan(sys, rng, incumbent);
            sys.pop_edge();
        }
    }

    fn dfs_proximal(
        &mut self,
        sys: &mut DiffSystem,
        reference: &[i64],
        cap: Option<i64>,
        incumbent: &mut Option<(i64, Vec<i64>)>,
    ) {
        if self.out_of_budget() {
            return;
        }
        self.nodes += 1;
        let Some(earliest) = sys.earliest() else {
            return;
        };
        if cap.is_some_and(|c| makespan_of(self.inst, &earliest) > c) {
            return; // no extension can meet the cap
        }
        let Some((starts, dist)) = sys.l1_project(reference) else {
            return;
        };
        if incumbent.as_ref().is_some_and(|(best, _)| dist >= *best) {
            return;
        }
        let conflicts = self.conflicts(&starts);
        if conflicts.is_empty() {
            *incumbent = Some((dist, starts));
            return;
        }
        let p = self.pick_pair(&conflicts, &mut None);
        let Pair { u, v, du, dv } = self.pairs[p];
        for (a, b, w) in [(u, v, du), (v, u, dv)] {
            sys.push_edge(a, b, w);
            self.dfs_proximal(sys, reference, cap, incumbent);
            sys.pop_edge();
        }
    }
}

/// Minimize the makespan. An optional feasible hotstart schedule becomes the
/// initial incumbent, so the result is never worse than it. With a fixed
/// seed the result is bit-reproducible (time-limit truncation aside); seeds
/// only select among co-optimal schedules.
pub fn solve_makespan(
    inst: &JssInstance,
    budget: &SolveBudget,
    hotstart: Option<&Schedule>,
) -> Result<SolveResult, SolveError> {
    let mut search = Search::new(inst, budget);
    let mut incumbent = match hotstart {
        Some(h) => {
            let mk = makespan(inst, h)?;
            if !is_feasible(inst, h)? {
                return Err(SolveError::InvalidHotstart);
            }
            Some((mk, flatten(inst, h)))
        }
        None => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let mut sys = DiffSystem::with_chains(inst);
    search.truncated = false;
    search.dfs_makespan(&mut sys, &mut rng, &mut incumbent);
    let (objective, starts) = match incumbent {
        Some(found) => found,
        None => {
            // truncated before any leaf: fall back to a deterministic
            // greedy schedule so the caller still gets something feasible
            let ordering = MachineOrdering::lexicographic(inst);
            let sched = crate::lp::earliest_start_schedule(inst, &ordering)
                .expect("lexicographic ordering is acyclic");
            (sched.makespan(), flatten(inst, &sched))
        }
    };
    Ok(SolveResult {
        schedule: unflatten(inst, &starts),
        objective,
        optimal: !search.truncated,
        nodes_explored: search.nodes,
        elapsed: search.started.elapsed(),
    })
}

/// Among schedules whose makespan does not exceed `cap` (`None` = no cap),
/// find one minimizing the L1 distance to `reference`. The `objective`
/// field of the result is that distance. Deterministic: ties keep the first
/// optimum found in a fixed traversal order.
pub fn solve_proximal(
    inst: &JssInstance,
    reference: &Schedule,
    cap: Option<i64>,
    budget: &SolveBudget,
) -> Result<SolveResult, SolveError> {
    let started = Instant::now();
    let ref_makespan = makespan(inst, reference)?;
    if is_feasible(inst, reference)? && cap.is_none_or(|c| ref_makespan <= c) {
        return Ok(SolveResult {
            schedule: reference.clone(),
            objective: 0,
            optimal: true,
            nodes_explored: 0,
            elapsed: started.elapsed(),
        });
    }
    let mut search = Search::new(inst, budget);
    let mut incumbent: Option<(i64, Vec<i64>)> = None;
    let mut sys = DiffSystem::with_chains(inst);
    if let Some(c) = cap {
        sys.cap_makespan(inst, c);
    }
    let reference = flatten(inst, reference);
    search.truncated = false;
    search.dfs_proximal(&mut sys, &reference, cap, &mut incumbent);
    match incumbent {
        Some((objective, starts)) => Ok(SolveResult {
            schedule: unflatten(inst, &starts),
            objective,
            optimal: !search.truncated,
            nodes_explored: search.nodes,
            elapsed: search.started.elapsed(),
        }),
        None if search.truncated => Err(SolveError::Truncated),
        None => Err(SolveError::CapInfeasible { cap: cap.expect("uncapped search always finds a schedule") }),
    }
}

const BRUTE_FORCE_MAX_TASKS: usize = 9;

/// Exhaustive reference solver: enumerate every acyclic combination of
/// per-machine task permutations and keep the earliest-start schedule with
/// minimal makespan, ties broken by lex smallest start vector. Only for
/// instances with at most 9 tasks.
pub fn brute_force_optimal(inst: &JssInstance) -> Result<Schedule, SolveError> {
    let tasks = inst.jobs() * inst.tasks_per_job();
    if tasks > BRUTE_FORCE_MAX_TASKS {
        return Err(SolveError::TooLarge { tasks, max: BRUTE_FORCE_MAX_TASKS });
    }
    let mut on_machine: Vec<Vec<(usize, usize)>> = vec![Vec::new(); inst.machines()];
    for j in 0..inst.jobs() {
        for t in 0..inst.tasks_per_job() {
            on_machine[inst.machine(j, t)].push((j, t));
        }
    }
    let mut best: Option<(i64, Vec<Vec<i64>>)> = None;
    let mut sequences = on_machine.clone();
    permute_machines(inst, &mut sequences, &mut on_machine, 0, &mut best);
    let (_, starts) = best.expect("every instance admits a feasible ordering");
    Ok(Schedule::new(starts, inst).expect("brute force starts are valid"))
}

fn permute_machines(
    inst: &JssInstance,
    sequences: &mut Vec<Vec<(usize, usize)>>,
    remaining: &mut Vec<Vec<(usize, usize)>>,
    machine: usize,
    best: &mut Option<(i64, Vec<Vec<i64>>)>,
) {
    if machine == inst.machines() {
        let ordering = MachineOrdering::new(sequences.clone(), inst).expect("sequences are complete");
        if let Ok(sched) = crate::lp::earliest_start_schedule(inst, &ordering) {
            let starts = sched.starts().to_vec();
            let better = match best {
                None => true,
                Some((mk, bs)) => sched.makespan() < *mk || (sched.makespan() == *mk && starts < *bs),
            };
            if better {
                *best = Some((sched.makespan(), starts));
            }
        }
        return;
    }
    let n = remaining[machine].len();
    permute_in_place(inst, sequences, remaining, machine, n, best);
}

// Heap's algorithm over one machine's sequence, recursing into the next
// machine for each arrangement.
fn permute_in_place(
    inst: &JssInstance,
    sequences: &mut Vec<Vec<(usize, usize)>>,
    remaining: &mut Vec<Vec<(usize, usize)>>,
    machine: usize,
    k: usize,
    best: &mut Option<(i64, Vec<Vec<i64>>)>,
) {
    if k <= 1 {
        sequences[machine] = remaining[machine].clone();
        permute_machines(inst, sequences, remaining, machine + 1, best);
        return;
    }
    for i in 0..k {
        permute_in_place(inst, sequences, remaining, machine, k - 1, best);
        if k % 2 == 0 {
            remaining[machine].swap(i, k - 1);
        } else {
            remaining[machine].swap(0, k - 1);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::parse_instance;

    const INSTANCE_A: &str = "2 2\n0 2 1 2\n1 1 0 3\n";

    fn inst_a() -> JssInstance {
        parse_instance(INSTANCE_A).unwrap()
    }

    fn inst_a_plus() -> JssInstance {
        parse_instance("2 2\n0 3 1 2\n1 1 0 5\n").unwrap()
    }

    fn sched(inst: &JssInstance, start: &[&[i64]]) -> Schedule {
        Schedule::new(start.iter().map(|r| r.to_vec()).collect(), inst).unwrap()
    }

    #[test]
    fn solves_the_worked_examples() {
        let r = solve_makespan(&inst_a(), &SolveBudget::exhaustive(0), None).unwrap();
        assert_eq!(r.objective, 5);
        assert!(r.optimal);
        assert_eq!(r.schedule.starts(), &[vec![0, 2], vec![0, 2]]);

        let r = solve_makespan(&inst_a_plus(), &SolveBudget::exhaustive(0), None).unwrap();
        assert_eq!(r.objective, 8);
        assert_eq!(r.schedule.starts(), &[vec![0, 3], vec![0, 3]]);
    }

    #[test]
    fn objective_is_seed_independent() {
        for seed in 0..20 {
            let r = solve_makespan(&inst_a(), &SolveBudget::exhaustive(seed), None).unwrap();
            assert_eq!(r.objective, 5);
            assert!(is_feasible(&inst_a(), &r.schedule).unwrap());
        }
    }

    #[test]
    fn single_job_chains_with_zero_slack() {
        let inst = parse_instance("1 2\n0 2 1 3\n").unwrap();
        let r = solve_makespan(&inst, &SolveBudget::exhaustive(1), None).unwrap();
        assert_eq!(r.schedule.starts(), &[vec![0, 2]]);
        assert_eq!(r.objective, 5);
    }

    #[test]
    fn hotstart_bounds_the_result_and_is_validated() {
        let a = inst_a();
        let hot = sched(&a, &[&[0, 3], &[0, 3]]); // feasible, makespan 6
        let r = solve_makespan(&a, &SolveBudget::exhaustive(3), Some(&hot)).unwrap();
        assert_eq!(r.objective, 5);
        assert!(r.optimal);

        let bad = sched(&a, &[&[0, 1], &[0, 2]]);
        assert!(matches!(
            solve_makespan(&a, &SolveBudget::exhaustive(3), Some(&bad)),
            Err(SolveError::InvalidHotstart)
        ));
    }

    #[test]
    fn hotstarted_solve_never_beats_its_own_bound() {
        for seed in 0..10 {
            let inst = JssInstance::random(3, 3, 1, 9, 400 + seed);
            let ordering = MachineOrdering::lexicographic(&inst);
            let hot = crate::lp::earliest_start_schedule(&inst, &ordering).unwrap();
            let r = solve_makespan(&inst, &SolveBudget::exhaustive(seed), Some(&hot)).unwrap();
            assert!(r.objective <= hot.makespan());
        }
    }

    #[test]
    fn same_seed_same_result() {
        let inst = JssInstance::random(4, 3, 1, 9, 77);
        let a = solve_makespan(&inst, &SolveBudget::exhaustive(5), None).unwrap();
        let b = solve_makespan(&inst, &SolveBudget::exhaustive(5), None).unwrap();
        assert_eq!(a.schedule, b.schedule);
        assert_eq!(a.nodes_explored, b.nodes_explored);
    }

    #[test]
    fn node_limit_truncates_and_falls_back() {
        let inst = JssInstance::random(4, 3, 1, 9, 12);
        let budget = SolveBudget { time_limit: Duration::from_secs(60), node_limit: Some(1), seed: 0 };
        let r = solve_makespan(&inst, &budget, None).unwrap();
        assert!(!r.optimal);
        assert!(is_feasible(&inst, &r.schedule).unwrap());
    }

    #[test]
    fn matches_brute_force_on_small_instances() {
        for seed in 0..30 {
            let inst = JssInstance::random(3, 3, 1, 9, 2000 + seed);
            let bf = brute_force_optimal(&inst).unwrap();
            let r = solve_makespan(&inst, &SolveBudget::exhaustive(seed), None).unwrap();
            assert_eq!(r.objective, bf.makespan(), "seed {seed}");
            assert!(r.optimal);
            assert!(is_feasible(&inst, &r.schedule).unwrap());
        }
    }

    #[test]
    fn brute_force_breaks_ties_lexicographically() {
        let s = brute_force_optimal(&inst_a()).unwrap();
        assert_eq!(s.makespan(), 5);
        assert_eq!(s.starts(), &[vec![0, 2], vec![0, 2]]);
    }

    #[test]
    fn brute_force_rejects_large_instances() {
        let inst = JssInstance::random(4, 3, 1, 9, 1);
        assert!(matches!(brute_force_optimal(&inst), Err(SolveError::TooLarge { tasks: 12, .. })));
    }

    #[test]
    fn proximal_matches_the_worked_example() {
        let a = inst_a();
        let reference = sched(&a, &[&[0, 3], &[0, 3]]);
        let r = solve_proximal(&a, &reference, Some(5), &SolveBudget::exhaustive(0)).unwrap();
        assert_eq!(r.objective, 1);
        assert_eq!(r.schedule.starts(), &[vec![0, 3], vec![0, 2]]);
        assert!(r.optimal);
    }

    #[test]
    fn proximal_returns_feasible_references_at_distance_zero() {
        let a = inst_a();
        let reference = sched(&a, &[&[0, 3], &[0, 3]]); // feasible for A, makespan 6
        let r = solve_proximal(&a, &reference, None, &SolveBudget::exhaustive(0)).unwrap();
        assert_eq!(r.objective, 0);
        assert_eq!(r.schedule, reference);
    }

    #[test]
    fn proximal_detects_an_impossible_cap() {
        let a = inst_a();
        let reference = sched(&a, &[&[0, 3], &[0, 3]]);
        assert!(matches!(
            solve_proximal(&a, &reference, Some(4), &SolveBudget::exhaustive(0)),
            Err(SolveError::CapInfeasible { cap: 4 })
        ));
    }

    /// Independent check: enumerate all start vectors below the cap and keep
    /// the closest instance-feasible one.
    fn enumeration_distance(inst: &JssInstance, reference: &Schedule, cap: i64) -> Option<i64> {
        let t = inst.tasks_per_job();
        let n = inst.jobs() * t;
        let bounds: Vec<i64> = (0..n).map(|v| cap - inst.duration(v / t, v % t)).collect();
        if bounds.iter().any(|&b| b < 0) {
            return None;
        }
        let reference = flatten(inst, reference);
        let mut s = vec![0i64; n];
        let mut best: Option<i64> = None;
        loop {
            let rows: Vec<Vec<i64>> = s.chunks(t).map(|c| c.to_vec()).collect();
            let cand = Schedule::new(rows, inst).unwrap();
            if cand.makespan() <= cap && is_feasible(inst, &cand).unwrap() {
                let d: i64 = s.iter().zip(&reference).map(|(a, b)| (a - b).abs()).sum();
                best = Some(best.map_or(d, |b: i64| b.min(d)));
            }
            let mut v = n;
            loop {
                if v == 0 {
                    return best;
                }
                v -= 1;
                if s[v] < bounds[v] {
                    s[v] += 1;
                    break;
                }
                s[v] = 0;
            }
        }
    }

    #[test]
    fn proximal_distance_matches_enumeration_on_tiny_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..15 {
            let inst = JssInstance::random(2, 2, 1, 3, 3000 + trial);
            let opt = brute_force_optimal(&inst).unwrap();
            let cap = opt.makespan() + rng.random_range(0..2);
            let reference = Schedule::new(
                (0..2).map(|_| (0..2).map(|_| rng.random_range(0..=cap)).collect()).collect(),
                &inst,
            )
            .unwrap();
            let expected = enumeration_distance(&inst, &reference, cap).unwrap();
            let got = solve_proximal(&inst, &reference, Some(cap), &SolveBudget::exhaustive(trial))
                .unwrap();
            assert_eq!(got.objective, expected, "trial {trial}");
            assert!(got.schedule.makespan() <= cap);
            assert!(is_feasible(&inst, &got.schedule).unwrap());
        }
    }
}
