//! The linear kernel shared by the solver and the projection.
//!
//! Once every same-machine pair is ordered, a job-shop instance collapses to
//! a system of difference constraints `s_v - s_u >= w`. Everything here
//! exploits that: earliest starts are a longest path, and the closest
//! feasible schedule in L1 distance is a small linear program whose
//! constraint matrix is totally unimodular, so its vertex optima are integer
//! schedules. The LP is solved by a dense two-phase simplex with Bland's
//! rule; solutions are rounded and re-verified in integer arithmetic.

use crate::instance::{JssInstance, Schedule, ScheduleError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OrderingError {
    #[error("ordering has {got} machine sequences, instance has {expected}")]
    WrongMachineCount { got: usize, expected: usize },
    #[error("machine {machine}: sequence does not list exactly the tasks assigned to it")]
    BadSequence { machine: usize },
    #[error("task ({job}, {task}) out of range")]
    TaskOutOfRange { job: usize, task: usize },
}

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("precedence system is cyclic")]
    Cycle,
    #[error("makespan cap {cap} is below the earliest achievable makespan {earliest}")]
    CapInfeasible { cap: i64, earliest: i64 },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// A total order of the tasks on each machine. `sequences()[m]` lists the
/// `(job, task)` pairs assigned to machine `m` in processing order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineOrdering {
    sequences: Vec<Vec<(usize, usize)>>,
}

impl MachineOrdering {
    pub fn new(sequences: Vec<Vec<(usize, usize)>>, inst: &JssInstance) -> Result<Self, OrderingError> {
        if sequences.len() != inst.machines() {
            return Err(OrderingError::WrongMachineCount {
                got: sequences.len(),
                expected: inst.machines(),
            });
        }
        for (m, seq) in sequences.iter().enumerate() {
            let mut expected: Vec<(usize, usize)> = Vec::new();
            for j in 0..inst.jobs() {
                for t in 0..inst.tasks_per_job() {
                    if inst.machine(j, t) == m {
                        expected.push((j, t));
                    }
                }
            }
            for &(j, t) in seq {
                if j >= inst.jobs() || t >= inst.tasks_per_job() {
                    return Err(OrderingError::TaskOutOfRange { job: j, task: t });
                }
            }
            let mut got = seq.clone();
            got.sort_unstable();
            if got != expected {
                return Err(OrderingError::BadSequence { machine: m });
            }
        }
        Ok(MachineOrdering { sequences })
    }

    /// Tasks on each machine in (job, task) order. Always acyclic: every
    /// precedence edge increases the (job, task) pair lexicographically.
    pub fn lexicographic(inst: &JssInstance) -> Self {
        let mut sequences = vec![Vec::new(); inst.machines()];
        for j in 0..inst.jobs() {
            for t in 0..inst.tasks_per_job() {
                sequences[inst.machine(j, t)].push((j, t));
            }
        }
        MachineOrdering { sequences }
    }

    pub fn sequences(&self) -> &[Vec<(usize, usize)>] {
        &self.sequences
    }
}

/// Earliest-start schedule of an ordering: the componentwise least
/// nonnegative starts satisfying job chains and the machine sequences,
/// computed as a longest path over the precedence graph.
pub fn earliest_start_schedule(
    inst: &JssInstance,
    ordering: &MachineOrdering,
) -> Result<Schedule, KernelError> {
    let sys = DiffSystem::for_ordering(inst, ordering, None);
    let starts = sys.earliest().ok_or(KernelError::Cycle)?;
    Ok(unflatten(inst, &starts))
}

/// The schedule consistent with `ordering` that minimizes L1 distance to
/// `reference`, subject to an optional makespan cap. Among co-optimal
/// schedules, returns the lexicographically smallest start vector in
/// job-major order. Exact and integral.
pub fn l1_proximal_schedule(
    inst: &JssInstance,
    ordering: &MachineOrdering,
    reference: &Schedule,
    makespan_cap: Option<i64>,
) -> Result<(Schedule, i64), KernelError> {
    let sys = DiffSystem::for_ordering(inst, ordering, makespan_cap);
    let earliest = sys.earliest().ok_or(KernelError::Cycle)?;
    if let Some(cap) = makespan_cap {
        let reachable = makespan_of(inst, &earliest);
        if reachable > cap {
            return Err(KernelError::CapInfeasible { cap, earliest: reachable });
        }
    }
    let reference = flatten(inst, reference);
    let (starts, distance) = sys
        .l1_project_lexmin(&reference)
        .expect("cap was checked against the earliest makespan");
    Ok((unflatten(inst, &starts), distance))
}

pub(crate) fn flatten(inst: &JssInstance, sched: &Schedule) -> Vec<i64> {
    let mut out = Vec::with_capacity(inst.jobs() * inst.tasks_per_job());
    for j in 0..inst.jobs() {
        for t in 0..inst.tasks_per_job() {
            out.push(sched.start(j, t));
        }
    }
    out
}

pub(crate) fn unflatten(inst: &JssInstance, starts: &[i64]) -> Schedule {
    let t = inst.tasks_per_job();
    let rows = starts.chunks(t).map(|c| c.to_vec()).collect();
    Schedule::new(rows, inst).expect("kernel starts are nonnegative and well shaped")
}

pub(crate) fn makespan_of(inst: &JssInstance, starts: &[i64]) -> i64 {
    let t = inst.tasks_per_job();
    (0..inst.jobs())
        .map(|j| starts[j * t + (t - 1)] + inst.duration(j, t - 1))
        .max()
        .expect("at least one job")
}

/// Difference constraints `s_v - s_u >= w` over flattened task indices, with
/// implicit lower bounds 0 and optional upper bounds (from a makespan cap).
#[derive(Debug, Clone)]
pub(crate) struct DiffSystem {
    n: usize,
    edges: Vec<(usize, usize, i64)>,
    upper: Vec<Option<i64>>,
}

impl DiffSystem {
    /// Job-chain constraints only.
    pub(crate) fn with_chains(inst: &JssInstance) -> Self {
        let t = inst.tasks_per_job();
        let n = inst.jobs() * t;
        let mut edges = Vec::new();
        for j in 0..inst.jobs() {
            for k in 0..t - 1 {
                edges.push((j * t + k, j * t + k + 1, inst.duration(j, k)));
            }
        }
        DiffSystem { n, edges, upper: vec![None; n] }
    }

    pub(crate) fn for_ordering(
        inst: &JssInstance,
        ordering: &MachineOrdering,
        cap: Option<i64>,
    ) -> Self {
        let mut sys = Self::with_chains(inst);
        let t = inst.tasks_per_job();
        for seq in ordering.sequences() {
            for pair in seq.windows(2) {
                let (j0, t0) = pair[0];
                let (j1, t1) = pair[1];
                sys.push_edge(j0 * t + t0, j1 * t + t1, inst.duration(j0, t0));
            }
        }
        if let Some(cap) = cap {
            sys.cap_makespan(inst, cap);
        }
        sys
    }

    pub(crate) fn push_edge(&mut self, u: usize, v: usize, w: i64) {
        self.edges.push((u, v, w));
    }

    /// Undo the most recent `push_edge` (backtracking in tree searches).
    pub(crate) fn pop_edge(&mut self) {
        self.edges.pop();
    }

    /// Bound each job's last task so no completion exceeds `cap`.
    pub(crate) fn cap_makespan(&mut self, inst: &JssInstance, cap: i64) {
        let t = inst.tasks_per_job();
        for j in 0..inst.jobs() {
            let v = j * t + (t - 1);
            let ub = cap - inst.duration(j, t - 1);
            self.upper[v] = Some(self.upper[v].map_or(ub, |old| old.min(ub)));
        }
    }

    /// Longest-path earliest starts, ignoring upper bounds. `None` on a cycle.
    pub(crate) fn earliest(&self) -> Option<Vec<i64>> {
        let mut indegree = vec![0usize; self.n];
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v, w) in &self.edges {
            adj[u].push((v, w));
            indegree[v] += 1;
        }
        let mut queue: Vec<usize> = (0..self.n).filter(|&v| indegree[v] == 0).collect();
        let mut starts = vec![0i64; self.n];
        let mut seen = 0;
        while let Some(u) = queue.pop() {
            seen += 1;
            for &(v, w) in &adj[u] {
                starts[v] = starts[v].max(starts[u] + w);
                indegree[v] -= 1;
                if indegree[v] == 0 {
                    queue.push(v);
                }
            }
        }
        (seen == self.n).then_some(starts)
    }

    fn holds(&self, s: &[i64]) -> bool {
        s.iter().all(|&x| x >= 0)
            && self.edges.iter().all(|&(u, v, w)| s[v] - s[u] >= w)
            && s.iter().zip(&self.upper).all(|(&x, ub)| ub.is_none_or(|b| x <= b))
    }

    /// Exact integral minimizer of `sum |s_v - reference_v|` over the system,
    /// or `None` if the system is infeasible. Returns some optimal vertex.
    pub(crate) fn l1_project(&self, reference: &[i64]) -> Option<(Vec<i64>, i64)> {
        if self.holds(reference) {
            return Some((reference.to_vec(), 0));
        }
        let lp = self.split_lp(reference, &[]);
        match simplex::solve(&lp) {
            simplex::Outcome::Infeasible => None,
            simplex::Outcome::Unbounded => unreachable!("L1 objective is bounded below"),
            simplex::Outcome::Optimal { x, value } => {
                Some(self.recover(reference, &x, value))
            }
        }
    }

    /// Like `l1_project`, but among co-optimal solutions returns the
    /// lexicographically smallest start vector: each coordinate is minimized
    /// in turn over the optimal face, which stays integral because faces of
    /// an integral polyhedron are integral.
    pub(crate) fn l1_project_lexmin(&self, reference: &[i64]) -> Option<(Vec<i64>, i64)> {
        let (mut s, distance) = self.l1_project(reference)?;
        if distance == 0 {
            return Some((s, 0));
        }
        let mut pins: Vec<(usize, i64)> = Vec::with_capacity(self.n + 1);
        for v in 0..self.n {
            let mut lp = self.split_lp(reference, &pins);
            // stay on the optimal face
            let mut cap_row = Vec::with_capacity(2 * self.n);
            for i in 0..2 * self.n {
                cap_row.push((i, 1.0));
            }
            lp.rows.push(simplex::Row { coeffs: cap_row, cmp: simplex::Cmp::Le, rhs: distance as f64 });
            lp.objective = vec![0.0; 2 * self.n];
            lp.objective[v] = 1.0;
            lp.objective[self.n + v] = -1.0;
            match simplex::solve(&lp) {
                simplex::Outcome::Optimal { value, .. } => {
                    let m_v = reference[v] + round_int(value);
                    pins.push((v, m_v));
                    s[v] = m_v;
                }
                _ => unreachable!("optimal face is nonempty and bounded"),
            }
        }
        assert!(self.holds(&s), "lexicographic refinement left the feasible region");
        let check: i64 = s.iter().zip(reference).map(|(a, b)| (a - b).abs()).sum();
        assert_eq!(check, distance, "lexicographic refinement changed the distance");
        Some((s, distance))
    }

    /// The split LP: `s_v = reference_v + p_v - n_v` with `p, n >= 0`,
    /// minimizing `sum (p + n)`. Structural columns are `p_0.., n_0..`.
    fn split_lp(&self, reference: &[i64], pins: &[(usize, i64)]) -> simplex::Problem {
        assert_eq!(reference.len(), self.n);
        let p = |v: usize| v;
        let q = |v: usize| self.n + v;
        let mut rows = Vec::new();
        for &(u, v, w) in &self.edges {
            rows.push(simplex::Row {
                coeffs: vec![(p(v), 1.0), (q(v), -1.0), (p(u), -1.0), (q(u), 1.0)],
                cmp: simplex::Cmp::Ge,
                rhs: (w - (reference[v] - reference[u])) as f64,
            });
        }
        for v in 0..self.n {
            rows.push(simplex::Row {
                coeffs: vec![(p(v), 1.0), (q(v), -1.0)],
                cmp: simplex::Cmp::Ge,
                rhs: (-reference[v]) as f64,
            });
            if let Some(ub) = self.upper[v] {
                rows.push(simplex::Row {
                    coeffs: vec![(p(v), -1.0), (q(v), 1.0)],
                    cmp: simplex::Cmp::Ge,
                    rhs: (reference[v] - ub) as f64,
                });
            }
        }
        for &(v, m_v) in pins {
            rows.push(simplex::Row {
                coeffs: vec![(p(v), 1.0), (q(v), -1.0)],
                cmp: simplex::Cmp::Eq,
                rhs: (m_v - reference[v]) as f64,
            });
        }
        simplex::Problem { n: 2 * self.n, rows, objective: vec![1.0; 2 * self.n] }
    }

    fn recover(&self, reference: &[i64], x: &[f64], value: f64) -> (Vec<i64>, i64) {
        let s: Vec<i64> = (0..self.n)
            .map(|v| reference[v] + round_int(x[v]) - round_int(x[self.n + v]))
            .collect();
        let distance: i64 = s.iter().zip(reference).map(|(a, b)| (a - b).abs()).sum();
        assert!(self.holds(&s), "LP optimum failed integer feasibility re-check");
        assert_eq!(distance, round_int(value), "LP objective disagrees with its solution");
        (s, distance)
    }
}

fn round_int(x: f64) -> i64 {
    let r = x.round();
    assert!((x - r).abs() < 1e-6, "expected an integral LP value, got {x}");
    r as i64
}

/// A dense two-phase primal simplex, just big enough for the kernel: a few
/// dozen rows, Bland's rule throughout, so it terminates without cycling.
mod simplex {
    const TOL: f64 = 1e-9;
    const FEAS_TOL: f64 = 1e-6;

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Cmp {
        Ge,
        Le,
        Eq,
    }

    #[derive(Debug, Clone)]
    pub struct Row {
        pub coeffs: Vec<(usize, f64)>,
        pub cmp: Cmp,
        pub rhs: f64,
    }

    /// Minimize `objective . x` over `x >= 0` and the rows.
    #[derive(Debug, Clone)]
    pub struct Problem {
        pub n: usize,
        pub rows: Vec<Row>,
        pub objective: Vec<f64>,
    }

    pub enum Outcome {
        Optimal { x: Vec<f64>, value: f64 },
        Infeasible,
        Unbounded,
    }

    struct Tableau {
        cols: usize,
        art_start: usize,
        rows: Vec<Vec<f64>>,
        basis: Vec<usize>,
        live: Vec<bool>,
    }

    pub fn solve(p: &Problem) -> Outcome {
        let m = p.rows.len();
        let n_slack = p.rows.iter().filter(|r| r.cmp != Cmp::Eq).count();
        // Which rows need an artificial: Eq rows always; inequality rows
        // whose slack ends up with coefficient -1 after making rhs >= 0.
        let mut needs_art = Vec::with_capacity(m);
        for r in &p.rows {
            let flip = r.rhs < 0.0;
            let art = match r.cmp {
                Cmp::Eq => true,
                Cmp::Ge => !flip,
                Cmp::Le => flip,
            };
            needs_art.push(art);
        }
        let n_art = needs_art.iter().filter(|&&a| a).count();
        let art_start = p.n + n_slack;
        let cols = art_start + n_art;
        let mut t = Tableau {
            cols,
            art_start,
            rows: vec![vec![0.0; cols + 1]; m],
            basis: vec![usize::MAX; m],
            live: vec![true; m],
        };
        let mut slack = p.n;
        let mut art = art_start;
        for (i, r) in p.rows.iter().enumerate() {
            let row = &mut t.rows[i];
            for &(j, c) in &r.coeffs {
                row[j] += c;
            }
            if r.cmp != Cmp::Eq {
                row[slack] = if r.cmp == Cmp::Ge { -1.0 } else { 1.0 };
            }
            row[cols] = r.rhs;
            if r.rhs < 0.0 {
                for x in row.iter_mut() {
                    *x = -*x;
                }
            }
            if needs_art[i] {
                row[art] = 1.0;
                t.basis[i] = art;
                art += 1;
            } else {
                t.basis[i] = slack;
            }
            if r.cmp != Cmp::Eq {
                slack += 1;
            }
        }

        // Phase 1: minimize the artificial sum.
        if n_art > 0 {
            let mut cost = vec![0.0; cols + 1];
            for j in art_start..cols {
                cost[j] = 1.0;
            }
            for i in 0..m {
                if t.basis[i] >= art_start {
                    for j in 0..=cols {
                        cost[j] -= t.rows[i][j];
                    }
                }
            }
            if !iterate(&mut t, &mut cost, art_start) {
                unreachable!("phase 1 objective is bounded below by zero");
            }
            let infeas: f64 = (0..m)
                .filter(|&i| t.live[i] && t.basis[i] >= art_start)
                .map(|i| t.rows[i][cols])
                .sum();
            if infeas > FEAS_TOL {
                return Outcome::Infeasible;
            }
            // Drive surviving artificials out of the basis.
            for i in 0..m {
                if !t.live[i] || t.basis[i] < art_start {
                    continue;
                }
                match (0..art_start).find(|&j| t.rows[i][j].abs() > TOL) {
                    Some(j) => pivot(&mut t, &mut cost, i, j),
                    None => t.live[i] = false, // redundant constraint
                }
            }
        }

        // Phase 2: the real objective, artificial columns frozen.
        let mut cost = vec![0.0; cols + 1];
        cost[..p.n].copy_from_slice(&p.objective);
        for i in 0..m {
            if t.live[i] && t.basis[i] < p.n {
                let c = p.objective[t.basis[i]];
                if c != 0.0 {
                    for j in 0..=cols {
                        cost[j] -= c * t.rows[i][j];
                    }
                }
            }
        }
        let art_start = t.art_start;
        if !iterate(&mut t, &mut cost, art_start) {
            return Outcome::Unbounded;
        }
        let mut x = vec![0.0; p.n];
        for i in 0..m {
            if t.live[i] && t.basis[i] < p.n {
                x[t.basis[i]] = t.rows[i][cols];
            }
        }
        let value = x.iter().zip(&p.objective).map(|(a, c)| a * c).sum();
        Outcome::Optimal { x, value }
    }

    /// Bland's rule pivoting until optimal. Columns at or past `col_limit`
    /// never enter. Returns false if some column is unbounded.
    fn iterate(t: &mut Tableau, cost: &mut [f64], col_limit: usize) -> bool {
        let limit = 50_000 + 200 * (t.rows.len() + t.cols);
        for _ in 0..limit {
            let Some(e) = (0..col_limit).find(|&j| cost[j] < -TOL) else {
                return true;
            };
            let mut leave: Option<(f64, usize)> = None;
            for i in 0..t.rows.len() {
                if !t.live[i] || t.rows[i][e] <= TOL {
                    continue;
                }
                let ratio = t.rows[i][t.cols] / t.rows[i][e];
                let better = match leave {
                    None => true,
                    Some((r, li)) => {
                        ratio < r - TOL * (1.0 + r.abs())
                            || ((ratio - r).abs() <= TOL * (1.0 + r.abs())
                                && t.basis[i] < t.basis[li])
                    }
                };
                if better {
                    leave = Some((ratio, i));
                }
            }
            let Some((_, r)) = leave else {
                return false;
            };
            pivot(t, cost, r, e);
        }
        panic!("simplex pivot limit exceeded");
    }

    fn pivot(t: &mut Tableau, cost: &mut [f64], r: usize, e: usize) {
        let scale = t.rows[r][e];
        for x in t.rows[r].iter_mut() {
            *x /= scale;
        }
        for i in 0..t.rows.len() {
            if i == r || !t.live[i] {
                continue;
            }
            let f = t.rows[i][e];
            if f.abs() > 0.0 {
                for j in 0..=t.cols {
                    let d = t.rows[r][j];
                    if d != 0.0 {
                        t.rows[i][j] -= f * d;
                    }
                }
            }
        }
        let f = cost[e];
        if f.abs() > 0.0 {
            for j in 0..=t.cols {
                let d = t.rows[r][j];
                if d != 0.0 {
                    cost[j] -= f * d;
                }
            }
        }
        t.basis[r] = e;
    }
}
