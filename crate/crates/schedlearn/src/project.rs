//! From raw predicted start times to feasible schedules.
//!
//! A prediction is just JT numbers; turning it into a schedule means reading
//! off a plausible per-machine order and then letting the earliest-start
//! kernel make it concrete. Sorting each machine's tasks by predicted start
//! usually gives an acyclic ordering straight away. When it does not (the
//! predicted machine order can contradict the job chains), the repair pass
//! re-adds the pairwise precedences one at a time, cheapest predicted start
//! first, skipping any edge the partial system already implies in reverse;
//! every same-machine pair ends up ordered one way or the other, so the
//! resulting earliest-start schedule is always feasible.

use crate::instance::{JssInstance, Schedule};
use crate::lp::{earliest_start_schedule, unflatten, DiffSystem, KernelError, MachineOrdering};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("expected {expected} predicted starts, got {got}")]
    Shape { expected: usize, got: usize },
}

fn check_shape(inst: &JssInstance, predicted: &[f64]) -> Result<(), ProjectError> {
    let expected = inst.jobs() * inst.tasks_per_job();
    if predicted.len() != expected {
        return Err(ProjectError::Shape { expected, got: predicted.len() });
    }
    Ok(())
}

/// Sort each machine's tasks by predicted start, ties broken zero-duration
/// first, then by (job, task). The result can be cyclic against the job
/// chains; `project_feasible` handles that, `earliest_start_schedule`
/// reports it.
///
/// Zero-duration tasks sort first among ties because in an earliest-start
/// schedule a group of tasks sharing a start on one machine is always some
/// zero-duration tasks followed by at most one positive one; reconstructing
/// that shape from the bare start times is what keeps projection a fixed
/// point when the prediction is itself a projected schedule.
pub fn ordering_from_prediction(
    inst: &JssInstance,
    predicted: &[f64],
) -> Result<MachineOrdering, ProjectError> {
    check_shape(inst, predicted)?;
    let t = inst.tasks_per_job();
    let mut sequences: Vec<Vec<(usize, usize)>> = vec![Vec::new(); inst.machines()];
    for j in 0..inst.jobs() {
        for k in 0..t {
            sequences[inst.machine(j, k)].push((j, k));
        }
    }
    for seq in &mut sequences {
        seq.sort_by(|&(j1, t1), &(j2, t2)| {
            predicted[j1 * t + t1]
                .total_cmp(&predicted[j2 * t + t2])
                .then((inst.duration(j1, t1) > 0).cmp(&(inst.duration(j2, t2) > 0)))
                .then(j1.cmp(&j2))
                .then(t1.cmp(&t2))
        });
    }
    Ok(MachineOrdering::new(sequences, inst).expect("sequences partition the tasks"))
}

/// Map predicted starts to a feasible schedule: order each machine by
/// predicted start and take the earliest-start schedule of that ordering,
/// repairing the order pairwise if it contradicts the job chains. Integral
/// output, and a fixed point: projecting a projection changes nothing.
pub fn project_feasible(inst: &JssInstance, predicted: &[f64]) -> Result<Schedule, ProjectError> {
    let ordering = ordering_from_prediction(inst, predicted)?;
    let mut sched = match earliest_start_schedule(inst, &ordering) {
        Ok(sched) => sched,
        Err(KernelError::Cycle) => repair(inst, predicted),
        Err(e) => unreachable!("ordering is validated and uncapped: {e}"),
    };
    // Zero-duration tasks can tie with their machine neighbors, and tied
    // starts do not remember which order produced them, so sorting them
    // again may read off a different ordering whose earliest-start schedule
    // is pointwise lower. A feasible schedule always satisfies the ordering
    // derived from its own starts (that is what the zero-duration-first tie
    // break guarantees), so re-projecting can only decrease starts; settling
    // makes the result a true fixed point. Without zero durations the first
    // pass already is one and the loop checks once.
    loop {
        let next = earliest_start_schedule(inst, &ordering_from_prediction(inst, &sched.flat())?)
            .expect("orderings read off a feasible schedule are acyclic");
        if next == sched {
            return Ok(sched);
        }
        sched = next;
    }
}

/// Greedy pairwise repair. Candidate edges point from the lower predicted
/// start to the higher (ties by job, task) and are tried globally in that
/// order; an edge whose reverse is already implied gets skipped, which still
/// leaves the pair separated because every path out of a task starts with
/// its full duration.
fn repair(inst: &JssInstance, predicted: &[f64]) -> Schedule {
    let t = inst.tasks_per_job();
    let key = |j: usize, k: usize| (predicted[j * t + k], j, k);
    let mut candidates: Vec<(usize, usize, i64)> = Vec::new();
    let mut order: Vec<(f64, f64, usize)> = Vec::new();
    for (m, (j1, t1), (j2, t2)) in inst.same_machine_pairs() {
        let (a, b) = if key(j1, t1) <= key(j2, t2) { ((j1, t1), (j2, t2)) } else { ((j2, t2), (j1, t1)) };
        candidates.push((a.0 * t + a.1, b.0 * t + b.1, inst.duration(a.0, a.1)));
        order.push((predicted[a.0 * t + a.1], predicted[b.0 * t + b.1], m));
    }
    let mut idx: Vec<usize> = (0..candidates.len()).collect();
    idx.sort_by(|&x, &y| {
        order[x].0.total_cmp(&order[y].0).then(order[x].1.total_cmp(&order[y].1)).then(order[x].2.cmp(&order[y].2))
    });
    let mut sys = DiffSystem::with_chains(inst);
    for i in idx {
        let (u, v, w) = candidates[i];
        sys.push_edge(u, v, w);
        if sys.earliest().is_none() {
            sys.pop_edge();
        }
    }
    let starts = sys.earliest().expect("repair never leaves a cycle in place");
    unflatten(inst, &starts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{is_feasible, parse_instance};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn inst_a() -> JssInstance {
        parse_instance("2 2\n0 2 1 2\n1 1 0 3\n").unwrap()
    }

    #[test]
    fn infeasible_prediction_snaps_to_the_worked_schedule() {
        let a = inst_a();
        let s = project_feasible(&a, &[0.0, 1.0, 0.0, 2.0]).unwrap();
        assert_eq!(s.starts(), &[vec![0, 2], vec![0, 2]]);
        assert_eq!(s.makespan(), 5);
    }

    #[test]
    fn all_zero_prediction_falls_back_to_job_task_order() {
        let a = inst_a();
        let ordering = ordering_from_prediction(&a, &[0.0; 4]).unwrap();
        assert_eq!(ordering.sequences()[0], vec![(0, 0), (1, 1)]);
        assert_eq!(ordering.sequences()[1], vec![(0, 1), (1, 0)]);
        let s = project_feasible(&a, &[0.0; 4]).unwrap();
        assert_eq!(s.starts(), &[vec![0, 2], vec![4, 5]]);
        assert_eq!(s.makespan(), 8);
    }

    #[test]
    fn sorting_reads_off_the_predicted_machine_order() {
        let a = inst_a();
        let ordering = ordering_from_prediction(&a, &[0.0, 1.0, 0.0, 2.0]).unwrap();
        assert_eq!(ordering.sequences()[0], vec![(0, 0), (1, 1)]);
        assert_eq!(ordering.sequences()[1], vec![(1, 0), (0, 1)]);
    }

    #[test]
    fn contradictory_predictions_are_repaired() {
        let a = inst_a();
        let predicted = [10.0, 0.0, 10.0, 0.0];
        let ordering = ordering_from_prediction(&a, &predicted).unwrap();
        assert!(matches!(earliest_start_schedule(&a, &ordering), Err(KernelError::Cycle)));
        let s = project_feasible(&a, &predicted).unwrap();
        assert_eq!(s.starts(), &[vec![4, 6], vec![0, 1]]);
        assert!(is_feasible(&a, &s).unwrap());
    }

    #[test]
    fn projection_is_feasible_integral_and_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for trial in 0..25 {
            let inst = JssInstance::random(3, 3, 1, 9, 5000 + trial);
            let predicted: Vec<f64> = (0..9).map(|_| rng.random_range(0.0..30.0)).collect();
            let s = project_feasible(&inst, &predicted).unwrap();
            assert!(is_feasible(&inst, &s).unwrap(), "trial {trial}");
            let again = project_feasible(&inst, &s.flat()).unwrap();
            assert_eq!(s, again, "trial {trial}");
        }
    }

    #[test]
    fn zero_duration_ties_stay_idempotent() {
        // Three tasks on one machine, the middle job's with positive
        // duration. The prediction puts both zero-duration tasks at 0, so
        // everything projects to start 0, and re-projecting those tied
        // starts must not slip the positive task between the zeros.
        let inst = JssInstance::new(vec![vec![0], vec![1], vec![0]], vec![vec![0]; 3]).unwrap();
        let s = project_feasible(&inst, &[0.0, 0.5, 0.0]).unwrap();
        assert_eq!(s.starts(), &[vec![0], vec![0], vec![0]]);
        let again = project_feasible(&inst, &s.flat()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn repaired_zero_duration_ties_settle_to_a_fixed_point() {
        // A cyclic prediction forces the repair path, and the repaired order
        // runs a job's last zero-duration task ahead of two other zeros on
        // its machine, tying all three. Sorted again, those ties come back
        // in a different order with a strictly earlier schedule, so the
        // projection has to settle before returning.
        let inst = JssInstance::new(
            vec![vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 0]],
            vec![vec![0, 2, 1], vec![1, 0, 2], vec![2, 0, 1]],
        )
        .unwrap();
        let pred = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -66.0];
        let s = project_feasible(&inst, &pred).unwrap();
        assert!(is_feasible(&inst, &s).unwrap());
        assert_eq!(project_feasible(&inst, &s.flat()).unwrap(), s);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        assert!(matches!(
            project_feasible(&inst_a(), &[0.0; 3]),
            Err(ProjectError::Shape { expected: 4, got: 3 })
        ));
    }
}
