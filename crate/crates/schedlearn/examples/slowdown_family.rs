//! A slowdown family: one base instance, one machine getting gradually slower.
//!
//! Every duration on the chosen machine is scaled by 1 + max_increase * i/steps,
//! so durations grow monotonically along the family and any schedule feasible
//! for instance i+1 is feasible for instance i. That monotonicity is what lets
//! the sequential generator hot-start each solve from its successor's solution.

use schedlearn::instance::{JssInstance, PerturbationSpec};
use schedlearn::instance::perturb_family;

fn main() -> anyhow::Result<()> {
    let base = JssInstance::random(3, 3, 1, 9, 7);
    let spec = PerturbationSpec { machine: 1, steps: 6, max_increase: 0.5, scale: 10 };
    let family = perturb_family(&base, &spec)?;

    println!("machine 1 durations across a 6-step slowdown (scale 10):");
    for (i, inst) in family.iter().enumerate() {
        let mut on_machine = Vec::new();
        for j in 0..inst.jobs() {
            for t in 0..inst.tasks_per_job() {
                if inst.machine(j, t) == 1 {
                    on_machine.push(inst.duration(j, t));
                }
            }
        }
        println!("  step {i}: {on_machine:?}");
    }

    // Durations never decrease from one instance to the next.
    for pair in family.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        for j in 0..a.jobs() {
            for t in 0..a.tasks_per_job() {
                assert!(b.duration(j, t) >= a.duration(j, t));
            }
        }
    }
    println!("monotone: every duration is nondecreasing along the family");
    Ok(())
}
