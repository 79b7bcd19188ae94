//! Turning arbitrary predicted start times into feasible schedules.
//!
//! A trained model outputs real-valued starts that almost never satisfy the
//! precedence and machine constraints exactly. Projection reads a task
//! ordering off the predictions, then assigns each task the earliest start
//! consistent with that ordering. The result is integral, feasible, and a
//! fixed point: projecting it again changes nothing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use schedlearn::instance::{violation_degrees, JssInstance};
use schedlearn::project::project_feasible;

fn main() -> anyhow::Result<()> {
    let inst = JssInstance::random(3, 3, 1, 9, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noisy: Vec<f64> = (0..9).map(|_| rng.random_range(-5.0..40.0)).collect();

    let sched = project_feasible(&inst, &noisy)?;
    println!("noisy predictions: {noisy:.1?}");
    println!("projected starts:  {:?}", sched.starts());
    println!("violation total after projection: {}", violation_degrees(&inst, &sched)?.total);
    println!("projected makespan: {}", sched.makespan());

    let again = project_feasible(&inst, &sched.flat())?;
    assert_eq!(again, sched);
    println!("projection is idempotent");
    Ok(())
}
