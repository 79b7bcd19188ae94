//! The instance text format, schedules, and violation degrees.

use schedlearn::instance::{
    is_feasible, parse_instance, serialize_instance, violation_degrees, JssInstance, Schedule,
};

fn main() -> anyhow::Result<()> {
    let inst = JssInstance::random(2, 2, 1, 6, 42);
    let text = serialize_instance(&inst);
    println!("a random 2x2 instance, in its canonical text form:\n\n{text}");
    assert_eq!(parse_instance(&text)?, inst);

    // A schedule is one start time per task. This one runs everything at
    // zero, which cannot be feasible: second tasks start before their
    // predecessors finish, and same-machine tasks overlap.
    let naive = Schedule::new(vec![vec![0, 0], vec![0, 0]], &inst)?;
    let report = violation_degrees(&inst, &naive)?;
    println!("all-zero schedule violations:");
    println!("  precedence degrees per job: {:?}", report.precedence);
    for entry in &report.overlap {
        println!(
            "  machine {}: tasks {:?} and {:?} overlap by {}",
            entry.machine, entry.first, entry.second, entry.amount
        );
    }
    println!("  total {}", report.total);
    assert!(!is_feasible(&inst, &naive)?);

    // Running each job's tasks back to back on a shared timeline is crude
    // but feasible for this instance, and the violation report says so.
    let mut clock = 0;
    let mut rows = Vec::new();
    for j in 0..inst.jobs() {
        let mut row = Vec::new();
        for t in 0..inst.tasks_per_job() {
            row.push(clock);
            clock += inst.duration(j, t);
        }
        rows.push(row);
    }
    let serial = Schedule::new(rows, &inst)?;
    assert!(is_feasible(&inst, &serial)?);
    println!(
        "serial schedule {:?} is feasible with makespan {}",
        serial.starts(),
        serial.makespan()
    );
    Ok(())
}
