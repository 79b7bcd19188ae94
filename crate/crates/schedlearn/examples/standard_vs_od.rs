//! Both dataset generators on one family, measured side by side.
//!
//! Standard solves every instance from scratch; the sequential (od) generator
//! walks the family backwards, re-solving each instance for the schedule
//! closest to its successor's. Entry for entry the makespans are identical,
//! but the standard trajectory jumps between co-optimal corners while the
//! sequential one barely moves.

use schedlearn::datagen::{
    generate_od, generate_standard, lipschitz_constant, total_variation, Norm,
};
use schedlearn::instance::{perturb_family, JssInstance, PerturbationSpec};
use schedlearn::solver::SolveBudget;

fn main() -> anyhow::Result<()> {
    let base = JssInstance::random(4, 3, 1, 9, 9001);
    let spec = PerturbationSpec { machine: 1, steps: 20, max_increase: 0.5, scale: 100 };
    let family = perturb_family(&base, &spec)?;
    let budget = SolveBudget::exhaustive(1);

    let std_ds = generate_standard(&family, &budget)?;
    let od_ds = generate_od(&family, &budget)?;

    for (s, o) in std_ds.entries().iter().zip(od_ds.entries()) {
        assert_eq!(s.objective, o.objective, "both datasets are co-optimal");
    }

    println!("per-step L1 jump between consecutive solutions:");
    println!("{:>6} {:>10} {:>10}", "step", "standard", "od");
    let jumps = |ds: &schedlearn::Dataset| -> Vec<i64> {
        ds.schedules().windows(2).map(|w| w[0].l1_distance(&w[1])).collect()
    };
    for (i, (s, o)) in jumps(&std_ds).iter().zip(jumps(&od_ds)).enumerate() {
        println!("{:>6} {:>10} {:>10}", i + 1, s, o);
    }

    let tv_std = total_variation(&std_ds, Norm::L1);
    let tv_od = total_variation(&od_ds, Norm::L1);
    println!("\ntotal variation: standard {tv_std:.1}, od {tv_od:.1}");
    println!(
        "lipschitz constant: standard {:.3}, od {:.3}",
        lipschitz_constant(&std_ds)?,
        lipschitz_constant(&od_ds)?
    );
    Ok(())
}
