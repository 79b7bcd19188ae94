//! Piecewise-linear capacity results, made concrete.
//!
//! Three separate questions about continuous piecewise-linear (pwl) functions
//! and the ReLU networks that produce them: how large a network must be to
//! realize a given piece count, how closely a coarser pwl function can track
//! a finer one, and how large a single-layer network suffices to approximate
//! any Lipschitz function on the cube.

use schedlearn::pwl::{
    approximation_bound, lipschitz_capacity, random_admissible_pair, relu_capacity,
    slope_total_variation, PwlFunction,
};

fn main() -> anyhow::Result<()> {
    println!("minimum network size for p pieces at depth k + 1, and the");
    println!("converse (most pieces a network of exactly that size can make):");
    for (p, k) in [(4u64, 1u64), (16, 1), (16, 2), (256, 4)] {
        let (min_size, max_pieces) = relu_capacity(p, k);
        println!(
            "  p = {p:>3}, k = {k}: size > {min_size:.2}, and max_pieces({:.0}) = {:.0}",
            min_size.ceil(),
            max_pieces(min_size.ceil())
        );
    }

    // Approximation: merging pieces of f costs at most
    // max_width^2 / 2 * (total slope variation of f) in L1 distance.
    let f = PwlFunction::new(vec![0.0, 1.0, 2.0], vec![0.0, 0.0, 1.0])?;
    let g = PwlFunction::new(vec![0.0, 2.0], vec![0.0, 0.0])?;
    let (bound, actual) = approximation_bound(&f, &g)?;
    println!("\nhinge vs flat line: bound {bound}, actual L1 distance {actual} (tight)");

    let (fine, coarse) = random_admissible_pair(8, 4);
    let (bound, actual) = approximation_bound(&fine, &coarse)?;
    println!(
        "random pair: {} -> {} pieces, slope variation {:.2}, bound {:.4}, actual {:.4}",
        fine.pieces(),
        coarse.pieces(),
        slope_total_variation(&fine),
        bound,
        actual
    );

    // Sufficiency: a single hidden layer of this size approximates every
    // L-Lipschitz function on [0,1]^n within eps. The count is a binomial
    // coefficient and grows fast with dimension.
    println!("\nsingle-layer size sufficient for L-Lipschitz functions on [0,1]^n:");
    for (n, l, eps) in [(1, 1.0, 0.1), (2, 1.0, 0.1), (5, 2.0, 0.05)] {
        println!("  n = {n}, L = {l}, eps = {eps}: {}", lipschitz_capacity(n, l, eps)?);
    }
    Ok(())
}
