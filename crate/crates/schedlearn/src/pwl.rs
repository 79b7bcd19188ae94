//! Piecewise linear approximation theory: capacity formulas for ReLU
//! networks, a slope-variation bound on the L1 error of approximating one
//! PWL function by a coarser one, and helpers that view a dataset's
//! solution trajectory as a family of PWL functions.
//!
//! The central inequality: if `g` approximates `f` such that every piece of
//! `g` covers at most two pieces of `f` and matches `f`'s slope and value
//! somewhere on each piece, then
//!
//! ```text
//! ||f - g||_1  <=  1/2 * h_max^2 * sum_k |L_{k+1} - L_k|
//! ```
//!
//! where `h_max` is the widest piece of `f` and the sum is the total
//! variation of `f`'s slopes. Smooth solution trajectories (small slope
//! variation) therefore admit small PWL approximants, which in turn need
//! fewer ReLU pieces to represent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::datagen::Dataset;

#[derive(Debug, Error)]
pub enum PwlError {
    #[error("invalid piecewise function: {0}")]
    Shape(String),
    #[error("approximant violates the construction: {0}")]
    Inadmissible(String),
    #[error("binomial overflow: capacity exceeds u128")]
    Overflow,
    #[error("bad argument: {0}")]
    BadArgument(String),
}

/// A continuous piecewise linear function on `[x_0, x_p]`, stored as
/// ascending breakpoints with their values and interpolated in between.
/// Continuity is built in: there is one value per breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PwlFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self, PwlError> {
        if breakpoints.len() < 2 {
            return Err(PwlError::Shape("need at least two breakpoints".into()));
        }
        if breakpoints.len() != values.len() {
            return Err(PwlError::Shape(format!(
                "{} breakpoints but {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(PwlError::Shape("non-finite coordinate".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PwlError::Shape("breakpoints must be strictly ascending".into()));
        }
        Ok(PwlFunction { breakpoints, values })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pieces(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    /// Slope of piece `k` (0-based).
    pub fn slope(&self, k: usize) -> f64 {
        (self.values[k + 1] - self.values[k]) / (self.breakpoints[k + 1] - self.breakpoints[k])
    }

    /// Width of piece `k`.
    pub fn width(&self, k: usize) -> f64 {
        self.breakpoints[k + 1] - self.breakpoints[k]
    }

    pub fn max_width(&self) -> f64 {
        (0..self.pieces()).map(|k| self.width(k)).fold(0.0, f64::max)
    }

    /// Evaluate at `x`, which must lie within the domain.
    pub fn eval(&self, x: f64) -> f64 {
        let k = match self.breakpoints.binary_search_by(|b| b.total_cmp(&x)) {
            Ok(i) => return self.values[i],
            Err(0) => 0,
            Err(i) if i > self.pieces() => self.pieces() - 1,
            Err(i) => i - 1,
        };
        self.values[k] + self.slope(k) * (x - self.breakpoints[k])
    }
}

/// Total variation of the slopes: `sum_k |L_{k+1} - L_k|` over interior
/// breakpoints. Zero for a single piece.
pub fn slope_total_variation(f: &PwlFunction) -> f64 {
    (1..f.pieces()).map(|k| (f.slope(k) - f.slope(k - 1)).abs()).sum()
}

/// Relative tolerance for slope and value coincidence checks. Constructed
/// approximants match exactly up to f64 rounding in the line intersections.
const COINCIDE_TOL: f64 = 1e-9;

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= COINCIDE_TOL * (1.0 + scale)
}

/// Verify that `g` is an admissible approximant of `f`: same domain, no
/// more pieces, every piece of `g` overlaps at most two pieces of `f`, and
/// on each of its pieces `g` coincides with `f` in slope and value at some
/// point. Returns the reason when a check fails.
fn check_admissible(f: &PwlFunction, g: &PwlFunction) -> Result<(), PwlError> {
    if f.domain() != g.domain() {
        return Err(PwlError::Inadmissible("domains differ".into()));
    }
    if g.pieces() > f.pieces() {
        return Err(PwlError::Inadmissible(format!(
            "approximant has {} pieces, target only {}",
            g.pieces(),
            f.pieces()
        )));
    }
    let scale = f
        .values
        .iter()
        .chain(&g.values)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    for k in 0..g.pieces() {
        let (a, b) = (g.breakpoints[k], g.breakpoints[k + 1]);
        let mut overlaps = 0;
        let mut coincides = false;
        for j in 0..f.pieces() {
            let lo = f.breakpoints[j].max(a);
            let hi = f.breakpoints[j + 1].min(b);
            if lo >= hi {
                continue;
            }
            overlaps += 1;
            let mid = 0.5 * (lo + hi);
            if close(f.slope(j), g.slope(k), f.slope(j).abs())
                && close(f.eval(mid), g.eval(mid), scale)
            {
                coincides = true;
            }
        }
        if overlaps > 2 {
            return Err(PwlError::Inadmissible(format!(
                "piece {k} of the approximant overlaps {overlaps} pieces"
            )));
        }
        if !coincides {
            return Err(PwlError::Inadmissible(format!(
                "piece {k} of the approximant never matches slope and value"
            )));
        }
    }
    Ok(())
}

/// Exact `int |f - g|` over the shared domain: the difference is affine
/// between consecutive points of the merged breakpoint set, so each segment
/// integrates in closed form, splitting at the root when the sign changes.
fn l1_distance(f: &PwlFunction, g: &PwlFunction) -> f64 {
    let mut cuts: Vec<f64> = f
        .breakpoints
        .iter()
        .chain(&g.breakpoints)
        .copied()
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let da = f.eval(a) - g.eval(a);
        let db = f.eval(b) - g.eval(b);
        total += if da * db >= 0.0 {
            0.5 * (da.abs() + db.abs()) * (b - a)
        } else {
            // one sign change: split the trapezoid at the root
            let r = a + (b - a) * da / (da - db);
            0.5 * (da.abs() * (r - a) + db.abs() * (b - r))
        };
    }
    total
}

/// The slope-variation bound and the exact L1 error of approximating `f_p`
/// by `f_approx`. The approximant must satisfy the construction checked by
/// admissibility (see module docs); the returned pair satisfies
/// `actual <= bound`.
pub fn approximation_bound(
    f_p: &PwlFunction,
    f_approx: &PwlFunction,
) -> Result<(f64, f64), PwlError> {
    check_admissible(f_p, f_approx)?;
    let bound = 0.5 * f_p.max_width().powi(2) * slope_total_variation(f_p);
    Ok((bound, l1_distance(f_p, f_approx)))
}

/// Build a random target with at most `max_pieces` pieces together with an
/// admissible coarser approximant. The approximant deletes well-separated
/// interior pieces of the target, extending the two neighbouring lines to
/// their intersection whenever it falls inside the deleted piece; when no
/// piece admits such an intersection the approximant is the target itself.
pub fn random_admissible_pair(max_pieces: usize, seed: u64) -> (PwlFunction, PwlFunction) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pieces = rng.random_range(2..=max_pieces.max(2));
    let mut breakpoints = vec![0.0];
    for _ in 0..pieces {
        let last = *breakpoints.last().unwrap();
        breakpoints.push(last + rng.random_range(0.2..1.5));
    }
    let values: Vec<f64> = (0..=pieces).map(|_| rng.random_range(-2.0..2.0)).collect();
    let f = PwlFunction::new(breakpoints, values).unwrap();

    // candidate deletions: interior pieces whose neighbouring lines meet
    // strictly inside the piece, kept at least three apart so the extended
    // pieces never chain across a shared neighbour
    let mut chosen: Vec<(usize, f64)> = Vec::new();
    for j in 1..f.pieces().saturating_sub(1) {
        if let Some((last, _)) = chosen.last() {
            if j - last < 3 {
                continue;
            }
        }
        let (a, c) = (f.slope(j - 1), f.slope(j + 1));
        if a == c {
            continue;
        }
        let (xj, xj1) = (f.breakpoints[j], f.breakpoints[j + 1]);
        let x = (f.values[j + 1] - f.values[j] + a * xj - c * xj1) / (a - c);
        let margin = 1e-6 * (xj1 - xj);
        if x > xj + margin && x < xj1 - margin && rng.random_bool(0.7) {
            chosen.push((j, x));
        }
    }

    let mut bps = f.breakpoints.clone();
    let mut vals = f.values.clone();
    for &(j, x) in chosen.iter().rev() {
        let v = f.values[j] + f.slope(j - 1) * (x - f.breakpoints[j]);
        bps.splice(j..=j + 1, [x]);
        vals.splice(j..=j + 1, [v]);
    }
    let g = PwlFunction::new(bps, vals).unwrap();
    (f, g)
}

/// Capacity of ReLU networks for a PWL target with `p` pieces at depth
/// `k + 1`: the minimum size needed to represent it, and a function giving
/// the most pieces a size-`s` network of that depth can produce.
pub fn relu_capacity(p: u64, k: u64) -> (f64, impl Fn(f64) -> f64) {
    assert!(p >= 1 && k >= 1, "need p >= 1 and k >= 1");
    let kf = k as f64;
    let min_size = 0.5 * kf * (p as f64).powf(1.0 / kf) - 1.0;
    let max_pieces = move |s: f64| (2.0 * s / kf).powf(kf);
    (min_size, max_pieces)
}

fn binomial(top: u128, k: u128) -> Option<u128> {
    let k = k.min(top - k);
    let mut c: u128 = 1;
    for i in 1..=k {
        // c * (top - k + i) / i is exactly C(top - k + i, i) at each step
        c = c.checked_mul(top - k + i)? / i;
    }
    Some(c)
}

/// Size sufficient for a single-layer network to approximate any
/// `L`-Lipschitz function on the `n`-cube within `eps` in sup norm:
/// `C(n + ceil(3L/eps), n)`. The ratio `3L/eps` is rounded up so the
/// binomial gets an integer argument.
pub fn lipschitz_capacity(n: u64, lipschitz: f64, eps: f64) -> Result<u128, PwlError> {
    if n < 1 {
        return Err(PwlError::BadArgument("input dimension must be at least 1".into()));
    }
    if !(lipschitz >= 0.0) {
        return Err(PwlError::BadArgument("Lipschitz constant must be nonnegative".into()));
    }
    if !(eps > 0.0) {
        return Err(PwlError::BadArgument("target error must be positive".into()));
    }
    let ratio = 3.0 * lipschitz / eps;
    if !ratio.is_finite() || ratio > 1e30 {
        return Err(PwlError::Overflow);
    }
    let m = ratio.ceil() as u128;
    binomial(m + n as u128, n as u128).ok_or(PwlError::Overflow)
}

/// One PWL function per start-time coordinate, interpolating the dataset's
/// solutions over the family index `1..=n`. Smooth datasets give
/// trajectories with small slope variation.
pub fn solution_trajectories(ds: &Dataset) -> Result<Vec<PwlFunction>, PwlError> {
    if ds.len() < 2 {
        return Err(PwlError::BadArgument("dataset needs at least two entries".into()));
    }
    let xs: Vec<f64> = (1..=ds.len()).map(|i| i as f64).collect();
    let entries = ds.entries();
    let (jobs, tasks) = (entries[0].instance.jobs(), entries[0].instance.tasks_per_job());
    let mut out = Vec::with_capacity(jobs * tasks);
    for j in 0..jobs {
        for t in 0..tasks {
            let values: Vec<f64> = entries.iter().map(|e| e.solution[j][t] as f64).collect();
            out.push(PwlFunction::new(xs.clone(), values)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_od, generate_standard};
    use crate::instance::{perturb_family, JssInstance, PerturbationSpec};
    use crate::solver::SolveBudget;

    fn pwl(bps: &[f64], vals: &[f64]) -> PwlFunction {
        PwlFunction::new(bps.to_vec(), vals.to_vec()).unwrap()
    }

    /// Independent check of the closed-form integral: dense trapezoid
    /// sampling of |f - g| on each merged segment.
    fn numeric_l1(f: &PwlFunction, g: &PwlFunction) -> f64 {
        let (lo, hi) = f.domain();
        let n = 200_000;
        let h = (hi - lo) / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            let a = lo + i as f64 * h;
            let b = a + h;
            total += 0.5 * ((f.eval(a) - g.eval(a)).abs() + (f.eval(b) - g.eval(b)).abs()) * h;
        }
        total
    }

    #[test]
    fn slope_variation_matches_hand_counts() {
        assert_eq!(slope_total_variation(&pwl(&[0.0, 1.0], &[0.0, 2.0])), 0.0);
        assert_eq!(slope_total_variation(&pwl(&[0.0, 1.0, 2.0], &[0.0, 0.0, 1.0])), 1.0);
        let zigzag = pwl(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(slope_total_variation(&zigzag), 4.0);
    }

    #[test]
    fn the_flat_hinge_example_is_tight() {
        let f = pwl(&[0.0, 1.0, 2.0], &[0.0, 0.0, 1.0]);
        let g = pwl(&[0.0, 2.0], &[0.0, 0.0]);
        let (bound, actual) = approximation_bound(&f, &g).unwrap();
        assert_eq!(bound, 0.5);
        assert_eq!(actual, 0.5);
    }

    #[test]
    fn a_function_approximates_itself_for_free() {
        let f = pwl(&[0.0, 1.0, 2.5, 3.0], &[1.0, -1.0, 0.5, 0.5]);
        let (bound, actual) = approximation_bound(&f, &f).unwrap();
        assert_eq!(actual, 0.0);
        assert!(bound >= 0.0);
    }

    #[test]
    fn inadmissible_approximants_are_rejected() {
        let f = pwl(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 0.0, 1.0]);
        // wrong domain
        let g = pwl(&[0.0, 1.0], &[0.0, 1.0]);
        assert!(matches!(approximation_bound(&f, &g), Err(PwlError::Inadmissible(_))));
        // more pieces than the target
        let g = pwl(&[0.0, 0.5, 1.0, 2.0, 3.0], &[0.0, 0.5, 1.0, 0.0, 1.0]);
        let two = pwl(&[0.0, 1.5, 3.0], &[0.0, 1.0, 1.0]);
        assert!(matches!(approximation_bound(&two, &g), Err(PwlError::Inadmissible(_))));
        // single piece spanning three pieces of the target
        let g = pwl(&[0.0, 3.0], &[0.0, 1.0]);
        assert!(matches!(approximation_bound(&f, &g), Err(PwlError::Inadmissible(_))));
        // two-piece overlap but never matching slope
        let f2 = pwl(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0]);
        let g2 = pwl(&[0.0, 2.0], &[0.0, 0.0]);
        assert!(matches!(approximation_bound(&f2, &g2), Err(PwlError::Inadmissible(_))));
    }

    #[test]
    fn random_pairs_satisfy_the_bound_and_the_closed_form_integral() {
        let mut deleted = 0;
        for seed in 0..100 {
            let (f, g) = random_admissible_pair(8, seed);
            let (bound, actual) = approximation_bound(&f, &g)
                .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            assert!(actual <= bound + 1e-12, "seed {seed}: {actual} > {bound}");
            let numeric = numeric_l1(&f, &g);
            assert!(
                (actual - numeric).abs() <= 1e-4 * (1.0 + actual),
                "seed {seed}: closed form {actual} vs sampled {numeric}"
            );
            if g.pieces() < f.pieces() {
                deleted += 1;
            }
        }
        assert!(deleted >= 30, "only {deleted}/100 pairs actually coarsened");
    }

    #[test]
    fn relu_capacity_matches_hand_evaluations() {
        let (min_size, max_pieces) = relu_capacity(4, 1);
        assert!((min_size - 1.0).abs() < 1e-12);
        assert!((max_pieces(4.0) - 8.0).abs() < 1e-12);
        for k in 1..=3 {
            let (m, _) = relu_capacity(1, k);
            assert!((m - (k as f64 / 2.0 - 1.0)).abs() < 1e-12);
        }
        let (m, _) = relu_capacity(16, 2);
        assert!((m - 3.0).abs() < 1e-12);
    }

    #[test]
    fn capacity_formulas_never_contradict() {
        // the lower-bound curve evaluated exactly at the converse's piece
        // count (2s/k)^k equals s - 1, so any function with more pieces than
        // a size-s network can produce must need size strictly above s - 1
        for k in 1..=3u64 {
            for s in 1..=6u64 {
                let (_, max_pieces) = relu_capacity(1, k);
                let p = max_pieces(s as f64).floor() as u64 + 1;
                let (min_size, _) = relu_capacity(p, k);
                assert!(
                    min_size > s as f64 - 1.0,
                    "k={k} s={s} p={p}: {min_size}"
                );
            }
        }
    }

    #[test]
    fn lipschitz_capacity_matches_hand_evaluations() {
        assert_eq!(lipschitz_capacity(1, 1.0, 3.0).unwrap(), 2);
        assert_eq!(lipschitz_capacity(5, 0.0, 0.7).unwrap(), 1);
        assert_eq!(lipschitz_capacity(2, 2.0, 1.0).unwrap(), 28);
    }

    #[test]
    fn lipschitz_capacity_is_monotone() {
        let mut last = 0;
        for l in [0.0, 0.5, 1.0, 2.0, 5.0] {
            let n = lipschitz_capacity(3, l, 1.0).unwrap();
            assert!(n >= last);
            last = n;
        }
        let mut last = u128::MAX;
        for eps in [0.1, 0.3, 1.0, 3.0] {
            let n = lipschitz_capacity(3, 1.0, eps).unwrap();
            assert!(n <= last);
            last = n;
        }
    }

    #[test]
    fn capacity_overflow_is_detected() {
        assert!(matches!(lipschitz_capacity(200, 1000.0, 1e-6), Err(PwlError::Overflow)));
        assert!(matches!(lipschitz_capacity(1, 1e300, 1e-300), Err(PwlError::Overflow)));
        assert!(matches!(lipschitz_capacity(0, 1.0, 1.0), Err(PwlError::BadArgument(_))));
    }

    #[test]
    fn sequential_datasets_have_smoother_trajectories() {
        let sum = |ds: &Dataset| {
            solution_trajectories(ds)
                .unwrap()
                .iter()
                .map(slope_total_variation)
                .sum::<f64>()
        };
        for seed in [9000, 9001, 9002] {
            let base = JssInstance::random(4, 3, 1, 9, seed);
            let spec = PerturbationSpec { machine: 0, steps: 20, max_increase: 0.5, scale: 100 };
            let family = perturb_family(&base, &spec).unwrap();
            let std_ds = generate_standard(&family, &SolveBudget::exhaustive(3)).unwrap();
            let od_ds = generate_od(&family, &SolveBudget::exhaustive(3)).unwrap();
            assert!(sum(&od_ds) <= sum(&std_ds), "family seed {seed}");
        }
    }

    #[test]
    fn malformed_functions_are_rejected() {
        assert!(PwlFunction::new(vec![0.0], vec![1.0]).is_err());
        assert!(PwlFunction::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(PwlFunction::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(PwlFunction::new(vec![1.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(PwlFunction::new(vec![0.0, f64::NAN], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn evaluation_interpolates_between_breakpoints() {
        let f = pwl(&[0.0, 1.0, 3.0], &[0.0, 2.0, 0.0]);
        assert_eq!(f.eval(0.5), 1.0);
        assert_eq!(f.eval(1.0), 2.0);
        assert_eq!(f.eval(2.0), 1.0);
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(3.0), 0.0);
        assert_eq!(f.pieces(), 2);
        assert_eq!(f.max_width(), 2.0);
        assert_eq!(f.slope(0), 2.0);
        assert_eq!(f.slope(1), -1.0);
    }
}
