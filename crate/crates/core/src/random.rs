//! Seeded random instances for property suites and benchmarks.

use rand::Rng;

use crate::geometry::Polytope;
use crate::market::{DemandSide, MarketInstance, Producer};
use crate::robustcore::RobustLp;

/// A valid uncertainty set: `1..=3` rows `sum_j p_j u_j <= 1` with
/// `p in [0, 1]^n`, plus `u_i <= 1`.
pub fn valid_set<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Polytope {
    let rows = rng.gen_range(1..=3);
    let mut p: Vec<Vec<f64>> = (0..rows).map(|_| (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect()).collect();
    let mut r = vec![1.0; rows];
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        p.push(e);
        r.push(1.0);
    }
    Polytope { dim: n, p, r }
}

/// Hull of the origin and up to `max_points` further points, each axis
/// reaching 1. The result has between 2 and `max_points + 1` vertices.
pub fn hull_set<R: Rng + ?Sized>(rng: &mut R, n: usize, max_points: usize) -> Polytope {
    let count = rng.gen_range(1..=max_points.max(1));
    let mut pts: Vec<Vec<f64>> = (0..count).map(|_| (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect()).collect();
    for i in 0..n {
        let k = rng.gen_range(0..count);
        pts[k][i] = 1.0;
    }
    pts.push(vec![0.0; n]);
    Polytope::from_vertices(&pts).expect("hull of nonnegative points")
}

/// Dimensions `n, k, m` in `1..=6`; every row of `A x + B y >= b` has a
/// positive coefficient, so the feasible set is nonempty.
pub fn robust_lp<R: Rng + ?Sized>(rng: &mut R) -> RobustLp {
    let n = rng.gen_range(1..=6);
    let k = rng.gen_range(1..=6);
    let m = rng.gen_range(1..=6);
    let mut a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| sparse(rng)).collect()).collect();
    let b_mat: Vec<Vec<f64>> = (0..m).map(|_| (0..k).map(|_| sparse(rng)).collect()).collect();
    for (row, brow) in a.iter_mut().zip(&b_mat) {
        if row.iter().chain(brow).all(|v| *v == 0.0) {
            let j = rng.gen_range(0..n);
            row[j] = rng.gen_range(0.1..=1.0);
        }
    }
    RobustLp {
        a,
        b_mat,
        b: (0..m).map(|_| rng.gen_range(0.0..=2.0)).collect(),
        c: (0..n).map(|_| rng.gen_range(0.0..=2.0)).collect(),
        d: (0..k).map(|_| rng.gen_range(0.0..=2.0)).collect(),
        lambda: (0..n).map(|_| rng.gen_range(0.0..=2.0)).collect(),
        u: valid_set(rng, n),
    }
}

fn sparse<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.gen_bool(0.3) {
        0.0
    } else {
        rng.gen_range(0.0..=1.0)
    }
}

fn producers<R: Rng + ?Sized>(rng: &mut R, n: usize, a_max: f64) -> Vec<Producer> {
    (0..n)
        .map(|_| {
            Producer::new(
                rng.gen_range(0.0..=2.0),
                rng.gen_range(0.0..=2.0),
                rng.gen_range(0.0..=a_max),
            )
        })
        .collect()
}

/// Fixed demand with `2..=4` producers, `1..=3` periods and a random valid set.
pub fn fixed_market<R: Rng + ?Sized>(rng: &mut R) -> MarketInstance {
    let n = rng.gen_range(2..=4);
    let periods = rng.gen_range(1..=3);
    let d = (0..periods).map(|_| rng.gen_range(0.0..=3.0)).collect();
    let set = valid_set(rng, n);
    MarketInstance::new(producers(rng, n, 2.0), DemandSide::Fixed { d }, set).expect("valid random market")
}

/// Elastic demand with `n` producers, `periods` periods and a hull set of
/// at most four vertices.
pub fn elastic_market<R: Rng + ?Sized>(rng: &mut R, n: usize, periods: usize) -> MarketInstance {
    let alpha = (0..periods).map(|_| rng.gen_range(1.0..=6.0)).collect();
    let beta = (0..periods).map(|_| rng.gen_range(0.5..=2.0)).collect();
    let mut ps = producers(rng, n, 3.0);
    for p in &mut ps {
        p.c_inv *= 0.5;
        p.c_var *= 0.5;
    }
    let set = hull_set(rng, n, 3);
    MarketInstance::new(ps, DemandSide::AffineElastic { alpha, beta }, set).expect("valid random market")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_sets_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=4 {
            assert!(valid_set(&mut rng, n).validate().is_valid_uncertainty_set);
            let h = hull_set(&mut rng, n.min(3), 3);
            assert!(h.validate().is_valid_uncertainty_set);
            let v = h.enumerate_vertices().unwrap().len();
            assert!((2..=4).contains(&v), "{v} vertices");
        }
    }
}
