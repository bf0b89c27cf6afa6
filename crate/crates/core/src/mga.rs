//! Search-direction generation for modelling-to-generate-alternatives runs.
//!
//! Both the full-model MGA runner and local MGA over a hull draw their objective vectors here.
//! Directions are always *minimised*.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MgaMethod {
    /// Directions uniform on the unit sphere.
    RandomVector,
    /// Per-variable minimum and maximum first, then random signed subsets.
    #[serde(alias = "min_max")]
    Minmax,
}

/// A direction uniform on the unit sphere in `n` dimensions (normalised standard normals).
pub fn sphere_direction(n: usize, rng: &mut Rng) -> Vec<f64> {
    assert!(n >= 1, "direction needs at least one dimension");
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum());
        if norm > 1e-300 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// The `k`-th min/max direction: `+e_{k/2}` for even `k`, `-e_{k/2}` for odd `k`.
pub fn minmax_bracket(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k / 2] = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    v
}

/// Random nonempty subset of dimensions with random unit signs.
fn signed_subset(n: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n)
            .map(|_| match rng.random_range(0..4u8) {
                0 => 1.0,
                1 => -1.0,
                _ => 0.0,
            })
            .collect();
        if v.iter().any(|&x| x != 0.0) {
            return v;
        }
    }
}

/// `count` directions over `n` dimensions.
pub fn directions(n: usize, count: usize, method: MgaMethod, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| match method {
            MgaMethod::RandomVector => sphere_direction(n, rng),
            MgaMethod::Minmax if k < 2 * n => minmax_bracket(n, k),
            MgaMethod::Minmax => signed_subset(n, rng),
        })
        .collect()
}
