//! Shared fixtures for the criterion benches.

use pwr_align_core::geometry::{Point3, PointCloud};

pub use pwr_align_core as core;
pub use pwr_align_core::synthetic::three_part_arm;

/// Uniform random cloud in the unit cube.
pub fn random_cloud(n: usize, seed: u64) -> PointCloud {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Point3> = (0..n)
        .map(|_| {
            Point3::new(
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
            )
        })
        .collect();
    PointCloud::new(pts).unwrap()
}
