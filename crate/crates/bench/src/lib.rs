//! Seeded inputs for the kernel benchmarks.

use geoloss::phantom::{generate_phantom, perturb, PerturbSpec, PhantomSpec};
use geoloss::{BinaryMask, GridSpec, ProbabilityMap};

/// Phantom mask on an `n`³ grid and a blurred, noisy prediction of it.
pub fn phantom_pair(n: usize) -> (ProbabilityMap, BinaryMask) {
    let spec = PhantomSpec {
        seed: 1,
        grid: GridSpec::isotropic([n, n, n]).expect("valid grid"),
        n_lesions: 5,
        radius_range_mm: (2.0, (n as f64 / 8.0).max(2.0)),
        ..PhantomSpec::default()
    };
    let mask = generate_phantom(&spec).expect("valid phantom").mask;
    let s = perturb(
        &mask,
        &PerturbSpec {
            seed: 2,
            blur_radius_mm: 1.0,
            noise_std: 0.1,
            spurious_count: 2,
            ..PerturbSpec::default()
        },
    )
    .expect("valid perturbation");
    (s, mask)
}
