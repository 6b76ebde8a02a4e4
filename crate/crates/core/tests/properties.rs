mod common;

use common::*;
use geoloss::loss::{fog_loss, geo_eval, sog_loss, FogVariant, Normalization, SogSided, BD_RAMP};
use geoloss::optim::{logit_objective, optimize_map, Init, OptimConfig, UpdateRule};
use geoloss::phantom::{generate_phantom, perturb, PerturbSpec, PhantomSpec};
use geoloss::transform::edt;
use geoloss::{
    BinaryMask, Boundary, CompositeLoss, DerivativeOp, GeoLossSpec, GridSpec, ProbabilityMap, ScalarField,
    WeightSchedule,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dice_fog() -> CompositeLoss {
    CompositeLoss::single(GeoLossSpec::dice())
        .with(
            GeoLossSpec::fog(FogVariant::Full, DerivativeOp::default()),
            WeightSchedule::Constant(1.0),
        )
        .unwrap()
}

#[test]
fn logit_chain_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let grid = GridSpec::isotropic([4, 4, 4]).unwrap();
    let losses = [
        dice_fog(),
        GeoLossSpec::bce(Normalization::Mean).into(),
        CompositeLoss::single(GeoLossSpec::bd(true, Normalization::Mean))
            .with(GeoLossSpec::dice(), BD_RAMP)
            .unwrap(),
    ];
    for loss in &losses {
        let g = loop {
            let g = random_mask(&mut rng, grid, 0.4);
            if g.has_boundary() {
                break g;
            }
        };
        let theta = ScalarField::from_fn(grid, |_| rng.gen_range(-2.0..2.0));
        let progress = 0.3;
        let (_, _, grad) = logit_objective(loss, &theta, &g, progress).unwrap();
        let eps = 1e-5;
        for i in 0..grid.voxel_count() {
            let mut plus = theta.clone();
            plus.data_mut()[i] += eps;
            let mut minus = theta.clone();
            minus.data_mut()[i] -= eps;
            let fp = logit_objective(loss, &plus, &g, progress).unwrap().0;
            let fm = logit_objective(loss, &minus, &g, progress).unwrap().0;
            let numeric = (fp - fm) / (2.0 * eps);
            let a = grad.data()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            assert!(rel < 1e-5, "voxel {i}: analytic {a}, numeric {numeric}");
        }
    }
}

#[test]
fn optimization_is_deterministic() {
    let gt = generate_phantom(&PhantomSpec {
        seed: 5,
        grid: GridSpec::isotropic([16, 16, 16]).unwrap(),
        radius_range_mm: (1.5, 3.0),
        ..PhantomSpec::default()
    })
    .unwrap()
    .mask;
    let cfg = OptimConfig {
        init: Init::LogitNoise { seed: 9, std: 0.3 },
        record_every: 5,
        ..OptimConfig::new(dice_fog(), 30)
    };
    let a = optimize_map(&gt, &cfg).unwrap();
    let b = optimize_map(&gt, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.records.len(), 7);
}

#[test]
fn gd_descends_on_dice() {
    let gt = generate_phantom(&PhantomSpec::default()).unwrap().mask;
    let cfg = OptimConfig {
        rule: UpdateRule::Gd,
        base_lr: 1e-2,
        ..OptimConfig::new(GeoLossSpec::dice().into(), 5)
    };
    let t = optimize_map(&gt, &cfg).unwrap();
    assert!(t.records.windows(2).all(|w| w[1].loss <= w[0].loss));
}

#[test]
fn phantom_and_perturbation_are_reproducible() {
    let spec = PhantomSpec {
        seed: 42,
        ..PhantomSpec::default()
    };
    let a = generate_phantom(&spec).unwrap();
    assert_eq!(a, generate_phantom(&spec).unwrap());
    let p = PerturbSpec {
        seed: 3,
        blur_radius_mm: 1.0,
        noise_std: 0.1,
        drop_fraction: 0.5,
        spurious_count: 1,
        ..PerturbSpec::default()
    };
    assert_eq!(perturb(&a.mask, &p).unwrap(), perturb(&a.mask, &p).unwrap());
}

fn mask_strategy(dims: [usize; 3]) -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(prop::bool::weighted(0.35), dims.iter().product::<usize>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn edt_is_lipschitz_along_faces(
        bits in mask_strategy([6, 5, 4]),
        spacing in prop::array::uniform3(0.4f64..2.5),
        signed in any::<bool>(),
    ) {
        let grid = GridSpec::new([6, 5, 4], spacing).unwrap();
        let mask = BinaryMask::new(grid, bits).unwrap();
        prop_assume!(mask.has_boundary());
        let d = edt(&mask, signed).unwrap();
        for i in 0..grid.voxel_count() {
            let c = grid.coords(i).0;
            for a in 0..3 {
                if c[a] + 1 < grid.dims()[a] {
                    let j = i + grid.stride(a);
                    prop_assert!((d.data()[i] - d.data()[j]).abs() <= spacing[a] + 1e-12);
                }
            }
        }
        // exact agreement with the brute-force map
        prop_assert!(max_abs_diff(d.data(), &oracle_edt(&mask, signed)) <= 1e-9);
    }

    #[test]
    fn losses_are_translation_invariant_with_margin(
        bits in mask_strategy([4, 4, 4]),
        probs in prop::collection::vec(0.0f64..=1.0, 64),
        shift in prop::array::uniform3(0usize..3),
    ) {
        // content padded by at least one zero voxel on every side, so neither
        // boundary mode sees it
        let place = |off: [usize; 3]| {
            let grid = GridSpec::isotropic([8, 8, 8]).unwrap();
            let inner = |v: [usize; 3]| {
                let l = [0, 1, 2].map(|a| v[a] as isize - off[a] as isize - 1);
                (l.iter().all(|&x| (0..4).contains(&x)))
                    .then(|| (l[0] + 4 * (l[1] + 4 * l[2])) as usize)
            };
            let g = BinaryMask::from_fn(grid, |v| inner(v.0).is_some_and(|k| bits[k]));
            let s = ProbabilityMap::new(
                grid,
                (0..512).map(|i| inner(grid.coords(i).0).map_or(0.0, |k| probs[k])).collect(),
            ).unwrap();
            (s, g)
        };
        let (s0, g0) = place([0, 0, 0]);
        let (s1, g1) = place(shift);
        for b in [Boundary::Replicate, Boundary::Zero] {
            let op = DerivativeOp::new(Default::default(), b);
            let f0 = fog_loss(&s0, &g0, FogVariant::Full, op).unwrap().value;
            let f1 = fog_loss(&s1, &g1, FogVariant::Full, op).unwrap().value;
            prop_assert!((f0 - f1).abs() <= 1e-12);
            for sided in [SogSided::One, SogSided::Two] {
                let a = sog_loss(&s0, &g0, sided, false, b).unwrap().value;
                let c = sog_loss(&s1, &g1, sided, false, b).unwrap().value;
                prop_assert!((a - c).abs() <= 1e-12);
            }
        }
        let d0 = geo_eval(&GeoLossSpec::dice(), &s0, &g0).unwrap().value;
        let d1 = geo_eval(&GeoLossSpec::dice(), &s1, &g1).unwrap().value;
        prop_assert!((d0 - d1).abs() <= 1e-12);
    }

    #[test]
    fn dice_lies_in_unit_interval(bits in mask_strategy([3, 3, 3]), probs in prop::collection::vec(0.0f64..=1.0, 27)) {
        let grid = GridSpec::isotropic([3, 3, 3]).unwrap();
        let g = BinaryMask::new(grid, bits).unwrap();
        let s = ProbabilityMap::new(grid, probs).unwrap();
        let v = geo_eval(&GeoLossSpec::dice(), &s, &g).unwrap().value;
        prop_assert!((0.0..=1.0 + 1e-15).contains(&v));
    }
}
