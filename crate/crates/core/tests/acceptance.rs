//! Acceptance suite. Runs without the libtest harness so that every criterion
//! prints exactly one PASS/FAIL line (criterion 10 prints REPORT and never
//! fails). Exits non-zero when any of criteria 1-9 fails.

mod common;

use std::time::Instant;

use common::*;
use geoloss::loss::{
    bce_loss, bd_loss, dice_loss, fog_loss, geo_eval, grad_check, hd_loss_auto, sog_loss, FogVariant, GradCheckOptions,
    Normalization, SogSided,
};
use geoloss::metrics::{default_thresholds, lesion_metrics, threshold_sweep, Connectivity};
use geoloss::optim::{
    compare_on_phantoms, default_milestones, lr_at, optimize_map, ComparisonSpec, OptimConfig, UpdateRule,
};
use geoloss::phantom::{generate_phantom, perturb, PerturbSpec, PhantomSpec};
use geoloss::transform::edt;
use geoloss::{
    BinaryMask, Boundary, CompositeLoss, DerivativeOp, GeoLossSpec, GridSpec, LossResult, ProbabilityMap, Stencil,
    WeightSchedule,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn err(e: geoloss::GeoError) -> String {
    e.to_string()
}

fn fog_variants() -> [FogVariant; 4] {
    [
        FogVariant::Full,
        FogVariant::Sagittal,
        FogVariant::Coronal,
        FogVariant::Axial,
    ]
}

type Closed = Box<dyn Fn(&ProbabilityMap, &BinaryMask) -> geoloss::Result<LossResult>>;

fn reduction_cases() -> Vec<(GeoLossSpec, Closed)> {
    let mut cases: Vec<(GeoLossSpec, Closed)> = vec![
        (GeoLossSpec::dice(), Box::new(dice_loss)),
        (
            GeoLossSpec::bce(Normalization::Sum),
            Box::new(|s, g| bce_loss(s, g, Normalization::Sum)),
        ),
        (
            GeoLossSpec::bce(Normalization::Mean),
            Box::new(|s, g| bce_loss(s, g, Normalization::Mean)),
        ),
    ];
    for signed in [true, false] {
        for norm in [Normalization::Sum, Normalization::Mean] {
            cases.push((
                GeoLossSpec::bd(signed, norm),
                Box::new(move |s, g| bd_loss(s, g, &edt(g, signed)?, norm)),
            ));
        }
    }
    for norm in [Normalization::Sum, Normalization::Mean] {
        cases.push((GeoLossSpec::hd(norm), Box::new(move |s, g| hd_loss_auto(s, g, norm))));
    }
    for v in fog_variants() {
        for op in [
            DerivativeOp::default(),
            DerivativeOp::new(Stencil::Forward, Boundary::Zero),
        ] {
            cases.push((GeoLossSpec::fog(v, op), Box::new(move |s, g| fog_loss(s, g, v, op))));
        }
    }
    for sided in [SogSided::One, SogSided::Two] {
        for magnitude in [false, true] {
            cases.push((
                GeoLossSpec::sog(sided, magnitude, Boundary::Replicate),
                Box::new(move |s, g| sog_loss(s, g, sided, magnitude, Boundary::Replicate)),
            ));
        }
    }
    cases
}

fn pairs(seed: u64, n: usize, dims: [usize; 3], lo: f64, hi: f64) -> Vec<(ProbabilityMap, BinaryMask)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_pair(&mut rng, dims, lo, hi)).collect()
}

fn criterion_1() -> Outcome {
    let cases = reduction_cases();
    let (mut worst_v, mut worst_g) = (0.0f64, 0.0f64);
    for (s, g) in pairs(1, 100, [8, 8, 8], 0.0, 1.0) {
        for (spec, closed) in &cases {
            let a = geo_eval(spec, &s, &g).map_err(err)?;
            let b = closed(&s, &g).map_err(err)?;
            worst_v = worst_v.max((a.value - b.value).abs());
            worst_g = worst_g.max(max_abs_diff(a.grad.data(), b.grad.data()));
        }
    }
    ensure(
        worst_v <= 1e-12 && worst_g <= 1e-12,
        format!(
            "{} specs x 100 pairs, max |dvalue| {worst_v:.2e}, max |dgrad| {worst_g:.2e}",
            cases.len()
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    for (s, g) in pairs(1, 100, [8, 8, 8], 0.0, 1.0) {
        let v = geo_eval(&GeoLossSpec::dice(), &s, &g).map_err(err)?.value;
        worst = worst.max((v - oracle_dice(&s, &g)).abs());
    }
    let (_, g) = &pairs(2, 1, [8, 8, 8], 0.0, 1.0)[0];
    let at_g = geo_eval(&GeoLossSpec::dice(), &ProbabilityMap::from(g), g)
        .map_err(err)?
        .value;
    let at_complement = geo_eval(&GeoLossSpec::dice(), &ProbabilityMap::from(&g.complement()), g)
        .map_err(err)?
        .value;
    ensure(
        worst <= 1e-12 && at_g.abs() <= 1e-12 && (at_complement - 1.0).abs() <= 1e-12,
        format!("max |geo - loop| {worst:.2e}, L(g,g) = {at_g}, L(1-g,g) = {at_complement}"),
    )
}

fn criterion_3() -> Outcome {
    let mut specs: Vec<CompositeLoss> = vec![
        GeoLossSpec::dice().into(),
        GeoLossSpec::bce(Normalization::Sum).into(),
        GeoLossSpec::bce(Normalization::Mean).into(),
        GeoLossSpec::bd(true, Normalization::Mean).into(),
        GeoLossSpec::bd(false, Normalization::Sum).into(),
        GeoLossSpec::hd(Normalization::Mean).into(),
        GeoLossSpec::hd(Normalization::Sum).into(),
    ];
    for v in fog_variants() {
        specs.push(GeoLossSpec::fog(v, DerivativeOp::default()).into());
        specs.push(GeoLossSpec::fog(v, DerivativeOp::new(Stencil::Forward, Boundary::Zero)).into());
    }
    for sided in [SogSided::One, SogSided::Two] {
        for magnitude in [false, true] {
            for b in [Boundary::Replicate, Boundary::Zero] {
                specs.push(GeoLossSpec::sog(sided, magnitude, b).into());
            }
        }
    }
    specs.push(
        CompositeLoss::single(GeoLossSpec::dice())
            .with(
                GeoLossSpec::fog(FogVariant::Full, DerivativeOp::default()),
                WeightSchedule::Constant(1.0),
            )
            .map_err(err)?,
    );
    let opts = GradCheckOptions::default();
    let mut worst = (0.0f64, String::new());
    for (k, (s, g)) in pairs(3, 3, [4, 4, 4], 0.05, 0.95).into_iter().enumerate() {
        for loss in &specs {
            let r = grad_check(loss, &s, &g, 0.0, &opts).map_err(err)?;
            if r.max_rel_err >= worst.0 {
                let names: Vec<String> = loss.terms().iter().map(|t| t.spec.name()).collect();
                worst = (r.max_rel_err, format!("{} (pair {k})", names.join("+")));
            }
        }
    }
    ensure(
        worst.0 < 1e-5,
        format!(
            "{} losses x 3 pairs at eps 1e-5, worst rel err {:.2e} for {}",
            specs.len(),
            worst.0,
            worst.1
        ),
    )
}

fn criterion_4() -> Outcome {
    let op = DerivativeOp::default();
    let mut mismatches = 0;
    for (s, g) in pairs(4, 100, [8, 8, 8], 0.0, 1.0) {
        let closed: Vec<f64> = fog_variants()
            .iter()
            .map(|&v| fog_loss(&s, &g, v, op).map(|r| r.value))
            .collect::<geoloss::Result<_>>()
            .map_err(err)?;
        let generic: Vec<f64> = fog_variants()
            .iter()
            .map(|&v| geo_eval(&GeoLossSpec::fog(v, op), &s, &g).map(|r| r.value))
            .collect::<geoloss::Result<_>>()
            .map_err(err)?;
        for v in [&closed, &generic] {
            if v[0].to_bits() != (v[1] + v[2] + v[3]).to_bits() {
                mismatches += 1;
            }
        }
    }
    ensure(
        mismatches == 0,
        format!("FULL vs S+C+A bitwise on 100 pairs (closed and generic paths): {mismatches} mismatches"),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 50 {
        let spacing = [0; 3].map(|_| rng.gen_range(0.3..3.0));
        let grid = GridSpec::new([12, 12, 12], spacing).unwrap();
        let density = rng.gen_range(0.02..0.7);
        let mask = random_mask(&mut rng, grid, density);
        if !mask.has_boundary() {
            continue;
        }
        for signed in [false, true] {
            let d = edt(&mask, signed).map_err(err)?;
            worst = worst.max(max_abs_diff(d.data(), &oracle_edt(&mask, signed)));
        }
        done += 1;
    }

    let grid = GridSpec::isotropic([3, 3, 3]).unwrap();
    let center = BinaryMask::from_fn(grid, |v| v.0 == [1, 1, 1]);
    let corner = edt(&center, false).map_err(err)?.data()[grid.index(0, 0, 0)];
    let grid = GridSpec::new([3, 3, 3], [1.0, 1.0, 3.0]).unwrap();
    let center = BinaryMask::from_fn(grid, |v| v.0 == [1, 1, 1]);
    let axial = edt(&center, false).map_err(err)?.data()[grid.index(1, 1, 0)];
    ensure(
        worst <= 1e-9 && corner == 3f64.sqrt() && axial == 3.0,
        format!("50 masks signed+unsigned, max err {worst:.2e} mm; corner {corner}, axial {axial}"),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let grid = GridSpec::isotropic([10, 10, 10]).unwrap();
    let mut mismatches = 0;
    for _ in 0..50 {
        let (dp, dg) = (rng.gen_range(0.03..0.35), rng.gen_range(0.03..0.35));
        let pred = random_mask(&mut rng, grid, dp);
        let gt = random_mask(&mut rng, grid, dg);
        for c in [Connectivity::Six, Connectivity::Eighteen, Connectivity::TwentySix] {
            let m = lesion_metrics(&pred, &gt, c).map_err(err)?;
            let o = oracle_lesion_metrics(&pred, &gt, c);
            if (m.ltpr, m.lppv, m.lf1, m.gl, m.pl) != (o.ltpr, o.lppv, o.lf1, o.gl, o.pl) {
                mismatches += 1;
            }
        }
    }
    let cube = |lo: [usize; 3], hi: [usize; 3]| move |c: [usize; 3]| (0..3).all(|a| c[a] >= lo[a] && c[a] <= hi[a]);
    let (a, b, c) = (
        cube([1, 1, 1], [2, 2, 2]),
        cube([6, 6, 6], [7, 7, 7]),
        cube([1, 6, 1], [2, 7, 2]),
    );
    let gt = BinaryMask::from_fn(grid, |v| a(v.0) || b(v.0));
    let pred = BinaryMask::from_fn(grid, |v| a(v.0) || c(v.0));
    let m = lesion_metrics(&pred, &gt, Connectivity::TwentySix).map_err(err)?;
    ensure(
        mismatches == 0 && (m.ltpr, m.lppv, m.lf1) == (0.5, 0.5, 0.5),
        format!(
            "150 oracle comparisons, {mismatches} mismatches; two-lesion example LTPR {} LPPV {} L-F1 {}",
            m.ltpr, m.lppv, m.lf1
        ),
    )
}

fn criterion_7() -> Outcome {
    let gt = generate_phantom(&PhantomSpec::default()).map_err(err)?.mask;
    let s = perturb(
        &gt,
        &PerturbSpec {
            seed: 7,
            blur_radius_mm: 1.5,
            noise_std: 0.2,
            spurious_count: 2,
            ..PerturbSpec::default()
        },
    )
    .map_err(err)?;
    let rows = threshold_sweep(&s, &gt, &default_thresholds(), Connectivity::default()).map_err(err)?;
    let thresholds: Vec<f64> = rows.iter().map(|r| r.threshold).collect();
    let expected: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let monotone = rows.windows(2).all(|w| w[0].foreground >= w[1].foreground);
    let counts: Vec<usize> = rows.iter().map(|r| r.foreground).collect();
    ensure(
        rows.len() == 9 && thresholds == expected && monotone,
        format!("{} rows at {thresholds:?}, foreground {counts:?}", rows.len()),
    )
}

fn criterion_8() -> Outcome {
    let m = default_milestones();
    let got: Vec<f64> = [0.4, 0.5, 0.7, 0.9].iter().map(|&p| lr_at(p, 1.0, &m)).collect();
    ensure(
        got == [1.0, 0.5, 0.25, 0.125] && lr_at(0.95, 1e-3, &m) == 1e-3 * 0.125,
        format!("multipliers at 0.4/0.5/0.7/0.9: {got:?}"),
    )
}

/// First seed whose default phantom has exactly three separate lesions.
fn three_lesion_seed() -> u64 {
    (0..)
        .find(|&seed| {
            generate_phantom(&PhantomSpec {
                seed,
                ..PhantomSpec::default()
            })
            .map(|p| p.realized_components == 3)
            .unwrap_or(false)
        })
        .unwrap()
}

fn criterion_9() -> Outcome {
    let seed = three_lesion_seed();
    let gt = generate_phantom(&PhantomSpec {
        seed,
        ..PhantomSpec::default()
    })
    .map_err(err)?
    .mask;
    let loss = CompositeLoss::single(GeoLossSpec::dice())
        .with(
            GeoLossSpec::fog(FogVariant::Full, DerivativeOp::default()),
            WeightSchedule::Constant(1.0),
        )
        .map_err(err)?;
    let cfg = OptimConfig::new(loss, 500);
    let start = Instant::now();
    let t = optimize_map(&gt, &cfg).map_err(err)?;
    let elapsed = start.elapsed().as_secs_f64();
    let reached = t.records.iter().find(|r| r.dsc >= 0.99).map(|r| r.step);

    let gd = OptimConfig {
        rule: UpdateRule::Gd,
        base_lr: 1e-2,
        ..OptimConfig::new(GeoLossSpec::dice().into(), 1)
    };
    let g = optimize_map(&gt, &gd).map_err(err)?;
    let (l0, l1) = (g.records[0].loss, g.records[1].loss);
    ensure(
        reached.is_some() && elapsed < 60.0 && l1 < l0,
        format!(
            "phantom seed {seed} ({} voxels fg): DSC>=0.99 at step {reached:?}, final DSC {:.4}, {elapsed:.1}s; GD Dice {l0:.9} -> {l1:.9}",
            gt.count(),
            t.last().dsc
        ),
    )
}

fn criterion_10() -> String {
    let dice: CompositeLoss = GeoLossSpec::dice().into();
    let dice_fog = CompositeLoss::single(GeoLossSpec::dice())
        .with(
            GeoLossSpec::fog(FogVariant::Full, DerivativeOp::default()),
            WeightSchedule::Constant(1.0),
        )
        .expect("valid composite");
    match compare_on_phantoms(&dice_fog, &dice, &ComparisonSpec::default()) {
        Ok(rows) => {
            let n = rows.len() as f64;
            let mean = |f: fn(&geoloss::optim::ComparisonRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
            let (a, b) = (mean(|r| r.lf1_a), mean(|r| r.lf1_b));
            format!(
                "{} phantoms: mean L-F1 Dice+FOG {a:.4} vs Dice {b:.4} (start {:.4}); Dice+FOG >= Dice: {}",
                rows.len(),
                mean(|r| r.start_lf1),
                a >= b
            )
        }
        Err(e) => format!("run failed: {e}"),
    }
}

fn main() {
    // `cargo test` passes harness flags such as --nocapture or a name filter;
    // this target always runs everything.
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("reduction equivalence", criterion_1),
        ("dice identity", criterion_2),
        ("gradient correctness", criterion_3),
        ("fog decomposition", criterion_4),
        ("edt exactness", criterion_5),
        ("metric oracle", criterion_6),
        ("sweep shape", criterion_7),
        ("lr schedule", criterion_8),
        ("desk-scale optimization", criterion_9),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, msg) = match f() {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!(
            "criterion {:>2} {tag} {name}: {msg} [{:.1}s]",
            k + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("criterion 10 REPORT directional replication: {}", criterion_10());
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
