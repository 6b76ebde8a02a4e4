//! Dice+FOG versus Dice on perturbed phantoms, optimised from the same noisy
//! starts. Prints one CSV row per phantom and a summary line; never fails on
//! the comparison itself.
//!
//! Usage: directional_report [steps] [n_phantoms]

use geoloss::loss::FogVariant;
use geoloss::optim::{compare_on_phantoms, ComparisonSpec};
use geoloss::{CompositeLoss, DerivativeOp, GeoLossSpec, WeightSchedule};

fn main() -> geoloss::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut spec = ComparisonSpec::default();
    if let Some(&steps) = args.first() {
        spec.steps = steps;
    }
    if let Some(&n) = args.get(1) {
        spec.seeds = (0..n as u64).collect();
    }

    let dice: CompositeLoss = GeoLossSpec::dice().into();
    let dice_fog = CompositeLoss::single(GeoLossSpec::dice()).with(
        GeoLossSpec::fog(FogVariant::Full, DerivativeOp::default()),
        WeightSchedule::Constant(1.0),
    )?;
    let rows = compare_on_phantoms(&dice_fog, &dice, &spec)?;

    println!("seed,start_lf1,lf1_dice_fog,lf1_dice,dsc_dice_fog,dsc_dice");
    for r in &rows {
        println!(
            "{},{},{},{},{},{}",
            r.seed, r.start_lf1, r.lf1_a, r.lf1_b, r.dsc_a, r.dsc_b
        );
    }
    let n = rows.len() as f64;
    let (a, b) = (
        rows.iter().map(|r| r.lf1_a).sum::<f64>() / n,
        rows.iter().map(|r| r.lf1_b).sum::<f64>() / n,
    );
    eprintln!(
        "{} phantoms, {} steps: mean L-F1 Dice+FOG {a:.4}, Dice {b:.4} -> {}",
        rows.len(),
        spec.steps,
        if a >= b { "Dice+FOG >= Dice" } else { "Dice+FOG < Dice" }
    );
    Ok(())
}
