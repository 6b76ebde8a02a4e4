use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use geoloss::loss::{composite_eval, grad_check, GradCheckOptions, LossDocument};
use geoloss::metrics::{
    csv_line, lesion_metrics, sweep_csv, threshold_range, threshold_sweep, Connectivity, CSV_HEADER,
};
use geoloss::optim::{optimize_from, OptimDocument};
use geoloss::phantom::{generate_phantom, perturb, PerturbSpec, PhantomSpec};
use geoloss::transform::{edt, fog, gradient_magnitude, sog};
use geoloss::volume::{binarize, gvol_paths, read_gvol, write_gvol};
use geoloss::{
    Axes, Axis, BinaryMask, Boundary, CompositeLoss, DerivativeOp, GeoError, ProbabilityMap, Stencil, Volume,
};

use crate::{BoundaryArg, Command, Failure, Format, StencilArg, TransformOp};

type Outcome = Result<(), Failure>;

impl From<StencilArg> for Stencil {
    fn from(s: StencilArg) -> Self {
        match s {
            StencilArg::Central => Stencil::Central,
            StencilArg::Forward => Stencil::Forward,
        }
    }
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Replicate => Boundary::Replicate,
            BoundaryArg::Zero => Boundary::Zero,
        }
    }
}

pub fn run(command: Command) -> Outcome {
    match command {
        Command::Transform {
            input,
            op,
            stencil,
            boundary,
            out,
        } => transform(&input, op, DerivativeOp::new(stencil.into(), boundary.into()), &out),
        Command::Loss {
            pred,
            gt,
            spec,
            grad,
            progress,
        } => loss(&pred, &gt, &spec, grad.as_deref(), progress),
        Command::GradCheck {
            pred,
            gt,
            spec,
            eps,
            tol,
            max_voxels,
            progress,
        } => grad_check_cmd(&pred, &gt, &spec, eps, tol, max_voxels, progress),
        Command::Eval {
            pred,
            gt,
            threshold,
            connectivity,
            format,
        } => eval(&pred, &gt, threshold, connectivity, format),
        Command::Sweep {
            pred,
            gt,
            thresholds,
            connectivity,
            format,
        } => sweep(&pred, &gt, &thresholds, connectivity, format),
        Command::Phantom { spec, out_prefix } => phantom(&spec, &out_prefix),
        Command::Optimize {
            gt,
            config,
            out_prefix,
            init_map,
        } => optimize(&gt, &config, &out_prefix, init_map.as_deref()),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::invalid("io", format!("cannot read {}: {e}", path.display())))
}

fn read_volume(path: &Path) -> Result<Volume, Failure> {
    read_gvol(path).map_err(|e| match e {
        GeoError::Io(io) => Failure::invalid("io", format!("cannot read {}: {io}", path.display())),
        other => other.into(),
    })
}

fn read_prob(path: &Path) -> Result<ProbabilityMap, Failure> {
    Ok(read_volume(path)?.into_prob()?)
}

fn read_mask(path: &Path) -> Result<BinaryMask, Failure> {
    Ok(read_volume(path)?.into_mask()?)
}

fn read_loss(path: &Path) -> Result<CompositeLoss, Failure> {
    Ok(LossDocument::from_json(&read_text(path)?)?.to_composite()?)
}

fn connectivity(n: u32) -> Result<Connectivity, Failure> {
    Ok(Connectivity::try_from(n)?)
}

fn write_volume(volume: &Volume, path: &Path) -> Result<PathBuf, Failure> {
    write_gvol(volume, path).map_err(|e| Failure::computation(e.kind(), e.to_string()))?;
    Ok(gvol_paths(path).0)
}

fn write_text(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::computation("io", format!("cannot write {}: {e}", path.display())))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}{suffix}", prefix.display()))
}

fn in_unit_interval(name: &str, v: f64) -> Outcome {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Failure::invalid(
            "parameter",
            format!("{name} must lie in [0, 1], got {v}"),
        ))
    }
}

fn transform(input: &Path, op: TransformOp, d: DerivativeOp, out: &Path) -> Outcome {
    let volume = read_volume(input)?;
    let field = volume.to_field();
    let axis = |a: Axis| -> Result<_, Failure> {
        let v = fog(&field, Axes::only(a), d)?;
        Ok(v.component(a).expect("requested axis").clone())
    };
    let result = match op {
        TransformOp::Fog => gradient_magnitude(&fog(&field, Axes::ALL, d)?),
        TransformOp::FogX => axis(Axis::X)?,
        TransformOp::FogY => axis(Axis::Y)?,
        TransformOp::FogZ => axis(Axis::Z)?,
        TransformOp::Sog => sog(&field, d.boundary),
        TransformOp::Dtm => edt(&volume.into_mask()?, false)?.to_field(),
        TransformOp::DtmSigned => edt(&volume.into_mask()?, true)?.to_field(),
    };
    let header = write_volume(&Volume::Scalar(result), out)?;
    println!("{}", json!({"out": header}));
    Ok(())
}

fn loss(pred: &Path, gt: &Path, spec: &Path, grad: Option<&Path>, progress: f64) -> Outcome {
    in_unit_interval("progress", progress)?;
    let loss = read_loss(spec)?;
    let (s, g) = (read_prob(pred)?, read_mask(gt)?);
    let r = composite_eval(&loss, &s, &g, progress)?;
    let mut out = json!({"value": r.total.value, "terms": r.terms});
    if let Some(path) = grad {
        out["grad"] = json!(write_volume(&Volume::Scalar(r.total.grad), path)?);
    }
    println!("{out}");
    Ok(())
}

fn grad_check_cmd(
    pred: &Path,
    gt: &Path,
    spec: &Path,
    eps: f64,
    tol: f64,
    max_voxels: Option<usize>,
    progress: f64,
) -> Outcome {
    if !(eps > 0.0 && tol > 0.0) {
        return Err(Failure::invalid("parameter", "--eps and --tol must be positive"));
    }
    if max_voxels == Some(0) {
        return Err(Failure::invalid("parameter", "--max-voxels must be positive"));
    }
    in_unit_interval("progress", progress)?;
    let loss = read_loss(spec)?;
    let (s, g) = (read_prob(pred)?, read_mask(gt)?);
    let opts = GradCheckOptions {
        eps,
        max_voxels,
        ..GradCheckOptions::default()
    };
    let report = grad_check(&loss, &s, &g, progress, &opts)?;
    let passed = report.max_rel_err < tol;
    let mut out = serde_json::to_value(&report).expect("serialisable report");
    out["tolerance"] = json!(tol);
    out["passed"] = json!(passed);
    println!("{out}");
    if passed {
        Ok(())
    } else {
        Err(Failure::computation(
            "tolerance_exceeded",
            format!(
                "max relative error {:e} >= {tol:e} at voxel {}",
                report.max_rel_err, report.worst_voxel
            ),
        ))
    }
}

fn eval(pred: &Path, gt: &Path, threshold: f64, conn: u32, format: Format) -> Outcome {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Failure::invalid(
            "parameter",
            format!("threshold {threshold} outside (0, 1)"),
        ));
    }
    let conn = connectivity(conn)?;
    let (s, g) = (read_prob(pred)?, read_mask(gt)?);
    let m = lesion_metrics(&binarize(&s, threshold)?, &g, conn)?;
    match format {
        Format::Json => {
            let mut out = serde_json::to_value(m).expect("serialisable metrics");
            out["threshold"] = json!(threshold);
            println!("{out}");
        }
        Format::Csv => println!("{CSV_HEADER}\n{}", csv_line(threshold, &m)),
    }
    Ok(())
}

/// `start..end:step` or `a,b,c`.
pub fn parse_thresholds(text: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::invalid("parameter", format!("cannot parse thresholds `{text}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let values = if let Some((start, rest)) = text.split_once("..") {
        let (end, step) = rest.split_once(':').ok_or_else(bad)?;
        let (start, end, step) = (num(start)?, num(end)?, num(step)?);
        if !(step > 0.0) || end < start {
            return Err(bad());
        }
        threshold_range(start, end, step)
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() {
        return Err(bad());
    }
    if let Some(t) = values.iter().find(|&&t| !(t > 0.0 && t < 1.0)) {
        return Err(Failure::invalid("parameter", format!("threshold {t} outside (0, 1)")));
    }
    Ok(values)
}

fn sweep(pred: &Path, gt: &Path, thresholds: &str, conn: u32, format: Format) -> Outcome {
    let thresholds = parse_thresholds(thresholds)?;
    let conn = connectivity(conn)?;
    let (s, g) = (read_prob(pred)?, read_mask(gt)?);
    let rows = threshold_sweep(&s, &g, &thresholds, conn)?;
    match format {
        Format::Csv => print!("{}", sweep_csv(&rows)),
        Format::Json => println!("{}", serde_json::to_string(&rows).expect("serialisable rows")),
    }
    Ok(())
}

fn phantom(spec: &Path, prefix: &Path) -> Outcome {
    let mut doc: Value = serde_json::from_str(&read_text(spec)?).map_err(GeoError::from)?;
    let perturb_spec: Option<PerturbSpec> = match doc.as_object_mut().and_then(|o| o.remove("perturb")) {
        Some(v) => Some(serde_json::from_value(v).map_err(GeoError::from)?),
        None => None,
    };
    let phantom_spec: PhantomSpec = serde_json::from_value(doc).map_err(GeoError::from)?;
    let p = generate_phantom(&phantom_spec)?;
    let prob = perturb_spec.as_ref().map(|ps| perturb(&p.mask, ps)).transpose()?;

    let mask_path = write_volume(&Volume::Mask(p.mask), prefix)?;
    let prob_path = match prob {
        Some(m) => Some(write_volume(&Volume::Prob(m), &with_suffix(prefix, ".prob"))?),
        None => None,
    };
    let manifest = json!({
        "spec": phantom_spec,
        "perturb": perturb_spec,
        "realized_components": p.realized_components,
        "lesions": p.lesions,
        "mask": mask_path,
        "prob": prob_path,
    });
    let manifest_path = with_suffix(prefix, ".manifest.json");
    write_text(
        &manifest_path,
        &serde_json::to_string_pretty(&manifest).expect("serialisable manifest"),
    )?;
    println!(
        "{}",
        json!({"manifest": manifest_path, "realized_components": p.realized_components})
    );
    Ok(())
}

fn optimize(gt: &Path, config: &Path, prefix: &Path, init_map: Option<&Path>) -> Outcome {
    let doc: OptimDocument = serde_json::from_str(&read_text(config)?).map_err(GeoError::from)?;
    let cfg = doc.to_config()?;
    let g = read_mask(gt)?;
    let start = init_map.map(read_prob).transpose()?;
    let t = optimize_from(&g, &cfg, start.as_ref())?;
    let csv_path = with_suffix(prefix, ".trajectory.csv");
    write_text(&csv_path, &t.to_csv())?;
    let map_path = write_volume(&Volume::Prob(t.final_map.clone()), prefix)?;
    let last = t.last();
    println!(
        "{}",
        json!({
            "steps": cfg.steps,
            "final_loss": last.loss,
            "final_dsc": last.dsc,
            "trajectory": csv_path,
            "map": map_path,
        })
    );
    Ok(())
}
