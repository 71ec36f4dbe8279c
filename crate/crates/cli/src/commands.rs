use std::fs;
use std::path::Path;

use fiberspec::disorder::{count_range_violations, kunz_containment, numerical_range_sample, DisorderRealization};
use fiberspec::finite::{equivalence_check, finite_spectrum_capped, gap_scaling as fit_gap, FiniteFiber};
use fiberspec::model::{Boundary, Builtin, LindbladModel};
use fiberspec::numerics::{eigenvalues, hausdorff_distance, pseudospectrum_grid, GridBox};
use fiberspec::spectrum::{closed_form_spectrum, full_spectrum, SpectrumCloud};
use serde_json::json;

use crate::output::{empty_summary, to_json_bytes, Run};
use crate::{Bc, CliError, Format, ModelArgs};

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn load_model(args: &ModelArgs) -> Result<LindbladModel, CliError> {
    match (&args.model, &args.builtin) {
        (Some(path), None) => {
            if args.g.is_some() {
                return Err(CliError::Input("--G cannot be combined with --model; G comes from the file".into()));
            }
            let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            Ok(LindbladModel::from_json(&text)?)
        }
        (None, Some(tag)) => {
            let g = args.g.ok_or_else(|| CliError::Input("--builtin needs --G".into()))?;
            Ok(LindbladModel::builtin(tag.parse::<Builtin>()?, g)?)
        }
        (None, None) => Err(CliError::Input("give either --model FILE or --builtin NAME --G VALUE".into())),
        (Some(_), Some(_)) => Err(CliError::Input("--model and --builtin are exclusive".into())),
    }
}

fn cloud_bytes(cloud: &SpectrumCloud, format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Csv => Ok(cloud.to_csv().into_bytes()),
        Format::Json => to_json_bytes(cloud),
    }
}

fn read_cloud(path: &Path) -> Result<SpectrumCloud, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(SpectrumCloud::from_csv(&text)?)
}

pub fn spectrum(args: &ModelArgs, qpoints: usize, thetapoints: usize, out: &Path, format: Format) -> Result<(), CliError> {
    let run = Run::start("spectrum");
    if qpoints < 4 || thetapoints < 4 {
        return Err(CliError::Input("--qpoints and --thetapoints must be at least 4".into()));
    }
    let m = load_model(args)?;
    let cloud = full_spectrum(&m, qpoints, thetapoints)?;
    let summary = json!({
        "points": cloud.len(),
        "nhe_points": cloud.values_with_tag(fiberspec::spectrum::Tag::Nhe).len(),
        "jump_points": cloud.values_with_tag(fiberspec::spectrum::Tag::Jump).len(),
    });
    run.finish(
        out,
        &cloud_bytes(&cloud, format)?,
        Some(m.to_json_value()),
        json!({ "qpoints": qpoints, "thetapoints": thetapoints }),
        vec![],
        summary,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn finite(
    args: &ModelArgs,
    n: usize,
    bc: Bc,
    lambda: Option<f64>,
    seed: u64,
    cap: usize,
    out: &Path,
    format: Format,
) -> Result<(), CliError> {
    let run = Run::start("finite");
    let m = load_model(args)?;
    let potential = lambda.map(|l| DisorderRealization::new(n, l, seed)).transpose()?;
    let cloud = finite_spectrum_capped(&m, n, bc.into(), potential.as_ref().map(|p| p.values.as_slice()), cap)?;
    let seeds = if potential.is_some() { vec![seed] } else { vec![] };
    run.finish(
        out,
        &cloud_bytes(&cloud, format)?,
        Some(m.to_json_value()),
        json!({ "n": n, "bc": format!("{bc:?}").to_lowercase(), "lambda": lambda, "cap": cap }),
        seeds,
        json!({ "points": cloud.len() }),
    )
}

pub fn compare(a: &Path, b: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let run = Run::start("compare");
    let (ca, cb) = (read_cloud(a)?, read_cloud(b)?);
    let d = hausdorff_distance(&ca.values(), &cb.values())?;
    println!("{}", fmt_float(d));
    if let Some(out) = out {
        let body = json!({ "a": a.display().to_string(), "b": b.display().to_string(), "hausdorff": d });
        run.finish(out, &to_json_bytes(&body)?, None, json!(null), vec![], empty_summary())?;
    }
    Ok(())
}

pub fn closed_form(builtin: &str, g: f64, spacing: f64, out: &Path, format: Format) -> Result<(), CliError> {
    let run = Run::start("closed-form");
    if !(spacing > 0.0) {
        return Err(CliError::Input("--spacing must be positive".into()));
    }
    let kind: Builtin = builtin.parse()?;
    let cf = closed_form_spectrum(kind, g)?;
    let payload = match format {
        Format::Json => to_json_bytes(&cf)?,
        Format::Csv => {
            let mut s = String::from("re,im\n");
            for z in cf.sample(spacing) {
                s.push_str(&format!("{},{}\n", fmt_float(z.re), fmt_float(z.im)));
            }
            s.into_bytes()
        }
    };
    run.finish(
        out,
        &payload,
        Some(LindbladModel::builtin(kind, g)?.to_json_value()),
        json!({ "spacing": spacing }),
        vec![],
        empty_summary(),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn pseudospectrum(
    args: &ModelArgs,
    n: usize,
    bc: Bc,
    fiber_k: Option<usize>,
    bounds: [Option<f64>; 4],
    (nx, ny): (usize, usize),
    cap: usize,
    out: &Path,
) -> Result<(), CliError> {
    let run = Run::start("pseudospectrum");
    let m = load_model(args)?;
    let matrix = match fiber_k {
        Some(k) => {
            if bc != Bc::Periodic {
                return Err(CliError::Input("--fiber-k needs --bc periodic".into()));
            }
            FiniteFiber::new(&m, n, k)?.matrix()
        }
        None => {
            let dim = n * n;
            if dim > cap {
                return Err(fiberspec::Error::SizeTooLarge { dim, cap }.into());
            }
            m.vectorized_lindbladian(n, bc.into(), None)?
        }
    };
    let eig = eigenvalues(&matrix)?;
    let (mut lo_re, mut hi_re, mut lo_im, mut hi_im) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for z in &eig {
        lo_re = lo_re.min(z.re);
        hi_re = hi_re.max(z.re);
        lo_im = lo_im.min(z.im);
        hi_im = hi_im.max(z.im);
    }
    let pad = 0.5;
    let bx = GridBox {
        re_min: bounds[0].unwrap_or(lo_re - pad),
        re_max: bounds[1].unwrap_or(hi_re + pad),
        im_min: bounds[2].unwrap_or(lo_im - pad),
        im_max: bounds[3].unwrap_or(hi_im + pad),
    };
    let field = pseudospectrum_grid(&matrix, bx, nx, ny)?;
    if !field.box_contains_spectrum {
        eprintln!("warning: the grid box does not contain the whole spectrum");
    }
    let mut csv = String::from("re,im,sigma_min\n");
    for (iy, im) in field.im.iter().enumerate() {
        for (ix, re) in field.re.iter().enumerate() {
            csv.push_str(&format!("{},{},{}\n", fmt_float(*re), fmt_float(*im), fmt_float(field.values[[iy, ix]])));
        }
    }
    run.finish(
        out,
        csv.as_bytes(),
        Some(m.to_json_value()),
        json!({
            "n": n, "bc": format!("{bc:?}").to_lowercase(), "fiber_k": fiber_k,
            "box": [bx.re_min, bx.re_max, bx.im_min, bx.im_max], "nx": nx, "ny": ny,
        }),
        vec![],
        json!({ "box_contains_spectrum": field.box_contains_spectrum }),
    )
}

pub fn gap_scaling(g: f64, sizes: &[usize], out: &Path) -> Result<(), CliError> {
    let run = Run::start("gap-scaling");
    let report = fit_gap(g, sizes)?;
    run.finish(
        out,
        &to_json_bytes(&report)?,
        Some(LindbladModel::dephasing(g)?.to_json_value()),
        json!({ "sizes": sizes }),
        vec![],
        empty_summary(),
    )
}

pub fn equivalence(args: &ModelArgs, sizes: &[usize], out: &Path) -> Result<(), CliError> {
    let run = Run::start("equivalence");
    let m = load_model(args)?;
    let rows = sizes
        .iter()
        .map(|&n| Ok(json!({ "n": n, "residual": equivalence_check(&m, n)? })))
        .collect::<Result<Vec<_>, CliError>>()?;
    run.finish(
        out,
        &to_json_bytes(&json!({ "rows": rows }))?,
        Some(m.to_json_value()),
        json!({ "n": sizes }),
        vec![],
        empty_summary(),
    )
}

pub fn range(g: f64, n: usize, lambda: f64, seed: u64, samples: usize, out: &Path) -> Result<(), CliError> {
    let run = Run::start("range");
    let m = LindbladModel::dephasing(g)?;
    let v = DisorderRealization::new(n, lambda, seed)?;
    let s = numerical_range_sample(&m, &v.values, samples, seed)?;
    let viol = count_range_violations(&s, g, lambda, 1e-9)?;
    let mut csv = String::from("re,im,a\n");
    for p in &s {
        csv.push_str(&format!("{},{},{}\n", fmt_float(p.z.re), fmt_float(p.z.im), fmt_float(p.a)));
    }
    run.finish(
        out,
        csv.as_bytes(),
        Some(m.to_json_value()),
        json!({ "n": n, "lambda": lambda, "samples": samples }),
        vec![seed],
        serde_json::to_value(viol).map_err(|e| CliError::Io(e.to_string()))?,
    )
}

pub fn containment(
    args: &ModelArgs,
    n: usize,
    lambda: f64,
    seeds: &[u64],
    directions: usize,
    out: &Path,
) -> Result<(), CliError> {
    let run = Run::start("containment");
    let m = load_model(args)?;
    let report = kunz_containment(&m, n, lambda, seeds, directions)?;
    run.finish(
        out,
        &to_json_bytes(&report)?,
        Some(m.to_json_value()),
        json!({ "n": n, "lambda": lambda, "directions": directions, "bc": Boundary::Periodic }),
        seeds.to_vec(),
        json!({ "all_contained": report.all_contained() }),
    )
}
