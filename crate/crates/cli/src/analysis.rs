use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fetalign::dataset::{load_cohort, read_landmarks, read_transform, SubjectId, SubjectRecord};
use fetalign::hulls::build_structure_map;
use fetalign::landmarks::{LandmarkSet, Structure};
use fetalign::metrics::{
    compare_arms, evaluate_subject, read_comparison_csv, read_metric_csv, write_comparison_csv, write_metric_csv, Arm,
    MetricRow,
};
use fetalign::registration::RegistrationMethod;
use fetalign::transform::{warp_image, warp_points};

use crate::pipeline::REFERENCE_DIR;
use crate::plot::{boxplot, quantile};
use crate::{create_dir, warn, write_file, CliError, CliResult, Context};

fn registered_reference(dir: &Path) -> CliResult<SubjectRecord<f64>> {
    let refdir = dir.join(REFERENCE_DIR);
    let mut found = load_cohort::<f64>(&refdir)?;
    match found.len() {
        1 => Ok(found.remove(0)),
        n => Err(CliError::Fatal(format!("expected one reference subject in {}, found {n}", refdir.display()))),
    }
}

/// `<id>_registered.csv` files of one method directory, sorted by id.
fn registered_landmarks(dir: &Path) -> CliResult<Vec<(SubjectId, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Fatal(fetalign::Error::io(dir, e).to_string()))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::Fatal(fetalign::Error::io(dir, e).to_string()))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(stem) = name.strip_suffix("_registered.csv") {
            if let Ok(id) = stem.parse::<SubjectId>() {
                out.push((id, path));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn parse_structures(list: Option<&str>) -> CliResult<Vec<Structure>> {
    let Some(list) = list else {
        return Ok(Structure::ALL.into_iter().filter(|s| s.has_area()).collect());
    };
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let s: Structure = name.parse().map_err(|e: fetalign::Error| CliError::Usage(e.to_string()))?;
        if !s.has_area() {
            warn(format!("{s} has {} landmarks; no map is built for it", s.expected_points()));
        } else if !out.contains(&s) {
            out.push(s);
        }
    }
    Ok(out)
}

pub fn maps(ctx: &Context, structures: Option<&str>) -> CliResult {
    let input = ctx.input()?;
    let out = ctx.output()?;
    let structures = parse_structures(structures)?;
    let reference = registered_reference(input)?;
    let (w, h) = (reference.image.width(), reference.image.height());
    let mut summary = String::from("method,structure,n_subjects,skipped,plateau_pixels,support_pixels\n");
    for method in &ctx.cfg.methods {
        let dir = input.join(method.slug());
        if !dir.is_dir() {
            let msg = format!("no registered outputs for {method} in {}", dir.display());
            if ctx.cfg.keep_going {
                warn(msg);
                continue;
            }
            return Err(CliError::Fatal(msg));
        }
        let mut cohort: Vec<LandmarkSet<f64>> = vec![reference.landmarks.clone()];
        let mut ids = vec![reference.id];
        for (id, path) in registered_landmarks(&dir)? {
            match read_landmarks::<f64>(&path) {
                Ok(lm) => {
                    cohort.push(lm);
                    ids.push(id);
                }
                Err(e) if ctx.cfg.keep_going => warn(format!("skipping subject {id}: {e}")),
                Err(e) => return Err(e.into()),
            }
        }
        let mdir = out.join(method.slug());
        create_dir(&mdir)?;
        for &s in &structures {
            let sm = build_structure_map(&cohort, s, w, h, ctx.cfg.alpha)?;
            for (i, why) in &sm.skipped {
                warn(format!("{method} {s}: subject {} left out of the map: {why}", ids[*i]));
            }
            let base = mdir.join(s.name());
            sm.map.save_image(&base.with_extension("png"))?;
            sm.map.save_csv(&base.with_extension("csv"))?;
            sm.map.save_overlay(&reference.image, &mdir.join(format!("{}_overlay.png", s.name())))?;
            let plateau = sm.map.plateau().count();
            let support = sm.map.counts().iter().filter(|&&c| c > 0).count();
            writeln!(
                summary,
                "{},{},{},{},{plateau},{support}",
                method.label(),
                s.name(),
                sm.map.n_subjects(),
                sm.skipped.len()
            )
            .unwrap();
        }
    }
    create_dir(out)?;
    write_file(&out.join("maps_summary.csv"), &summary)?;
    eprintln!("built {} map(s) per method", structures.len());
    Ok(())
}

pub fn evaluate(ctx: &Context, registered: &Path) -> CliResult {
    let input = ctx.input()?;
    let out = ctx.output()?;
    let cohort = load_cohort::<f64>(input)?;
    let reference = registered_reference(registered)?;
    let (w, h) = (reference.image.width(), reference.image.height());
    let mut methods: Vec<RegistrationMethod> = Vec::new();
    for &m in &ctx.cfg.methods {
        let dir = registered.join(m.slug());
        if dir.is_dir() {
            methods.push(m);
        } else if ctx.cfg.keep_going {
            warn(format!("no registered outputs for {m} in {}", dir.display()));
        } else {
            return Err(CliError::Fatal(format!("no registered outputs for {m} in {}", dir.display())));
        }
    }
    let moving: Vec<&SubjectRecord<f64>> = cohort.iter().filter(|s| s.id != reference.id).collect();
    let alpha = ctx.cfg.alpha;
    let per = ctx.per_subject(&moving, "evaluation", |s| {
        let mut reports = evaluate_subject(
            Arm::Original,
            &reference.landmarks,
            &reference.image,
            &s.landmarks,
            &resize(&s.image, w, h)?,
            alpha,
        )?;
        for &m in &methods {
            let t = read_transform::<f64>(&registered.join(m.slug()).join(format!("{}_transform.txt", s.id)))?;
            let img = warp_image(&s.image, &t, w, h)?;
            let lm = s.landmarks.map_points(|p| warp_points(&t, &[p])[0]);
            reports.extend(evaluate_subject(Arm::Method(m), &reference.landmarks, &reference.image, &lm, &img, alpha)?);
        }
        Ok(MetricRow::from_reports(s.id, &reports))
    })?;
    let rows: Vec<MetricRow> = per.into_iter().flat_map(|(_, r)| r).collect();
    let arms: Vec<Arm> = methods.iter().map(|&m| Arm::Method(m)).collect();
    let comparisons = compare_arms(&rows, &arms);
    create_dir(out)?;
    write_metric_csv(&rows, &out.join("metrics.csv"))?;
    write_comparison_csv(&comparisons, &out.join("comparisons.csv"))?;
    eprintln!("evaluated {} subjects; {} comparison(s)", moving.len(), comparisons.len());
    Ok(())
}

/// Identity warp onto the reference grid, so SSIM sees equal sizes.
fn resize(img: &fetalign::Image, w: usize, h: usize) -> fetalign::Result<fetalign::Image> {
    if img.width() == w && img.height() == h {
        return Ok(img.clone());
    }
    warp_image(img, &fetalign::Affine::identity(), w, h)
}

struct Summary {
    n: usize,
    median: f64,
    q1: f64,
    q3: f64,
    mean: f64,
}

fn summarize(v: &mut [f64]) -> Summary {
    v.sort_by(|a, b| a.total_cmp(b));
    Summary {
        n: v.len(),
        median: quantile(v, 0.5),
        q1: quantile(v, 0.25),
        q3: quantile(v, 0.75),
        mean: v.iter().sum::<f64>() / v.len() as f64,
    }
}

fn method_order(label: &str) -> usize {
    std::iter::once("Original")
        .chain(RegistrationMethod::ALL.iter().map(|m| m.label()))
        .position(|l| l == label)
        .unwrap_or(usize::MAX)
}

pub fn report(ctx: &Context) -> CliResult {
    let input = ctx.input()?;
    let out = ctx.output()?;
    let rows = read_metric_csv(&input.join("metrics.csv"))?;
    let comparisons = read_comparison_csv(&input.join("comparisons.csv"))?;
    if rows.is_empty() {
        return Err(CliError::Fatal(format!("{} has no rows", input.join("metrics.csv").display())));
    }
    // (metric, structure, method order, method) -> values
    let mut groups: BTreeMap<(String, String, usize, String), Vec<f64>> = BTreeMap::new();
    for r in &rows {
        groups
            .entry((r.metric.clone(), r.structure.clone(), method_order(&r.method), r.method.clone()))
            .or_default()
            .push(r.value);
    }
    create_dir(out)?;
    let mut csv = String::from("method,structure,metric,n,median,q1,q3,mean\n");
    let mut md = String::from("# Registration report\n\n| metric | structure | method | n | median | IQR |\n|---|---|---|---|---|---|\n");
    let mut plots: BTreeMap<String, Vec<(usize, Vec<f64>)>> = BTreeMap::new();
    for ((metric, structure, order, method), vals) in &groups {
        let mut v = vals.clone();
        let s = summarize(&mut v);
        writeln!(csv, "{method},{structure},{metric},{},{},{},{},{}", s.n, s.median, s.q1, s.q3, s.mean).unwrap();
        writeln!(md, "| {metric} | {structure} | {method} | {} | {:.4} | {:.4}–{:.4} |", s.n, s.median, s.q1, s.q3).unwrap();
        plots.entry(metric.clone()).or_default().push((*order, v));
    }
    if !comparisons.is_empty() {
        md.push_str("\n## Paired signed-rank tests\n\n| metric | structure | A | B | p | |\n|---|---|---|---|---|---|\n");
        for c in &comparisons {
            let p = c.p_value.map_or("NA".to_string(), |p| format!("{p:.3e}"));
            writeln!(md, "| {} | {} | {} | {} | {p} | {} |", c.metric, c.structure, c.method_a, c.method_b, c.stars).unwrap();
        }
    }
    md.push_str("\nBoxplots: one PNG per metric, boxes grouped by structure and coloured by method (grey = Original).\n");
    write_file(&out.join("summary.csv"), &csv)?;
    write_file(&out.join("report.md"), &md)?;
    for (metric, g) in &plots {
        let path = out.join(format!("{metric}_boxplot.png"));
        boxplot(g).save(&path).map_err(|e| fetalign::dataset::image_error(&path, e))?;
    }
    eprintln!("summarized {} metric rows", rows.len());
    Ok(())
}
