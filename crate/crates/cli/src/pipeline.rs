use std::fmt::Write as _;

use fetalign::dataset::{image_error, load_cohort, save_registered, save_subject, select_reference, SubjectRecord};
use fetalign::geometry::EllipseParams;
use fetalign::phantom::{generate_cohort, write_truths, CohortConfig};
use fetalign::registration::{fit_skull, run_method_prepared, ReferenceFrame};
use fetalign::segmentation::fallback_skull_mask;
use rayon::prelude::*;

use crate::plot::draw_ellipse;
use crate::{create_dir, write_file, CliError, CliResult, Context};

pub const TRUTH_FILE: &str = "ground_truth.txt";
pub const MANIFEST_FILE: &str = "manifest.csv";
pub const REFERENCE_DIR: &str = "reference";

pub fn synth(ctx: &Context, n: usize, speckle: f64) -> CliResult {
    if n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let out = ctx.output()?;
    let cohort = generate_cohort(&CohortConfig {
        n,
        seed: ctx.cfg.seed,
        reference_id: ctx.cfg.reference_id.subject_id,
        speckle_sigma: speckle,
        ..CohortConfig::default()
    })?;
    create_dir(out)?;
    cohort
        .subjects
        .par_iter()
        .map(|s| save_subject(s, out))
        .collect::<fetalign::Result<Vec<()>>>()?;
    write_truths(&cohort.truths, &out.join(TRUTH_FILE))?;
    eprintln!("wrote {n} phantom subjects to {}", out.display());
    Ok(())
}

fn load(ctx: &Context) -> CliResult<Vec<SubjectRecord<f64>>> {
    let input = ctx.input()?;
    let cohort = load_cohort::<f64>(input)?;
    if cohort.is_empty() {
        return Err(CliError::Fatal(format!("no subjects found in {}", input.display())));
    }
    Ok(cohort)
}

pub fn segment(ctx: &Context) -> CliResult {
    let cohort = load(ctx)?;
    let out = ctx.output()?;
    create_dir(out)?;
    let all: Vec<&SubjectRecord<f64>> = cohort.iter().collect();
    let done = ctx.per_subject(&all, "segmentation", |s| {
        let mask = fallback_skull_mask(&s.image)?;
        mask.save(&out.join(format!("{}_mask.png", s.id)))
    })?;
    eprintln!("wrote {} masks to {}", done.len(), out.display());
    Ok(())
}

fn ellipse_row(p: &EllipseParams<f64>) -> String {
    format!("{},{},{},{},{}", p.a(), p.b(), p.x0(), p.y0(), p.theta())
}

pub fn fit(ctx: &Context) -> CliResult {
    let cohort = load(ctx)?;
    let out = ctx.output()?;
    create_dir(out)?;
    let all: Vec<&SubjectRecord<f64>> = cohort.iter().collect();
    let fits = ctx.per_subject(&all, "ellipse fit", |s| {
        let fit = fit_skull(s)?;
        let overlay = draw_ellipse(&s.image, &fit.params);
        let path = out.join(format!("{}_fit.png", s.id));
        overlay.save(&path).map_err(|e| image_error(&path, e))?;
        Ok(fit)
    })?;
    let mut csv = String::from("subject_id,scan_index,a,b,x0,y0,theta,inliers,points,converged\n");
    for (id, f) in &fits {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            id.subject_id,
            id.scan_index,
            ellipse_row(&f.params),
            f.inlier_count(),
            f.inlier_mask.len(),
            f.converged
        )
        .unwrap();
    }
    write_file(&out.join("fits.csv"), &csv)?;
    eprintln!("fitted {} skulls", fits.len());
    Ok(())
}

pub fn register(ctx: &Context) -> CliResult {
    let cohort = load(ctx)?;
    let out = ctx.output()?;
    let reference = select_reference(&cohort, Some(ctx.cfg.reference_id))?;
    let frame = ReferenceFrame::prepare(reference)?;
    create_dir(out)?;
    save_subject(reference, &out.join(REFERENCE_DIR))?;
    for m in &ctx.cfg.methods {
        create_dir(&out.join(m.slug()))?;
    }
    let moving: Vec<&SubjectRecord<f64>> = cohort.iter().filter(|s| s.id != reference.id).collect();
    let mut manifest = String::from("subject_id,scan_index,method,status,converged,steps,start_loss,final_loss,message\n");
    let mut failures = 0usize;
    for &method in &ctx.cfg.methods {
        let dir = out.join(method.slug());
        let results: Vec<_> = moving
            .par_iter()
            .map(|s| {
                let r = run_method_prepared(method, s, &frame, &ctx.cfg.refine)?;
                save_registered(s, &r, &dir, ctx.cfg.format)?;
                Ok::<_, fetalign::Error>(r)
            })
            .collect();
        for (s, r) in moving.iter().zip(results) {
            let id = s.id;
            match r {
                Ok(r) => {
                    let (start, end) = match (r.loss_trace.first(), r.loss_trace.last()) {
                        (Some(a), Some(b)) => (a.to_string(), b.to_string()),
                        _ => (String::new(), String::new()),
                    };
                    let steps = r.loss_trace.len().saturating_sub(1);
                    writeln!(
                        manifest,
                        "{},{},{},ok,{},{steps},{start},{end},",
                        id.subject_id, id.scan_index, method, r.converged
                    )
                    .unwrap();
                }
                Err(e) if ctx.cfg.keep_going => {
                    failures += 1;
                    crate::warn(format!("{method} registration failed for subject {id}: {e}"));
                    let msg = e.to_string().replace([',', '\n'], ";");
                    writeln!(manifest, "{},{},{},failed,false,0,,,{msg}", id.subject_id, id.scan_index, method).unwrap();
                }
                Err(e) => return Err(CliError::Fatal(format!("{method} registration failed for subject {id}: {e}"))),
            }
        }
    }
    write_file(&out.join(MANIFEST_FILE), &manifest)?;
    eprintln!(
        "registered {} subjects with {} method(s); {failures} failure(s)",
        moving.len(),
        ctx.cfg.methods.len()
    );
    Ok(())
}
