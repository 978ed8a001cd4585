use std::fmt::Write as _;
use std::path::Path;

use lsd_lab::config::EnsembleSettings;
use lsd_lab::field::{
    format_real, parse_model, symmetrize_density, DensityGrid, FieldModel, ProfileFunction,
};
use lsd_lab::sim::{default_contour, ensemble_esd, inversion_nodes, EnsembleResult};
use lsd_lab::solver::{solve_curve, solve_product_form, SolverConfig};
use lsd_lab::stieltjes::{
    invert_to_distribution, kolmogorov_distance, levy_distance, CurvePoint, CurveSource,
    DistributionTable, StieltjesCurve, TAIL_MASS_WARNING,
};
use num_complex::Complex64;
use serde_json::json;

use crate::contour::parse_contour;
use crate::manifest::ManifestBuilder;
use crate::{Failure, DensityArgs, SolveArgs, SimulateArgs, CompareArgs};
use crate::{EXIT_SIMULATION, EXIT_THRESHOLD};

pub const DENSITY_FILE: &str = "density.csv";
pub const CURVE_FILE: &str = "curve.csv";
pub const DISTRIBUTION_FILE: &str = "distribution.csv";
pub const EIGENVALUES_FILE: &str = "eigenvalues.csv";
pub const ESD_FILE: &str = "esd.csv";
pub const RUN_LOG_FILE: &str = "run_log.jsonl";

/// Relative tolerance for recognizing a rank-one density.
const RANK_ONE_TOLERANCE: f64 = 1e-10;

fn load_model(mb: &mut ManifestBuilder, path: &Path) -> Result<FieldModel, Failure> {
    let text = mb.read_input(path)?;
    parse_model(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn check_grid(n: usize) -> Result<(), Failure> {
    if n == 0 {
        return Err(Failure::input("--grid must be at least 1"));
    }
    Ok(())
}

fn record_key_values(mb: &mut ManifestBuilder, prefix: &str, text: &str) {
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            mb.config(&format!("{prefix}{}", k.trim()), v.trim());
        }
    }
}

pub fn density(args: &DensityArgs) -> Result<(), Failure> {
    check_grid(args.grid)?;
    let mut mb = ManifestBuilder::new("density", &args.out_dir)?;
    let model = load_model(&mut mb, &args.model)?;
    let mut b = model.density(args.grid, args.radius)?;
    if args.symmetrize {
        b = symmetrize_density(&b);
    }
    mb.config("model", args.model.display());
    mb.config("grid", args.grid);
    mb.config("symmetrize", args.symmetrize);
    if let Some(r) = args.radius {
        mb.config("radius", r);
    }
    mb.diagnostic("mass", format_real(b.mass()));
    mb.write_output(DENSITY_FILE, &b.to_csv(), true)?;
    mb.finish()?;
    println!("grid={} mass={}", b.size(), format_real(b.mass()));
    Ok(())
}

fn product_form_curve(
    b: &DensityGrid,
    contour: &[Complex64],
    cfg: &SolverConfig,
) -> Result<StieltjesCurve, Failure> {
    let t = ProfileFunction::from_rank_one(b, RANK_ONE_TOLERANCE)?;
    let points = contour
        .iter()
        .map(|&z| {
            let sol = solve_product_form(&t, z, cfg)?;
            Ok(CurvePoint {
                z,
                s: sol.s,
                iterations: sol.iterations,
                residual: sol.residual,
            })
        })
        .collect::<lsd_lab::Result<Vec<_>>>()?;
    Ok(StieltjesCurve::new(points, CurveSource::Solver)?)
}

fn warn_tail(table: &DistributionTable, name: &str) {
    if table.uncaptured_mass() > TAIL_MASS_WARNING {
        eprintln!(
            "warning: {name} misses mass {} outside its grid",
            format_real(table.uncaptured_mass())
        );
    }
}

pub fn solve(args: &SolveArgs) -> Result<(), Failure> {
    let mut mb = ManifestBuilder::new("solve", &args.out_dir)?;
    let cfg = match &args.config {
        Some(path) => {
            let text = mb.read_input(path)?;
            SolverConfig::from_key_values(&text)
                .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?
        }
        None => SolverConfig::default(),
    };
    record_key_values(&mut mb, "solver.", &cfg.to_key_values());

    let mut b = match (&args.density, &args.model) {
        (Some(path), _) => {
            let text = mb.read_input(path)?;
            mb.config("density", path.display());
            DensityGrid::from_csv(&text)
                .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?
        }
        (None, Some(path)) => {
            check_grid(args.grid)?;
            let model = load_model(&mut mb, path)?;
            mb.config("model", path.display());
            mb.config("grid", args.grid);
            if let Some(r) = args.radius {
                mb.config("radius", r);
            }
            model.density(args.grid, args.radius)?
        }
        (None, None) => return Err(Failure::input("one of --density or --model is required")),
    };
    if args.symmetrize {
        b = symmetrize_density(&b);
    }
    mb.config("symmetrize", args.symmetrize);
    mb.config("product_form", args.product_form);

    let contour = match &args.contour {
        Some(spec) => parse_contour(spec)?,
        None => default_contour(b.mass()),
    };
    mb.config(
        "contour",
        args.contour.clone().unwrap_or_else(|| "default".into()),
    );

    let curve = if args.product_form {
        product_form_curve(&b, &contour, &cfg)?
    } else {
        solve_curve(&b, &contour, &cfg)?
    };
    let max_residual = curve.points().iter().map(|p| p.residual).fold(0.0, f64::max);
    let iterations: usize = curve.points().iter().map(|p| p.iterations).sum();
    mb.diagnostic("points", curve.len());
    mb.diagnostic("max_residual", format_real(max_residual));
    mb.diagnostic("total_iterations", iterations);
    mb.write_output(CURVE_FILE, &curve.to_csv(), true)?;

    let nodes = inversion_nodes(&contour);
    if curve.horizontal_height().is_some() && nodes.len() >= 2 {
        let table = invert_to_distribution(&curve, &nodes)?;
        warn_tail(&table, DISTRIBUTION_FILE);
        mb.diagnostic("uncaptured_mass", format_real(table.uncaptured_mass()));
        mb.write_output(DISTRIBUTION_FILE, &table.to_csv(), true)?;
    } else {
        eprintln!("note: contour does not support inversion, {DISTRIBUTION_FILE} not written");
    }
    mb.finish()?;
    if let [p] = curve.points() {
        println!("re_S={} im_S={}", format_real(p.s.re), format_real(p.s.im));
    }
    println!(
        "points={} max_residual={} iterations={iterations}",
        curve.len(),
        format_real(max_residual)
    );
    Ok(())
}

fn eigenvalue_csv(result: &EnsembleResult) -> String {
    let mut out = String::from("replicate,eigenvalue\n");
    for (r, spec) in result.spectra.iter().enumerate() {
        for &l in &spec.eigenvalues {
            let _ = writeln!(out, "{r},{}", format_real(l));
        }
    }
    out
}

fn run_log(result: &EnsembleResult) -> String {
    let mut out = String::new();
    for rec in &result.records {
        let line = json!({
            "replicate": rec.replicate,
            "seed": rec.seed,
            "n": rec.n,
            "wall_time_s": rec.wall_time_s,
            "min_eigenvalue": rec.min_eigenvalue,
            "max_eigenvalue": rec.max_eigenvalue,
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

pub fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let mut mb = ManifestBuilder::new("simulate", &args.out_dir)?;
    let text = mb.read_input(&args.config)?;
    let mut settings = EnsembleSettings::from_key_values(&text)
        .map_err(|e| Failure::input(format!("{}: {e}", args.config.display())))?;
    if let Some(seed) = args.seed {
        settings.seed = seed;
    }
    if let Some(r) = args.replicates {
        settings.replicates = r;
    }
    let base = args.config.parent().unwrap_or(Path::new("."));
    let model = match settings.model_path(base) {
        Some(path) => load_model(&mut mb, &path)?,
        None => FieldModel::iid(1.0),
    };
    let cfg = settings.with_model(model)?;
    record_key_values(&mut mb, "", &settings.to_key_values());
    let contour = match &args.contour {
        Some(spec) => parse_contour(spec)?,
        None => default_contour(cfg.limit_mass()),
    };
    mb.config(
        "contour",
        args.contour.clone().unwrap_or_else(|| "default".into()),
    );
    let outside = !cfg.within_hypotheses();
    mb.outside_hypotheses(outside);

    let result = ensemble_esd(&cfg, &contour)
        .map_err(|e| Failure::new(EXIT_SIMULATION, format!("simulation failed: {e}")))?;
    mb.write_output(EIGENVALUES_FILE, &eigenvalue_csv(&result), true)?;
    match &result.table {
        Some(table) => {
            warn_tail(table, ESD_FILE);
            mb.diagnostic("uncaptured_mass", format_real(table.uncaptured_mass()));
            mb.write_output(ESD_FILE, &table.to_csv(), true)?;
        }
        None => eprintln!("note: contour does not support inversion, {ESD_FILE} not written"),
    }
    mb.write_output(CURVE_FILE, &result.curve.to_csv(), true)?;
    mb.write_output(RUN_LOG_FILE, &run_log(&result), false)?;
    mb.finish()?;
    if outside {
        eprintln!("warning: outside the solver hypotheses (wigner model with asymmetric covariance)");
    }
    println!(
        "replicates={} eigenvalues={} outside_hypotheses={outside}",
        cfg.replicates,
        result.pooled.len()
    );
    Ok(())
}

enum Artifact {
    Table(DistributionTable),
    Curve(StieltjesCurve),
}

fn load_artifact(path: &Path) -> Result<Artifact, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    let parsed = if text.starts_with("# source=") {
        StieltjesCurve::from_csv(&text).map(Artifact::Curve)
    } else {
        DistributionTable::from_csv(&text).map(Artifact::Table)
    };
    parsed.map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

/// Distances between two artifacts; `None` where undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub levy: Option<f64>,
    pub kolmogorov: Option<f64>,
    pub sup_curve_gap: Option<f64>,
}

fn curve_metrics(a: &StieltjesCurve, b: &StieltjesCurve) -> Result<Metrics, Failure> {
    let gap = a.sup_gap(b).map_err(Failure::input)?;
    let contour: Vec<Complex64> = a.points().iter().map(|p| p.z).collect();
    let nodes = inversion_nodes(&contour);
    let (mut levy, mut kolmogorov) = (None, None);
    if a.horizontal_height().is_some() && nodes.len() >= 2 {
        let ta = invert_to_distribution(a, &nodes).map_err(Failure::input)?;
        let tb = invert_to_distribution(b, &nodes).map_err(Failure::input)?;
        levy = Some(levy_distance(&ta, &tb));
        kolmogorov = Some(kolmogorov_distance(&ta, &tb));
    }
    Ok(Metrics {
        levy,
        kolmogorov,
        sup_curve_gap: Some(gap),
    })
}

pub fn compute_metrics(a: &Path, b: &Path) -> Result<Metrics, Failure> {
    match (load_artifact(a)?, load_artifact(b)?) {
        (Artifact::Table(ta), Artifact::Table(tb)) => Ok(Metrics {
            levy: Some(levy_distance(&ta, &tb)),
            kolmogorov: Some(kolmogorov_distance(&ta, &tb)),
            sup_curve_gap: None,
        }),
        (Artifact::Curve(ca), Artifact::Curve(cb)) => curve_metrics(&ca, &cb),
        _ => Err(Failure::input("cannot compare a distribution table with a curve")),
    }
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "na".to_string(), format_real)
}

fn check_threshold(name: &str, value: Option<f64>, threshold: Option<f64>) -> Result<bool, Failure> {
    match (value, threshold) {
        (_, None) => Ok(true),
        (Some(v), Some(t)) => Ok(v <= t),
        (None, Some(_)) => Err(Failure::input(format!("{name} is undefined for these inputs"))),
    }
}

pub fn compare(args: &CompareArgs) -> Result<(), Failure> {
    let m = compute_metrics(&args.a, &args.b)?;
    println!("levy={}", show(m.levy));
    println!("kolmogorov={}", show(m.kolmogorov));
    println!("sup_curve_gap={}", show(m.sup_curve_gap));
    let k_ok = check_threshold("kolmogorov", m.kolmogorov, args.threshold_k)?;
    let l_ok = check_threshold("levy", m.levy, args.threshold_levy)?;
    if k_ok && l_ok {
        Ok(())
    } else {
        Err(Failure::new(EXIT_THRESHOLD, "distance above threshold"))
    }
}
