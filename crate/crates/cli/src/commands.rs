//! The five subcommands.

use std::fs;
use std::path::Path;

use log::info;
use serde::Serialize;
use twistwave_core::{
    assemble_h_beta0, build_cross_section, compute_bound, direct_spectrum, ground_state_with,
    radius, verify_inequality, BoundReport, DirectResult, ShapeSpec, Verdict, Verification,
};

use crate::config::{RunConfig, SweepAxis};
use crate::Failure;

/// Factor applied to the bound by the hidden self-test hook of `verify`.
pub const CORRUPTION_FACTOR: f64 = 1e-9;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a RunConfig,
    result: T,
}

/// Effective settings after command-line overrides.
pub struct Context<'a> {
    pub config: &'a RunConfig,
    pub out: &'a Path,
    pub seed: u64,
}

impl Context<'_> {
    fn write_report<T: Serialize>(&self, command: &str, result: T) -> Result<(), Failure> {
        let env = Envelope { command, version: env!("CARGO_PKG_VERSION"), seed: self.seed, config: self.config, result };
        let mut body = serde_json::to_vec_pretty(&env).map_err(|e| Failure::Solver(e.to_string()))?;
        body.push(b'\n');
        self.write("report.json", &body)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.out.join(name);
        fs::write(&path, bytes).map_err(|e| Failure::Solver(format!("cannot write {}: {e}", path.display())))?;
        info!("wrote {}", path.display());
        Ok(())
    }

    fn csv(&self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), Failure> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Failure::Solver(e.to_string());
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(&r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Failure::Solver(e.to_string()))?;
        self.write(name, &bytes)
    }

    fn bound_config(&self) -> twistwave_core::BoundConfig {
        let mut b = self.config.bound.clone();
        b.eigen.seed = self.seed;
        b
    }

    fn direct_config(&self) -> twistwave_core::DirectConfig {
        let mut d = self.config.direct.to_config();
        d.eigen.seed = self.seed;
        d
    }
}

fn solver(e: twistwave_core::Error) -> Failure {
    Failure::Solver(e.to_string())
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Serialize)]
struct CrossSectionResult {
    h: f64,
    nodes: usize,
    area: f64,
    /// Largest node distance from the origin.
    d: f64,
    analytic_radius: f64,
    beta0: f64,
    energy: f64,
    degeneracy: usize,
    gap: Option<f64>,
    margin: f64,
    floor_nodes: usize,
    iterations: usize,
    eigenvalues: Vec<f64>,
}

pub fn cross_section(ctx: &Context) -> Result<(), Failure> {
    let cfg = ctx.config;
    let cs = build_cross_section(&cfg.shape, cfg.h).map_err(solver)?;
    let h0 = assemble_h_beta0(&cs, cfg.profile.beta0);
    let mut eigen = cfg.bound.eigen;
    eigen.seed = ctx.seed;
    let g = ground_state_with(&h0, &eigen).map_err(solver)?;
    let d = radius(&cs);
    println!("E = {:.10}", g.energy);
    println!("d = {d:.6}");

    let rows = g
        .low
        .eigenvalues
        .iter()
        .zip(&g.low.residuals)
        .enumerate()
        .map(|(k, (l, r))| vec![k.to_string(), num(*l), num(*r)])
        .collect();
    ctx.csv("spectrum.csv", &["index", "eigenvalue", "residual"], rows)?;
    let mut field = Vec::new();
    cs.write_csv(&mut field, &[("f", &g.vector)]).map_err(solver)?;
    ctx.write("field_f.csv", &field)?;
    ctx.write_report(
        "cross-section",
        CrossSectionResult {
            h: cs.spacing(),
            nodes: cs.len(),
            area: cs.area(),
            d,
            analytic_radius: cfg.shape.analytic_radius(),
            beta0: cfg.profile.beta0,
            energy: g.energy,
            degeneracy: g.degeneracy,
            gap: g.gap,
            margin: g.margin,
            floor_nodes: g.floor_nodes,
            iterations: g.iterations,
            eigenvalues: g.low.eigenvalues.clone(),
        },
    )
}

fn run_bound(ctx: &Context) -> Result<BoundReport, Failure> {
    let cfg = ctx.config;
    let cs = build_cross_section(&cfg.shape, cfg.h).map_err(solver)?;
    let profile = cfg.profile.build().map_err(solver)?;
    compute_bound(&cs, &profile, &ctx.bound_config()).map_err(solver)
}

fn per_s_rows(r: &BoundReport) -> Vec<Vec<String>> {
    r.per_s.iter().map(|row| vec![num(row.s), row.n_neg.to_string(), num(row.trace_power)]).collect()
}

pub fn bound(ctx: &Context) -> Result<(), Failure> {
    let r = run_bound(ctx)?;
    println!("bound = {:e} ({}, h = {})", r.bound, r.label, r.h);
    ctx.csv("per_s.csv", &["s", "n_neg", "trace_power"], per_s_rows(&r))?;
    ctx.write_report("bound", &r)
}

fn run_direct(ctx: &Context) -> Result<DirectResult, Failure> {
    let cfg = ctx.config;
    let cs = build_cross_section(&cfg.shape, cfg.h).map_err(solver)?;
    let profile = cfg.profile.build().map_err(solver)?;
    direct_spectrum(&cs, &profile, cfg.bound.sigma, &ctx.direct_config()).map_err(solver)
}

fn direct_rows(d: &DirectResult) -> Vec<Vec<String>> {
    d.eigenvalues
        .iter()
        .enumerate()
        .map(|(k, l)| vec![k.to_string(), num(*l), num(d.threshold - l)])
        .collect()
}

pub fn direct(ctx: &Context) -> Result<(), Failure> {
    let d = run_direct(ctx)?;
    println!("{} eigenvalues below E = {:.8}, moment = {:e}", d.eigenvalues.len(), d.threshold, d.moment);
    ctx.csv("spectrum.csv", &["index", "eigenvalue", "binding"], direct_rows(&d))?;
    ctx.write_report("direct", &d)
}

#[derive(Serialize)]
struct VerifyResult<'a> {
    verification: Verification,
    corrupted: bool,
    bound: &'a BoundReport,
    direct: &'a DirectResult,
}

pub fn verify(ctx: &Context, corrupt: bool) -> Result<(), Failure> {
    if !ctx.config.direct.enabled {
        return Err(Failure::Config("verify needs [direct] enabled = true in the config".into()));
    }
    let mut r = run_bound(ctx)?;
    if corrupt {
        r.bound *= CORRUPTION_FACTOR;
        r.notes.push(format!("bound multiplied by {CORRUPTION_FACTOR:e} by the self-test hook"));
    }
    let d = run_direct(ctx)?;
    let v = verify_inequality(&d, &r);
    println!(
        "{}: moment = {:e}, bound = {:e}, ratio = {:e}, h = {}",
        if v.verdict == Verdict::Pass { "PASS" } else { "FAIL" },
        v.moment,
        v.bound,
        v.ratio,
        v.h
    );
    ctx.csv("per_s.csv", &["s", "n_neg", "trace_power"], per_s_rows(&r))?;
    ctx.csv("spectrum.csv", &["index", "eigenvalue", "binding"], direct_rows(&d))?;
    let verdict = v.verdict;
    ctx.write_report("verify", VerifyResult { verification: v, corrupted: corrupt, bound: &r, direct: &d })?;
    match verdict {
        Verdict::Pass => Ok(()),
        Verdict::Fail => Err(Failure::Verify),
    }
}

#[derive(Serialize)]
struct SweepRow {
    value: f64,
    h: f64,
    bound: Option<f64>,
    n_neg_s0: Option<usize>,
    energy: Option<f64>,
    d: Option<f64>,
    label: Option<&'static str>,
    angular_energy_ratio: Option<f64>,
    angular_energy_floor: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct SweepResult {
    axis: &'static str,
    /// Least-squares slope of `ln bound` against `ln value`.
    slope: Option<f64>,
    rows: Vec<SweepRow>,
}

fn sweep_case(ctx: &Context, axis: SweepAxis, value: f64) -> Result<(ShapeSpec, f64, f64), String> {
    let cfg = ctx.config;
    let (shape, h, a) = match axis {
        SweepAxis::EllipseEps => match cfg.shape {
            ShapeSpec::Disc | ShapeSpec::Ellipse { .. } => (ShapeSpec::Ellipse { eccentricity: value }, cfg.h, cfg.profile.a),
            _ => return Err("ellipse-eps sweeps need a disc or ellipse shape".into()),
        },
        SweepAxis::RibbonK => match cfg.shape {
            ShapeSpec::Ribbon { width, .. } => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(format!("ribbon level must be a positive integer, got {value}"));
                }
                (ShapeSpec::Ribbon { level: value as u32, width }, cfg.h, cfg.profile.a)
            }
            _ => return Err("ribbon-k sweeps need a ribbon shape".into()),
        },
        SweepAxis::Resolution => (cfg.shape.clone(), value, cfg.profile.a),
        SweepAxis::Amplitude => (cfg.shape.clone(), cfg.h, value),
    };
    Ok((shape, h, a))
}

fn sweep_row(ctx: &Context, axis: SweepAxis, value: f64) -> SweepRow {
    let mut row = SweepRow {
        value,
        h: ctx.config.h,
        bound: None,
        n_neg_s0: None,
        energy: None,
        d: None,
        label: None,
        angular_energy_ratio: None,
        angular_energy_floor: None,
        error: None,
    };
    let outcome = sweep_case(ctx, axis, value).and_then(|(shape, h, a)| {
        row.h = h;
        let cs = build_cross_section(&shape, h).map_err(|e| e.to_string())?;
        let mut p = ctx.config.profile.clone();
        p.a = a;
        let profile = p.build().map_err(|e| e.to_string())?;
        compute_bound(&cs, &profile, &ctx.bound_config()).map_err(|e| e.to_string())
    });
    match outcome {
        Ok(r) => {
            row.bound = Some(r.bound);
            row.n_neg_s0 = Some(r.per_s[r.n_q / 2].n_neg);
            row.energy = Some(r.energy);
            row.d = Some(r.d);
            row.label = Some(r.label);
            row.angular_energy_ratio = r.ribbon.as_ref().map(|d| d.angular_energy_ratio);
            row.angular_energy_floor = r.ribbon.as_ref().map(|d| d.angular_energy_floor);
        }
        Err(e) => {
            log::warn!("sweep value {value}: {e}");
            row.error = Some(e);
        }
    }
    row
}

fn fitted_slope(rows: &[SweepRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.bound.filter(|b| *b > 0.0 && r.value > 0.0).map(|b| (r.value.ln(), b.ln())))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

pub fn sweep(ctx: &Context, axis: SweepAxis, values: &[f64]) -> Result<(), Failure> {
    if values.is_empty() {
        return Err(Failure::Config(format!("sweep over {} has no values", axis.name())));
    }
    let rows: Vec<SweepRow> = values.iter().map(|&v| sweep_row(ctx, axis, v)).collect();
    let slope = if axis == SweepAxis::EllipseEps { fitted_slope(&rows) } else { None };

    let mut header = vec!["value", "h", "bound", "n_neg_s0", "E", "d"];
    if axis == SweepAxis::EllipseEps {
        header.push("slope");
    }
    if axis == SweepAxis::RibbonK {
        header.extend(["angular_energy_ratio", "angular_energy_floor"]);
    }
    header.push("status");
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    let table = rows
        .iter()
        .map(|r| {
            let mut rec = vec![
                num(r.value),
                num(r.h),
                opt(r.bound),
                r.n_neg_s0.map(|n| n.to_string()).unwrap_or_default(),
                opt(r.energy),
                opt(r.d),
            ];
            if axis == SweepAxis::EllipseEps {
                rec.push(opt(slope));
            }
            if axis == SweepAxis::RibbonK {
                rec.push(opt(r.angular_energy_ratio));
                rec.push(opt(r.angular_energy_floor));
            }
            rec.push(r.error.clone().unwrap_or_else(|| r.label.unwrap_or("").to_string()));
            rec
        })
        .collect();
    ctx.csv("sweep.csv", &header, table)?;
    for r in &rows {
        match (&r.bound, &r.error) {
            (Some(b), _) => println!("{} = {}: bound = {b:e}", axis.name(), r.value),
            (None, Some(e)) => println!("{} = {}: failed: {e}", axis.name(), r.value),
            _ => {}
        }
    }
    if let Some(s) = slope {
        println!("log-log slope = {s:.4}");
    }
    let all_failed = rows.iter().all(|r| r.error.is_some());
    ctx.write_report("sweep", SweepResult { axis: axis.name(), slope, rows })?;
    if all_failed {
        return Err(Failure::Solver("every sweep value failed".into()));
    }
    Ok(())
}
