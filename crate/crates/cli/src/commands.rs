use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use evsample::integrator::{ratio_lower_bound, slopes_and_ratio, EllipsoidBound};
use evsample::io::{to_json, write_grid_csv, write_polyline_csv, write_tradeoff_csv, DesignReport};
use evsample::lqg::{design_lqg, validate_plant, ResetSystem};
use evsample::sim::{tradeoff_sweep, SweepFamily, TradeoffPoint};
use evsample::stefan::{extract_boundary, stefan_solve};
use serde::Serialize;

use crate::config::{positive_list, RunConfig};
use crate::error::CliError;

pub struct Ctx {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub quiet: bool,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn path(&self, name: &str) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(&self.out)?;
        Ok(self.out.join(name))
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.path(name)?;
        let f = File::create(&path)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
        Ok(BufWriter::new(f))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.path(name)?;
        write_text(&path, &(to_json(value)? + "\n"))?;
        Ok(path)
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

struct Resolved {
    sys: ResetSystem,
    gamma0: f64,
    report: Option<DesignReport>,
}

fn resolve_system(cfg: &RunConfig) -> Result<Resolved, CliError> {
    if let Some(plant) = &cfg.plant {
        let violations = validate_plant(plant);
        if !violations.is_empty() {
            return Err(CliError::Validation(violations));
        }
        let report = DesignReport::new(plant, design_lqg(plant)?);
        return Ok(Resolved {
            sys: report.reset_system.clone(),
            gamma0: report.gamma0,
            report: Some(report),
        });
    }
    let rs = cfg.reset_system.as_ref().expect("config has a system");
    let s = &rs.system;
    let sys = ResetSystem::new(s.a.clone(), s.q.clone(), s.r.clone())?;
    Ok(Resolved { sys, gamma0: rs.gamma0, report: None })
}

pub fn design(cfg: &RunConfig, ctx: &Ctx) -> Result<(), CliError> {
    if cfg.plant.is_none() {
        return Err(CliError::Validation(vec!["design needs a [plant] section".into()]));
    }
    let report = resolve_system(cfg)?.report.expect("plant was given");
    let path = ctx.write_json("design.json", &report)?;
    ctx.say(format!("gamma0 = {:.10}", report.gamma0));
    ctx.say(format!("wrote {}", path.display()));
    Ok(())
}

pub fn bound(cfg: &RunConfig, ctx: &Ctx) -> Result<(), CliError> {
    let Resolved { sys, .. } = resolve_system(cfg)?;
    if sys.is_integrator() {
        positive_list("bound.rho", &cfg.bound.rho)?;
        let bounds = cfg
            .bound
            .rho
            .iter()
            .map(|&rho| EllipsoidBound::optimal(&sys.q, &sys.r, rho))
            .collect::<Result<Vec<_>, _>>()?;
        let path = ctx.write_json("bounds.json", &bounds)?;
        for (k, b) in bounds.iter().enumerate() {
            ctx.say(format!("rho = {}: boundary x'Px = {:.10}", b.rho, b.level()));
            if sys.dim() == 2 {
                write_polyline_csv(ctx.create(&format!("ellipse_{k}.csv"))?, &b.boundary_points(256)?)?;
            }
        }
        ctx.say(format!("wrote {}", path.display()));
        return Ok(());
    }

    positive_list("bound.J", &cfg.bound.j)?;
    let mut first_err = None;
    for (k, &j) in cfg.bound.j.iter().enumerate() {
        let result = cfg.grid.resolve(&sys, j).and_then(|spec| stefan_solve(&sys, j, &spec));
        match result {
            Ok(grid) => {
                let poly = extract_boundary(&grid)?;
                write_grid_csv(ctx.create(&format!("grid_{k}.csv"))?, &grid)?;
                write_polyline_csv(ctx.create(&format!("boundary_{k}.csv"))?, &poly.points)?;
                ctx.say(format!(
                    "J = {j}: rho = {:.6e}, area = {:.6e}, convexity defect = {:.3e}",
                    grid.rho_effective,
                    poly.area(),
                    poly.convexity_defect()
                ));
            }
            Err(e) => {
                eprintln!("J = {j}: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) => Err(e.into()),
        None => {
            ctx.say(format!("wrote grids to {}", ctx.out.display()));
            Ok(())
        }
    }
}

/// Least-squares slope of `J_H` against `h_avg` through the origin.
fn slope(points: &[TradeoffPoint]) -> Option<f64> {
    let (num, den) = points
        .iter()
        .filter(|p| p.h_avg.is_finite())
        .fold((0.0, 0.0), |(n, d), p| (n + p.h_avg * p.j_h_hat, d + p.h_avg * p.h_avg));
    (den > 0.0).then(|| num / den)
}

pub fn tradeoff(cfg: &RunConfig, ctx: &Ctx) -> Result<(), CliError> {
    let Resolved { sys, gamma0, .. } = resolve_system(cfg)?;
    let sim = cfg.sim.resolve(ctx.seed);
    let t = &cfg.tradeoff;

    let mut sweeps = Vec::new();
    if !t.periodic_h.is_empty() {
        positive_list("tradeoff.periodic_h", &t.periodic_h)?;
        sweeps.push((SweepFamily::Periodic, t.periodic_h.clone()));
    }
    if sys.is_integrator() && !t.rho.is_empty() {
        positive_list("tradeoff.rho", &t.rho)?;
        sweeps.push((SweepFamily::Ellipsoid, t.rho.clone()));
    } else if !sys.is_integrator() && !t.j.is_empty() {
        positive_list("tradeoff.J", &t.j)?;
        sweeps.push((SweepFamily::GridBoundary(cfg.grid.clone()), t.j.clone()));
    }
    if sweeps.is_empty() {
        let event = if sys.is_integrator() { "rho" } else { "J" };
        return Err(CliError::Validation(vec![format!(
            "tradeoff needs periodic_h or {event} values in [tradeoff]"
        )]));
    }

    let mut rows: Vec<TradeoffPoint> = Vec::new();
    let mut fits = Vec::new();
    for (family, values) in &sweeps {
        let outcome = tradeoff_sweep(&sys, gamma0, family, values, &sim)?;
        for (v, e) in &outcome.errors {
            eprintln!("{} point {v}: {e}", family_name(family));
        }
        if let Some(s) = slope(&outcome.points) {
            fits.push((family_name(family), s));
        }
        rows.extend(outcome.points);
    }
    if rows.is_empty() {
        return Err(CliError::NoPoints);
    }
    let path = ctx.path("tradeoff.csv")?;
    write_tradeoff_csv(ctx.create("tradeoff.csv")?, &rows)?;

    ctx.say(format!("gamma0 = {gamma0:.10}"));
    for p in &rows {
        ctx.say(format!(
            "{:>9} param = {:<10} h_avg = {:.6}  J_z = {:.6}  (J_H = {:.6} ± {:.2e})",
            p.scheme, p.param, p.h_avg, p.j_z_hat, p.j_h_hat, p.stderr
        ));
    }
    if sys.is_integrator() {
        for (name, s) in &fits {
            ctx.say(format!("fitted {name} slope: J_z ≈ gamma0 + {s:.4}·h_avg"));
        }
    }
    ctx.say(format!("wrote {}", path.display()));
    Ok(())
}

fn family_name(f: &SweepFamily) -> &'static str {
    match f {
        SweepFamily::Periodic => "periodic",
        SweepFamily::Ellipsoid => "ellipsoid",
        SweepFamily::GridBoundary(_) => "grid",
    }
}

#[derive(Serialize)]
struct RatioReport {
    #[serde(rename = "J_p")]
    j_p: f64,
    #[serde(rename = "J_e")]
    j_e: f64,
    #[serde(rename = "J_ratio")]
    j_ratio: f64,
    lower_bound: f64,
    upper_bound: f64,
    within_bounds: bool,
}

pub fn ratio(cfg: &RunConfig, ctx: &Ctx) -> Result<(), CliError> {
    let Resolved { sys, .. } = resolve_system(cfg)?;
    if !sys.is_integrator() {
        return Err(CliError::Validation(vec!["ratio needs an integrator reset system (A = 0)".into()]));
    }
    let s = slopes_and_ratio(&sys.q, &sys.r)?;
    let n = sys.dim();
    let lower = ratio_lower_bound(n);
    let tol = 1e-12 * lower;
    let within =
        if n == 1 { (s.j_ratio - 3.0).abs() <= tol } else { s.j_ratio >= lower - tol && s.j_ratio < 3.0 };
    let report = RatioReport {
        j_p: s.j_p,
        j_e: s.j_e,
        j_ratio: s.j_ratio,
        lower_bound: lower,
        upper_bound: 3.0,
        within_bounds: within,
    };
    let path = ctx.write_json("ratio.json", &report)?;
    ctx.say(format!("J_p     = {:.10}", s.j_p));
    ctx.say(format!("J_e     = {:.10}", s.j_e));
    ctx.say(format!("J_ratio = {:.10}", s.j_ratio));
    ctx.say(format!("bounds  [{lower:.6}, 3): {}", if within { "satisfied" } else { "VIOLATED" }));
    ctx.say(format!("wrote {}", path.display()));
    Ok(())
}
