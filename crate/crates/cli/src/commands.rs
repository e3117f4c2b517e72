//! `check`, `solve` and `sweep`.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use bps_vortex::diagnostics::{
    check_flux, check_k_identity, check_symmetric_reduction, check_uniqueness, reconstruct_fields,
    refined_flux_error, relative_flux_errors, Tolerances,
};
use bps_vortex::io::write_fields;
use bps_vortex::{
    decay_rate, existence_condition, DiagnosticsReport, PlanarProblem, SolveResult,
    VortexError, VortexProblem, VortexSpec,
};
use log::{info, warn};
use rayon::prelude::*;

use crate::config::{Mode, RunConfig};
use crate::{Failure, EXIT_CHECKS, EXIT_GATE, EXIT_INADMISSIBLE, EXIT_NONCONVERGENCE, EXIT_OK};

/// Prints the existence report; exit 0 iff admissible.
pub fn check(cfg: &RunConfig) -> Result<u8, Failure> {
    if cfg.mode != Mode::Torus {
        return Err(Failure::parse("`check` applies to mode = \"torus\" only"));
    }
    let spec = cfg.spec()?;
    let gate = existence_condition(&spec)?;
    let area = spec.torus()?.area();
    println!("l = {}, |Omega| = {area:.9}", spec.l);
    println!("threshold (l+1)|Omega|/(4 pi) = {:.9}", gate.threshold);
    println!("component  N_j  margin  K_j");
    for (j, n) in spec.counts().iter().enumerate() {
        println!("{:>9}  {n:>3}  {:.9}  {:.9}", j + 1, gate.margins[j], gate.k[j]);
    }
    if gate.admissible {
        println!("admissible: every K_j > 0");
        Ok(EXIT_OK)
    } else {
        println!("inadmissible: {}", gate.describe_violation());
        Ok(EXIT_INADMISSIBLE)
    }
}

fn build_problem(cfg: &RunConfig, spec: VortexSpec) -> Result<VortexProblem, Failure> {
    Ok(match (cfg.mode, cfg.mu()) {
        (Mode::Plane, Some(mu)) => VortexProblem::Planar(PlanarProblem::with_mu(spec, mu)?),
        _ => VortexProblem::new(spec)?,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

/// Solves, writes artifacts under `out`; exit 0 iff converged and every
/// enabled check passes.
pub fn solve(cfg: &RunConfig, out: &Path, seed: u64, force: bool) -> Result<u8, Failure> {
    let spec = cfg.spec()?;
    let opts = cfg.solve_options(force);
    fs::create_dir_all(out).map_err(|e| Failure::io(format!("{}: {e}", out.display())))?;
    let problem = build_problem(cfg, spec.clone())?;
    if let VortexProblem::Periodic(p) = &problem {
        if !p.gate.admissible && !force {
            return Err(Failure::new(EXIT_GATE, p.gate.describe_violation()));
        }
    }

    let result = match problem.minimize(None, &opts) {
        Ok(r) => r,
        Err(VortexError::NonConvergence {
            iterations,
            grad_norm,
            residual,
            history,
        }) => {
            write(&out.join("iterations.csv"), &history.to_csv())?;
            return Err(Failure::new(
                EXIT_NONCONVERGENCE,
                format!("no convergence after {iterations} iterations (gradient norm {grad_norm:e}, residual {residual:e})"),
            ));
        }
        Err(e) => return Err(e.into()),
    };
    info!("converged in {} iterations", result.iterations);
    write(&out.join("iterations.csv"), &result.history.to_csv())?;
    let fields = reconstruct_fields(&result)?;
    write_fields(out, "exp_u", &result.exp_u)?;
    write_fields(out, "F", &fields.f)?;
    write_fields(out, "w", &result.w)?;

    let d = &cfg.diagnostics;
    let mut report = DiagnosticsReport::from_result(&result, Tolerances::for_grid(&result.grid))?;
    if let (VortexProblem::Periodic(p), true) = (&problem, d.k) {
        report = report.with_k_identity(&result, p)?;
    }
    if let Some(window) = d.decay {
        let fit = decay_rate(&result, window)?;
        write(&out.join("decay.csv"), &fit.to_csv())?;
        report.decay = Some(fit);
    }
    if d.uniqueness >= 2 {
        report.multistart_delta = Some(check_uniqueness(&problem, d.uniqueness, seed, &opts)?);
    }
    if d.symmetric {
        let s = check_symmetric_reduction(&spec, &opts)?;
        report.symmetric_delta = Some(s.spread);
        report.symmetric_oracle_delta = s.oracle_delta;
    }
    write(&out.join("diagnostics.json"), &report.to_json()?)?;

    let mut pass = true;
    for c in report.checks() {
        if c.name == "flux" && !d.flux {
            continue;
        }
        pass &= c.pass;
        println!(
            "{:<18} {:>12.4e}  limit {:>9.2e}  {}",
            c.name,
            c.value,
            c.limit,
            if c.pass { "ok" } else { "FAIL" }
        );
    }
    Ok(if pass { EXIT_OK } else { EXIT_CHECKS })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepParam {
    Nx,
    #[value(name = "R")]
    R,
    Mu,
}

/// One sweep row; `None` fields are not applicable to the run.
#[derive(Debug, Default)]
struct Row {
    residual: Option<f64>,
    flux_err_max: Option<f64>,
    k_err_max: Option<f64>,
    decay_rate: Option<f64>,
}

fn worst(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn sweep_config(cfg: &RunConfig, param: SweepParam, value: f64) -> Result<RunConfig, Failure> {
    let mut c = cfg.clone();
    let whole = |v: f64| -> Result<usize, Failure> {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Failure::parse(format!("sweep value {v} is not a positive integer")))
        }
    };
    match (param, c.mode) {
        (SweepParam::Nx, Mode::Torus) => {
            let t = c.torus.as_mut().expect("validated");
            let n = whole(value)?;
            // keep the aspect ratio of the sample grid
            t.ny = (n * t.ny).div_ceil(t.nx);
            t.nx = n;
        }
        (SweepParam::Nx, Mode::Plane) => {
            let p = c.plane.as_mut().expect("validated");
            let n = whole(value)?;
            p.ny = (n * p.ny).div_ceil(p.nx);
            p.nx = n;
        }
        (SweepParam::R, Mode::Plane) => {
            // fixed spacing, so the box grows with R
            let p = c.plane.as_mut().expect("validated");
            let scale = value / p.r;
            p.nx = (p.nx as f64 * scale).round() as usize;
            p.ny = (p.ny as f64 * scale).round() as usize;
            p.r = value;
        }
        (SweepParam::Mu, Mode::Plane) => c.plane.as_mut().expect("validated").mu = Some(value),
        (_, Mode::Torus) => return Err(Failure::parse("sweeps over `R` and `mu` need mode = \"plane\"")),
    }
    Ok(c)
}

fn sweep_row(cfg: &RunConfig, param: SweepParam, value: f64) -> Result<Row, Failure> {
    let c = sweep_config(cfg, param, value)?;
    let problem = build_problem(&c, c.spec()?)?;
    let opts = c.solve_options(false);
    let result: SolveResult = problem.minimize(None, &opts)?;
    let mut row = Row {
        residual: Some(result.residual),
        ..Row::default()
    };
    match &problem {
        VortexProblem::Periodic(p) => {
            // on-grid flux is exact to rounding; measure it on a refined grid
            let err = refined_flux_error(p, &result, 2)?;
            row.flux_err_max = Some(worst(&relative_flux_errors_from(&err, &result.counts)));
            let k = check_k_identity(&result, p)?;
            row.k_err_max = Some(k.iter().zip(&p.k).map(|(d, k)| (d / k).abs()).fold(0.0, f64::max));
        }
        VortexProblem::Planar(_) => {
            row.flux_err_max = Some(worst(&relative_flux_errors(&check_flux(&result)?, &result.counts)));
            if let Some(window) = c.diagnostics.decay {
                row.decay_rate = Some(decay_rate(&result, window)?.rate);
            }
        }
    }
    Ok(row)
}

/// Signed flux errors scaled like [`relative_flux_errors`].
fn relative_flux_errors_from(err: &[f64], counts: &[usize]) -> Vec<f64> {
    err.iter()
        .zip(counts)
        .map(|(e, &n)| e / (4.0 * PI * n.max(1) as f64))
        .collect()
}

/// One solve per value; failed runs keep their row with `NaN` entries.
pub fn sweep(cfg: &RunConfig, param: SweepParam, values: &[f64], out: &Path) -> Result<u8, Failure> {
    fs::create_dir_all(out).map_err(|e| Failure::io(format!("{}: {e}", out.display())))?;
    let rows: Vec<Row> = values
        .par_iter()
        .map(|&v| {
            sweep_row(cfg, param, v).unwrap_or_else(|f| {
                warn!("sweep value {v}: {}", f.message);
                Row {
                    residual: Some(f64::NAN),
                    flux_err_max: Some(f64::NAN),
                    k_err_max: Some(f64::NAN),
                    decay_rate: Some(f64::NAN),
                }
            })
        })
        .collect();

    let name = match param {
        SweepParam::Nx => "nx",
        SweepParam::R => "R",
        SweepParam::Mu => "mu",
    };
    let path = out.join(format!("sweep_{name}.csv"));
    let io = |e: csv::Error| Failure::io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(&path).map_err(io)?;
    w.write_record(["value", "residual", "flux_err_max", "K_err_max", "decay_rate"]).map_err(io)?;
    let cell = |x: Option<f64>| x.map_or_else(String::new, |v| format!("{v:e}"));
    for (v, r) in values.iter().zip(&rows) {
        w.write_record([
            v.to_string(),
            cell(r.residual),
            cell(r.flux_err_max),
            cell(r.k_err_max),
            cell(r.decay_rate),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    println!("{}", path.display());
    Ok(EXIT_OK)
}
