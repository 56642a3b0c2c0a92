//! Command-line front end. Exit codes: 0 on success, 1 when a run fails,
//! 2 for malformed usage or config (clap's own usage errors also exit 2).

use crate::config::{load_config, RunConfig};
use crate::error::{Error, Result};
use crate::experiments::{self, Study};
use crate::output::{self, resolve_out_dir};
use crate::runner::Pool;
use crate::table::MetricTable;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use stochlab_core::drift::LpsExponents;
use stochlab_core::flow::{backward_flow, forward_flow};
use stochlab_core::transport::{weak_residual_report, Route, WeakSolution};
use stochlab_core::BrownianPath;

#[derive(Parser, Debug)]
#[command(
    name = "stochlab",
    about = "transport by rough divergence-free drifts under additive noise",
    version
)]
pub struct Cli {
    /// Run configuration file (key = value lines with [sections])
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; defaults to $STOCHLAB_OUT, then ./out
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed override
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the studies
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the integrability index d/p + 2/q
    LpsCheck {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
    },
    /// Integrate one characteristic trajectory and dump it
    Flow {
        /// forward or backward
        #[arg(long, default_value = "forward")]
        direction: String,
        /// Start point, comma-separated
        #[arg(long, default_value = "0.5,0.0")]
        start: String,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        /// Defaults to the configured horizon
        #[arg(long)]
        to: Option<f64>,
    },
    /// Evaluate the solution on the quadrature grid at one time
    Solve {
        /// Defaults to the configured experiment.time
        #[arg(long)]
        time: Option<f64>,
        /// representation, auxiliary, or frozen
        #[arg(long, default_value = "representation")]
        route: String,
    },
    /// Weak-form residual battery
    Residual,
    /// Strong convergence of the characteristic scheme
    Converge,
    /// Mollification ladder against the auxiliary reference
    Uniqueness,
    /// Datum-perturbation stability studies
    Stability {
        /// weak, strong, or both
        #[arg(long, default_value = "both")]
        mode: String,
    },
    /// Modulus-of-continuity persistence
    Persistence,
    /// Frozen-path versus Brownian-path mollification sensitivity
    NoiseCompare,
    /// Exploratory sweep across singularity strengths
    Sharpness,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    for warning in cfg.exponent_warnings() {
        eprintln!("warning: {warning}");
    }
    Ok(cfg)
}

fn make_pool(cli: &Cli) -> Result<Pool> {
    let workers = cli.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get().min(8))
            .unwrap_or(1)
    });
    Pool::new(workers)
}

fn parse_point(raw: &str, dimension: usize) -> Result<Vec<f64>> {
    let point: Vec<f64> = raw
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad coordinate {part:?} in --start")))
        })
        .collect::<Result<_>>()?;
    if point.len() != dimension {
        return Err(Error::invalid(format!(
            "--start has {} coordinates for dimension {dimension}",
            point.len()
        )));
    }
    Ok(point)
}

fn print_study(study: &Study) {
    println!("study {} (seed {})", study.name, study.seed);
    for (key, value) in &study.metrics {
        println!("  {key} = {value}");
    }
    if study.replicate_failures > 0 {
        println!("  replicate_failures = {}", study.replicate_failures);
    }
    for artifact in &study.artifacts {
        println!("  wrote {artifact}");
    }
    match study.passed {
        Some(ok) => println!("  verdict: {}", if ok { "pass" } else { "FAIL" }),
        None => println!("  verdict: none (measurement only)"),
    }
}

/// Prints the study and converts a failed verdict into the exit-1 path.
fn gate(study: Study) -> Result<()> {
    print_study(&study);
    if study.passed == Some(false) {
        return Err(Error::StudyFailed(study.name));
    }
    Ok(())
}

fn run_flow(cli: &Cli, direction: &str, start: &str, from: f64, to: Option<f64>) -> Result<()> {
    let cfg = load(cli)?;
    let drift = cfg.build_drift()?;
    let path = BrownianPath::sample(cfg.seed, cfg.dimension, cfg.horizon, cfg.n_steps)?;
    let x = parse_point(start, cfg.dimension)?;
    let to = to.unwrap_or(cfg.horizon);
    let traj = match direction {
        "forward" => forward_flow(&drift, &path, &x, from, to)?,
        "backward" => backward_flow(&drift, &path, &x, from, to)?,
        other => {
            return Err(Error::invalid(format!(
                "--direction must be forward or backward, got {other:?}"
            )))
        }
    };
    let dir = resolve_out_dir(cli.out.as_deref()).join("flow");
    output::write_text(&dir.join("trajectory.csv"), &traj.dump_csv())?;
    output::write_text(&dir.join("config.txt"), &cfg.echo())?;
    let terminal = traj.terminal_position();
    println!(
        "{direction} flow over [{from}, {to}]: terminal {}",
        terminal
            .iter()
            .map(|v| format!("{v:.6}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!("wrote {}", dir.join("trajectory.csv").display());
    Ok(())
}

fn run_solve(cli: &Cli, time: Option<f64>, route: &str) -> Result<()> {
    let cfg = load(cli)?;
    let drift = cfg.build_drift()?;
    let datum = cfg.build_datum()?;
    let path = BrownianPath::sample(cfg.seed, cfg.dimension, cfg.horizon, cfg.n_steps)?;
    let t = time.unwrap_or(cfg.experiment.time);
    let route = match route {
        "representation" => Route::Representation,
        "auxiliary" => Route::Auxiliary,
        "frozen" => Route::FrozenDatum,
        other => {
            return Err(Error::invalid(format!(
                "--route must be representation, auxiliary, or frozen, got {other:?}"
            )))
        }
    };
    let ws = match route {
        Route::Auxiliary => WeakSolution::auxiliary(drift, path, datum)?,
        _ => WeakSolution::new(drift, path, datum, route)?,
    };
    let quad = cfg.build_quadrature()?;
    let grid = quad.grid()?;
    let pool = make_pool(cli)?;
    let nodes: Vec<Vec<f64>> = grid.iter().map(|(x, _)| x).collect();
    let values = pool.try_map(&nodes, |x| Ok(ws.evaluate(t, x)?))?;

    let mut columns: Vec<String> = (1..=cfg.dimension).map(|i| format!("x{i}")).collect();
    columns.push("u".to_string());
    let column_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut table = MetricTable::new(&column_refs);
    let mut sup = 0.0f64;
    for (x, &u) in nodes.iter().zip(&values) {
        sup = sup.max(u.abs());
        let mut row: Vec<crate::table::Cell> = x.iter().map(|&c| c.into()).collect();
        row.push(u.into());
        table.push(row)?;
    }
    let dir = resolve_out_dir(cli.out.as_deref()).join("solve");
    output::write_csv(&dir.join("field.csv"), &table)?;
    output::write_text(&dir.join("config.txt"), &cfg.echo())?;
    println!("u({t}, .) on {} nodes: sup {sup:.6}", nodes.len());
    println!("wrote {}", dir.join("field.csv").display());
    Ok(())
}

fn run_residual(cli: &Cli) -> Result<()> {
    let cfg = load(cli)?;
    if cfg.n_steps % 4 != 0 {
        return Err(Error::invalid("n_steps must be divisible by 4"));
    }
    let drift = cfg.build_drift()?;
    let datum = cfg.build_datum()?;
    let quad = cfg.build_quadrature()?;
    let path = BrownianPath::sample(cfg.seed, cfg.dimension, cfg.horizon, cfg.n_steps)?;
    let ws = WeakSolution::representation(drift, path.clone(), datum)?;

    let battery = experiments::residual_battery(&quad)?;
    let mut table = MetricTable::new(&[
        "phi_id",
        "t",
        "pairing_t",
        "pairing_0",
        "drift_term",
        "strat_term",
        "residual",
        "nodes",
        "steps",
        "seed",
    ]);
    let mut worst = 0.0f64;
    for (phi_id, phi) in battery.iter().enumerate() {
        for k in 1..=4usize {
            let t = path.time(k * cfg.n_steps / 4);
            let report = weak_residual_report(&ws, phi, t, &quad)?;
            worst = worst.max(report.residual.abs());
            table.push(vec![
                phi_id.into(),
                t.into(),
                report.pairing_t.into(),
                report.pairing_0.into(),
                report.drift_term.into(),
                report.strat_term.into(),
                report.residual.into(),
                quad.nodes_per_axis.into(),
                cfg.n_steps.into(),
                cfg.seed.into(),
            ])?;
        }
    }
    let dir = resolve_out_dir(cli.out.as_deref()).join("residual");
    output::write_csv(&dir.join("residuals.csv"), &table)?;
    output::write_text(&dir.join("config.txt"), &cfg.echo())?;
    println!("max |residual| over the battery: {worst:.3e}");
    println!("wrote {}", dir.join("residuals.csv").display());
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::LpsCheck { d, p, q } => {
            let exps = LpsExponents::new(*d, *p, *q);
            let index = exps.index()?;
            let satisfied = exps.satisfied()?;
            println!("index={index:.6} satisfied={satisfied}");
            Ok(())
        }
        Command::Flow {
            direction,
            start,
            from,
            to,
        } => run_flow(cli, direction, start, *from, *to),
        Command::Solve { time, route } => run_solve(cli, *time, route),
        Command::Residual => run_residual(cli),
        Command::Converge => {
            let cfg = load(cli)?;
            let pool = make_pool(cli)?;
            let dir = resolve_out_dir(cli.out.as_deref()).join("converge");
            gate(experiments::converge::run(&cfg, &dir, &pool)?)
        }
        Command::Uniqueness => {
            let cfg = load(cli)?;
            let pool = make_pool(cli)?;
            let dir = resolve_out_dir(cli.out.as_deref()).join("uniqueness");
            gate(experiments::uniqueness::run(&cfg, &dir, &pool)?)
        }
        Command::Stability { mode } => {
            let cfg = load(cli)?;
            let pool = make_pool(cli)?;
            let base = resolve_out_dir(cli.out.as_deref());
            if mode == "weak" || mode == "both" {
                let dir = base.join("stability_weak");
                gate(experiments::stability::run_weak(&cfg, &dir, &pool)?)?;
            }
            if mode == "strong" || mode == "both" {
                let dir = base.join("stability_strong");
                gate(experiments::stability::run_strong(&cfg, &dir, &pool)?)?;
            }
            if !["weak", "strong", "both"].contains(&mode.as_str()) {
                return Err(Error::invalid(format!(
                    "--mode must be weak, strong, or both, got {mode:?}"
                )));
            }
            Ok(())
        }
        Command::Persistence => {
            let cfg = load(cli)?;
            let pool = make_pool(cli)?;
            let dir = resolve_out_dir(cli.out.as_deref()).join("persistence");
            gate(experiments::persistence::run(&cfg, &dir, &pool)?)
        }
        Command::NoiseCompare => {
            let cfg = load(cli)?;
            let pool = make_pool(cli)?;
            let dir = resolve_out_dir(cli.out.as_deref()).join("noise_compare");
            gate(experiments::noise_compare::run(&cfg, &dir, &pool)?)
        }
        Command::Sharpness => {
            let cfg = load(cli)?;
            let pool = make_pool(cli)?;
            let dir = resolve_out_dir(cli.out.as_deref()).join("sharpness");
            gate(experiments::sharpness::run(&cfg, &dir, &pool)?)
        }
    }
}

/// Binary entry point; never returns.
pub fn main_entry() -> ! {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => std::process::exit(0),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_parsing_checks_arity() {
        assert_eq!(parse_point("1.0, -2.5", 2).unwrap(), vec![1.0, -2.5]);
        assert!(parse_point("1.0", 2).is_err());
        assert!(parse_point("1.0,abc", 2).is_err());
    }

    #[test]
    fn cli_shape_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
