//! `symlab` — experiment driver for the effective-stability laboratory.
//!
//! Subcommands: bounds, normalform, geometry, drift, confine. All outputs
//! are deterministic given (config, seed): CSV tables with 17 significant
//! digits and optional standalone SVG plots.

mod config;
mod emit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use symlab_core::geometry::{canonical_k_basis, projected_bound_check, small_denominator_bound};
use symlab_core::lattice::enumerate_k_generated_lattices;
use symlab_core::normalform::normal_form;
use symlab_core::presets;
use symlab_core::stability::{
    confinement_diagnostic, drift_experiment, scaling_fit, theorem1_bounds, DriftRecord, Method,
};
use symlab_core::{ActionAngleState, BlockLabel, Error};

use config::RunConfig;
use emit::{fmt17, Curve, Table};

#[derive(Parser)]
#[command(name = "symlab", about = "effective-stability numerical laboratory")]
struct Cli {
    /// Run configuration (flat TOML, one section per command)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every randomized check in the run
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Output directory for tables and plots
    #[arg(long, global = true, default_value = "symlab-out")]
    out: PathBuf,
    /// Also write SVG plots next to the tables
    #[arg(long, global = true)]
    emit_plots: bool,
    /// Parallel worker cap for independent runs
    #[arg(long, global = true, default_value_t = 4)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stability-theorem constants from closed formulas
    Bounds,
    /// Resonant normal form of a shipped preset with certified step log
    Normalform,
    /// Resonance-zone covering, disjointness and projection checks
    Geometry,
    /// Long-run action drift of symplectic integrators
    Drift,
    /// Block-confinement events along a standard-map orbit
    Confine,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } => 3,
        Error::Hypothesis { .. } | Error::Nonresonance { .. } => 4,
        Error::Representation(_) => 5,
        _ => 2,
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| Error::parameter("out", format!("cannot create {:?}: {e}", cli.out)))?;
    match cli.command {
        Command::Bounds => cmd_bounds(cli, &cfg),
        Command::Normalform => cmd_normalform(cli, &cfg),
        Command::Geometry => cmd_geometry(cli, &cfg),
        Command::Drift => cmd_drift(cli, &cfg),
        Command::Confine => cmd_confine(cli, &cfg),
    }
}

fn cmd_bounds(cli: &Cli, cfg: &RunConfig) -> Result<(), Error> {
    let c = RunConfig::section(&cfg.bounds, "bounds")?;
    let b = theorem1_bounds(c.n, c.m_lower, c.m_upper, c.sigma1, c.sigma2, c.epsilon)?;
    let mut table = Table::new(&[
        "n", "b", "epsilon", "epsilon0", "c0", "c1", "t0", "delta", "t", "admissible",
    ]);
    table.push(vec![
        b.n.to_string(),
        b.b.to_string(),
        fmt17(b.epsilon),
        fmt17(b.epsilon0),
        fmt17(b.c0),
        fmt17(b.c1),
        fmt17(b.t0),
        fmt17(b.delta),
        fmt17(b.t),
        b.admissible.to_string(),
    ]);
    table.write(&cli.out.join("bounds.csv"))?;
    println!(
        "b={} delta={} T={} admissible={}",
        b.b,
        fmt17(b.delta),
        fmt17(b.t),
        b.admissible
    );
    Ok(())
}

fn cmd_normalform(cli: &Cli, cfg: &RunConfig) -> Result<(), Error> {
    let c = RunConfig::section(&cfg.normalform, "normalform")?;
    let preset = match c.preset.as_str() {
        "nonres1" => presets::nonres1()?,
        "nonres2" => presets::nonres2()?,
        other => {
            return Err(Error::parameter(
                "normalform.preset",
                format!("unknown preset `{other}` (available: nonres1, nonres2)"),
            ))
        }
    };
    let res = normal_form(&preset.f, &preset.omega, &preset.params)?;
    let mut table = Table::new(&[
        "step",
        "norm_z",
        "norm_r",
        "norm_z_new",
        "norm_r_new",
        "bound_a",
        "bound_b",
        "displacement_bound",
        "fit_residual",
        "homological_fit_residual",
    ]);
    for r in &res.step_log {
        table.push(vec![
            r.index.to_string(),
            fmt17(r.norm_z),
            fmt17(r.norm_r),
            fmt17(r.norm_z_new),
            fmt17(r.norm_r_new),
            fmt17(r.bound_a),
            fmt17(r.bound_b),
            fmt17(r.displacement_bound),
            fmt17(r.fit_residual),
            fmt17(r.homological_fit_residual),
        ]);
    }
    table.write(&cli.out.join("steplog.csv"))?;
    let final_norm = res
        .step_log
        .last()
        .map(|r| r.norm_r_new)
        .unwrap_or(res.norm_f);
    let bound = res.remainder_bound(preset.params.k, preset.f.dom().rho2);
    let mut summary = Table::new(&["preset", "steps", "norm_f", "final_remainder", "bound"]);
    summary.push(vec![
        preset.name.to_string(),
        res.step_log.len().to_string(),
        fmt17(res.norm_f),
        fmt17(final_norm),
        fmt17(bound),
    ]);
    summary.write(&cli.out.join("normalform.csv"))?;
    if cli.emit_plots {
        let curve = Curve {
            name: "|DR| per step".into(),
            points: res
                .step_log
                .iter()
                .map(|r| ((r.index + 1) as f64, r.norm_r_new.max(1e-300)))
                .collect(),
        };
        emit::line_plot(
            &cli.out.join("steplog.svg"),
            &format!("remainder decay ({})", preset.name),
            &[curve],
            false,
            true,
        )?;
    }
    println!(
        "{}: final remainder {} <= bound {}: {}",
        preset.name,
        fmt17(final_norm),
        fmt17(bound),
        final_norm <= bound
    );
    Ok(())
}

fn label_string(label: &BlockLabel) -> String {
    let basis: Vec<String> = label
        .basis
        .iter()
        .map(|v| {
            let s: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            format!("({})", s.join(" "))
        })
        .collect();
    let l: Vec<String> = label.l.iter().map(|x| x.to_string()).collect();
    format!("r{}|{}|l({})", label.rank(), basis.join(";"), l.join(" "))
}

fn axis_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

fn cmd_geometry(cli: &Cli, cfg: &RunConfig) -> Result<(), Error> {
    let c = RunConfig::section(&cfg.geometry, "geometry")?;
    config::validate_geometry(c)?;
    let geo = presets::geometry_identity(c.n, c.k, c.sigma1, (c.lo, c.hi))?;
    let axis = axis_grid(c.lo, c.hi, c.grid);
    let mut grid: Vec<Vec<f64>> = Vec::new();
    match c.n {
        1 => grid.extend(axis.iter().map(|&x| vec![x])),
        2 => {
            for &x in &axis {
                for &y in &axis {
                    grid.push(vec![x, y]);
                }
            }
        }
        _ => {
            for &x in &axis {
                for &y in &axis {
                    for &z in &axis {
                        grid.push(vec![x, y, z]);
                    }
                }
            }
        }
    }

    let covering = geo.covering_check(&grid);
    let gap = geo.resonance_gap_violations(&grid);
    let disjoint = geo.zone_l_disjointness_violations(&grid);

    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
    let mut projection_failures = 0usize;
    for r in 1..=c.n {
        for lat in enumerate_k_generated_lattices(c.n, c.k, r)? {
            if let Some(basis) = canonical_k_basis(&lat, c.k) {
                let report =
                    projected_bound_check(&basis, geo.schedule.alpha[r - 1], c.trials, &mut rng)?;
                if !report.pass {
                    projection_failures += 1;
                }
            }
        }
    }
    let mut denominator_failures = 0usize;
    {
        use rand::Rng;
        for _ in 0..100_000 {
            let phi: f64 = rng.gen_range(-50.0..50.0);
            let (value, lower) = small_denominator_bound(phi);
            if value < lower - 1e-12 {
                denominator_failures += 1;
            }
        }
    }

    let atlas = geo.block_atlas(&grid);
    let mut table = Table::new(&["x1", "x2", "x3", "rank", "label"]);
    for (x, label) in &atlas {
        let mut row: Vec<String> = (0..3)
            .map(|i| x.get(i).map(|&v| fmt17(v)).unwrap_or_default())
            .collect();
        row.push(label.rank().to_string());
        row.push(label_string(label));
        table.push(row);
    }
    table.write(&cli.out.join("atlas.csv"))?;

    let mut summary = Table::new(&[
        "n",
        "k",
        "grid_points",
        "covering_ok",
        "resonance_gap_violations",
        "l_disjointness_violations",
        "projection_failures",
        "denominator_failures",
        "nonoverlap_ok",
    ]);
    summary.push(vec![
        c.n.to_string(),
        c.k.to_string(),
        grid.len().to_string(),
        covering.to_string(),
        gap.to_string(),
        disjoint.to_string(),
        projection_failures.to_string(),
        denominator_failures.to_string(),
        geo.schedule.nonoverlap_ok().to_string(),
    ]);
    summary.write(&cli.out.join("geometry.csv"))?;

    if cli.emit_plots && c.n <= 2 {
        let pts: Vec<(f64, f64, usize)> = atlas
            .iter()
            .map(|(x, label)| (x[0], *x.get(1).unwrap_or(&0.0), label.rank()))
            .collect();
        emit::atlas_plot(&cli.out.join("atlas.svg"), "block atlas (colour = rank)", &pts)?;
    }
    println!(
        "covering={} gap={} disjoint={} projection={} denominator={}",
        covering, gap, disjoint, projection_failures, denominator_failures
    );
    Ok(())
}

fn cmd_drift(cli: &Cli, cfg: &RunConfig) -> Result<(), Error> {
    let c = RunConfig::section(&cfg.drift, "drift")?;
    config::validate_drift(c)?;
    let method = Method::from_id(&c.method)?;
    let sys = presets::quad1();
    let initial = ActionAngleState::new(c.actions.clone(), c.angles.clone())?;

    // independent per-h runs, executed in parallel but collected in config order
    let mut results: Vec<Option<Result<Vec<DriftRecord>, Error>>> = Vec::new();
    results.resize_with(c.h.len(), || None);
    let jobs = cli.jobs.max(1);
    for chunk in (0..c.h.len()).collect::<Vec<_>>().chunks(jobs) {
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for &i in chunk {
                let sys = &sys;
                let initial = &initial;
                let h = c.h[i];
                let steps = c.steps;
                handles.push((
                    i,
                    scope.spawn(move || {
                        drift_experiment(sys, method, h, steps, initial, None)
                            .map(|run| run.records)
                    }),
                ));
            }
            for (i, handle) in handles {
                results[i] = Some(handle.join().expect("drift worker panicked"));
            }
        });
    }

    let mut table = Table::new(&[
        "system", "method", "r", "h", "step", "max_dev", "dev_now", "energy_err",
    ]);
    let mut finals: Vec<DriftRecord> = Vec::new();
    let mut curves: Vec<Curve> = Vec::new();
    for (i, slot) in results.into_iter().enumerate() {
        let records = slot.expect("scheduled")?;
        for r in &records {
            table.push(vec![
                r.system.clone(),
                r.method.to_string(),
                r.order.to_string(),
                fmt17(r.h),
                r.step.to_string(),
                fmt17(r.max_dev),
                fmt17(r.dev_now),
                fmt17(r.energy_err),
            ]);
        }
        if let Some(last) = records.last() {
            finals.push(last.clone());
        }
        curves.push(Curve {
            name: format!("h={}", c.h[i]),
            points: records
                .iter()
                .filter(|r| r.step > 0)
                .map(|r| (r.step as f64, r.max_dev.max(1e-300)))
                .collect(),
        });
    }
    table.write(&cli.out.join("drift.csv"))?;

    if finals.len() >= 3 {
        let bounds = c
            .epsilon
            .map(|eps| theorem1_bounds(1, 1.0, 1.0, 0.1, 1.0, eps))
            .transpose()?;
        let fit = scaling_fit(&finals, bounds.as_ref())?;
        let mut ft = Table::new(&["slope", "intercept", "residual", "envelope_ok"]);
        ft.push(vec![
            fmt17(fit.slope),
            fmt17(fit.intercept),
            fmt17(fit.residual),
            fit.theorem_envelope_ok
                .map(|b| b.to_string())
                .unwrap_or_default(),
        ]);
        ft.write(&cli.out.join("scaling.csv"))?;
        println!("slope={}", fmt17(fit.slope));
    }
    if cli.emit_plots {
        emit::line_plot(
            &cli.out.join("drift.svg"),
            &format!("max action deviation, {} on {}", method.id(), sys.id),
            &curves,
            true,
            true,
        )?;
    }
    Ok(())
}

fn cmd_confine(cli: &Cli, cfg: &RunConfig) -> Result<(), Error> {
    let c = RunConfig::section(&cfg.confine, "confine")?;
    config::validate_confine(c)?;
    let geo = presets::geometry_identity(
        1,
        c.k,
        c.sigma1,
        (c.x0 - c.half_width, c.x0 + c.half_width),
    )?;
    let mut trajectory = Vec::with_capacity(c.steps as usize + 1);
    let (mut x, mut y) = (c.x0, c.y0);
    trajectory.push(vec![x]);
    let mut max_jump = 0.0f64;
    for _ in 0..c.steps {
        let (xn, yn) = presets::standard_map_explicit(c.epsilon, x, y);
        max_jump = max_jump.max((xn - x).abs());
        x = xn;
        y = yn.rem_euclid(std::f64::consts::TAU);
        trajectory.push(vec![x]);
    }
    let events = confinement_diagnostic(&trajectory, &geo)?;
    let mut table = Table::new(&["step", "old", "new", "jump", "budget", "within_budget"]);
    for e in &events {
        table.push(vec![
            e.step.to_string(),
            label_string(&e.old),
            label_string(&e.new),
            fmt17(e.jump),
            fmt17(e.budget),
            e.within_budget.to_string(),
        ]);
    }
    table.write(&cli.out.join("events.csv"))?;
    let mut summary = Table::new(&["steps", "events", "max_jump", "epsilon"]);
    summary.push(vec![
        c.steps.to_string(),
        events.len().to_string(),
        fmt17(max_jump),
        fmt17(c.epsilon),
    ]);
    summary.write(&cli.out.join("confine.csv"))?;
    println!("events={} max_jump={}", events.len(), fmt17(max_jump));
    Ok(())
}
