//! `gncqr` — data preparation, single fits, alpha tuning, full backtests and
//! LP export for the mixed-frequency quantile regression pipeline.
//!
//! Configuration comes from a JSON file (`--config`); flags override it.
//! Logs go to stderr (level via `GNCQR_LOG={error,info,debug}`); data goes to
//! files and the summary table to stdout.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use gncqr::backtest::exports::{overall_csv, surface_csv, OutputTree};
use gncqr::backtest::{run_backtest, AlphaPolicy, ModelKind, PanelInputs};
use gncqr::calendar::Horizon;
use gncqr::config::RunConfig;
use gncqr::solver::{assemble_lp, build_design, lp_text, ConstraintMode, QuantilePanelFit};
use gncqr::tuning::{make_plan, select_alpha};
use gncqr::{fit_independent, fit_joint, minmax_fit_apply};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gncqr", version, about = "Mixed-frequency quantile regression with non-crossing structure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Worker threads (default: available cores).
    #[arg(long, value_name = "INT")]
    jobs: Option<usize>,
    /// Override the config seed (recorded in the run manifest).
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
    /// Output directory (default: config out_dir, else ./gncqr_out).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the aligned estimation panels per horizon as CSV.
    Prepare {
        #[command(flatten)]
        common: Common,
    },
    /// Fit one model at one horizon on the full sample.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Forecast horizon in quarters (e.g. 4, 1, 0.42, 0.08).
        #[arg(long = "h", value_name = "FLOAT", allow_hyphen_values = true)]
        horizon: f64,
        /// Model: qr, midas-qr, gncqr or umidas.
        #[arg(long, value_name = "MODEL", default_value = "gncqr")]
        model: String,
        /// Constraint tightness for gncqr.
        #[arg(long, value_name = "FLOAT", allow_hyphen_values = true)]
        alpha: Option<f64>,
    },
    /// Select the adaptive tightness by hv-block cross-validation.
    Tune {
        #[command(flatten)]
        common: Common,
        #[arg(long = "h", value_name = "FLOAT", allow_hyphen_values = true)]
        horizon: f64,
    },
    /// Run the expanding-window pseudo-out-of-sample exercise.
    Backtest {
        #[command(flatten)]
        common: Common,
        /// Restrict to one horizon.
        #[arg(long = "h", value_name = "FLOAT", allow_hyphen_values = true)]
        horizon: Option<f64>,
        /// Validate the configuration and list planned fits without solving.
        #[arg(long)]
        dry_run: bool,
    },
    /// Dump the assembled linear program in CPLEX-LP text form.
    Export {
        #[command(flatten)]
        common: Common,
        #[arg(long = "h", value_name = "FLOAT", allow_hyphen_values = true)]
        horizon: f64,
        #[arg(long, value_name = "MODEL", default_value = "gncqr")]
        model: String,
        #[arg(long, value_name = "FLOAT", allow_hyphen_values = true)]
        alpha: Option<f64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GNCQR_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Usage-level validation failures exit with the same code clap uses.
fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn parse_horizon(h: f64) -> Result<Horizon, String> {
    let horizon = Horizon::from_quarters(h)?;
    if horizon.weeks() == 0 {
        return Err(format!("horizon {h} rounds to zero weeks; must be positive"));
    }
    Ok(horizon)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Prepare { common } => {
            let ctx = Context_::load(&common)?;
            cmd_prepare(&ctx)
        }
        Command::Fit {
            common,
            horizon,
            model,
            alpha,
        } => {
            let horizon = match parse_horizon(horizon) {
                Ok(h) => h,
                Err(e) => return Ok(usage_error(&e)),
            };
            let Some(model) = ModelKind::parse(&model) else {
                return Ok(usage_error(&format!(
                    "unknown model `{model}` (expected qr, midas-qr, gncqr or umidas)"
                )));
            };
            if let Some(a) = alpha {
                if !(a.is_finite() && a >= 0.0) {
                    return Ok(usage_error(&format!("alpha must be non-negative, got {a}")));
                }
            }
            let ctx = Context_::load(&common)?;
            cmd_fit(&ctx, horizon, model, alpha)
        }
        Command::Tune { common, horizon } => {
            let horizon = match parse_horizon(horizon) {
                Ok(h) => h,
                Err(e) => return Ok(usage_error(&e)),
            };
            let ctx = Context_::load(&common)?;
            cmd_tune(&ctx, horizon)
        }
        Command::Backtest {
            common,
            horizon,
            dry_run,
        } => {
            let horizon = match horizon.map(parse_horizon).transpose() {
                Ok(h) => h,
                Err(e) => return Ok(usage_error(&e)),
            };
            let ctx = Context_::load(&common)?;
            cmd_backtest(&ctx, horizon, dry_run)
        }
        Command::Export {
            common,
            horizon,
            model,
            alpha,
        } => {
            let horizon = match parse_horizon(horizon) {
                Ok(h) => h,
                Err(e) => return Ok(usage_error(&e)),
            };
            let Some(model) = ModelKind::parse(&model) else {
                return Ok(usage_error(&format!("unknown model `{model}`")));
            };
            let ctx = Context_::load(&common)?;
            cmd_export(&ctx, horizon, model, alpha)
        }
    }
}

/// Loaded configuration plus resolved inputs and output directory.
struct Context_ {
    config: RunConfig,
    inputs: PanelInputs,
    out_dir: PathBuf,
    seed: u64,
}

impl Context_ {
    fn load(common: &Common) -> Result<Self> {
        if let Some(jobs) = common.jobs {
            // ignore failures from double initialisation in tests
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global();
        }
        let config = RunConfig::from_path(&common.config)?;
        let base = common
            .config
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let inputs = config
            .load_inputs(&base)
            .with_context(|| format!("loading series for {}", common.config.display()))?;
        let out_dir = common
            .out
            .clone()
            .or_else(|| config.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("gncqr_out"));
        let seed = common.seed.unwrap_or(config.seed);
        Ok(Context_ {
            config,
            inputs,
            out_dir,
            seed,
        })
    }
}

fn cmd_prepare(ctx: &Context_) -> Result<ExitCode> {
    let mut tree = OutputTree::new(ctx.out_dir.clone());
    for h in ctx.config.horizons() {
        let panel = ctx.inputs.panel(h)?;
        let (design, layout) = build_design(&panel, &vec![None; ctx.inputs.variables.len()])?;
        let mut csv = String::from("quarter,y,cutoff_week");
        for name in layout.column_names() {
            csv.push(',');
            csv.push_str(&name);
        }
        csv.push('\n');
        for (i, label) in panel.quarter_labels().iter().enumerate() {
            csv.push_str(&format!(
                "{label},{},{}",
                panel.target[i], panel.cutoff_weeks[i]
            ));
            for j in 0..design.ncols() {
                csv.push_str(&format!(",{}", design[[i, j]]));
            }
            csv.push('\n');
        }
        let path = tree.write(&format!("panel_h{}.csv", h.label()), &csv)?;
        log::info!("wrote {}", path.display());
    }
    println!(
        "prepared {} panels under {}",
        ctx.config.horizons().len(),
        ctx.out_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn fit_for(
    ctx: &Context_,
    model: ModelKind,
    panel: &gncqr::MixedFrequencyDataset,
    alpha: f64,
) -> Result<QuantilePanelFit> {
    let maps = ctx.inputs.maps_for(model)?;
    let grid = ctx.config.grid();
    let fit = match model {
        ModelKind::Gncqr => fit_joint(panel, &maps, &grid, ConstraintMode::Adaptive(alpha))?,
        _ => fit_independent(panel, &maps, &grid)?,
    };
    Ok(fit)
}

fn cmd_fit(ctx: &Context_, horizon: Horizon, model: ModelKind, alpha: Option<f64>) -> Result<ExitCode> {
    if alpha.is_some() && !model.uses_alpha() {
        log::warn!(
            "--alpha is ignored for model {}; it only applies to gncqr",
            model.cli_name()
        );
    }
    let alpha = alpha
        .or(match ctx.config.alpha_policy() {
            AlphaPolicy::Fixed { value } => Some(value),
            _ => None,
        })
        .unwrap_or(1.0);
    let panel = ctx.inputs.panel(horizon)?;
    let fit = fit_for(ctx, model, &panel, alpha)?;
    let grid = ctx.config.grid();
    let mut tree = OutputTree::new(ctx.out_dir.clone());

    // coefficients on the scaled design, one column per quantile
    let layout = fit.layout.as_ref().expect("fit carries layout");
    let mut coef = String::from("column");
    for tau in grid.taus() {
        coef.push_str(&format!(",tau_{tau}"));
    }
    coef.push('\n');
    for (j, name) in layout.column_names().iter().enumerate() {
        coef.push_str(name);
        for q in 0..grid.len() {
            coef.push_str(&format!(",{}", fit.delta[[j, q]]));
        }
        coef.push('\n');
    }
    tree.write(&format!("coefficients_{}_{}.csv", model.cli_name(), horizon.label()), &coef)?;

    let fits = vec![(model, fit)];
    for (vi, var) in ctx.inputs.variables.iter().enumerate() {
        let id = var.spec.series.id();
        tree.write(
            &format!("surface_{}_{}.csv", id, horizon.label()),
            &surface_csv(&fits, vi, &grid)?,
        )?;
        tree.write(
            &format!("overall_{}_{}.csv", id, horizon.label()),
            &overall_csv(&fits, vi, &grid)?,
        )?;
    }

    // in-sample fitted quantiles
    let fit = &fits[0].1;
    let preds = fit.predict_panel(&panel)?;
    let mut fitted = String::from("quarter,y");
    for tau in grid.taus() {
        fitted.push_str(&format!(",q_{tau}"));
    }
    fitted.push('\n');
    for (i, label) in panel.quarter_labels().iter().enumerate() {
        fitted.push_str(&format!("{label},{}", panel.target[i]));
        for q in 0..grid.len() {
            fitted.push_str(&format!(",{}", preds[[i, q]]));
        }
        fitted.push('\n');
    }
    tree.write(&format!("fitted_{}_{}.csv", model.cli_name(), horizon.label()), &fitted)?;

    println!(
        "fit {} at h={} on {} rows; objective {}; wrote {} files to {}",
        model.label(),
        horizon.label(),
        panel.rows(),
        fit.objective_value,
        tree.files().len(),
        ctx.out_dir.display()
    );
    Ok(if fit.status == gncqr::SolverStatus::Optimal {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_tune(ctx: &Context_, horizon: Horizon) -> Result<ExitCode> {
    let panel = ctx.inputs.panel(horizon)?;
    let maps = ctx.inputs.maps_for(ModelKind::Gncqr)?;
    let plan = make_plan(panel.rows(), ctx.config.alpha.folds, horizon)?;
    let selection = select_alpha(
        &panel,
        &maps,
        &ctx.config.grid(),
        &ctx.config.alpha.grid,
        &plan,
        ctx.config.alpha.loss,
    )?;
    let mut tree = OutputTree::new(ctx.out_dir.clone());
    tree.write(
        &format!("cv_audit_{}.csv", horizon.label()),
        &selection.audit_csv(),
    )?;
    println!("chosen alpha at h={}: {}", horizon.label(), selection.chosen_alpha);
    for (alpha, score) in selection.grid.iter().zip(&selection.cv_scores) {
        println!("  alpha {alpha}: cv loss {score}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_backtest(ctx: &Context_, horizon: Option<Horizon>, dry_run: bool) -> Result<ExitCode> {
    let mut config = ctx.config.to_backtest_config(ctx.out_dir.clone());
    if let Some(h) = horizon {
        config.horizons = vec![h];
    }
    if dry_run {
        println!("config ok: seed {}", ctx.seed);
        for &h in &config.horizons {
            let panel = ctx.inputs.panel(h)?;
            let gap = h.guard_quarters() as i64;
            let origins = (0..panel.rows())
                .filter(|&idx| {
                    panel.rows_through_quarter(panel.target_quarters[idx] - gap)
                        >= config.start_size
                })
                .count();
            for model in &config.models {
                println!(
                    "would fit h={} model={} origins={} rows={}",
                    h.label(),
                    model.cli_name(),
                    origins,
                    panel.rows()
                );
            }
        }
        return Ok(ExitCode::SUCCESS);
    }
    let artifacts = run_backtest(&config, &ctx.inputs)?;
    print!("{}", artifacts.report.render());
    println!("wrote {} files to {}", artifacts.files.len(), ctx.out_dir.display());
    Ok(if artifacts.all_optimal {
        ExitCode::SUCCESS
    } else {
        log::warn!("some fits stopped at the iteration limit");
        ExitCode::FAILURE
    })
}

fn cmd_export(ctx: &Context_, horizon: Horizon, model: ModelKind, alpha: Option<f64>) -> Result<ExitCode> {
    let panel = ctx.inputs.panel(horizon)?;
    let maps = ctx.inputs.maps_for(model)?;
    let (design, _) = build_design(&panel, &maps)?;
    let (scaled, scaling) = minmax_fit_apply(&design)?;
    let grid = ctx.config.grid();
    let mode = if model.uses_alpha() {
        ConstraintMode::Adaptive(alpha.unwrap_or(1.0))
    } else {
        ConstraintMode::Plain
    };
    let problem = assemble_lp(&scaled, &panel.target, &grid, mode, &scaling)?;
    let mut tree = OutputTree::new(ctx.out_dir.clone());
    let path = tree.write(
        &format!("lp_{}_{}.lp", model.cli_name(), horizon.label()),
        &lp_text(&problem),
    )?;
    println!(
        "wrote {} ({} columns, {} equalities, {} inequalities)",
        path.display(),
        problem.n_cols(),
        problem.n_eq(),
        problem.n_ineq()
    );
    Ok(ExitCode::SUCCESS)
}
