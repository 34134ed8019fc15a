mod args;
mod error;
mod fetch;
mod output;

use std::fmt::Write as _;
use std::path::Path;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use log::error;
use serde::Serialize;
use serde_json::json;

use args::*;
use error::CliError;
use output::Ctx;
use tobit_core::estimation::{build_regressors, fwl_check, ols_fit, select_lag};
use tobit_core::inference::{
    size_power_experiment, tabulate_null, tstat_distributions, unit_root_test, BootstrapOptions, CvTable, Cutoffs,
    DistGrid, DistModel, DistSpec, LagChoice, Level, McConfig, NullBackend, Provenance, SimOptions, TestOptions,
};
use tobit_core::io::{observations_to_series, parse_ecb_csv, read_series_csv, series_to_csv, ReadOptions};
use tobit_core::model::{simulate_limited_ar, simulate_linear_ar, simulate_tobit, LocalParams, Series};
use tobit_core::rng::substream;
use tobit_core::stability::{companion_pair, explosion_probe, jsr_bounds, sufficient_condition};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    if g.threads == Some(0) {
        return Err(CliError::Usage("--threads must be >= 1".into()));
    }
    let name = cli.command.name();
    match &cli.command {
        Command::Simulate(a) => simulate(&ctx(name, g, Format::Csv, a)?, g, a),
        Command::Estimate(a) => estimate(&ctx(name, g, Format::Json, a)?, a),
        Command::Test(a) => test(&ctx(name, g, Format::Json, a)?, g, a),
        Command::Tabulate(a) => tabulate(&ctx(name, g, Format::Csv, a)?, g, a),
        Command::Power(a) => power(&ctx(name, g, Format::Json, a)?, g, a),
        Command::Dist(a) => dist(&ctx(name, g, Format::Json, a)?, g, a),
        Command::Jsr(a) => jsr(&ctx(name, g, Format::Json, a)?, g, a),
        Command::FetchEcb(a) => fetch_ecb(&ctx(name, g, Format::Csv, a)?, a),
    }
}

fn ctx<T: Serialize>(name: &'static str, g: &GlobalArgs, default: Format, args: &T) -> Result<Ctx, CliError> {
    Ok(Ctx::new(name, g, g.format.unwrap_or(default), serde_json::to_value(args)?))
}

fn json_only(ctx: &Ctx) -> Result<(), CliError> {
    match ctx.config.format {
        Format::Json => Ok(()),
        Format::Csv => Err(CliError::Usage(format!("{} only writes JSON", ctx.config.command))),
    }
}

fn mc_config(g: &GlobalArgs, reps: u64, t: usize, law: LawArg) -> McConfig {
    McConfig { replications: reps, t, seed: g.seed, law: law.0, threads: g.threads }
}

fn read_options(input: &InputArgs) -> ReadOptions {
    ReadOptions { log: input.log, bound: input.bound, bound_raw: input.bound_raw }
}

fn load_series(input: &InputArgs) -> Result<Series, CliError> {
    let opts = read_options(input);
    match (&input.input, &input.ecb_key) {
        (Some(path), None) => Ok(read_series_csv(path, &opts)?),
        (None, Some(key)) => {
            let fetched = fetch::fetch_raw(key, input.start, input.end, Duration::from_secs(30))?;
            Ok(observations_to_series(parse_ecb_csv(&fetched.body, &fetched.url)?, &opts)?)
        }
        _ => Err(CliError::Usage("give exactly one of --input and --ecb-key".into())),
    }
}

fn load_table(path: Option<&Path>) -> Result<CvTable, CliError> {
    let Some(path) = path else {
        return Ok(CvTable::reference());
    };
    let text = std::fs::read_to_string(path)?;
    let sidecar: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(output::sidecar(path))?)?;
    let prov = sidecar.get("result").cloned().unwrap_or(sidecar);
    let provenance: Provenance = serde_json::from_value(prov)?;
    Ok(CvTable::from_csv(&text, provenance)?)
}

#[derive(Serialize)]
struct SeriesInfo {
    observations: usize,
    lower_bound: f64,
    first_date: Option<String>,
    last_date: Option<String>,
}

fn series_info(s: &Series) -> SeriesInfo {
    let d = s.dates.as_ref();
    SeriesInfo {
        observations: s.len(),
        lower_bound: s.lower_bound,
        first_date: d.and_then(|d| d.first()).map(|d| d.to_string()),
        last_date: d.and_then(|d| d.last()).map(|d| d.to_string()),
    }
}

fn simulate(ctx: &Ctx, g: &GlobalArgs, a: &SimulateArgs) -> Result<(), CliError> {
    let phi = a.phi.0.clone();
    if let Some(k) = a.k {
        if k != phi.len() + 1 {
            return Err(CliError::Usage(format!("--k {k} needs {} --phi coefficients, got {}", k - 1, phi.len())));
        }
    }
    let local = LocalParams { a: a.a, c: a.c, b0: a.b0, t: a.t };
    let params = local.to_model(phi.clone(), a.sigma, a.bound)?;
    let u = a.law.0.draw(&mut substream(g.seed, 0), a.sigma, a.t);
    let mut csv = String::new();
    match a.model {
        SimModel::Tobit => {
            let out = simulate_tobit(&params, &u)?;
            csv.push_str("t,y,y_minus,u\n");
            for i in 0..a.t {
                writeln!(csv, "{},{},{},{}", i + 1, out.y[i], out.y_minus[i], u[i]).unwrap();
            }
        }
        SimModel::Linear => {
            let y = simulate_linear_ar(&params, &u)?;
            csv.push_str("t,y,u\n");
            for i in 0..a.t {
                writeln!(csv, "{},{},{}", i + 1, y[i], u[i]).unwrap();
            }
        }
        SimModel::Limited => {
            let x = simulate_limited_ar(&phi, a.c, a.t, &u)?;
            csv.push_str("t,x,u\n");
            for i in 0..a.t {
                writeln!(csv, "{},{},{}", i + 1, x[i], u[i]).unwrap();
            }
        }
    }
    let meta = json!({ "params": params, "local": local, "model": a.model, "law": a.law.0 });
    match ctx.config.format {
        Format::Csv => ctx.emit_csv("simulate", &csv, &meta),
        Format::Json => {
            let rows: Vec<Vec<f64>> = csv
                .lines()
                .skip(1)
                .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
                .collect();
            let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
            ctx.emit_json("simulate", &json!({ "meta": meta, "columns": header, "rows": rows }))
        }
    }
}

fn lag_choice(lag: &LagArgs) -> LagChoice {
    match lag.k {
        KArg::Fixed(k) => LagChoice::Fixed { k },
        KArg::Auto => LagChoice::Auto { k_max: lag.k_max, criterion: lag.criterion.into() },
    }
}

fn estimate(ctx: &Ctx, a: &EstimateArgs) -> Result<(), CliError> {
    json_only(ctx)?;
    let series = load_series(&a.input)?;
    let (k, selection) = match lag_choice(&a.lag) {
        LagChoice::Fixed { k } => (k, None),
        LagChoice::Auto { k_max, criterion } => {
            let sel = select_lag(&series, k_max, criterion)?;
            (sel.k, Some(sel))
        }
    };
    let reg = build_regressors(&series, k)?;
    let fit = ols_fit(&reg)?;
    let fwl = if k == 1 { Some(fwl_check(&reg, &fit)?) } else { None };
    let mut fit_json = serde_json::to_value(&fit)?;
    if !a.residuals {
        fit_json.as_object_mut().unwrap().remove("residuals");
    }
    ctx.emit_json(
        "estimate",
        &json!({
            "series": series_info(&series),
            "fit": fit_json,
            "lag_selection": selection,
            "fwl_discrepancy": fwl,
        }),
    )
}

fn test(ctx: &Ctx, g: &GlobalArgs, a: &TestArgs) -> Result<(), CliError> {
    json_only(ctx)?;
    let series = load_series(&a.input)?;
    let table = load_table(a.table.as_deref())?;
    let backend = match a.backend {
        BackendArg::Finite => NullBackend::FiniteSample,
        BackendArg::Limit => NullBackend::Limit { grid: a.grid },
    };
    let simulate = (a.sim_reps > 0).then(|| SimOptions {
        config: McConfig { replications: a.sim_reps, t: a.sim_t, seed: g.seed, law: Default::default(), threads: g.threads },
        backend,
    });
    let bootstrap = (a.boot_reps > 0).then(|| BootstrapOptions {
        replications: a.boot_reps,
        t_prime: a.boot_t,
        seed: g.seed,
        threads: g.threads,
    });
    let opts = TestOptions { lag: lag_choice(&a.lag), simulate, bootstrap };
    let report = unit_root_test(&series, &table, &opts)?;
    ctx.emit_json(
        "test",
        &json!({
            "series": series_info(&series),
            "table": { "source": table.provenance.source, "t": table.provenance.t, "replications": table.provenance.replications },
            "report": report,
        }),
    )
}

fn tabulate(ctx: &Ctx, g: &GlobalArgs, a: &TabulateArgs) -> Result<(), CliError> {
    if ctx.config.output.is_none() {
        return Err(CliError::Usage("tabulate needs --output <table.csv>; the provenance goes to <table.json>".into()));
    }
    if ctx.config.format != Format::Csv {
        return Err(CliError::Usage("tabulate writes CSV with a JSON sidecar".into()));
    }
    let table = tabulate_null(&mc_config(g, a.reps, a.t, a.law), &a.ratios.0)?;
    ctx.emit_csv("tabulate", &table.to_csv(), &table.provenance)
}

fn power(ctx: &Ctx, g: &GlobalArgs, a: &PowerArgs) -> Result<(), CliError> {
    let table = load_table(a.table.as_deref())?;
    let cutoffs = Cutoffs::from_table(&table, Level::from_percent(a.level)?);
    let res = size_power_experiment(&a.a_grid.0, &a.c_grid.0, &mc_config(g, a.reps, a.t, a.law), cutoffs)?;
    match ctx.config.format {
        Format::Json => ctx.emit_json("power", &res),
        Format::Csv => {
            let mut csv = String::from("a,c,mean_t_beta,sd_t_beta,reject_tobit,reject_adf,valid\n");
            for c in &res.cells {
                writeln!(csv, "{},{},{},{},{},{},{}", c.a, c.c, c.mean_t_beta, c.sd_t_beta, c.reject_tobit, c.reject_adf, c.valid)
                    .unwrap();
            }
            let meta = json!({ "t": res.t, "replications": res.replications, "seed": res.seed, "cutoffs": res.cutoffs, "innovation_law": res.innovation_law });
            ctx.emit_csv("power", &csv, &meta)
        }
    }
}

fn dist(ctx: &Ctx, g: &GlobalArgs, a: &DistArgs) -> Result<(), CliError> {
    if a.models.is_empty() {
        return Err(CliError::Usage("--models is empty".into()));
    }
    let specs: Vec<DistSpec> = a
        .models
        .iter()
        .map(|m| {
            let model = match m {
                DistModelArg::Tobit => DistModel::Tobit,
                DistModelArg::Linear => DistModel::Linear,
            };
            DistSpec::null(model, a.ratio, a.t)
        })
        .collect();
    let grid = DistGrid { lo: a.lo, hi: a.hi, bins: a.bins };
    let dists = tstat_distributions(&mc_config(g, a.reps, a.t, a.law), &specs, grid)?;
    match ctx.config.format {
        Format::Json => ctx.emit_json("dist", &dists),
        Format::Csv => {
            let names: Vec<&str> = dists.iter().map(|d| if d.model == DistModel::Tobit { "tobit" } else { "linear" }).collect();
            let mut csv = String::from("edge");
            for n in &names {
                write!(csv, ",cdf_{n},pdf_{n}").unwrap();
            }
            csv.push('\n');
            let edges = &dists[0].edges;
            for (i, e) in edges.iter().enumerate() {
                write!(csv, "{e}").unwrap();
                for d in &dists {
                    // pdf[i] is the density on [edges[i], edges[i+1]); empty at the last edge.
                    match d.pdf.get(i) {
                        Some(p) => write!(csv, ",{},{p}", d.cdf[i]).unwrap(),
                        None => write!(csv, ",{},", d.cdf[i]).unwrap(),
                    }
                }
                csv.push('\n');
            }
            let meta: Vec<_> = dists
                .iter()
                .map(|d| json!({ "model": d.model, "valid": d.valid, "degenerate": d.degenerate, "below": d.below, "above": d.above, "mean": d.mean }))
                .collect();
            ctx.emit_csv("dist", &csv, &meta)
        }
    }
}

fn jsr(ctx: &Ctx, g: &GlobalArgs, a: &JsrArgs) -> Result<(), CliError> {
    json_only(ctx)?;
    let phi = &a.phi.0;
    let cert = jsr_bounds(&companion_pair(phi), a.depth, a.tol)?;
    let probe = if a.probe {
        let params = tobit_core::ModelParams {
            alpha: 0.0,
            beta: 1.0,
            phi: phi.clone(),
            sigma: 1.0,
            lower_bound: 0.0,
            init: vec![0.0],
        };
        Some(explosion_probe(&params, a.t, a.reps, g.seed)?)
    } else {
        None
    };
    ctx.emit_json(
        "jsr",
        &json!({
            "phi": phi,
            "sum_abs_phi": phi.iter().map(|p| p.abs()).sum::<f64>(),
            "sufficient_condition": sufficient_condition(phi),
            "certificate": cert,
            "probe": probe,
        }),
    )
}

fn fetch_ecb(ctx: &Ctx, a: &FetchArgs) -> Result<(), CliError> {
    if ctx.config.format != Format::Csv {
        return Err(CliError::Usage("fetch-ecb writes CSV".into()));
    }
    let fetched = fetch::fetch_raw(&a.key, a.start, a.end, Duration::from_secs(a.timeout))?;
    let obs = parse_ecb_csv(&fetched.body, &fetched.url)?;
    let series = observations_to_series(obs, &ReadOptions::default())?;
    let mut raw_path = None;
    if let Some(out) = &ctx.config.output {
        let path = out.with_extension("sdmx.csv");
        std::fs::write(&path, &fetched.body)?;
        raw_path = Some(path);
    }
    let meta = json!({
        "url": fetched.url,
        "key": a.key,
        "series": series_info(&series),
        "from_cache": fetched.from_cache,
        "cache_path": fetched.cache_path,
        "raw_path": raw_path,
    });
    ctx.emit_csv("fetch-ecb", &series_to_csv(&series), &meta)
}
