use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;
use umpclear::ccg::CcgLimits;
use umpclear::market::{self, MarketError, MarketRun, Mode, RunConfig};
use umpclear::model::{load_case_file, CaseError, SystemCase};
use umpclear::optim::{solver_from_env, OptimError, Solver};
use umpclear::report;
use umpclear::scuc::line_capacities;
use umpclear::settlement::{ftr_settle, ftr_sft, FtrPortfolio, SettlementError};

/// Robust market clearing with locational uncertainty pricing.
#[derive(Parser)]
#[command(name = "umpclear", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clear the market and print the run summary.
    Solve(Common),
    /// Print LMPs and UMPs per bus and hour.
    Price(Common),
    /// Print energy, reserve and uncertainty settlements.
    Settle(Common),
    /// Audit an FTR portfolio against the cleared prices.
    Ftr {
        #[command(flatten)]
        common: Common,
        /// JSON file with nodal amounts, either `[..]` or `{"amounts": [..]}`.
        #[arg(long)]
        portfolio: PathBuf,
        /// Report a single hour (1-based) instead of all hours.
        #[arg(long)]
        hour: Option<usize>,
    },
    /// Clear a grid of uncertainty levels.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated bus-level budgets.
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.8, 1.0])]
        lambdas: Vec<f64>,
        /// Comma-separated system budgets.
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0])]
        lambda_deltas: Vec<f64>,
    },
    /// Export the bus-by-hour UMP matrix.
    Heatmap {
        #[command(flatten)]
        common: Common,
        /// Export downward instead of upward UMPs.
        #[arg(long)]
        down: bool,
    },
    /// Compare the traditional reserve scheme with UMPs without transmission limits.
    CompareTraditional(Common),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value = "cases/garver6.json")]
    case: PathBuf,
    /// Bus-level uncertainty budget.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// System uncertainty budget.
    #[arg(long = "lambda-delta", default_value_t = 2.0)]
    lambda_delta: f64,
    #[arg(long, default_value = "robust")]
    mode: Mode,
    /// Write CSV and JSON artifacts here.
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Attach the storage devices declared in the case.
    #[arg(long)]
    storage: bool,
    #[arg(long = "max-iters", default_value_t = 20)]
    max_iters: usize,
    #[arg(long = "ccg-tol", default_value_t = 1e-6)]
    ccg_tol: f64,
    /// Run 200 Monte-Carlo robustness samples with this seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Case(#[from] CaseError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Solver(#[from] OptimError),
    #[error(transparent)]
    Settlement(#[from] SettlementError),
    #[error("{}: {}", .0.display(), .1)]
    Io(PathBuf, #[source] std::io::Error),
    #[error("{0}")]
    Input(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Case(_) => "case",
            CliError::Market(_) => "clearing",
            CliError::Solver(_) => "solver",
            CliError::Settlement(_) => "settlement",
            CliError::Io(..) => "io",
            CliError::Input(_) => "input",
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

impl Common {
    fn config(&self) -> RunConfig {
        RunConfig {
            bus_budget: self.lambda,
            system_budget: self.lambda_delta,
            mode: self.mode,
            storage: self.storage,
            limits: CcgLimits {
                max_iterations: self.max_iters,
                tol: self.ccg_tol,
            },
            ..RunConfig::default()
        }
    }

    fn load(&self) -> Result<SystemCase> {
        load_case_file(&self.case).map_err(CliError::Case)
    }

    fn clear(&self, solver: &dyn Solver) -> Result<(SystemCase, MarketRun)> {
        let case = self.load()?;
        let run = market::clear(&case, &self.config(), solver).map_err(CliError::Market)?;
        Ok((case, run))
    }

    fn write(&self, name: &str, body: &str) -> Result<()> {
        if let Some(dir) = &self.out_dir {
            fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.clone(), e))?;
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| CliError::Io(path, e))?;
        }
        Ok(())
    }

    fn artifacts(&self, case: &SystemCase, run: &MarketRun) -> Result<()> {
        self.write("summary.json", &pretty(&report::summary_json(run)))?;
        self.write("schedule.csv", &report::schedule_csv(case, run))?;
        self.write("prices.csv", &report::prices_csv(case, &run.prices))?;
        self.write("settlement.csv", &report::settlement_csv(case, run))?;
        self.write("ccg_log.csv", &report::ccg_log_csv(run))
    }

    /// Prints a CSV document in the selected format.
    fn emit(&self, csv: &str, json: Value) {
        match self.format {
            Format::Csv => print!("{csv}"),
            Format::Table => print!("{}", report::csv_to_table(csv)),
            Format::Json => println!("{}", pretty(&json)),
        }
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable value") + "\n"
}

fn csv_json(csv: &str) -> Value {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().map(|h| h.split(',').collect()).unwrap_or_default();
    Value::Array(
        lines
            .map(|l| {
                let obj = header
                    .iter()
                    .zip(l.split(','))
                    .map(|(k, v)| {
                        let val = v.parse::<f64>().map(|x| json!(x)).unwrap_or_else(|_| json!(v));
                        (k.to_string(), val)
                    })
                    .collect();
                Value::Object(obj)
            })
            .collect(),
    )
}

fn cmd_solve(c: &Common, solver: &dyn Solver) -> Result<()> {
    let (case, run) = c.clear(solver)?;
    c.artifacts(&case, &run)?;
    let mut summary = report::summary_json(&run);
    if let Some(seed) = c.seed {
        let mc = market::monte_carlo(&case, &run, 200, seed).map_err(CliError::Market)?;
        summary["monte_carlo"] = json!({
            "seed": seed,
            "samples": mc.samples,
            "max_violation_mw": mc.max_violation,
            "failures": mc.failures.len(),
        });
    }
    let rows: Vec<String> = summary
        .as_object()
        .expect("summary is an object")
        .iter()
        .map(|(k, v)| format!("{k},{}", v.to_string().replace(',', ";")))
        .collect();
    let csv = format!("field,value\n{}\n", rows.join("\n"));
    c.emit(&csv, summary);
    Ok(())
}

fn cmd_price(c: &Common, solver: &dyn Solver) -> Result<()> {
    let (case, run) = c.clear(solver)?;
    c.artifacts(&case, &run)?;
    let csv = report::prices_csv(&case, &run.prices);
    c.emit(&csv, csv_json(&csv));
    Ok(())
}

fn cmd_settle(c: &Common, solver: &dyn Solver) -> Result<()> {
    let (case, run) = c.clear(solver)?;
    c.artifacts(&case, &run)?;
    let csv = report::settlement_csv(&case, &run);
    c.emit(&csv, csv_json(&csv));
    Ok(())
}

fn read_portfolio(path: &Path) -> Result<FtrPortfolio> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let arr = match &v {
        Value::Array(a) => a,
        Value::Object(o) => o
            .get("amounts")
            .and_then(Value::as_array)
            .ok_or_else(|| CliError::Input(format!("{}: missing `amounts` array", path.display())))?,
        _ => {
            return Err(CliError::Input(format!(
                "{}: expected an array of amounts",
                path.display()
            )))
        }
    };
    let amounts = arr
        .iter()
        .map(|x| {
            x.as_f64()
                .ok_or_else(|| CliError::Input(format!("{}: non-numeric amount {x}", path.display())))
        })
        .collect::<Result<Vec<f64>>>()?;
    FtrPortfolio::new(amounts).map_err(CliError::Settlement)
}

fn cmd_ftr(c: &Common, portfolio: &Path, hour: Option<usize>, solver: &dyn Solver) -> Result<()> {
    let pf = read_portfolio(portfolio)?;
    let (case, run) = c.clear(solver)?;
    if pf.amounts.len() != case.buses {
        return Err(CliError::Input(format!(
            "portfolio has {} amounts, case has {} buses",
            pf.amounts.len(),
            case.buses
        )));
    }
    let sf = market::shift_factors(&case).map_err(CliError::Market)?;
    let flows = ftr_sft(&pf, &sf, &line_capacities(&case)).map_err(CliError::Settlement)?;
    let hours: Vec<usize> = match hour {
        Some(h) if (1..=case.horizon).contains(&h) => vec![h - 1],
        Some(h) => return Err(CliError::Input(format!("hour {h} outside 1..={}", case.horizon))),
        None => (0..case.horizon).collect(),
    };
    let mut rows = Vec::new();
    for &t in &hours {
        let f = ftr_settle(&pf, &run.prices, &run.schedule, &sf, t).map_err(CliError::Settlement)?;
        rows.push((t, f, run.settlement.residue[t]));
    }
    let csv = report::ftr_csv(&rows);
    let json = report::ftr_json(&case, &flows, &rows);
    c.write("ftr.csv", &csv)?;
    c.write("ftr.json", &pretty(&json))?;
    match c.format {
        Format::Json => println!("{}", pretty(&json)),
        Format::Csv => print!("{csv}"),
        Format::Table => {
            println!("SFT feasible: {}", flows.feasible);
            for (l, f) in case.lines.iter().zip(&flows.flows) {
                println!("  {} flow {:.4} MW (cap {})", l.id, f, l.capacity);
            }
            print!("{}", report::csv_to_table(&csv));
        }
    }
    Ok(())
}

fn cmd_sweep(c: &Common, lambdas: &[f64], deltas: &[f64], solver: &dyn Solver) -> Result<()> {
    let case = c.load()?;
    let sw = market::sweep(&case, &c.config(), lambdas, deltas, solver).map_err(CliError::Market)?;
    let csv = report::sweep_csv(&sw);
    c.write("sweep.csv", &csv)?;
    let json = json!({ "monotone": sw.monotone, "rows": sw.rows });
    match c.format {
        Format::Table => {
            print!("{}", report::csv_to_table(&csv));
            println!("monotone in budgets: {}", sw.monotone);
        }
        _ => c.emit(&csv, json),
    }
    Ok(())
}

fn cmd_heatmap(c: &Common, down: bool, solver: &dyn Solver) -> Result<()> {
    let (_, run) = c.clear(solver)?;
    let m = report::heatmap(&run.prices, down);
    let csv = report::heatmap_csv(&m);
    c.write(if down { "heatmap_down.csv" } else { "heatmap_up.csv" }, &csv)?;
    c.emit(
        &csv,
        json!({ "direction": if down { "down" } else { "up" }, "values": m }),
    );
    Ok(())
}

fn cmd_compare(c: &Common, solver: &dyn Solver) -> Result<()> {
    let case = c.load()?;
    let trad_cfg = RunConfig {
        mode: Mode::Traditional,
        ..c.config()
    };
    let ump_cfg = RunConfig {
        mode: Mode::Robust,
        lines: false,
        ..c.config()
    };
    let trad = market::clear(&case, &trad_cfg, solver).map_err(CliError::Market)?;
    let ump = market::clear(&case, &ump_cfg, solver).map_err(CliError::Market)?;
    let mut csv =
        String::from("hour,trad_lmp,trad_reserve_up,trad_reserve_down,ump_lmp,ump_up,ump_down,credits,charges\n");
    for t in 0..case.horizon {
        let credits: f64 = ump.settlement.reserve.iter().map(|r| r[t]).sum();
        let charges: f64 = ump.settlement.uncertainty.iter().map(|r| r[t]).sum();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            t + 1,
            report::price(trad.prices.lmp[0][t]),
            report::price(trad.prices.ump_up[0][t]),
            report::price(trad.prices.ump_down[0][t]),
            report::price(ump.prices.lmp[0][t]),
            report::price(ump.prices.ump_up[0][t]),
            report::price(ump.prices.ump_down[0][t]),
            report::money(credits),
            report::money(charges),
        ));
    }
    c.write("compare_traditional.csv", &csv)?;
    let json = json!({
        "traditional_cost": trad.cost,
        "ump_cost": ump.cost,
        "reserve_credits": ump.settlement.total_reserve(),
        "uncertainty_charges": ump.settlement.total_uncertainty(),
        "hours": csv_json(&csv),
    });
    match c.format {
        Format::Table => {
            print!("{}", report::csv_to_table(&csv));
            println!(
                "cost traditional {} / ump {}; credits {} = charges {}",
                report::money(trad.cost),
                report::money(ump.cost),
                report::money(ump.settlement.total_reserve()),
                report::money(ump.settlement.total_uncertainty())
            );
        }
        _ => c.emit(&csv, json),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let solver = solver_from_env().map_err(CliError::Solver)?;
    let s = solver.as_ref();
    match &cli.command {
        Command::Solve(c) => cmd_solve(c, s),
        Command::Price(c) => cmd_price(c, s),
        Command::Settle(c) => cmd_settle(c, s),
        Command::Ftr {
            common,
            portfolio,
            hour,
        } => cmd_ftr(common, portfolio, *hour, s),
        Command::Sweep {
            common,
            lambdas,
            lambda_deltas,
        } => cmd_sweep(common, lambdas, lambda_deltas, s),
        Command::Heatmap { common, down } => cmd_heatmap(common, *down, s),
        Command::CompareTraditional(c) => cmd_compare(c, s),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{record}");
            ExitCode::from(2)
        }
    }
}
