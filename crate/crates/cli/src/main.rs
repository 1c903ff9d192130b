//! `lightatom` — scenario runner for the light/atomic-ensemble numerics.

mod analyses;
mod config;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use analyses::{run_analysis, AnalysisOutput, Table};
use config::{set_param, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("bad parameter path: {0}")]
    BadParameterPath(String),
    #[error("analysis failed: {0}")]
    Analysis(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::BadParameterPath(_) => 2,
            Self::Analysis(_) | Self::Io(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lightatom", version, about = "Light / atomic-ensemble interface numerics")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed (overrides `seed` in the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the parallel kernels.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run every analysis listed in the config.
    Run { config: PathBuf },
    /// Re-run the config once per value of one numeric field.
    Sweep {
        config: PathBuf,
        /// Dotted path (`memory.kappa`) or JSON pointer (`/memory/kappa`).
        #[arg(long)]
        param: String,
        /// Comma-separated values; empty for an empty table.
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        values: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not set thread count: {e}");
        }
    }
    let result = match &cli.cmd {
        Cmd::Run { config } => run(config, &cli),
        Cmd::Sweep { config, param, values } => sweep(config, param, values, &cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn load(path: &Path, cli: &Cli) -> Result<(Value, RunConfig), CliError> {
    let mut raw = RunConfig::load(path)?;
    if let (Some(seed), Value::Object(map)) = (cli.seed, &mut raw) {
        map.insert("seed".into(), json!(seed));
    }
    let cfg = RunConfig::from_value(raw.clone())?;
    Ok((raw, cfg))
}

fn out_dir(cfg: &RunConfig, cli: &Cli) -> Result<PathBuf, CliError> {
    let dir = cli.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn header_lines(hash: &str, seed: u64, extra: &[(&str, String)]) -> Vec<String> {
    let mut h = vec![
        format!("# lightatom {} / lightatom-cli {}", lightatom::VERSION, env!("CARGO_PKG_VERSION")),
        format!("# config_sha256: {hash}"),
        format!("# seed: {seed}"),
    ];
    h.extend(extra.iter().map(|(k, v)| format!("# {k}: {v}")));
    h
}

fn write_csv(path: &Path, header: &[String], table: &Table) -> Result<(), CliError> {
    let mut buf = Vec::new();
    for line in header {
        writeln!(buf, "{line}")?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(&table.header).map_err(csv_err)?;
        for r in &table.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush()?;
    }
    fs::write(path, buf)?;
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(io::Error::other(e))
}

fn meta(cfg: &RunConfig) -> Value {
    json!({
        "config_sha256": cfg.hash(),
        "seed": cfg.seed,
        "versions": {"lightatom": lightatom::VERSION, "lightatom-cli": env!("CARGO_PKG_VERSION")},
    })
}

fn run_all(cfg: &RunConfig) -> Result<Vec<AnalysisOutput>, CliError> {
    cfg.analyses.par_iter().map(|a| run_analysis(a, cfg)).collect()
}

fn run(path: &Path, cli: &Cli) -> Result<(), CliError> {
    let (_, cfg) = load(path, cli)?;
    let dir = out_dir(&cfg, cli)?;
    let outputs = run_all(&cfg)?;
    let hash = cfg.hash();
    let mut analyses = serde_json::Map::new();
    for o in &outputs {
        let header = header_lines(&hash, cfg.seed, &[("analysis", o.name.to_string())]);
        write_csv(&dir.join(format!("{}.csv", o.name)), &header, &o.table)?;
        analyses.insert(o.name.to_string(), o.summary.clone());
        if let Some(report) = o.summary.get("report").and_then(Value::as_str) {
            println!("{report}");
        }
    }
    let summary = json!({"meta": meta(&cfg), "analyses": analyses});
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(dir.join("summary.json"), text + "\n")?;
    println!("wrote {}", dir.join("summary.json").display());
    Ok(())
}

fn parse_values(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| CliError::Config(format!("--values: '{t}' is not a number"))))
        .collect()
}

/// Numeric and boolean top-level summary fields as `analysis.key` columns.
fn flatten(outputs: &[AnalysisOutput]) -> Vec<(String, String)> {
    let mut cols = Vec::new();
    for o in outputs {
        if let Value::Object(map) = &o.summary {
            for (k, v) in map {
                let cell = match v {
                    Value::Number(n) => n.as_f64().map(analyses::fmt_f64),
                    Value::Bool(b) => Some(b.to_string()),
                    _ => None,
                };
                if let Some(c) = cell {
                    cols.push((format!("{}.{k}", o.name), c));
                }
            }
        }
    }
    cols
}

fn sweep(path: &Path, param: &str, values: &str, cli: &Cli) -> Result<(), CliError> {
    let (raw, cfg) = load(path, cli)?;
    let values = parse_values(values)?;
    // resolve the path once even for an empty sweep
    set_param(&mut raw.clone(), param, 0.0)?;
    let dir = out_dir(&cfg, cli)?;
    let mut table = Table { header: vec![param.to_string()], rows: Vec::new() };
    for (i, v) in values.iter().enumerate() {
        let mut edited = raw.clone();
        set_param(&mut edited, param, *v)?;
        let c = RunConfig::from_value(edited)?;
        let cols = flatten(&run_all(&c)?);
        if i == 0 {
            table.header.extend(cols.iter().map(|c| c.0.clone()));
        }
        let mut row = vec![analyses::fmt_f64(*v)];
        row.extend(cols.into_iter().map(|c| c.1));
        table.rows.push(row);
    }
    let header = header_lines(&cfg.hash(), cfg.seed, &[("sweep", param.to_string())]);
    let file = dir.join("sweep.csv");
    write_csv(&file, &header, &table)?;
    println!("wrote {} ({} rows)", file.display(), table.rows.len());
    Ok(())
}
