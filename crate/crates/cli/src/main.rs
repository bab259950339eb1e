use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use mfcz_cli::params::{parse_flags, read_config};

#[derive(Parser)]
#[command(name = "mfcz", version, about = "Multi-frequency Calderon-Zygmund experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the experiment catalog.
    List,
    /// Run a named experiment: `mfcz <experiment> [--config FILE] [--out DIR] [--dry-run] [--key value]...`
    #[command(external_subcommand)]
    Run(Vec<String>),
}

struct RunArgs {
    name: String,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    dry_run: bool,
    rest: Vec<String>,
}

fn split_args(args: Vec<String>) -> Result<RunArgs> {
    let mut it = args.into_iter();
    let name = it.next().unwrap_or_default();
    let mut a = RunArgs {
        name,
        config: None,
        out: None,
        dry_run: false,
        rest: Vec::new(),
    };
    while let Some(x) = it.next() {
        let (key, inline) = match x.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (x.clone(), None),
        };
        let mut value = |k: &str| -> Result<String> {
            inline
                .clone()
                .or_else(|| it.next())
                .ok_or_else(|| anyhow::anyhow!("{k} needs a value"))
        };
        match key.as_str() {
            "--config" => a.config = Some(value("--config")?.into()),
            "--out" => a.out = Some(value("--out")?.into()),
            "--dry-run" => a.dry_run = true,
            _ => a.rest.push(x),
        }
    }
    Ok(a)
}

fn run(args: Vec<String>) -> Result<bool> {
    let a = split_args(args)?;
    let mut overrides = match &a.config {
        Some(p) => read_config(p)?,
        None => Vec::new(),
    };
    overrides.extend(parse_flags(&a.rest)?);
    if a.dry_run {
        let p = mfcz_cli::validate(&a.name, &overrides)?;
        for (k, v) in p.map() {
            println!("{k}={v}");
        }
        println!("{}: parameters valid", a.name);
        return Ok(true);
    }
    let out = a.out.unwrap_or_else(|| PathBuf::from("out").join(&a.name));
    let report = mfcz_cli::run(&a.name, &overrides, Some(&out))?;
    for v in &report.verdicts {
        println!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    println!("wrote {} ({:.2} s)", out.display(), report.wall_clock_s);
    Ok(report.all_pass)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for e in mfcz_cli::list_experiments() {
                println!("{:<20} {}", e.name, e.anchor);
            }
            ExitCode::SUCCESS
        }
        Command::Run(args) => match run(args) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::FAILURE,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
    }
}
