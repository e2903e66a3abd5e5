use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lqg_cli::config::{parse_override, read_file, resolve, Sources};
use lqg_cli::{qualify, CliError, Experiment, Result, EXPERIMENTS};

#[derive(Parser)]
#[command(name = "lqg", version, about = "Liouville quantum gravity simulation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV tables plus a manifest.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Worker threads (default: all cores). Results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory.
        #[arg(long, env = "LQG_OUT_DIR", default_value = "lqg-out")]
        out_dir: PathBuf,
    },
    /// List the built-in experiments with their keys and defaults.
    List,
    /// Resolve and check a config without running it; prints the canonical
    /// config and its hash.
    Validate {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Describe one experiment's keys.
    Describe { experiment: String },
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment name; may instead come from the config file.
    experiment: Option<String>,
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set field.gamma=1.2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn sources(&self) -> Result<Sources> {
        Ok(Sources {
            file: self.config.as_deref().map(read_file).transpose()?,
            experiment: self.experiment.clone(),
            overrides: self.set.iter().map(|s| parse_override(s)).collect::<Result<_>>()?,
            seed: self.seed,
        })
    }
}

fn schema(out: &mut String, e: &Experiment, docs: bool) {
    for p in (e.params)() {
        if docs {
            let _ = writeln!(out, "  {}.{} = {}    # {}", p.section, p.key, p.default, p.doc);
        } else {
            let _ = writeln!(out, "  {}.{} = {}", p.section, p.key, p.default);
        }
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn execute(cmd: Command, exp_seen: &mut Option<&'static Experiment>) -> Result<()> {
    match cmd {
        Command::List => {
            let mut out = String::new();
            for e in &EXPERIMENTS {
                let _ = writeln!(out, "{}  {}", e.name, e.summary);
                let _ = writeln!(out, "  required: experiment");
                schema(&mut out, e, false);
            }
            emit(&out);
        }
        Command::Describe { experiment } => {
            let e = lqg_cli::find(&experiment)
                .ok_or_else(|| CliError::Config { key: "experiment".into(), message: format!("unknown experiment {experiment:?}") })?;
            let mut out = format!("{}: {}\nkeys (defaults shown):\n", e.name, e.summary);
            let _ = writeln!(out, "  seed = {}    # master seed", lqg_cli::config::DEFAULT_SEED);
            schema(&mut out, e, true);
            emit(&out);
        }
        Command::Validate { cfg } => {
            let c = resolve(&cfg.sources()?)?;
            *exp_seen = Some(c.experiment);
            (c.experiment.validate)(&c)?;
            emit(&format!("{}# config_hash = {}\n", c.canonical(), c.hash()));
        }
        Command::Run { cfg, threads, out_dir } => {
            let c = resolve(&cfg.sources()?)?;
            *exp_seen = Some(c.experiment);
            if let Some(n) = threads {
                if n == 0 {
                    return Err(CliError::Config { key: "threads".into(), message: "need at least one thread".into() });
                }
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| CliError::Config { key: "threads".into(), message: e.to_string() })?;
            }
            (c.experiment.validate)(&c)?;
            let m = lqg_cli::run(&c, &out_dir)?;
            let mut out = String::new();
            for o in &m.outputs {
                let _ = writeln!(out, "{}  {}", o.sha256, out_dir.join(&o.path).display());
            }
            let _ = writeln!(out, "manifest {}", out_dir.join(lqg_cli::manifest::MANIFEST_FILE).display());
            emit(&out);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut exp = None;
    match execute(cli.command, &mut exp) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let key = match (&e, exp) {
                (CliError::Core(ce), Some(x)) => ce.parameter().and_then(|n| qualify(x, n)),
                _ => None,
            };
            eprintln!("{}", e.record(key.as_deref()));
            ExitCode::FAILURE
        }
    }
}
