//! Command-line driver: compile, check, fuzz.
//!
//! Exit codes: 0 success or equivalent, 1 inequivalence found, 2 input error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sparql2sql::pipeline::{self, CompileOptions, EmitKind, StageError};
use sparql2sql::sql::SqlOptions;

#[derive(Parser)]
#[command(name = "sparql2sql", about = "Compile SPARQL over a relational mapping into SQL")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmitArg {
    Sql,
    Ra,
}

#[derive(Subcommand)]
enum Cmd {
    /// Translate a query and print SQL (or the optimized plan) on stdout.
    Compile {
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        mapping: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        /// Output format.
        #[arg(long, value_enum, default_value = "sql")]
        emit: EmitArg,
        /// Stop after unfolding and constant folding.
        #[arg(long)]
        no_optimize: bool,
        /// Print the rewrite trace on stderr.
        #[arg(long)]
        explain: bool,
        /// Terminate the SQL statement with a semicolon.
        #[arg(long)]
        semicolon: bool,
    },
    /// Cross-check the compiled plans against the brute-force reference
    /// on a concrete instance.
    Check {
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        mapping: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Generate random query/instance pairs and cross-check each one.
    Fuzz {
        #[arg(long)]
        mapping: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Compare only unfolded vs optimized, skipping the reference.
        #[arg(long)]
        check_optimized_only: bool,
    },
}

fn read(stage: &'static str, path: &Path) -> Result<String, StageError> {
    std::fs::read_to_string(path).map_err(|e| StageError {
        stage,
        message: format!("{}: {e}", path.display()),
    })
}

fn run(cli: Cli) -> Result<ExitCode, StageError> {
    match cli.cmd {
        Cmd::Compile {
            query,
            mapping,
            schema,
            emit,
            no_optimize,
            explain,
            semicolon,
        } => {
            let q = read("query", &query)?;
            let m = read("mapping", &mapping)?;
            let s = read("schema", &schema)?;
            let opts = CompileOptions {
                optimize: !no_optimize,
                emit: match emit {
                    EmitArg::Sql => EmitKind::Sql,
                    EmitArg::Ra => EmitKind::Ra,
                },
                sql: SqlOptions {
                    semicolon,
                    ..SqlOptions::default()
                },
            };
            let out = pipeline::compile(&q, &m, &s, &opts)?;
            print!("{}", out.output);
            if explain {
                for line in &out.trace {
                    eprintln!("{line}");
                }
                if out.round_limit_hit {
                    eprintln!("note: rewrite round limit reached");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Check {
            query,
            mapping,
            schema,
            data,
        } => {
            let q = read("query", &query)?;
            let m = read("mapping", &mapping)?;
            let s = read("schema", &schema)?;
            let d = read("data", &data)?;
            let r = pipeline::check(&q, &m, &s, &d)?;
            print!("{}", r.report);
            Ok(if r.equivalent {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Cmd::Fuzz {
            mapping,
            schema,
            seed,
            count,
            check_optimized_only,
        } => {
            let m = read("mapping", &mapping)?;
            let s = read("schema", &schema)?;
            let mut prefix = format!(
                "sparql2sql fuzz --schema {} --mapping {}",
                schema.display(),
                mapping.display()
            );
            if check_optimized_only {
                prefix.push_str(" --check-optimized-only");
            }
            let r = pipeline::fuzz(&s, &m, seed, count, check_optimized_only, &prefix)?;
            print!("{}", r.report);
            Ok(if r.all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
