//! `nsdarcy`: solve the coupled free-flow/porous-flow problem, run the
//! verification suite, manufactured-solution studies, and mesh summaries.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 solver failure, 3 config error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nsdarcy::analysis::InfSupPair;

use commands::Failure;
use config::{DataCase, MmsKind, RunConfig};

#[derive(Parser)]
#[command(name = "nsdarcy", version, about = "Coupled Navier-Stokes/Darcy solver with energy-estimate checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one data set and write solution.json, state.json and solution.vtk.
    Solve(Flags),
    /// Run the verification suite and write verify.json.
    Verify(Flags),
    /// Manufactured-solution convergence study; writes rates.csv and mms.json.
    Mms(Flags),
    /// Print mesh and DOF counts as JSON.
    MeshInfo(Flags),
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum PairArg {
    TaylorHood,
    EqualOrder,
}

#[derive(Args)]
struct Flags {
    /// JSON config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// builtin:WxH or a mesh file (.msh or mesh dump).
    #[arg(long)]
    mesh: Option<String>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    refine: Option<usize>,
    #[arg(long)]
    c_mult: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_convection: bool,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, value_enum)]
    case: Option<DataCase>,
    /// Velocity/pressure pair for the inf-sup check; equal_order is the
    /// unstable negative control.
    #[arg(long, value_enum)]
    pair: Option<PairArg>,
    #[arg(long, value_enum)]
    mms_case: Option<MmsKind>,
    /// Report rates without asserting them.
    #[arg(long)]
    no_assert: bool,
}

impl Flags {
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.mesh {
            c.mesh = v.clone();
        }
        if let Some(v) = self.levels {
            c.levels = Some(v);
        }
        if let Some(v) = self.refine {
            c.refine = v;
        }
        if let Some(v) = self.c_mult {
            c.c_mult = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        if self.no_convection {
            c.convection = false;
        }
        if let Some(v) = self.sigma {
            c.sigma = Some(v);
        }
        if let Some(v) = self.case {
            c.case = v;
        }
        if let Some(v) = self.pair {
            c.pair = match v {
                PairArg::TaylorHood => InfSupPair::TaylorHood,
                PairArg::EqualOrder => InfSupPair::EqualOrderP1,
            };
        }
        if let Some(v) = self.mms_case {
            c.mms_case = v;
        }
        if self.no_assert {
            c.assert_rates = false;
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Solve(f) => {
            let cfg = f.resolve()?;
            let s = commands::solve(&cfg)?;
            println!(
                "converged in {} iterations, relative residual {:.3e}; bound ratio {:.4}; output in {}",
                s["iterations"],
                s["relative_residual"].as_f64().unwrap_or(f64::NAN),
                s["report"]["bound_ratio"].as_f64().unwrap_or(f64::NAN),
                cfg.out.display()
            );
        }
        Command::Verify(f) => {
            let cfg = f.resolve()?;
            let bundle = commands::verify(&cfg)?;
            let mut failed = Vec::new();
            for (name, c) in bundle["criteria"].as_object().expect("criteria object") {
                let pass = c["pass"] == serde_json::json!(true);
                println!("{name}: {}", if pass { "pass" } else { "FAIL" });
                if !pass {
                    failed.push(name.as_str());
                }
            }
            if !failed.is_empty() {
                return Err(Failure::Verification(format!("failed criteria: {}", failed.join(", "))));
            }
        }
        Command::Mms(f) => {
            let cfg = f.resolve()?;
            let s = commands::mms(&cfg)?;
            println!("{}: final rates {}", s["case"], s["final_rates"]);
        }
        Command::MeshInfo(f) => {
            let cfg = f.resolve()?;
            println!("{}", serde_json::to_string_pretty(&commands::mesh_info(&cfg)?).expect("serializable"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
