use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use superflow::geodesics::Mode;
use superflow::verify::Suite;
use superflow::Execution;
use superflow_cli::{
    cmd_christoffel, cmd_exp, cmd_flow, cmd_geodesic, cmd_verify, load_model, CliError, ExpArgs, RunArgs, VerifyArgs,
};

#[derive(Parser)]
#[command(name = "superflow", version, about = "Geodesics and exponential maps on graded Riemannian charts")]
struct Cli {
    /// Model file (JSON).
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Run batch work on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the nonzero Christoffel symbols at a point.
    Christoffel {
        /// Use the position of this initial condition.
        #[arg(long)]
        ic: Option<String>,
        /// Body coordinates, `x=2,y=0.5`; unset coordinates take the first sample.
        #[arg(long)]
        point: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate a geodesic and write its trajectory CSV.
    Geodesic {
        #[arg(long)]
        ic: String,
        #[arg(long, default_value_t = Mode::Paper)]
        mode: Mode,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the Hamiltonian geodesic flow and write its CSV.
    Flow {
        #[arg(long)]
        ic: String,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exponential-map Jacobian at a body point, and exp of an initial velocity.
    Exp {
        #[arg(long)]
        ic: Option<String>,
        #[arg(long)]
        point: Vec<String>,
        #[arg(long)]
        dt: Option<f64>,
        /// Finite-difference step for the even Jacobian columns.
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run verification suites and write a JSON report.
    Verify {
        #[arg(long, default_value_t = Suite::All)]
        suite: Suite,
        /// Tolerance overrides: a number for all, or `name=value`.
        #[arg(long)]
        tol: Vec<String>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli
        .model
        .ok_or_else(|| CliError::Usage("--model is required".into()))?;
    let model = load_model(&path)?;
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let stdout = std::io::stdout();
    let mut stdout = stdout.lock();
    match cli.command {
        Command::Christoffel { ic, point, out } => {
            cmd_christoffel(&model, ic.as_deref(), &point, out.as_deref(), &mut stdout)
        }
        Command::Geodesic { ic, mode, t_end, dt, out } => {
            let args = RunArgs { ic: &ic, t_end, dt, out: out.as_deref() };
            cmd_geodesic(&model, &args, mode, &mut stdout)
        }
        Command::Flow { ic, t_end, dt, out } => {
            let args = RunArgs { ic: &ic, t_end, dt, out: out.as_deref() };
            cmd_flow(&model, &args, &mut stdout)
        }
        Command::Exp { ic, point, dt, h, out } => {
            let args = ExpArgs {
                ic: ic.as_deref(),
                point: &point,
                dt,
                h,
                out: out.as_deref(),
            };
            cmd_exp(&model, &args, exec, &mut stdout)
        }
        Command::Verify { suite, tol, t_end, dt, out } => {
            let args = VerifyArgs {
                suite,
                tol: &tol,
                t_end,
                dt,
                out: out.as_deref(),
                exec,
            };
            cmd_verify(&model, &args, &mut stdout)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("superflow: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
