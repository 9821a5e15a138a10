//! `robba-kit`: JSON in, JSON out.

mod commands;

use std::io::Read;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use robba_core::json::parse_rational_str;
use robba_core::{Error, RingConfig};
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "robba-kit", version, about = "p-adic Laurent, Robba and Tate series toolkit")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Residue characteristic p.
    #[arg(long, global = true, default_value_t = 5)]
    prime: u64,
    /// Ramification index e.
    #[arg(long, global = true, default_value_t = 1)]
    ram: u32,
    /// Frobenius power f (q = p^f).
    #[arg(long, global = true, default_value_t = 1)]
    power: u32,
    /// Default pi-adic working precision N.
    #[arg(long, global = true, default_value_t = 12)]
    precision: i64,
    /// Log-radius of a polydisc variable, rho = p^(-a/b); repeat once per variable.
    #[arg(long = "radius", global = true, value_name = "a/b")]
    radius: Vec<String>,
    /// Degree cap per variable for Tate series that do not carry one.
    #[arg(long, global = true)]
    cap: Option<u32>,
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Largest j tried for the normalizing automorphism T_j.
    #[arg(long, global = true)]
    jmax: Option<u32>,
    /// Largest block length tried by the contraction probe of `solve split`.
    #[arg(long, global = true)]
    kmax: Option<usize>,
    /// Input file; standard input when absent or "-".
    #[arg(long, short, global = true)]
    input: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a single operation on a series.
    Eval {
        #[command(subcommand)]
        op: EvalOp,
    },
    /// Newton slopes of a sigma-module given by its Frobenius matrix.
    Slopes {
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
    /// Solve the twisted or splitting equation.
    Solve {
        #[command(subcommand)]
        op: SolveOp,
    },
    /// Unimodular tuples over Tate algebras.
    Qs {
        /// Run the randomized round-trip suites instead of a subcommand.
        #[arg(long)]
        selftest: bool,
        #[command(subcommand)]
        op: Option<QsOp>,
    },
    /// Re-check a certificate by multiplications and comparisons only.
    Verify,
    /// Run all randomized suites with the given seed.
    Selftest,
}

#[derive(Subcommand, Debug)]
pub enum EvalOp {
    /// w_r of a Laurent series.
    Wr {
        #[arg(long)]
        r: String,
    },
    /// Naive partial valuation v_n.
    Vn {
        #[arg(long)]
        n: String,
    },
    /// d/du.
    Derive,
    /// The Frobenius action; input may be {"x": series, "sigma": image of u}.
    Sigma,
    /// Gauss valuation of a Tate series.
    Gauss,
    /// Leading term in a variable (default: the last one).
    Leading {
        #[arg(long)]
        var: Option<usize>,
    },
}

#[derive(Subcommand, Debug)]
pub enum SolveOp {
    /// lambda sigma(y) - y = x; input {"lambda", "x", "sigma"}.
    Twisted,
    /// -X + A sigma(X) D^-1 = B; input {"A", "B", "D", "N", "sigma"}.
    Split,
}

#[derive(Subcommand, Debug)]
pub enum QsOp {
    /// Weierstrass preparation in a variable (default: the last one).
    Prepare {
        #[arg(long)]
        var: Option<usize>,
    },
    /// Apply T_j, or search j up to --jmax when --j is absent.
    Tj {
        #[arg(long)]
        j: Option<u32>,
        /// Ring mode: integral substitution with rescaled radii; reports lambda.
        #[arg(long)]
        ring: bool,
    },
    /// Reduce a unimodular tuple to e_1; input {"f": [...], "witness": [...]}.
    Reduce,
    /// Complete a unimodular column to an invertible matrix.
    Complete,
    /// Free basis of the kernel of a unimodular row.
    Kernel,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) => 2,
        Error::NoContraction(_) => 4,
        _ => 3,
    }
}

fn error_json(e: &Error) -> Value {
    json!({"error": e.name(), "message": e.to_string()})
}

fn emit(v: &Value) {
    println!("{}", serde_json::to_string(v).expect("JSON values serialize"));
}

impl Global {
    pub fn config(&self) -> robba_core::Result<RingConfig> {
        if self.precision < 1 {
            return Err(Error::InvalidConfig("--precision must be at least 1".into()));
        }
        Ok(RingConfig::new(self.prime, self.power, self.ram, self.precision)?.guard_from_env())
    }

    pub fn radius(&self) -> robba_core::Result<Vec<num_rational::Rational64>> {
        self.radius.iter().map(|s| parse_rational_str(s)).collect()
    }

    pub fn read_input(&self) -> robba_core::Result<Value> {
        let mut text = String::new();
        match self.input.as_deref() {
            None | Some("-") => {
                std::io::stdin().read_to_string(&mut text).map_err(|e| Error::Parse(e.to_string()))?;
            }
            Some(path) => {
                text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{path}: {e}")))?;
            }
        }
        robba_core::json::parse(&text)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprintln!("{e}");
            emit(&error_json(&Error::Parse(e.kind().to_string())));
            return ExitCode::from(2);
        }
    };
    let g = &cli.global;
    let outcome = match &cli.command {
        Command::Eval { op } => commands::eval(g, op),
        Command::Slopes { depth } => commands::slopes(g, *depth),
        Command::Solve { op } => commands::solve(g, op),
        Command::Qs { selftest: true, .. } | Command::Selftest => Ok(commands::selftest(g)),
        Command::Qs { op: Some(op), .. } => commands::qs(g, op),
        Command::Qs { op: None, .. } => Err(Error::Parse("qs needs a subcommand or --selftest".into())),
        Command::Verify => commands::verify(g),
    };
    match outcome {
        Ok((v, ok)) => {
            emit(&v);
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("robba-kit: {e}");
            emit(&error_json(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
