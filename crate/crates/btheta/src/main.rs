use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use btheta::job::{self, CommandSpec, JobSpec, OutputFormat};

#[derive(Parser)]
#[command(name = "btheta", version, about = "Enumerate, test and count practical numbers, y-dense-divisor numbers and related theta-chain sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Theta spec: "practical", "dense:y=5/2", "custom:a=1,b=0,c=1",
    /// optionally suffixed "@z=3/2" for a scaled set.
    #[arg(long, default_value = "practical")]
    spec: String,
    /// Number of range shards (checkpointing granularity).
    #[arg(long, default_value_t = 1)]
    shards: u32,
    /// Line-delimited JSON checkpoint; resumable after interruption.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Output format: json, csv or plain.
    #[arg(long, default_value = "json")]
    output: String,
    /// Worker threads; defaults to available cores. BTHETA_THREADS env var
    /// takes precedence over the default but not over this flag.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// List set members in [lo, hi).
    Enumerate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lo: u64,
        #[arg(long)]
        hi: u64,
    },
    /// Count set members up to x.
    Count {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        x: u64,
    },
    /// Count members of the z-scaled set up to x with largest prime factor <= y.
    SmoothCount {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        x: u64,
        #[arg(long)]
        y: u64,
        #[arg(long, default_value = "1")]
        z: String,
    },
    /// Count primes p <= x with p - h in the set.
    ShiftedPrimes {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        h: i64,
        #[arg(long)]
        x: u64,
    },
    /// Count n <= x with n and n + h both in the set.
    Pairs {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        h: i64,
        #[arg(long)]
        x: u64,
    },
    /// Count n <= x with n + h a member for every offset h.
    Tuples {
        #[command(flatten)]
        common: Common,
        /// Comma-separated offsets, strictly increasing, e.g. 0,2,4.
        #[arg(long, value_delimiter = ',')]
        offsets: Vec<u64>,
        #[arg(long)]
        x: u64,
    },
    /// Verify every odd n in [lo, hi) is a prime plus a practical number.
    Margenstern {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lo: u64,
        #[arg(long)]
        hi: u64,
    },
    /// Verify every even n in [lo, hi) is a sum of two practical numbers.
    Melfi {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lo: u64,
        #[arg(long)]
        hi: u64,
    },
    /// Exact sum of (sigma(n)/n)^alpha over smooth members of the scaled set.
    SigmaSum {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        x: u64,
        #[arg(long, default_value_t = 1)]
        alpha: u32,
        /// Smoothness bound; defaults to x (no restriction).
        #[arg(long)]
        y: Option<u64>,
        #[arg(long, default_value = "1")]
        z: String,
    },
    /// Sum of log(p)/p over member prime factors above L.
    WeightSum {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        x: u64,
        #[arg(long, name = "L")]
        l: u64,
    },
    /// count(x) * ln(x) / x together with the raw count.
    Density {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        x: u64,
    },
    /// Run the membership test against the independent brute-force oracle.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        x: u64,
    },
}

impl Command {
    fn split(self) -> (Common, CommandSpec) {
        match self {
            Command::Enumerate { common, lo, hi } => (common, CommandSpec::Enumerate { lo, hi }),
            Command::Count { common, x } => (common, CommandSpec::Count { x }),
            Command::SmoothCount { common, x, y, z } => {
                (common, CommandSpec::SmoothCount { x, y, z })
            }
            Command::ShiftedPrimes { common, h, x } => {
                (common, CommandSpec::ShiftedPrimes { h, x })
            }
            Command::Pairs { common, h, x } => (common, CommandSpec::Pairs { h, x }),
            Command::Tuples { common, offsets, x } => (common, CommandSpec::Tuples { offsets, x }),
            Command::Margenstern { common, lo, hi } => {
                (common, CommandSpec::Margenstern { lo, hi })
            }
            Command::Melfi { common, lo, hi } => (common, CommandSpec::Melfi { lo, hi }),
            Command::SigmaSum { common, x, alpha, y, z } => {
                let y = y.unwrap_or(x);
                (common, CommandSpec::SigmaSum { x, alpha, y, z })
            }
            Command::WeightSum { common, x, l } => (common, CommandSpec::WeightSum { x, l }),
            Command::Density { common, x } => (common, CommandSpec::Density { x }),
            Command::OracleCheck { common, x } => (common, CommandSpec::OracleCheck { x }),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, command) = cli.command.split();

    let threads = common.threads.or_else(|| {
        std::env::var("BTHETA_THREADS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: could not configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }

    let format: OutputFormat = match common.output.parse() {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    let job = JobSpec { command, spec: common.spec, shards: common.shards };
    let mut stdout = std::io::stdout().lock();
    match job::run(&job, common.checkpoint.as_deref(), &mut stdout, format) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
