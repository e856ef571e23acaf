use bubbleforge::cli::{
    error_json, exit_code, parse_complex, parse_map_spec, parse_rational, run, Command, Format,
    RunConfig,
};
use bubbleforge::Error;
use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Rotation number of f + ω.
    Rot,
    /// The interval I_{p/q}.
    Interval,
    /// τ(f + ω) for Im ω > 0, or its boundary value τ̄ for real ω.
    Tau,
    /// The p/q-bubble.
    Bubble,
    /// Infinitesimal 0-bubble for the perturbation sin 2πnx.
    Infbubble,
    /// Periodic points, multipliers, chart and transition-map residuals.
    Classify,
    /// Infinitesimal bubbles for n = 1, 2, 3, 4, 5, 10 as SVG files.
    Figure1,
}

#[derive(ValueEnum, Clone, Copy)]
enum Fmt {
    Json,
    Csv,
    Svg,
}

#[derive(clap::Args)]
struct Opts {
    /// Map specification, e.g. `moebius:a=0.5+sin:n=3,eps=0.001`.
    #[arg(long, default_value = "moebius:a=0.5", global = true)]
    map: String,
    /// Rational rotation p/q.
    #[arg(long, default_value = "0/1", global = true)]
    rational: String,
    /// Parameter ω, e.g. `0.1+0.2i`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    omega: Option<String>,
    /// Perturbation size ε (infbubble; default per panel).
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Perturbation frequency n (infbubble).
    #[arg(long, default_value_t = 1, global = true)]
    n: usize,
    /// Sample count (bubble: 101, infbubble/figure1: 1001).
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Initial Fourier truncation order.
    #[arg(long, default_value_t = 16, global = true)]
    k: usize,
    /// Solver and rotation-number tolerance.
    #[arg(long, default_value_t = 1e-10, global = true)]
    tol: f64,
    /// Drop linear samples with ε|dτ/dε| above this fraction of Im τ̄.
    #[arg(long, default_value_t = 0.5, global = true)]
    cutoff: f64,
    /// Keep equal axis scales in SVG output.
    #[arg(long, global = true)]
    no_rescale: bool,
    #[arg(long, value_enum, default_value = "json", global = true)]
    format: Fmt,
    /// Output file (directory for figure1).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (overrides BUBBLEFORGE_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Parser)]
#[command(
    name = "bubbleforge",
    version,
    about = "Complex rotation numbers and bubbles of circle maps"
)]
struct Args {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    opts: Opts,
}

fn config(args: Args) -> Result<RunConfig, Error> {
    let o = args.opts;
    let command = match args.command {
        Cmd::Rot => Command::Rot,
        Cmd::Interval => Command::Interval,
        Cmd::Tau => Command::Tau,
        Cmd::Bubble => Command::Bubble,
        Cmd::Infbubble => Command::Infbubble,
        Cmd::Classify => Command::Classify,
        Cmd::Figure1 => Command::Figure1,
    };
    let mut cfg = RunConfig::new(command, parse_map_spec(&o.map)?);
    cfg.rational = parse_rational(&o.rational)?;
    cfg.omega = o.omega.as_deref().map(parse_complex).transpose()?;
    cfg.eps = o.eps;
    cfg.n = o.n;
    cfg.samples = o.samples;
    cfg.k = o.k;
    cfg.tol = o.tol;
    cfg.cutoff = o.cutoff;
    cfg.rescale = !o.no_rescale;
    cfg.format = match o.format {
        Fmt::Json => Format::Json,
        Fmt::Csv => Format::Csv,
        Fmt::Svg => Format::Svg,
    };
    cfg.out = o.out;
    cfg.threads = o.threads.or_else(|| {
        std::env::var("BUBBLEFORGE_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if !(cfg.tol > 0.0) || cfg.k < 4 || cfg.n == 0 {
        return Err(Error::Contract("need tol > 0, k ≥ 4 and n ≥ 1".into()));
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = config(args).and_then(|cfg| run(&cfg, &mut std::io::stdout().lock()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
