use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use spillover_core::diagnostics::two_sample_t;
use spillover_core::pipeline::{self, RunConfig, RunReport, Target};
use spillover_core::simulate::{simulate_panel, PanelSimSpec, PlantedEdge};

const EXIT_CONFIG: u8 = 1;
const EXIT_DATA: u8 = 2;

#[derive(Parser)]
#[command(name = "spillover", version, about = "Volatility spillover networks from a panel of time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Log more (repeatable); RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Significance level of the Wald tests.
    #[arg(long)]
    alpha: Option<f64>,
    /// Bins of the cumulative index curves.
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the pair fits.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Descriptive statistics and diagnostic tests per node and period.
    Describe {
        #[command(flatten)]
        run: RunArgs,
        /// Per-node two-sample t-test between two configured periods.
        #[arg(long, value_name = "PERIOD_A:PERIOD_B")]
        ttest: Vec<String>,
    },
    /// Fit every pair and write the directional spillover tests.
    Estimate(RunArgs),
    /// Estimation plus network artifacts and topology.
    Network(RunArgs),
    /// Network plus local spillover indices, curves and period comparison.
    Diffusion(RunArgs),
    /// Network plus the CONCOR block model.
    Blocks(RunArgs),
    /// Every stage.
    Pipeline(RunArgs),
    /// Write a synthetic panel with planted spillover edges.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    nodes: usize,
    /// Observations kept after burn-in.
    #[arg(long)]
    length: usize,
    /// Planted edge, 1-based node numbers: FROM:TO:A:B.
    #[arg(long, value_name = "FROM:TO:A:B")]
    edge: Vec<String>,
    /// First date, YYYY-MM-DD.
    #[arg(long)]
    start: Option<NaiveDate>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl ToString) -> Self {
        Failure { code: EXIT_CONFIG, message: message.to_string() }
    }
}

impl From<pipeline::PipelineError> for Failure {
    fn from(e: pipeline::PipelineError) -> Self {
        Failure { code: e.exit_code() as u8, message: e.to_string() }
    }
}

fn load_config(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut c = RunConfig::from_file(&args.config).map_err(|e| Failure::config(format!("{}: {e}", args.config.display())))?;
    if let Some(v) = args.alpha {
        c.alpha = v;
    }
    if let Some(v) = args.bins {
        c.bins = v;
    }
    if let Some(v) = args.seed {
        c.seed = v;
    }
    if let Some(v) = args.jobs {
        c.jobs = v;
    }
    if let Some(v) = &args.out {
        c.output = v.clone();
    }
    c.validate().map_err(Failure::config)?;
    Ok(c)
}

fn print_summary(report: &RunReport) {
    for p in &report.periods {
        let mut line = format!("{}: {} observations, {} nodes", p.period.name, p.n_obs, p.node_ids.len());
        if !p.fits.is_empty() {
            let _ = write!(line, ", {} fits, {} tests", p.fits.len(), p.tests.len());
        }
        if let Some(t) = p.topology() {
            let _ = write!(line, ", {} edges, ND {:.4}, NE {:.4}, NC {:.4}, NH {:.4}", t.edge_count, t.nd, t.ne, t.nc, t.nh);
        }
        println!("{line}");
    }
    if let Some(c) = &report.comparison {
        for (label, s) in [("out", &c.out_direction), ("in", &c.in_direction)] {
            let f = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.6}"));
            println!(
                "{label}: S_lockdown {}, S_recovery {}, R {}",
                f(s.s_lockdown),
                f(s.s_recovery),
                f(s.resilience)
            );
        }
    }
}

fn ttests(config: &RunConfig, specs: &[String]) -> Result<(), Failure> {
    if specs.is_empty() {
        return Ok(());
    }
    let panel = pipeline::load_input(config)?;
    for spec in specs {
        let (a, b) = spec
            .split_once(':')
            .ok_or_else(|| Failure::config(format!("--ttest expects PERIOD_A:PERIOD_B, got {spec:?}")))?;
        let find = |name: &str| {
            config
                .periods
                .iter()
                .find(|p| p.name == name)
                .ok_or_else(|| Failure::config(format!("period {name:?} is not configured")))
        };
        let data = |name: &str| -> Result<_, Failure> {
            panel.slice_period(find(name)?).map_err(|e| Failure { code: EXIT_DATA, message: e.to_string() })
        };
        let (pa, pb) = (data(a)?, data(b)?);
        let mut csv = String::from("node,t_stat,p_value\n");
        for (j, node) in panel.node_ids().iter().enumerate() {
            match two_sample_t(&pa.column(j), &pb.column(j)) {
                Ok(t) => {
                    let _ = writeln!(csv, "{node},{},{}", t.stat, t.p);
                }
                Err(_) => {
                    let _ = writeln!(csv, "{node},,");
                }
            }
        }
        let path = config.output.join(format!("ttest_{a}_{b}.csv"));
        std::fs::create_dir_all(&config.output)
            .and_then(|_| std::fs::write(&path, csv))
            .map_err(|e| Failure { code: EXIT_DATA, message: format!("writing {}: {e}", path.display()) })?;
    }
    Ok(())
}

fn parse_edge(s: &str, n: usize) -> Result<PlantedEdge, Failure> {
    let bad = || Failure::config(format!("--edge expects FROM:TO:A:B with 1-based nodes, got {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 4 {
        return Err(bad());
    }
    let node = |p: &str| match p.trim().parse::<usize>() {
        Ok(k) if (1..=n).contains(&k) => Ok(k - 1),
        _ => Err(bad()),
    };
    let coef = |p: &str| p.trim().parse::<f64>().map_err(|_| bad());
    Ok(PlantedEdge {
        from: node(parts[0])?,
        to: node(parts[1])?,
        a_off: coef(parts[2])?,
        b_off: coef(parts[3])?,
    })
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let planted = args
        .edge
        .iter()
        .map(|e| parse_edge(e, args.nodes))
        .collect::<Result<Vec<_>, _>>()?;
    let mut spec = PanelSimSpec::new(args.nodes, planted, args.length, args.seed);
    if let Some(d) = args.start {
        spec.start = d;
    }
    if let Some(b) = args.burn_in {
        spec.burn_in = b;
    }
    let panel = simulate_panel(&spec).map_err(Failure::config)?;
    let io = |e: std::io::Error| Failure { code: EXIT_DATA, message: format!("writing {}: {e}", args.out.display()) };
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let file = std::fs::File::create(&args.out).map_err(io)?;
    panel
        .write_csv(std::io::BufWriter::new(file))
        .map_err(|e| Failure { code: EXIT_DATA, message: e.to_string() })
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (args, target) = match &cli.command {
        Command::Simulate(a) => return simulate(a),
        Command::Describe { run, ttest } => {
            let c = load_config(run)?;
            let report = pipeline::run_pipeline(&c, Target::Describe)?;
            ttests(&c, ttest)?;
            print_summary(&report);
            return Ok(());
        }
        Command::Estimate(a) => (a, Target::Estimate),
        Command::Network(a) => (a, Target::Network),
        Command::Diffusion(a) => (a, Target::Diffusion),
        Command::Blocks(a) => (a, Target::Blocks),
        Command::Pipeline(a) => (a, Target::Pipeline),
    };
    let c = load_config(args)?;
    let report = pipeline::run_pipeline(&c, target)?;
    print_summary(&report);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
