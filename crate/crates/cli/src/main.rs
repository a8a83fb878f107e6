use clap::{Parser, Subcommand};
use lacelab_cli::config::{ConvCase, StarCase, SuiteConfig, SuiteKind};
use lacelab_cli::suites::run_suite;
use lacelab_cli::{report_status, run_file, to_json, CliError, EXIT_CONFIG, EXIT_PASS};
use lacelab_core::greens::{a_d, nn_green_at};
use lacelab_core::lattice::catalog;
use std::path::PathBuf;
use std::process::ExitCode;

/// Exact verification of random-current lace expansion identities and bounds.
///
/// Enumeration caps default to 1e8 configurations; set LACELAB_BUDGET to override.
#[derive(Parser)]
#[command(name = "lacelab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spin sums against current sums (partition and two-point functions).
    VerifyOracle {
        #[arg(long = "graph")]
        graphs: Vec<String>,
        #[arg(long = "p")]
        p: Vec<f64>,
    },
    /// The lace identity G = Π + Π τ G ± R at the given orders.
    VerifyLace {
        #[arg(long = "graph")]
        graphs: Vec<String>,
        #[arg(long = "p")]
        p: Vec<f64>,
        #[arg(long = "order")]
        orders: Vec<usize>,
        /// Random mixed-sign coupling assignments per graph.
        #[arg(long)]
        mixed: Option<usize>,
    },
    /// Switching lemma and GHS–BK counts on seeded random instances.
    VerifySwitching {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        instances: usize,
        #[arg(long)]
        ghs_k1: Option<usize>,
        #[arg(long)]
        ghs_k2: Option<usize>,
    },
    /// Diagrammatic bounds on π^(j) and the auxiliary Θ bounds.
    VerifyBounds {
        #[arg(long = "graph")]
        graphs: Vec<String>,
        #[arg(long = "p")]
        p: Vec<f64>,
        #[arg(long = "order")]
        orders: Vec<usize>,
    },
    /// The through-A representation of G_Λ − G_{A^c}.
    VerifyThrough {
        #[arg(long = "graph")]
        graphs: Vec<String>,
        #[arg(long = "p")]
        p: Vec<f64>,
        #[arg(long)]
        max_a: Option<usize>,
    },
    /// Nearest-neighbour random-walk Green's function along an axis, as CSV.
    Greens {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        side: usize,
        #[arg(long)]
        r: f64,
    },
    /// Convolution bound (with --a/--b) or star bound (with --q) under box doubling.
    CheckConv {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        boxes: Vec<usize>,
    },
    /// Lists the built-in graphs.
    Catalog {
        #[arg(long)]
        json: bool,
    },
    /// Runs the suites of a JSON config file and writes reports.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn some<T>(v: Vec<T>) -> Option<Vec<T>> {
    (!v.is_empty()).then_some(v)
}

fn single(mut s: SuiteConfig) -> Result<i32, CliError> {
    s = s.with_defaults();
    s.validate()?;
    let rep = run_suite(&s, s.kind().as_str().to_string())?;
    print!("{}", to_json(&rep));
    Ok(report_status(&rep))
}

fn greens_csv(d: usize, side: usize, r: f64) -> Result<i32, CliError> {
    let pts: Vec<Vec<i64>> = (0..=side as i64 / 2)
        .map(|k| {
            let mut x = vec![0i64; d];
            if d > 0 {
                x[0] = k;
            }
            x
        })
        .collect();
    let vals = nn_green_at(d, side, r, &pts).map_err(|e| CliError::Config(e.to_string()))?;
    // σ² = 1 for the nearest-neighbour walk.
    let amp = if r == 1.0 { a_d(d).ok() } else { None };
    let mut w = csv::Writer::from_writer(std::io::stdout());
    let fail = |e: csv::Error| CliError::Config(format!("csv: {e}"));
    w.write_record(["x", "S_r(x)", "predicted", "ratio"]).map_err(fail)?;
    for (x, s) in pts.iter().zip(vals) {
        let k = x.first().copied().unwrap_or(0);
        let pred = amp.filter(|_| k > 0).map(|a| a * (k as f64).powi(-(d as i32 - 2)));
        w.write_record([
            k.to_string(),
            format!("{s:e}"),
            pred.map(|p| format!("{p:e}")).unwrap_or_default(),
            pred.map(|p| format!("{:e}", s / p)).unwrap_or_default(),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(|e| CliError::Config(format!("stdout: {e}")))?;
    Ok(EXIT_PASS)
}

fn list_catalog(json: bool) -> i32 {
    let graphs = catalog();
    if json {
        let rows: Vec<serde_json::Value> = graphs
            .iter()
            .map(|g| {
                serde_json::json!({
                    "name": g.name,
                    "sites": g.n_sites,
                    "bonds": g.n_bonds(),
                    "single_sweep_states": g.single_sweep_size(),
                    "pair_sweep_states": g.pair_sweep_size(),
                })
            })
            .collect();
        print!("{}", to_json(&rows));
    } else {
        println!("{:<12} {:>5} {:>5} {:>14} {:>14}", "graph", "sites", "bonds", "3^|B|", "9^|B|");
        for g in &graphs {
            println!("{:<12} {:>5} {:>5} {:>14} {:>14}", g.name, g.n_sites, g.n_bonds(), g.single_sweep_size(), g.pair_sweep_size());
        }
    }
    EXIT_PASS
}

fn dispatch(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::VerifyOracle { graphs, p } => {
            single(SuiteConfig { graphs: some(graphs), p: some(p), ..SuiteConfig::new(SuiteKind::VerifyOracle) })
        }
        Command::VerifyLace { graphs, p, orders, mixed } => single(SuiteConfig {
            graphs: some(graphs),
            p: some(p),
            orders: some(orders),
            mixed,
            ..SuiteConfig::new(SuiteKind::VerifyLace)
        }),
        Command::VerifySwitching { seed, instances, ghs_k1, ghs_k2 } => single(SuiteConfig {
            seed: Some(seed),
            instances: Some(instances),
            ghs_k1,
            ghs_k2,
            ..SuiteConfig::new(SuiteKind::VerifySwitching)
        }),
        Command::VerifyBounds { graphs, p, orders } => single(SuiteConfig {
            graphs: some(graphs),
            p: some(p),
            orders: some(orders),
            ..SuiteConfig::new(SuiteKind::VerifyBounds)
        }),
        Command::VerifyThrough { graphs, p, max_a } => single(SuiteConfig {
            graphs: some(graphs),
            p: some(p),
            max_a,
            ..SuiteConfig::new(SuiteKind::VerifyThrough)
        }),
        Command::Greens { d, side, r } => greens_csv(d, side, r),
        Command::CheckConv { d, a, b, q, boxes } => {
            let mut s = SuiteConfig::new(SuiteKind::CheckConv);
            match (a, b, q) {
                (Some(a), Some(b), None) => {
                    let boxes = some(boxes).unwrap_or_else(|| vec![32, 64]);
                    s.conv = Some(vec![ConvCase { d, a, b, boxes }]);
                    s.star = Some(vec![]);
                }
                (None, None, Some(q)) => {
                    let boxes = some(boxes).unwrap_or_else(|| vec![16, 32]);
                    s.conv = Some(vec![]);
                    s.star = Some(vec![StarCase { d, q, boxes }]);
                }
                _ => return Err(CliError::Config("give either --a and --b, or --q".into())),
            }
            single(s)
        }
        Command::Catalog { json } => Ok(list_catalog(json)),
        Command::Run { config } => {
            let summary = run_file(&config)?;
            print!("{}", to_json(&summary));
            Ok(summary.exit_code)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("lacelab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
