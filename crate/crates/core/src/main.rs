//! `fluxlab` command line. Every subcommand assembles an experiment config,
//! runs it and reports verdicts; exit status is 0 when all pass, 1 when a
//! verdict fails and 2 on error (partial results are still written).

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fluxlab::experiment::{
    bundle_text, emit_results, run_experiment_partial, verdicts_csv, AuditConfig, BvConfig, ClassifyConfig, ExperimentConfig, Format,
    GridConfig, KernelOptConfig, ScanConfig, TestFunctionConfig,
};
use fluxlab::scenarios;

#[derive(Parser)]
#[command(name = "fluxlab", version, about = "Flux pairings, blow-up classification and BV chain-rule checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Output {
    /// Directory for result files; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or text.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a TOML experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Flux pairings along a scale ladder.
    Scan {
        #[arg(long)]
        scenario: String,
        /// "max,ratio,count".
        #[arg(long)]
        ladder: String,
        #[arg(long, default_value = "bump")]
        kernel: String,
        #[arg(long, default_value_t = 17)]
        resolution: usize,
        /// cet, dr, bd or energy; repeatable.
        #[arg(long = "flux", default_values_t = vec!["cet".to_string()])]
        fluxes: Vec<String>,
        /// Test function center "x,y".
        #[arg(long, value_parser = parse_vec2, default_value = "0,0", allow_hyphen_values = true)]
        center: [f64; 2],
        #[arg(long, default_value_t = 0.35)]
        radius: f64,
        /// Cells per axis.
        #[arg(long)]
        grid: Option<usize>,
        /// Grid box corners "x,y"; the scenario box when absent.
        #[arg(long, value_parser = parse_vec2, allow_hyphen_values = true)]
        lo: Option<[f64; 2]>,
        #[arg(long, value_parser = parse_vec2, allow_hyphen_values = true)]
        hi: Option<[f64; 2]>,
        #[command(flatten)]
        output: Output,
    },
    /// Classify blow-ups at probe points.
    Classify {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value = "bump")]
        kernel: String,
        /// Comma-separated scales.
        #[arg(long, value_delimiter = ',')]
        ladder: Option<Vec<f64>>,
        /// Probe point "x,y"; repeatable. Generated when absent.
        #[arg(long = "point", value_parser = parse_vec2, allow_hyphen_values = true)]
        points: Vec<[f64; 2]>,
        #[arg(long, default_value_t = 8)]
        probe_count: usize,
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        time: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Minimize the anisotropy functional over a kernel family.
    KernelOpt {
        /// Matrix entries "m11,m12,m21,m22".
        #[arg(long, value_parser = parse_mat2, allow_hyphen_values = true)]
        m: [[f64; 2]; 2],
        #[arg(long, default_value = "hyperbolic")]
        family: String,
        #[arg(long, default_value_t = 500)]
        budget: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Exact chain-rule identities on BV fixtures.
    BvCheck {
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// energy or burgers.
        #[arg(long, default_value = "energy")]
        cubic: String,
        #[arg(long)]
        drop_jump_correction: bool,
        #[command(flatten)]
        output: Output,
    },
    /// List registered scenarios.
    ScenarioList,
    /// Audit scenarios against their defining identities.
    Audit {
        /// Registry id; repeatable, all when absent.
        #[arg(long = "scenario")]
        scenarios: Vec<String>,
        #[arg(long, default_value_t = scenarios::AUDIT_RESOLUTION)]
        resolution: usize,
        #[command(flatten)]
        output: Output,
    },
}

fn parse_vec2(s: &str) -> Result<[f64; 2], String> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"))).collect::<Result<_, _>>()?;
    match v.as_slice() {
        [x] => Ok([*x, 0.0]),
        [x, y] => Ok([*x, *y]),
        _ => Err("expected x or x,y".into()),
    }
}

fn parse_mat2(s: &str) -> Result<[[f64; 2]; 2], String> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"))).collect::<Result<_, _>>()?;
    match v.as_slice() {
        [a, b, c, d] => Ok([[*a, *b], [*c, *d]]),
        _ => Err("expected m11,m12,m21,m22".into()),
    }
}

fn build(cmd: Command) -> fluxlab::Result<Option<(ExperimentConfig, Output)>> {
    let with = |output: Output, c: ExperimentConfig| Some((c, output));
    Ok(match cmd {
        Command::Run { config, output } => with(output, ExperimentConfig::load(&config)?),
        Command::Scan { scenario, ladder, kernel, resolution, fluxes, center, radius, grid, lo, hi, output } => with(
            output,
            ExperimentConfig {
                scan: vec![ScanConfig {
                    scenario,
                    kernel,
                    resolution,
                    ladder,
                    grid: GridConfig { n: grid, lo, hi },
                    test_function: TestFunctionConfig { center, radius, profile: None, coordinate: None, t_center: 0.5, t_radius: 0.4 },
                    fluxes,
                    skip_sup: false,
                    time_nodes: 16,
                    dt: None,
                }],
                ..Default::default()
            },
        ),
        Command::Classify { scenario, kernel, ladder, points, probe_count, scale, time, output } => with(
            output,
            ExperimentConfig {
                classify: vec![ClassifyConfig {
                    scenario,
                    kernel,
                    resolution: fluxlab::mollify::MIN_RESOLUTION,
                    ladder: ladder.unwrap_or_else(|| vec![0.002, 0.001, 0.0005, 0.00025]),
                    points: (!points.is_empty()).then_some(points),
                    probe_count,
                    scale,
                    time,
                }],
                ..Default::default()
            },
        ),
        Command::KernelOpt { m, family, budget, output } => with(
            output,
            ExperimentConfig {
                kernel_opt: vec![KernelOptConfig {
                    m,
                    family,
                    budget,
                    resolution: fluxlab::kernel_opt::OPT_RESOLUTION,
                    target_fraction: 0.2,
                }],
                ..Default::default()
            },
        ),
        Command::BvCheck { fixtures, cubic, drop_jump_correction, output } => {
            with(output, ExperimentConfig { bv: Some(BvConfig { fixtures, cubic, drop_jump_correction }), ..Default::default() })
        }
        Command::Audit { scenarios, resolution, output } => {
            with(output, ExperimentConfig { audit: Some(AuditConfig { scenarios, resolution }), ..Default::default() })
        }
        Command::ScenarioList => {
            println!("id,dim,model,divergence_free,stationary");
            for id in scenarios::REGISTRY {
                let s = scenarios::lookup(id)?;
                println!("{},{},{},{},{}", s.id, s.dim, s.model.name(), s.divergence_free, s.stationary);
            }
            None
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mut config, output) = match build(cli.command) {
        Ok(Some(c)) => c,
        Ok(None) => return ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(s) = output.seed {
        config.seed = s;
    }
    if let Some(f) = &output.format {
        match Format::parse(f) {
            Ok(f) => config.format = f,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        }
    }
    if output.out.is_some() {
        config.out = output.out.clone();
    }

    let (bundle, err) = run_experiment_partial(&config);
    let mut failed_io = false;
    match &config.out {
        Some(dir) => match emit_results(&bundle, config.format, dir) {
            Ok(files) => {
                for f in files {
                    eprintln!("wrote {}", f.display());
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                failed_io = true;
            }
        },
        None => {
            let body = match config.format {
                Format::Csv => verdicts_csv(&bundle.verdicts),
                Format::Text => bundle_text(&bundle),
            };
            let _ = std::io::stdout().write_all(body.as_bytes());
        }
    }
    let failures = bundle.verdicts.iter().filter(|v| !v.passed).count();
    eprintln!("{} verdicts, {} failed", bundle.verdicts.len(), failures);
    if let Some(e) = err {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if failed_io {
        ExitCode::from(2)
    } else if failures > 0 {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
