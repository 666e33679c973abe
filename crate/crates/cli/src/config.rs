//! Command-line parsing and validation into a [`RunConfig`].
//!
//! Input files are read and parsed here, so every problem with flags or
//! file contents is reported before any computation starts.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ttdl_core::designer::DispersionRule;
use ttdl_core::{
    grid, ConversionGraph, DesignTargets, Diagnostic, Diagnostics, Execution, FiberProfile,
    LpgBandwidth, ModeId, ModeTable, PerturbationSpec, PlacementSolution, SolverOptions,
};

#[derive(Debug, Parser)]
#[command(
    name = "fmf-ttdl",
    version,
    about = "Few-mode fiber true time delay line design"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
    /// Directory for relative output paths.
    #[arg(long, global = true, env = "FMF_TTDL_OUT")]
    pub out_dir: Option<PathBuf>,
    /// Run every stage on one thread.
    #[arg(long, global = true)]
    pub serial: bool,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Solve the guided LP modes of a fiber profile.
    SolveModes(SolveModesArgs),
    /// Place the gratings for a conversion graph and a mode table.
    Design(DesignArgs),
    /// Sample delays versus wavelength for a placement.
    Evaluate(EvaluateArgs),
    /// RF frequency response of the tapped delay line.
    RfResponse(RfArgs),
    /// Re-design under random deviations of the mode data.
    Perturb(PerturbArgs),
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SolveModesArgs {
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long, default_value_t = 1550.0)]
    pub lambda_nm: f64,
    /// `start:stop:step` in nm; overrides --lambda-nm.
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long, default_value_t = 2000)]
    pub scan_points: usize,
    #[arg(long, default_value = "modes.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TargetArgs {
    /// Mode table CSV.
    #[arg(long)]
    pub modes: Option<PathBuf>,
    /// Conversion graph file.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Differential delay between adjacent samples, ps/km.
    #[arg(long)]
    pub delta_tau: Option<f64>,
    /// `maximize`, `delays-only` or a fixed increment in ps/(km nm).
    #[arg(long, default_value = "maximize")]
    pub dispersion: String,
    #[arg(long, default_value = "LP01")]
    pub reference: String,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct DesignArgs {
    #[command(flatten)]
    pub targets: TargetArgs,
    /// Fiber length used for the grating positions, km.
    #[arg(long, default_value_t = 1.0)]
    pub length_km: f64,
    #[arg(long, default_value = "placements.csv")]
    pub out: PathBuf,
    #[arg(long, default_value = "lpg_positions.csv")]
    pub lpg_out: PathBuf,
    #[arg(long, default_value = "design_report.txt")]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub placements: Option<PathBuf>,
    /// `start:stop:step` in nm.
    #[arg(long)]
    pub lambda_range: Option<String>,
    /// `first-order` or `numeric`.
    #[arg(long, default_value = "first-order")]
    pub model: String,
    /// Needed by the numeric model.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Needed by the numeric model.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// Grating bandwidth centered on the design wavelength, nm.
    #[arg(long, default_value_t = 20.0)]
    pub lpg_bandwidth_nm: f64,
    #[arg(long, default_value = "delay_curve.csv")]
    pub out: PathBuf,
    #[arg(long, default_value = "tunability_report.txt")]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct RfArgs {
    #[arg(long)]
    pub placements: Option<PathBuf>,
    /// Operating wavelength; defaults to the design wavelength.
    #[arg(long)]
    pub lambda_nm: Option<f64>,
    #[arg(long)]
    pub length_km: Option<f64>,
    /// Comma-separated tap amplitudes; equal taps by default.
    #[arg(long)]
    pub amplitudes: Option<String>,
    /// `start:stop:step` in GHz.
    #[arg(long, default_value = "0:20:0.01")]
    pub freq_ghz: String,
    #[arg(long, default_value = "rf_response.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct PerturbArgs {
    #[command(flatten)]
    pub targets: TargetArgs,
    /// Relative standard deviation of the mode delays and dispersions.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "robustness.csv")]
    pub out: PathBuf,
}

/// Wavelengths of a mode solve, nm.
#[derive(Debug, Clone, PartialEq)]
pub enum Wavelengths {
    Single(f64),
    Sweep { start: f64, stop: f64, step: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalModel {
    FirstOrder,
    Numeric {
        graph: ConversionGraph,
        profile: FiberProfile,
    },
}

/// A validated command with its inputs loaded.
#[derive(Debug, Clone)]
pub enum Command {
    SolveModes {
        profile: FiberProfile,
        wavelengths: Wavelengths,
        options: SolverOptions,
        out: PathBuf,
    },
    Design {
        table: ModeTable,
        graph: ConversionGraph,
        targets: DesignTargets,
        length_km: f64,
        out: PathBuf,
        lpg_out: PathBuf,
        report: PathBuf,
    },
    Evaluate {
        solution: PlacementSolution,
        wavelengths_nm: Vec<f64>,
        /// Inclusive `(start, stop, step)` of the wavelength grid.
        range: (f64, f64, f64),
        model: EvalModel,
        bandwidth: LpgBandwidth,
        out: PathBuf,
        report: PathBuf,
    },
    RfResponse {
        solution: PlacementSolution,
        lambda_nm: f64,
        length_km: f64,
        amplitudes: Option<Vec<f64>>,
        frequencies_ghz: Vec<f64>,
        out: PathBuf,
    },
    Perturb {
        table: ModeTable,
        graph: ConversionGraph,
        targets: DesignTargets,
        spec: PerturbationSpec,
        out: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SolveModes { .. } => "solve-modes",
            Command::Design { .. } => "design",
            Command::Evaluate { .. } => "evaluate",
            Command::RfResponse { .. } => "rf-response",
            Command::Perturb { .. } => "perturb",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub out_dir: PathBuf,
    pub execution: Execution,
}

impl RunConfig {
    /// `path` resolved against the output directory unless absolute.
    pub fn output_path(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.out_dir.join(path)
        }
    }
}

#[derive(Debug)]
pub enum ConfigError {
    /// Help, version or a malformed command line, rendered by clap.
    Usage(clap::Error),
    /// Every validation failure, ordered by (file, line).
    Invalid(Diagnostics),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Usage(e) => write!(f, "{e}"),
            ConfigError::Invalid(d) => write!(f, "{d}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Collects diagnostics while loading inputs.
#[derive(Default)]
struct Checker {
    errors: Vec<Diagnostic>,
}

impl Checker {
    fn fail(&mut self, message: impl Into<String>) {
        self.errors.push(Diagnostic::new(message));
    }

    fn required<'a, T>(&mut self, value: &'a Option<T>, flag: &str) -> Option<&'a T> {
        if value.is_none() {
            self.fail(format!("missing required flag --{flag}"));
        }
        value.as_ref()
    }

    fn positive(&mut self, value: f64, flag: &str) {
        if !(value > 0.0 && value.is_finite()) {
            self.fail(format!("--{flag} must be a positive number, got {value}"));
        }
    }

    fn read(&mut self, path: &Path) -> Option<String> {
        match std::fs::read_to_string(path) {
            Ok(text) => Some(text),
            Err(e) => {
                self.errors.push(
                    Diagnostic::new(format!("cannot read file: {e}"))
                        .in_file(path.display().to_string()),
                );
                None
            }
        }
    }

    fn load<T>(
        &mut self,
        path: Option<&PathBuf>,
        parse: impl FnOnce(&str) -> Result<T, Diagnostics>,
    ) -> Option<T> {
        let path = path?;
        let text = self.read(path)?;
        match parse(&text) {
            Ok(v) => Some(v),
            Err(d) => {
                self.errors.extend(d.in_file(&path.display().to_string()).0);
                None
            }
        }
    }

    fn grid(&mut self, spec: &str, flag: &str) -> Option<(Vec<f64>, (f64, f64, f64))> {
        let parts: Vec<f64> = spec
            .split(':')
            .filter_map(|s| s.trim().parse().ok())
            .collect();
        match grid::parse(spec) {
            Ok(points) => {
                let range = match parts.as_slice() {
                    [a, b, c] => (*a, *b, *c),
                    _ => (points[0], points[0], 1.0),
                };
                Some((points, range))
            }
            Err(e) => {
                self.fail(format!("--{flag}: {e}"));
                None
            }
        }
    }

    fn targets(
        &mut self,
        args: &TargetArgs,
    ) -> (
        Option<ModeTable>,
        Option<ConversionGraph>,
        Option<DesignTargets>,
    ) {
        let modes = self.required(&args.modes, "modes");
        let graph = self.required(&args.graph, "graph");
        let delta_tau = self.required(&args.delta_tau, "delta-tau").copied();
        let table = self.load(modes, |t| ModeTable::read_csv(t.as_bytes()));
        let graph = self.load(graph, ConversionGraph::parse);

        if let Some(d) = delta_tau {
            self.positive(d, "delta-tau");
        }
        let rule = match args.dispersion.as_str() {
            "maximize" => Some(DispersionRule::Maximize),
            "delays-only" => Some(DispersionRule::DelaysOnly),
            other => match other.parse::<f64>() {
                Ok(v) if v.is_finite() => Some(DispersionRule::Fixed(v)),
                _ => {
                    self.fail(format!(
                        "--dispersion must be `maximize`, `delays-only` or a number, got `{other}`"
                    ));
                    None
                }
            },
        };
        let reference = match args.reference.parse::<ModeId>() {
            Ok(m) => Some(m),
            Err(e) => {
                self.fail(format!("--reference: {e}"));
                None
            }
        };
        let targets = match (delta_tau, rule, reference) {
            (Some(d), Some(rule), Some(reference)) => Some(DesignTargets {
                delta_tau_ps_per_km: d,
                rule,
                reference,
            }),
            _ => None,
        };
        (table, graph, targets)
    }
}

/// Parses `argv` (program name first) and loads every input file it names.
pub fn parse_config<I, T>(argv: I) -> Result<RunConfig, ConfigError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(ConfigError::Usage)?;
    validate(cli).map_err(ConfigError::Invalid)
}

/// Turns parsed flags into a [`RunConfig`], reporting every problem found.
pub fn validate(cli: Cli) -> Result<RunConfig, Diagnostics> {
    let mut c = Checker::default();
    let command = match &cli.command {
        CommandArgs::SolveModes(a) => {
            let profile = c.required(&a.profile, "profile");
            let profile = c.load(profile, FiberProfile::parse);
            let wavelengths = match &a.sweep {
                Some(spec) => c
                    .grid(spec, "sweep")
                    .map(|(_, (start, stop, step))| Wavelengths::Sweep { start, stop, step }),
                None => {
                    c.positive(a.lambda_nm, "lambda-nm");
                    Some(Wavelengths::Single(a.lambda_nm))
                }
            };
            if a.scan_points < 500 {
                c.fail(format!(
                    "--scan-points must be at least 500, got {}",
                    a.scan_points
                ));
            }
            let options = SolverOptions {
                scan_points: a.scan_points,
                execution: execution(cli.serial),
                ..SolverOptions::default()
            };
            match (profile, wavelengths) {
                (Some(profile), Some(wavelengths)) => Some(Command::SolveModes {
                    profile,
                    wavelengths,
                    options,
                    out: a.out.clone(),
                }),
                _ => None,
            }
        }
        CommandArgs::Design(a) => {
            let (table, graph, targets) = c.targets(&a.targets);
            c.positive(a.length_km, "length-km");
            match (table, graph, targets) {
                (Some(table), Some(graph), Some(targets)) => Some(Command::Design {
                    table,
                    graph,
                    targets,
                    length_km: a.length_km,
                    out: a.out.clone(),
                    lpg_out: a.lpg_out.clone(),
                    report: a.report.clone(),
                }),
                _ => None,
            }
        }
        CommandArgs::Evaluate(a) => {
            let placements = c.required(&a.placements, "placements");
            let solution = c.load(placements, |t| PlacementSolution::read_csv(t.as_bytes()));
            let range = c.required(&a.lambda_range, "lambda-range").cloned();
            let grid = range.and_then(|r| c.grid(&r, "lambda-range"));
            c.positive(a.lpg_bandwidth_nm, "lpg-bandwidth-nm");
            let model = match a.model.as_str() {
                "first-order" => Some(EvalModel::FirstOrder),
                "numeric" => {
                    let graph = c.required(&a.graph, "graph");
                    let profile = c.required(&a.profile, "profile");
                    let graph = c.load(graph, ConversionGraph::parse);
                    let profile = c.load(profile, FiberProfile::parse);
                    graph
                        .zip(profile)
                        .map(|(graph, profile)| EvalModel::Numeric { graph, profile })
                }
                other => {
                    c.fail(format!(
                        "--model must be `first-order` or `numeric`, got `{other}`"
                    ));
                    None
                }
            };
            match (solution, grid, model) {
                (Some(solution), Some((wavelengths_nm, range)), Some(model)) => {
                    Some(Command::Evaluate {
                        bandwidth: LpgBandwidth {
                            center_nm: solution.lambda0_nm,
                            width_nm: a.lpg_bandwidth_nm,
                        },
                        solution,
                        wavelengths_nm,
                        range,
                        model,
                        out: a.out.clone(),
                        report: a.report.clone(),
                    })
                }
                _ => None,
            }
        }
        CommandArgs::RfResponse(a) => {
            let placements = c.required(&a.placements, "placements");
            let solution = c.load(placements, |t| PlacementSolution::read_csv(t.as_bytes()));
            let length = c.required(&a.length_km, "length-km").copied();
            if let Some(l) = length {
                c.positive(l, "length-km");
            }
            if let Some(l) = a.lambda_nm {
                c.positive(l, "lambda-nm");
            }
            let amplitudes = match &a.amplitudes {
                None => Some(None),
                Some(list) => {
                    let parsed: Result<Vec<f64>, _> =
                        list.split(',').map(|s| s.trim().parse::<f64>()).collect();
                    match parsed {
                        Ok(v) => Some(Some(v)),
                        Err(_) => {
                            c.fail(format!("--amplitudes must be a comma-separated list of numbers, got `{list}`"));
                            None
                        }
                    }
                }
            };
            let freqs = c.grid(&a.freq_ghz, "freq-ghz");
            match (solution, length, amplitudes, freqs) {
                (Some(solution), Some(length_km), Some(amplitudes), Some((frequencies_ghz, _))) => {
                    Some(Command::RfResponse {
                        lambda_nm: a.lambda_nm.unwrap_or(solution.lambda0_nm),
                        solution,
                        length_km,
                        amplitudes,
                        frequencies_ghz,
                        out: a.out.clone(),
                    })
                }
                _ => None,
            }
        }
        CommandArgs::Perturb(a) => {
            let (table, graph, targets) = c.targets(&a.targets);
            let sigma = c.required(&a.sigma, "sigma").copied();
            if let Some(s) = sigma {
                if !(s >= 0.0 && s.is_finite()) {
                    c.fail(format!("--sigma must be >= 0, got {s}"));
                }
            }
            if a.trials == 0 {
                c.fail("--trials must be at least 1");
            }
            match (table, graph, targets, sigma) {
                (Some(table), Some(graph), Some(targets), Some(sigma)) => Some(Command::Perturb {
                    table,
                    graph,
                    targets,
                    spec: PerturbationSpec {
                        sigma,
                        trials: a.trials,
                        seed: a.seed,
                    },
                    out: a.out.clone(),
                }),
                _ => None,
            }
        }
    };

    if !c.errors.is_empty() {
        c.errors.sort();
        return Err(Diagnostics(c.errors));
    }
    Ok(RunConfig {
        command: command.expect("no diagnostics implies a complete command"),
        out_dir: cli.out_dir.unwrap_or_else(|| PathBuf::from(".")),
        execution: execution(cli.serial),
    })
}

fn execution(serial: bool) -> Execution {
    if serial {
        Execution::Serial
    } else {
        Execution::Parallel
    }
}
