//! `eurlab`: command-line frontend for the entropic-bound library.
//!
//! The binary is a thin, single-threaded orchestrator: it resolves a run
//! configuration (file, `--set` overrides, flags, `EURLAB_SEED`), dispatches
//! to one library driver, prints the resolved parameters and headline numbers
//! to standard output, and writes the driver's CSV/JSON artifacts. Exit codes:
//! 0 success, 1 I/O or configuration error, 2 domain validation failure,
//! 3 falsifier-detected violation.

mod config;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use eurlab::bounds::{
    eur_modified, eur_modified_smooth, eur_unmodified, BoundInput, BoundResult, DominantTerm,
    SmoothParams,
};
use eurlab::continuous::analytic_overlap;
use eurlab::operators::{max_overlap_c, overlap_cprime, restricted_overlap, validate_povm};
use eurlab::povm_io::read_povm;
use eurlab::scenarios::{
    bound_falsifier, cv_saturation_report, fig2_contour, nunn_attack_sim, tf_keyrate_scan,
    FalsifierDims,
};
use eurlab::states::{TimeStdConvention, VacuumVarianceConvention};
use eurlab::Tolerances;

use config::{apply_override, parse_into, ConfigError, Origin, Settings, DEFAULT_SEED};

#[derive(Parser)]
#[command(
    name = "eurlab",
    version,
    about = "Entropic bounds for measurements with finite detection windows"
)]
struct Cli {
    /// Run configuration file (flat `key = value` lines under [section] headers).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory output files are written into.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    output_dir: PathBuf,

    /// Which output artifacts to emit.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Both)]
    format: OutputFormat,

    /// Run seed; takes precedence over EURLAB_SEED and the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Inline config override as section.key=value; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    fn wants_csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    fn wants_json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the null-aware min-entropy bound at one operating point.
    Bound {
        /// Null-outcome probability of the key measurement.
        #[arg(long, allow_negative_numbers = true)]
        p_z_null: f64,
        /// Null-outcome probability of the check measurement.
        #[arg(long, allow_negative_numbers = true)]
        p_x_null: f64,
        /// Informative-elements measurement overlap.
        #[arg(long, allow_negative_numbers = true)]
        c_less: f64,
        /// Conditional max-entropy term in bits.
        #[arg(long, allow_negative_numbers = true)]
        h_max: f64,
        /// Smoothing parameter; defaults to smoothing.epsilon from the config.
        #[arg(long)]
        epsilon: Option<f64>,
    },

    /// Measurement overlap: analytic value for conjugate interval binnings,
    /// or the matrix overlaps of two POVM files.
    Overlap {
        /// Frequency bin width in rad/s (analytic mode).
        #[arg(long, requires = "delta_t", conflicts_with_all = ["z_povm", "x_povm"])]
        delta_omega: Option<f64>,
        /// Time bin width in seconds (analytic mode).
        #[arg(long, requires = "delta_omega")]
        delta_t: Option<f64>,
        /// Key-measurement POVM file (matrix mode).
        #[arg(long, value_name = "FILE", requires = "x_povm")]
        z_povm: Option<PathBuf>,
        /// Check-measurement POVM file (matrix mode).
        #[arg(long, value_name = "FILE", requires = "z_povm")]
        x_povm: Option<PathBuf>,
    },

    /// Tabulate the clamped bound over both null probabilities on [0,1]².
    Contour {
        #[arg(long, default_value_t = 1e-3)]
        c_less: f64,
        #[arg(long, default_value_t = 1.0)]
        h_max: f64,
        /// Grid points per axis.
        #[arg(long, default_value_t = 201)]
        grid: usize,
    },

    /// Key rate versus distance for the configured time-frequency setup.
    TfScan,

    /// Detector-saturation report for the configured quadrature setup.
    CvSat {
        /// Anti-squeezing in dB; defaults to source.antisqueezing_db.
        #[arg(long)]
        antisqueezing_db: Option<f64>,
        /// Lower edge of the detector range, in quadrature units.
        #[arg(long, default_value_t = -61.6, allow_negative_numbers = true)]
        range_lo: f64,
        /// Upper edge of the detector range.
        #[arg(long, default_value_t = 61.6, allow_negative_numbers = true)]
        range_hi: f64,
        /// Quadrature bin width.
        #[arg(long, default_value_t = 0.1)]
        bin_width: f64,
        /// Conditional max-entropy term in bits.
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        h_max: f64,
    },

    /// Simulate the narrow-bin intercept attack on the configured setup.
    AttackSim {
        /// Interceptor frequency resolution in rad/s.
        #[arg(long, default_value_t = 1e5)]
        eve_bin_width: f64,
        #[arg(long, default_value_t = 20_000)]
        trials: usize,
    },

    /// Hunt for violations of the bound over random tripartite instances.
    Falsify {
        /// Number of random states.
        #[arg(long, default_value_t = 100)]
        states: usize,
        /// Measurement pairs drawn per state.
        #[arg(long, default_value_t = 4)]
        pairs: usize,
        /// Key-holder dimension (2..=4).
        #[arg(long, default_value_t = 2)]
        d_a: usize,
        /// Receiver dimension (1..=4).
        #[arg(long, default_value_t = 2)]
        d_b: usize,
        /// Adversary dimension (1..=4).
        #[arg(long, default_value_t = 2)]
        d_e: usize,
    },

    /// Validate a POVM file and print the per-invariant report.
    CheckPovm {
        /// POVM file to check.
        file: PathBuf,
    },
}

/// Anything a run can fail with, split by exit-code class.
#[derive(Debug)]
enum AppError {
    /// Config-layer problem: syntax, unknown key, unparseable value. Exit 1.
    Config(ConfigError),
    /// Library error. I/O and file-parse failures exit 1, the rest exit 2.
    Core(eurlab::Error),
    /// Flag combination the parser cannot express. Exit 1.
    Usage(String),
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e)
    }
}

impl From<eurlab::Error> for AppError {
    fn from(e: eurlab::Error) -> Self {
        AppError::Core(e)
    }
}

impl AppError {
    fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) | AppError::Usage(_) => 1,
            AppError::Core(eurlab::Error::Io(_))
            | AppError::Core(eurlab::Error::Parse { .. })
            | AppError::Core(eurlab::Error::InvalidConfig(_)) => 1,
            AppError::Core(_) => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            AppError::Config(e) => e.to_string(),
            AppError::Core(e) => format!("error: {e}"),
            AppError::Usage(m) => format!("error: {m}"),
        }
    }
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, AppError> {
    let mut settings = Settings::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(eurlab::Error::from)?;
        parse_into(&mut settings, path, &text)?;
    }
    for spec in &cli.overrides {
        apply_override(&mut settings, spec)?;
    }
    let seed = resolve_seed(cli.seed, &settings)?;

    match &cli.command {
        Command::Bound { p_z_null, p_x_null, c_less, h_max, epsilon } => {
            let eps = epsilon.unwrap_or(settings.epsilon);
            println!("p_z_null = {}", fmt(*p_z_null));
            println!("p_x_null = {}", fmt(*p_x_null));
            println!("c_less = {}", fmt(*c_less));
            println!("h_max = {}", fmt(*h_max));
            println!("smoothing.epsilon = {}", fmt(eps));
            println!("run.seed = {seed}");
            let input = BoundInput::new(*p_z_null, *p_x_null, *c_less, *h_max)?;
            let result = if eps > 0.0 {
                eur_modified_smooth(&input, &SmoothParams::new(eps)?)?
            } else {
                eur_modified(&input)?
            };
            print_bound(&result);
            println!("unmodified_bound_bits = {}", fmt(eur_unmodified(*c_less, *h_max)?));
            Ok(0)
        }

        Command::Overlap { delta_omega, delta_t, z_povm, x_povm } => {
            match (delta_omega, delta_t, z_povm, x_povm) {
                (Some(w), Some(t), None, None) => {
                    println!("delta_omega = {}", fmt(*w));
                    println!("delta_t = {}", fmt(*t));
                    println!("run.seed = {seed}");
                    println!(
                        "product_over_two_pi = {}",
                        fmt(w * t / (2.0 * std::f64::consts::PI))
                    );
                    println!("c_less = {}", fmt(analytic_overlap(*w, *t)?));
                    Ok(0)
                }
                (None, None, Some(z_path), Some(x_path)) => {
                    println!("z_povm = {}", z_path.display());
                    println!("x_povm = {}", x_path.display());
                    println!("run.seed = {seed}");
                    let z = read_povm(z_path)?;
                    let x = read_povm(x_path)?;
                    let tol = Tolerances::default();
                    let mut valid = true;
                    for (label, povm) in [("z_povm", &z), ("x_povm", &x)] {
                        let report = validate_povm(povm, &tol);
                        if !report.pass() {
                            println!("{label}_valid = false");
                            print!("{}", json_text(&report));
                            valid = false;
                        }
                    }
                    if !valid {
                        return Ok(2);
                    }
                    println!("c = {}", fmt(max_overlap_c(&x, &z)?));
                    println!("c_prime = {}", fmt(overlap_cprime(&x, &z)?));
                    println!("c_less = {}", fmt(restricted_overlap(&x, &z)?));
                    Ok(0)
                }
                _ => Err(AppError::Usage(
                    "overlap needs either --delta-omega with --delta-t, or --z-povm with --x-povm"
                        .into(),
                )),
            }
        }

        Command::Contour { c_less, h_max, grid } => {
            println!("c_less = {}", fmt(*c_less));
            println!("h_max = {}", fmt(*h_max));
            println!("grid = {grid}");
            println!("run.seed = {seed}");
            let report = fig2_contour(*c_less, *h_max, *grid)?;
            println!("equal_null_crossing = {}", fmt_opt(report.equal_null_crossing));
            println!("reference_p_z_null = {}", fmt(report.reference_p_z_null));
            println!("positive_frontier = {}", fmt_opt(report.reference_frontier));
            if cli.format.wants_csv() {
                write_artifact(&cli.output_dir, "fig2_contour.csv", &report.to_csv())?;
            }
            if cli.format.wants_json() {
                write_artifact(&cli.output_dir, "fig2_contour.json", &json_text(&report))?;
            }
            Ok(0)
        }

        Command::TfScan => {
            print_scenario_settings(&settings, seed)?;
            let cfg = settings.to_scenario(seed)?;
            let report = tf_keyrate_scan(&cfg)?;
            println!("c_less = {}", fmt(report.c_less));
            println!("rate_at_min_distance_bits = {}", fmt(report.rows[0].key_rate_bits));
            println!("first_zero_rate_km = {}", fmt_opt(report.first_zero_rate_km));
            if cli.format.wants_csv() {
                write_artifact(&cli.output_dir, "tf_keyrate.csv", &report.to_csv())?;
            }
            if cli.format.wants_json() {
                write_artifact(&cli.output_dir, "tf_keyrate.json", &json_text(&report))?;
            }
            Ok(0)
        }

        Command::CvSat { antisqueezing_db, range_lo, range_hi, bin_width, h_max } => {
            let db = antisqueezing_db.unwrap_or(settings.antisqueezing_db);
            println!("source.antisqueezing_db = {}", fmt(db));
            println!(
                "source.vacuum_variance = {}",
                match settings.vacuum_variance {
                    VacuumVarianceConvention::UnitVariance => "unit_variance",
                    VacuumVarianceConvention::HalfVariance => "half_variance",
                }
            );
            println!("range_lo = {}", fmt(*range_lo));
            println!("range_hi = {}", fmt(*range_hi));
            println!("bin_width = {}", fmt(*bin_width));
            println!("h_max = {}", fmt(*h_max));
            println!("run.seed = {seed}");
            let mut s = settings.clone();
            s.antisqueezing_db = db;
            let report = cv_saturation_report(&s.tmsv()?, (*range_lo, *range_hi), *bin_width, *h_max)?;
            println!("p_sat = {}", fmt(report.p_sat_q));
            println!("c_less = {}", fmt(report.c_less));
            println!("matches_unmodified = {}", report.matches_unmodified);
            println!("abort = {}", report.abort);
            print_bound(&report.bound);
            if cli.format.wants_json() {
                write_artifact(&cli.output_dir, "cv_saturation.json", &json_text(&report))?;
            }
            Ok(0)
        }

        Command::AttackSim { eve_bin_width, trials } => {
            print_scenario_settings(&settings, seed)?;
            println!("eve_bin_width = {}", fmt(*eve_bin_width));
            println!("trials = {trials}");
            let cfg = settings.to_scenario(seed)?;
            let report = nunn_attack_sim(&cfg, *eve_bin_width, *trials)?;
            println!("p_null_either = {}", fmt(report.p_null_either));
            println!("n_survivors = {}", report.n_survivors);
            println!("naive_bound_bits = {}", fmt_opt(report.naive_bound_bits));
            println!(
                "eq6_clamped_bound_bits = {}",
                fmt_opt(report.eq6_bound.map(|b| b.clamped_bound))
            );
            println!("eve_information_bits = {}", fmt(report.eve_information_bits));
            println!("estimator_gap_bits = {}", fmt_opt(report.estimator_gap_bits));
            if cli.format.wants_json() {
                write_artifact(&cli.output_dir, "nunn_attack.json", &json_text(&report))?;
            }
            Ok(0)
        }

        Command::Falsify { states, pairs, d_a, d_b, d_e } => {
            println!("states = {states}");
            println!("pairs = {pairs}");
            println!("d_a = {d_a}");
            println!("d_b = {d_b}");
            println!("d_e = {d_e}");
            println!("run.seed = {seed}");
            let dims = FalsifierDims { d_a: *d_a, d_b: *d_b, d_e: *d_e };
            let report = bound_falsifier(*states, dims, *pairs, seed)?;
            println!("n_instances = {}", report.n_instances);
            println!("n_vacuous = {}", report.n_vacuous);
            println!("n_exact_binary = {}", report.n_exact_binary);
            println!("n_searched = {}", report.n_searched);
            println!("worst_margin = {}", fmt_opt(report.worst_margin));
            println!("n_violations = {}", report.violations.len());
            if cli.format.wants_json() {
                write_artifact(&cli.output_dir, "falsifier.json", &json_text(&report))?;
            }
            Ok(if report.pass() { 0 } else { 3 })
        }

        Command::CheckPovm { file } => {
            println!("file = {}", file.display());
            println!("run.seed = {seed}");
            let povm = read_povm(file)?;
            let report = validate_povm(&povm, &Tolerances::default());
            print!("{}", json_text(&report));
            println!("povm_valid = {}", report.pass());
            Ok(if report.pass() { 0 } else { 2 })
        }
    }
}

/// Seed precedence: `--seed` flag, then EURLAB_SEED, then the config file,
/// then the built-in default.
fn resolve_seed(flag: Option<u64>, settings: &Settings) -> Result<u64, AppError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Ok(raw) = std::env::var("EURLAB_SEED") {
        return raw.trim().parse().map_err(|_| {
            AppError::Config(ConfigError::BadValue {
                origin: Origin::Environment,
                key: "EURLAB_SEED".into(),
                message: format!("expected an unsigned integer, got \"{raw}\""),
            })
        });
    }
    Ok(settings.seed.unwrap_or(DEFAULT_SEED))
}

/// 17 significant digits: round-trip-exact doubles in all printed output.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_else(|| "none".into())
}

fn print_bound(r: &BoundResult) {
    println!("raw_bound_bits = {}", fmt(r.raw_bound));
    println!("clamped_bound_bits = {}", fmt(r.clamped_bound));
    println!("clamped = {}", r.clamped);
    println!(
        "dominant_term = {}",
        match r.dominant_term {
            DominantTerm::ZNull => "z_null",
            DominantTerm::XNull => "x_null",
            DominantTerm::Overlap => "overlap",
        }
    );
}

/// Full resolved parameter set for the config-driven scenario commands.
fn print_scenario_settings(s: &Settings, seed: u64) -> Result<(), AppError> {
    println!("source.sigma_coh = {}", fmt(s.sigma_coh));
    println!("source.sigma_cor = {}", fmt(s.sigma_cor));
    println!("source.wavelength = {}", fmt(s.wavelength));
    println!(
        "source.time_std_convention = {}",
        match s.time_std_convention {
            TimeStdConvention::DirectEq11 => "direct_eq11",
            TimeStdConvention::PaperCalibrated => "paper_calibrated",
        }
    );
    println!("bins.time_bin_width = {}", fmt(s.time_bin_width));
    println!("bins.time_half_window = {}", fmt(s.time_half_window));
    println!("bins.freq_bin_width = {}", fmt(s.resolved_freq_bin_width()));
    println!("bins.freq_half_window = {}", fmt(s.resolved_freq_half_window()?));
    println!("channel.loss_db_per_km = {}", fmt(s.loss_db_per_km));
    println!("scan.distance_min_km = {}", fmt(s.distance_min_km));
    println!("scan.distance_max_km = {}", fmt(s.distance_max_km));
    println!("scan.distance_step_km = {}", fmt(s.distance_step_km));
    println!("bound.c_less_override = {}", fmt_opt(s.c_less_override));
    println!("smoothing.epsilon = {}", fmt(s.epsilon));
    println!("run.seed = {seed}");
    Ok(())
}

fn json_text<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize to JSON");
    text.push('\n');
    text
}

fn write_artifact(dir: &Path, name: &str, text: &str) -> Result<(), AppError> {
    std::fs::create_dir_all(dir).map_err(eurlab::Error::from)?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(eurlab::Error::from)?;
    println!("wrote {}", path.display());
    Ok(())
}
