use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dephasim::cli::{
    self, filter_table, reproduce_figure, smooth_summary, FitnessKind, Mode, ReproduceOptions,
    RunConfig, SequenceConfig, SweepParam, FIGURES,
};
use dephasim::dynamics::{Method, Normalization};
use dephasim::io;
use dephasim::sequences::Family;
use dephasim::{Error, MeasureReport, PulseSequence, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Emulated non-Markovian dephasing of a qubit.
///
/// Flags take SI seconds and rad/s (the `-hz` variants convert by 2π) and
/// override fields of the `--config` JSON document.
///
/// CSV columns: traces `t_s,gamma[,stderr]`; filter tables
/// `omega_rad_s,filter_power,spectral_density`; parameter sweeps
/// `<param>,blp,protection`; pulse sweeps
/// `n,protection_cpmg,protection_udd[,protection_ndd],blp_cpmg,blp_udd[,blp_ndd]`;
/// optimizer history `generation,best_fitness`.
///
/// Exit status: 0 success, 1 configuration error, 2 numerical failure,
/// 3 I/O error.
#[derive(Parser)]
#[command(name = "dephasim", version, max_term_width = 100)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true, env = "DEPHASIM_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo ensemble over comb realizations, raw and smoothed.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Exact comb sum instead of sampling.
        #[arg(long)]
        exact: bool,
        /// Smoothed trace CSV.
        #[arg(long, value_name = "PATH")]
        smoothed_out: Option<PathBuf>,
    },
    /// Continuum trace (closed form at zero temperature, quadrature otherwise).
    Analytic {
        #[command(flatten)]
        common: Common,
        /// Force the quadrature route.
        #[arg(long)]
        quadrature: bool,
    },
    /// Filter function |F(ω,t)|² and spectral density on a frequency grid.
    Filter {
        #[command(flatten)]
        common: Common,
        /// Evaluation time; defaults to the sequence duration.
        #[arg(long = "at-s", value_name = "SECONDS")]
        at_s: Option<f64>,
        /// Upper frequency; defaults to 8·ω_c.
        #[arg(long, value_name = "RAD_PER_S")]
        omega_max_rad_s: Option<f64>,
        #[arg(long, default_value_t = 801)]
        frequencies: usize,
    },
    /// BLP measure, protection and backflow intervals of a trace CSV.
    Measure {
        #[arg(long = "in", value_name = "PATH")]
        input: PathBuf,
        #[arg(long, value_name = "SECONDS")]
        horizon_s: Option<f64>,
        /// Mark the trace as already smoothed.
        #[arg(long)]
        smoothed: bool,
        /// Also report the exact entropy at this initial polarization.
        #[arg(long)]
        entropy_epsilon: Option<f64>,
        /// Report JSON (default: stdout).
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Genetic search for the pulse sequence maximizing protection.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        population: Option<usize>,
        #[arg(long)]
        generations: Option<usize>,
        #[arg(long, value_name = "SECONDS")]
        min_delay_s: Option<f64>,
        /// Fitness-history CSV.
        #[arg(long, value_name = "PATH")]
        history: Option<PathBuf>,
        /// Trace source for the fitness.
        #[arg(long, value_parser = parse_fitness)]
        fitness: Option<FitnessKind>,
    },
    /// Fourier-domain smoothing of a Monte Carlo trace CSV.
    Smooth {
        #[command(flatten)]
        common: Common,
        #[arg(long = "in", value_name = "PATH")]
        input: Option<PathBuf>,
        /// Print the pre/post report, or write it to PATH.
        #[arg(long, value_name = "PATH", num_args = 0..=1)]
        report: Option<Option<PathBuf>>,
        #[arg(long)]
        noise_floor_factor: Option<f64>,
    },
    /// BLP measure and protection over a parameter range.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// s, lambda or pulses.
        #[arg(long, value_parser = parse_param)]
        param: Option<SweepParam>,
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        /// Optimize a sequence at each pulse count.
        #[arg(long)]
        include_ndd: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Datasets and manifest behind a figure.
    Reproduce {
        /// One of fig2a, fig2b, fig2c, fig2d, fig3ab, fig4a, fig5, or all.
        figure: String,
        #[arg(long, value_name = "DIR", default_value = ".")]
        out_dir: PathBuf,
        /// Small ensembles and short optimizer runs.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Environment JSON (s, lambda, omega_c_rad_s, optional comb).
    #[arg(long, value_name = "PATH")]
    env: Option<PathBuf>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    #[arg(long, value_name = "RAD_PER_S", conflicts_with = "cutoff_hz")]
    omega_c_rad_s: Option<f64>,
    #[arg(long, value_name = "HZ")]
    cutoff_hz: Option<f64>,
    /// k_B·T in units of ħω; 0 is the zero-temperature limit.
    #[arg(long)]
    temperature_energy: Option<f64>,
    #[arg(long, value_name = "RAD_PER_S", conflicts_with = "comb_spacing_hz")]
    omega_b_rad_s: Option<f64>,
    #[arg(long, value_name = "HZ")]
    comb_spacing_hz: Option<f64>,
    /// Number of comb harmonics M.
    #[arg(long)]
    harmonics: Option<usize>,
    /// Reject combs that stop below the cutoff.
    #[arg(long)]
    strict: bool,
    /// Exponent scale: comb (divided by ω_b) or bath.
    #[arg(long, value_parser = ["comb", "bath"])]
    normalization: Option<String>,
    /// free, pdd, cpmg or udd.
    #[arg(long, value_parser = parse_family)]
    family: Option<Family>,
    #[arg(long, alias = "n")]
    pulses: Option<usize>,
    #[arg(long, alias = "total-time", value_name = "SECONDS")]
    total_time_s: Option<f64>,
    /// Sequence JSON {total_time_s, pulse_times_s, label}.
    #[arg(long, value_name = "PATH", conflicts_with = "family")]
    sequence: Option<PathBuf>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, value_name = "SECONDS")]
    t_max_s: Option<f64>,
    #[arg(long, value_name = "SECONDS")]
    horizon_s: Option<f64>,
    /// Primary output: trace CSV, or table CSV for sweeps and filters.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    json_out: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    report_out: Option<PathBuf>,
}

#[derive(Args)]
struct EnsembleArgs {
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    bin_size: Option<usize>,
}

fn parse_family(s: &str) -> std::result::Result<Family, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_param(s: &str) -> std::result::Result<SweepParam, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_fitness(s: &str) -> std::result::Result<FitnessKind, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|_| format!("unknown fitness {s:?}; expected auto, closed-form, quadrature or comb"))
}

impl Common {
    fn config(&self, mode: Mode) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        cfg.mode = mode;
        if let Some(p) = &self.env {
            cfg.load_environment(p)?;
        }
        let env = &mut cfg.environment;
        set(&mut env.s, self.s);
        set(&mut env.lambda, self.lambda);
        set(&mut env.omega_c_rad_s, self.omega_c_rad_s.or(self.cutoff_hz.map(|f| TWO_PI * f)));
        set(&mut env.temperature_energy, self.temperature_energy);
        set(
            &mut cfg.noise.omega_b_rad_s,
            self.omega_b_rad_s.or(self.comb_spacing_hz.map(|f| TWO_PI * f)),
        );
        set(&mut cfg.noise.harmonics, self.harmonics);
        cfg.noise.strict |= self.strict;
        match self.normalization.as_deref() {
            Some("bath") => cfg.normalization = Some(Normalization::Bath),
            Some(_) => {
                cfg.normalization = Some(Normalization::Comb {
                    omega_b: cfg.noise.omega_b_rad_s,
                })
            }
            None => {}
        }
        if let Some(p) = &self.sequence {
            let seq: PulseSequence = io::read_json(p)?;
            cfg.sequence = SequenceConfig::Explicit(seq);
        }
        if self.family.is_some() || self.pulses.is_some() || self.total_time_s.is_some() {
            let (family, n, total) = match &cfg.sequence {
                SequenceConfig::Generated {
                    family,
                    n,
                    total_time_s,
                } => (*family, *n, *total_time_s),
                SequenceConfig::Explicit(seq) => {
                    if self.family.is_none() {
                        return Err(Error::InvalidParameter {
                            field: "sequence",
                            reason: "pulse count and duration come from the sequence file".into(),
                        });
                    }
                    (Family::Free, 0, seq.total_time())
                }
            };
            cfg.sequence = SequenceConfig::Generated {
                family: self.family.unwrap_or(family),
                n: self.pulses.unwrap_or(n),
                total_time_s: self.total_time_s.unwrap_or(total),
            };
        }
        set(&mut cfg.grid.num_points, self.points);
        if self.t_max_s.is_some() {
            cfg.grid.t_max_s = self.t_max_s;
        }
        if self.horizon_s.is_some() {
            cfg.horizon_s = self.horizon_s;
        }
        if self.json_out.is_some() {
            cfg.outputs.trace_json = self.json_out.clone();
        }
        if self.report_out.is_some() {
            cfg.outputs.report_json = self.report_out.clone();
        }
        Ok(cfg)
    }

    /// Route `--out` to the primary output of `mode`; trace modes default to
    /// `trace.csv`.
    fn primary_out(&self, cfg: &mut RunConfig) {
        match cfg.mode {
            Mode::Sweep => {
                if self.out.is_some() {
                    cfg.outputs.table_csv = self.out.clone();
                }
            }
            Mode::Optimize => {
                if self.out.is_some() {
                    cfg.outputs.result_json = self.out.clone();
                }
            }
            Mode::Smooth => {
                if self.out.is_some() {
                    cfg.outputs.smoothed_csv = self.out.clone();
                }
            }
            _ => {
                if self.out.is_some() {
                    cfg.outputs.trace_csv = self.out.clone();
                } else if cfg.outputs.trace_csv.is_none() {
                    cfg.outputs.trace_csv = Some(PathBuf::from("trace.csv"));
                }
            }
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn execute(command: Command) -> Result<()> {
    let cfg = match command {
        Command::Simulate {
            common,
            ensemble,
            exact,
            smoothed_out,
        } => {
            let mut cfg = common.config(if exact { Mode::Comb } else { Mode::MonteCarlo })?;
            set(&mut cfg.ensemble.num_realizations, ensemble.realizations);
            set(&mut cfg.ensemble.master_seed, ensemble.seed);
            if ensemble.bins.is_some() {
                cfg.ensemble.num_bins = ensemble.bins;
            }
            if ensemble.bin_size.is_some() {
                cfg.ensemble.bin_size = ensemble.bin_size;
            }
            if smoothed_out.is_some() {
                cfg.outputs.smoothed_csv = smoothed_out;
            }
            common.primary_out(&mut cfg);
            cfg
        }
        Command::Analytic { common, quadrature } => {
            let mut cfg = common.config(Mode::Analytic)?;
            if quadrature {
                cfg.fitness = FitnessKind::Quadrature;
            }
            common.primary_out(&mut cfg);
            cfg
        }
        Command::Filter {
            common,
            at_s,
            omega_max_rad_s,
            frequencies,
        } => {
            let cfg = common.config(Mode::Analytic)?;
            let env = cfg.environment.build()?;
            let seq = cfg.sequence.build()?;
            println!("{seq}");
            let rows = filter_table(
                &seq,
                &env,
                at_s.unwrap_or(seq.total_time()),
                omega_max_rad_s.unwrap_or(8.0 * env.omega_c),
                frequencies,
            )?;
            let header = ["omega_rad_s", "filter_power", "spectral_density"];
            return match &common.out {
                Some(p) => io::write_table_file(p, &header, &rows),
                None => io::write_table(std::io::stdout().lock(), &header, &rows),
            };
        }
        Command::Measure {
            input,
            horizon_s,
            smoothed,
            entropy_epsilon,
            out,
        } => {
            if !input.is_file() {
                return Err(Error::InvalidParameter {
                    field: "in",
                    reason: format!("{} does not exist", input.display()),
                });
            }
            let trace = io::read_trace_file(&input, Method::MonteCarlo)?;
            let report = MeasureReport::compute(&trace, horizon_s, smoothed, entropy_epsilon)?;
            match out {
                Some(p) => io::write_json(&p, &report)?,
                None => println!("{}", serde_json::to_string_pretty(&report)?),
            }
            println!("blp={:.6} protection={:.6}", report.blp, report.protection);
            return Ok(());
        }
        Command::Optimize {
            common,
            seed,
            population,
            generations,
            min_delay_s,
            history,
            fitness,
        } => {
            let mut cfg = common.config(Mode::Optimize)?;
            set(&mut cfg.ga.seed, seed);
            set(&mut cfg.ga.population_size, population);
            set(&mut cfg.ga.max_generations, generations);
            set(&mut cfg.ga.min_delay, min_delay_s);
            set(&mut cfg.fitness, fitness);
            if history.is_some() {
                cfg.outputs.history_csv = history;
            }
            common.primary_out(&mut cfg);
            let summary = cli::run(&cfg)?;
            if let Some(p) = &cfg.outputs.result_json {
                let result: dephasim::OptimizationResult = io::read_json(p)?;
                println!("{}", result.best_sequence);
            }
            println!("{summary}");
            return Ok(());
        }
        Command::Smooth {
            common,
            input,
            report,
            noise_floor_factor,
        } => {
            let mut cfg = common.config(Mode::Smooth)?;
            if input.is_some() {
                cfg.input = input;
            }
            set(&mut cfg.smoothing.noise_floor_factor, noise_floor_factor);
            if let Some(Some(p)) = &report {
                cfg.outputs.report_json = Some(p.clone());
            }
            common.primary_out(&mut cfg);
            let summary = cli::run(&cfg)?;
            if let Some(None) = report {
                let raw = io::read_trace_file(cfg.input.as_deref().unwrap(), Method::MonteCarlo)?;
                let rep = smooth_summary(&raw, &cfg.smoothing, cfg.horizon_s)?;
                println!("{}", serde_json::to_string_pretty(&rep)?);
            }
            println!("{summary}");
            return Ok(());
        }
        Command::Sweep {
            common,
            param,
            from,
            to,
            step,
            include_ndd,
            seed,
        } => {
            let mut cfg = common.config(Mode::Sweep)?;
            set(&mut cfg.sweep.param, param);
            set(&mut cfg.sweep.from, from);
            set(&mut cfg.sweep.to, to);
            if step.is_some() {
                cfg.sweep.step = step;
            }
            cfg.sweep.include_ndd |= include_ndd;
            set(&mut cfg.ga.seed, seed);
            common.primary_out(&mut cfg);
            cfg
        }
        Command::Reproduce {
            figure,
            out_dir,
            quick,
            seed,
        } => {
            let opts = ReproduceOptions { quick, seed };
            let figures: Vec<&str> = if figure == "all" {
                FIGURES.to_vec()
            } else {
                vec![figure.as_str()]
            };
            for f in figures {
                let m = reproduce_figure(f, &out_dir, &opts)?;
                let names: Vec<&str> = m.files.iter().map(|d| d.name.as_str()).collect();
                println!("{f}: {}", names.join(" "));
            }
            return Ok(());
        }
    };
    let summary = cli::run(&cfg)?;
    println!("{summary}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
