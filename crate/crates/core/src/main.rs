//! `heavytail` — batch CLI for heavy-tail risk analytics.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use heavytail::cli::{
    self, cmd_dynamic, cmd_fit, cmd_premium, cmd_returnlevel, cmd_risk, cmd_study, cmd_tailplot,
    CommonOpts, DynamicConfig, FitConfig, InputOpts, ModelChoice, OutputFormat, PremiumConfig,
    ReturnLevelConfig, RiskConfig, StudyConfig, TailplotConfig, TsMeanChoice,
};
use heavytail::data_io::ReturnsMode;
use heavytail::dynamic_risk::{ThresholdSpec, VolFilter};
use heavytail::error::Result;
use heavytail::tail_estimation::ModelKind;

#[derive(Parser)]
#[command(
    name = "heavytail",
    about = "Pareto-family tail fitting, risk measures, reinsurance pricing, and dynamic VaR",
    version
)]
struct App {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Output directory (defaults to $HEAVYTAIL_OUT_DIR, then ./heavytail_out)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Series output format: json, csv, or both
    #[arg(long, global = true, default_value = "json")]
    format: String,
    /// Seed for every randomized computation
    #[arg(long, global = true, default_value_t = cli::DEFAULT_SEED)]
    seed: u64,
    /// Confidence level for intervals
    #[arg(long, global = true, default_value_t = 0.95)]
    level: f64,
}

impl CommonArgs {
    fn build(&self) -> Result<CommonOpts> {
        let out_dir = match &self.out {
            Some(p) => p.clone(),
            None => std::env::var_os(cli::OUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("heavytail_out")),
        };
        Ok(CommonOpts {
            out_dir,
            format: OutputFormat::parse(&self.format)?,
            seed: self.seed,
            level: self.level,
        })
    }
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Input delimited-text file
    #[arg(long)]
    input: PathBuf,
    /// Value column, by 1-based index or header name
    #[arg(long, default_value = "1")]
    column: String,
    /// Field delimiter
    #[arg(long, default_value = ",")]
    delimiter: char,
    /// Set when the file has no header row
    #[arg(long)]
    no_header: bool,
    /// Optional period-label column (e.g. year) for frequency inference
    #[arg(long)]
    period_column: Option<String>,
    /// Optional timestamp column for return series
    #[arg(long)]
    timestamp_column: Option<String>,
}

impl InputArgs {
    fn build(&self) -> InputOpts {
        InputOpts {
            path: self.input.clone(),
            column: self.column.clone(),
            delimiter: self.delimiter,
            header: !self.no_header,
            period_column: self.period_column.clone(),
            timestamp_column: self.timestamp_column.clone(),
        }
    }
}

#[derive(Args, Clone)]
#[group(required = true, multiple = false)]
struct ThresholdArgs {
    /// Absolute threshold value
    #[arg(long)]
    threshold: Option<f64>,
    /// Threshold as an empirical quantile level in [0,1]
    #[arg(long)]
    threshold_q: Option<f64>,
}

impl ThresholdArgs {
    fn build(&self) -> ThresholdSpec {
        match (self.threshold, self.threshold_q) {
            (Some(v), None) => ThresholdSpec::Absolute(v),
            (None, Some(q)) => ThresholdSpec::QuantileLevel(q),
            _ => unreachable!("clap enforces exactly one threshold spec"),
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|_| {
                heavytail::Error::Config(format!("'{t}' is not a number in list '{s}'"))
            })
        })
        .collect()
}

#[derive(Subcommand)]
enum Command {
    /// Fit tail models above a threshold and report parameters with CIs
    Fit {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        threshold: ThresholdArgs,
        /// pareto, gpd, epd, or all
        #[arg(long, default_value = "all")]
        model: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Emit the diagnostic plot bundle (Pareto plot, Hill series, stability,
    /// profile curve, mean-excess plot)
    Tailplot {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        threshold: ThresholdArgs,
        /// pareto, gpd, or epd
        #[arg(long, default_value = "gpd")]
        model: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Composed risk measures (VaR, ES, top share) at tail levels
    Risk {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        threshold: ThresholdArgs,
        #[arg(long, default_value = "all")]
        model: String,
        /// Comma-separated tail probability levels
        #[arg(long, default_value = "0.01,0.005,0.001")]
        p: String,
        /// Total-mean estimator for top shares: hybrid, plain, or both
        #[arg(long, default_value = "hybrid")]
        ts_mean: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Excess-of-loss pure premiums and threshold-stability curves
    Premium {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        threshold: ThresholdArgs,
        #[arg(long, default_value = "all")]
        model: String,
        /// Comma-separated deductibles
        #[arg(long)]
        deductible: String,
        /// Claims per period; inferred from the period column when absent
        #[arg(long)]
        claims_per_period: Option<f64>,
        /// Comma-separated thresholds for the stability curves
        #[arg(long)]
        stability_thresholds: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Return levels across a grid of return periods, with confidence bands
    Returnlevel {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        threshold: ThresholdArgs,
        #[arg(long, default_value = "gpd")]
        model: String,
        /// Comma-separated return periods
        #[arg(long, default_value = "2,5,10,20,50,100,200,500,1000,2000")]
        periods: String,
        /// Use a bootstrap band with this many replicates instead of the
        /// delta method
        #[arg(long)]
        bootstrap: Option<usize>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Volatility-filtered dynamic VaR/ES with a sliding-window comparison
    Dynamic {
        #[command(flatten)]
        input: InputArgs,
        /// Input value column holds prices or returns
        #[arg(long, default_value = "prices")]
        mode: String,
        /// Model gains instead of losses (skip negation of returns)
        #[arg(long)]
        no_negate: bool,
        /// Volatility filter: garch or ewma
        #[arg(long, default_value = "garch")]
        filter: String,
        /// EWMA decay when --filter ewma
        #[arg(long, default_value_t = 0.94)]
        ewma_beta: f64,
        /// Residual tail threshold as a quantile level
        #[arg(long, default_value_t = 0.9)]
        tail_q: f64,
        /// Residual tail threshold as an absolute value (overrides --tail-q)
        #[arg(long)]
        tail_u: Option<f64>,
        /// Tail probability level
        #[arg(long, default_value_t = 0.005)]
        p: f64,
        /// Residual tail family: gpd or epd
        #[arg(long, default_value = "gpd")]
        model: String,
        /// Sliding-window half width
        #[arg(long, default_value_t = 150)]
        window: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Simulated estimator-bias study across the second-order rate tau
    Study {
        /// Comma-separated tau values (all <= 0)
        #[arg(long, default_value = "-20,-10,-5,-2,-1,-0.5,-0.25,-0.1", allow_hyphen_values = true)]
        taus: String,
        #[arg(long, default_value_t = 1.5)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn run() -> Result<serde_json::Value> {
    let app = App::parse();
    match app.command {
        Command::Fit {
            input,
            threshold,
            model,
            common,
        } => cmd_fit(&FitConfig {
            input: input.build(),
            threshold: threshold.build(),
            model: ModelChoice::parse(&model)?,
            common: common.build()?,
        }),
        Command::Tailplot {
            input,
            threshold,
            model,
            common,
        } => cmd_tailplot(&TailplotConfig {
            input: input.build(),
            threshold: threshold.build(),
            model: ModelChoice::parse(&model)?,
            common: common.build()?,
        }),
        Command::Risk {
            input,
            threshold,
            model,
            p,
            ts_mean,
            common,
        } => cmd_risk(&RiskConfig {
            input: input.build(),
            threshold: threshold.build(),
            model: ModelChoice::parse(&model)?,
            levels: parse_list(&p)?,
            ts_mean: TsMeanChoice::parse(&ts_mean)?,
            common: common.build()?,
        }),
        Command::Premium {
            input,
            threshold,
            model,
            deductible,
            claims_per_period,
            stability_thresholds,
            common,
        } => cmd_premium(&PremiumConfig {
            input: input.build(),
            threshold: threshold.build(),
            model: ModelChoice::parse(&model)?,
            deductibles: parse_list(&deductible)?,
            claims_per_period,
            stability_thresholds: stability_thresholds.as_deref().map(parse_list).transpose()?,
            common: common.build()?,
        }),
        Command::Returnlevel {
            input,
            threshold,
            model,
            periods,
            bootstrap,
            common,
        } => cmd_returnlevel(&ReturnLevelConfig {
            input: input.build(),
            threshold: threshold.build(),
            model: ModelChoice::parse(&model)?,
            t_grid: parse_list(&periods)?,
            bootstrap,
            common: common.build()?,
        }),
        Command::Dynamic {
            input,
            mode,
            no_negate,
            filter,
            ewma_beta,
            tail_q,
            tail_u,
            p,
            model,
            window,
            common,
        } => {
            let mode = match mode.as_str() {
                "prices" => ReturnsMode::Prices,
                "returns" => ReturnsMode::Returns,
                other => {
                    return Err(heavytail::Error::Config(format!(
                        "unknown mode '{other}' (expected prices or returns)"
                    )))
                }
            };
            let filter = match filter.as_str() {
                "garch" => VolFilter::Garch,
                "ewma" => VolFilter::Ewma { beta: ewma_beta },
                other => {
                    return Err(heavytail::Error::Config(format!(
                        "unknown filter '{other}' (expected garch or ewma)"
                    )))
                }
            };
            let kind = match model.as_str() {
                "gpd" => ModelKind::Gpd,
                "epd" => ModelKind::Epd,
                other => {
                    return Err(heavytail::Error::Config(format!(
                        "unknown model '{other}' (expected gpd or epd)"
                    )))
                }
            };
            let tail = match tail_u {
                Some(u) => ThresholdSpec::Absolute(u),
                None => ThresholdSpec::QuantileLevel(tail_q),
            };
            cmd_dynamic(&DynamicConfig {
                input: input.build(),
                mode,
                negate: !no_negate,
                filter,
                tail,
                p,
                kind,
                half_width: window,
                common: common.build()?,
            })
        }
        Command::Study {
            taus,
            alpha,
            delta,
            n,
            replicates,
            common,
        } => cmd_study(&StudyConfig {
            taus: parse_list(&taus)?,
            alpha,
            delta,
            n,
            replicates,
            common: common.build()?,
        }),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(report) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
