use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};

use mdpcal_core::mc::{McJob, PriorExponentJob};
use mdpcal_core::output::{self, DEFAULT_PRECISION};
use mdpcal_core::risk::{numeric_minimiser, template_risk};
use mdpcal_core::sanov::mdp_truncation_level;
use mdpcal_core::{
    bahadur_slopes, calibrate_chi2, calibrate_contingency, calibrate_fisher, calibrate_ks,
    calibrate_sign, distinguishability_radius, emit_tables, estimate_prior_exponent,
    evidence_bundle, half_space_rate, mc_bayes_risk, plugin_threshold, regime_series,
    CalibrationProblem, CountVector, Decay, TiltedHalfSpace,
};

const SEED_ENV: &str = "MDPCAL_SEED";

#[derive(Parser)]
#[command(
    name = "mdpcal",
    version,
    about = "Bayes-risk calibration of goodness-of-fit thresholds",
    after_help = "\
Examples:
  mdpcal calibrate ks --kappa 2 --n 10000
  mdpcal risk-curve --rho 1 --kappa 2 --n 1000000
  mdpcal tables --out-dir tables/
  mdpcal triangulate --counts 7,3 --theta0 0.5,0.5
  mdpcal mc --config job.json --seed 42"
)]
struct Cli {
    /// Significant digits for printed reals.
    #[arg(long, global = true, default_value_t = DEFAULT_PRECISION)]
    precision: usize,

    #[command(flatten)]
    format: FormatArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(multiple = false)]
struct FormatArgs {
    /// Emit a JSON document.
    #[arg(long, global = true)]
    json: bool,
    /// Emit CSV records with a header row.
    #[arg(long, global = true)]
    csv: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal threshold for one test setting.
    Calibrate {
        #[command(subcommand)]
        setting: Setting,
    },
    /// Template risk sampled over `a`, with its refined minimiser.
    RiskCurve {
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        kappa: f64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        a_min: Option<f64>,
        #[arg(long)]
        a_max: Option<f64>,
        #[arg(long, default_value_t = 512)]
        points: usize,
    },
    /// Risk against n under fixed-alpha, MDP and LDP calibration.
    Regimes {
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        kappa: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Comma-separated, increasing sample sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<u64>,
    },
    /// Regenerate every threshold table.
    Tables {
        /// Write one CSV per table plus tables.json here instead of stdout.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Half-space KL rate for a discrete problem `{support, probs, phi}`.
    Sanov {
        #[arg(long)]
        input: PathBuf,
    },
    /// KL exponent `(kappa/2) ln n / n` of the optimal rejection set.
    Truncation {
        #[arg(long)]
        kappa: f64,
        #[arg(long)]
        n: u64,
    },
    /// Distinguishability radius for a polynomial or exponential level.
    #[command(group(ArgGroup::new("decay").required(true).args(["poly", "exp"])))]
    Radius {
        #[arg(long)]
        rho: f64,
        /// alpha_n = n^(-c)
        #[arg(long)]
        poly: Option<f64>,
        /// alpha_n = exp(-c n)
        #[arg(long)]
        exp: Option<f64>,
        #[arg(long)]
        n: u64,
    },
    /// Bahadur slopes of the sign, LRT and median tests.
    Slopes {
        #[arg(long, value_delimiter = ',', required = true)]
        theta_list: Vec<f64>,
    },
    /// Multinomial evidence measures for one count vector.
    Triangulate {
        #[arg(long, value_delimiter = ',', required = true)]
        counts: Vec<u64>,
        #[arg(long, value_delimiter = ',', required = true)]
        theta0: Vec<f64>,
        /// Symmetric Dirichlet concentration of the alternative.
        #[arg(long, default_value_t = 1.0)]
        dirichlet: f64,
    },
    /// Monte-Carlo Bayes risk over a threshold grid.
    Mc {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed; MDPCAL_SEED overrides both.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate the prior mass exponent by log-log regression.
    PriorExponent {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Plug-in threshold `sqrt(kappa_hat / (4 rho) ln n)`.
    Plugin {
        #[arg(long)]
        kappa_hat: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        n: u64,
    },
}

#[derive(Subcommand)]
enum Setting {
    /// Kolmogorov-Smirnov (rho = 1).
    Ks {
        #[arg(long)]
        kappa: f64,
        #[arg(long)]
        n: u64,
    },
    /// Sign test under a Laplace-location prior (rho = 1/4).
    Sign {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        n: u64,
    },
    /// Multinomial chi-squared with k categories.
    Chi2 {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        n: u64,
    },
    /// Independence in an r x c table.
    Contingency {
        #[arg(long)]
        r: u32,
        #[arg(long)]
        c: u32,
        #[arg(long)]
        n: u64,
    },
    /// Fisher-geodesic radius with d parameters.
    Fisher {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        d: u32,
        #[arg(long)]
        n: u64,
    },
}

/// Failure classes mapped onto exit codes.
enum Failure {
    /// Bad flags, unreadable or malformed input files: exit 1.
    Usage(String),
    /// Numeric or domain errors from the library: exit 2.
    Domain(mdpcal_core::Error),
}

impl From<mdpcal_core::Error> for Failure {
    fn from(e: mdpcal_core::Error) -> Self {
        Failure::Domain(e)
    }
}

type CliResult<T> = Result<T, Failure>;

#[derive(Clone, Copy, PartialEq)]
enum Format {
    Json,
    Csv,
}

/// What a subcommand produced: a JSON payload and the flat records used for
/// CSV output.
struct Output {
    kind: &'static str,
    payload: Value,
    records: Vec<Value>,
    default: Format,
}

impl Output {
    fn single(kind: &'static str, payload: Value) -> Self {
        Self {
            kind,
            records: vec![payload.clone()],
            payload,
            default: Format::Json,
        }
    }
}

fn to_value<T: Serialize>(x: &T) -> CliResult<Value> {
    Ok(output::to_value(x)?)
}

/// Flatten nested objects into `outer_inner` columns and render arrays as
/// `;`-joined cells so every record fits a CSV row.
fn flatten(v: &Value) -> Value {
    fn cell(v: &Value) -> Value {
        match v {
            Value::Array(items) => Value::String(
                items
                    .iter()
                    .map(|x| match cell(x) {
                        Value::String(s) => s,
                        other => other.to_string(),
                    })
                    .collect::<Vec<_>>()
                    .join(";"),
            ),
            other => other.clone(),
        }
    }
    fn walk(prefix: &str, v: &Value, out: &mut Map<String, Value>) {
        match v {
            Value::Object(map) => {
                for (k, val) in map {
                    let key = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}_{k}")
                    };
                    walk(&key, val, out);
                }
            }
            other => {
                out.insert(prefix.to_string(), cell(other));
            }
        }
    }
    let mut out = Map::new();
    walk("", v, &mut out);
    Value::Object(out)
}

fn read_file(path: &Path, flag: &str) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("{flag}: cannot read {}: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, flag: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| Failure::Usage(format!("{flag}: malformed JSON: {e}")))
}

fn seed_override(flag: Option<u64>) -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Usage(format!("{SEED_ENV}: not an unsigned integer: {s:?}"))),
        Err(_) => Ok(flag),
    }
}

fn calibrate(setting: &Setting) -> CliResult<Output> {
    let payload = match *setting {
        Setting::Ks { kappa, n } => to_value(&calibrate_ks(kappa, n)?)?,
        Setting::Sign { lambda, n } => to_value(&calibrate_sign(lambda, n)?)?,
        Setting::Chi2 { k, n } => to_value(&calibrate_chi2(k, n)?)?,
        Setting::Contingency { r, c, n } => to_value(&calibrate_contingency(r, c, n)?)?,
        Setting::Fisher { lambda, d, n } => to_value(&calibrate_fisher(lambda, d, n)?)?,
    };
    Ok(Output::single("calibration", payload))
}

fn risk_curve(
    rho: f64,
    kappa: f64,
    n: u64,
    a_min: Option<f64>,
    a_max: Option<f64>,
    points: usize,
) -> CliResult<Output> {
    let p = CalibrationProblem::new(rho, kappa, n)?;
    let (lo, hi) = p.default_bracket();
    let (lo, hi) = (a_min.unwrap_or(lo), a_max.unwrap_or(hi));
    if points < 2 {
        return Err(Failure::Usage("--points: need at least 2".into()));
    }
    let curve = numeric_minimiser(&p, lo, hi)?;
    let rows = (0..points)
        .map(|i| {
            let a = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            template_risk(&p, a)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let records = output::records(&rows)?;
    Ok(Output {
        kind: "risk_curve",
        payload: json!({
            "rho": rho,
            "kappa": kappa,
            "n": n,
            "a_star": p.a_star(),
            "argmin_a": curve.argmin_a,
            "min_risk": curve.min_risk,
            "curve": records,
        }),
        records,
        default: Format::Csv,
    })
}

fn regimes(rho: f64, kappa: f64, alpha: f64, n_list: &[u64]) -> CliResult<Output> {
    let p = CalibrationProblem::new(rho, kappa, n_list.first().copied().unwrap_or(2).max(2))?;
    let s = regime_series(&p, n_list, alpha)?;
    let records = output::records(&s.points().collect::<Vec<_>>())?;
    Ok(Output {
        kind: "regimes",
        payload: to_value(&s)?,
        records,
        default: Format::Csv,
    })
}

fn tables(out_dir: Option<&Path>, precision: usize) -> CliResult<Output> {
    let bundle = emit_tables()?;
    if let Some(dir) = out_dir {
        bundle.write_dir(dir, precision)?;
    }
    let records = bundle
        .named_records()?
        .into_iter()
        .flat_map(|(table, rows)| {
            rows.into_iter().map(move |r| {
                let mut m = Map::new();
                m.insert("table".into(), Value::String(table.into()));
                if let Value::Object(fields) = r {
                    m.extend(fields);
                }
                Value::Object(m)
            })
        })
        .collect();
    Ok(Output {
        kind: "tables",
        payload: bundle.to_json()?,
        records,
        default: Format::Json,
    })
}

fn run(cli: &Cli) -> CliResult<Option<Output>> {
    let out = match &cli.command {
        Command::Calibrate { setting } => calibrate(setting)?,
        Command::RiskCurve {
            rho,
            kappa,
            n,
            a_min,
            a_max,
            points,
        } => risk_curve(*rho, *kappa, *n, *a_min, *a_max, *points)?,
        Command::Regimes {
            rho,
            kappa,
            alpha,
            n_list,
        } => regimes(*rho, *kappa, *alpha, n_list)?,
        Command::Tables { out_dir } => {
            let out = tables(out_dir.as_deref(), cli.precision)?;
            if out_dir.is_some() && !cli.format.json && !cli.format.csv {
                return Ok(None);
            }
            out
        }
        Command::Sanov { input } => {
            let problem: TiltedHalfSpace = parse_json(&read_file(input, "--input")?, "--input")?;
            let rate = half_space_rate(&problem)?;
            Output::single("sanov", to_value(&rate)?)
        }
        Command::Truncation { kappa, n } => Output::single(
            "truncation",
            json!({"kappa": kappa, "n": n, "level": mdp_truncation_level(*kappa, *n)?}),
        ),
        Command::Radius { rho, poly, exp, n } => {
            let decay = match (poly, exp) {
                (Some(c), _) => Decay::Polynomial(*c),
                (_, Some(c)) => Decay::Exponential(*c),
                _ => return Err(Failure::Usage("one of --poly or --exp is required".into())),
            };
            let r = distinguishability_radius(*rho, decay, *n)?;
            Output::single(
                "radius",
                json!({"rho": rho, "decay": to_value(&decay)?, "n": n, "radius": r}),
            )
        }
        Command::Slopes { theta_list } => {
            let rows = theta_list
                .iter()
                .map(|&t| bahadur_slopes(t))
                .collect::<Result<Vec<_>, _>>()?;
            let records = output::records(&rows)?;
            Output {
                kind: "slopes",
                payload: json!({ "slopes": records }),
                records,
                default: Format::Json,
            }
        }
        Command::Triangulate {
            counts,
            theta0,
            dirichlet,
        } => {
            let cv = CountVector::new(counts.clone())?;
            let e = evidence_bundle(&cv, theta0, *dirichlet)?;
            Output::single("triangulation", to_value(&e)?)
        }
        Command::Mc { config, seed } => {
            let mut job: McJob = parse_json(&read_file(config, "--config")?, "--config")?;
            if let Some(s) = seed_override(*seed)? {
                job.config.seed = s;
            }
            let r = mc_bayes_risk(&job.prior, &job.config, job.statistic)?;
            let records = output::records(&r.rows)?;
            Output {
                kind: "mc_risk",
                payload: to_value(&r)?,
                records,
                default: Format::Csv,
            }
        }
        Command::PriorExponent { config, seed } => {
            let mut job: PriorExponentJob =
                parse_json(&read_file(config, "--config")?, "--config")?;
            if let Some(s) = seed_override(*seed)? {
                job.seed = s;
            }
            let fit = estimate_prior_exponent(&job.prior, &job.radii, job.m, job.seed)?;
            let mut payload = to_value(&fit)?;
            if let Value::Object(m) = &mut payload {
                m.insert("seed".into(), json!(job.seed));
                m.insert("m".into(), json!(job.m));
            }
            Output::single("prior_exponent", payload)
        }
        Command::Plugin { kappa_hat, rho, n } => Output::single(
            "plugin",
            json!({
                "kappa_hat": kappa_hat,
                "rho": rho,
                "n": n,
                "t_plugin": plugin_threshold(*kappa_hat, *rho, *n)?,
            }),
        ),
    };
    Ok(Some(out))
}

fn emit(out: &Output, format: Format, precision: usize) -> CliResult<String> {
    match format {
        Format::Json => {
            let mut doc = output::document(out.kind, out.payload.clone());
            output::round_value(&mut doc, precision);
            let mut s = serde_json::to_string_pretty(&doc)
                .map_err(|e| Failure::Domain(mdpcal_core::Error::Parse(e.to_string())))?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let flat: Vec<Value> = out
                .records
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    output::round_value(&mut r, precision);
                    flatten(&r)
                })
                .collect();
            Ok(output::csv_string(&flat, precision)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    // Group conflicts on global flags are not enforced once they follow the subcommand.
    if cli.format.json && cli.format.csv {
        eprintln!("error: the argument '--json' cannot be used with '--csv'");
        return ExitCode::from(1);
    }
    if cli.precision == 0 || cli.precision > 17 {
        eprintln!("error: --precision must be between 1 and 17");
        return ExitCode::from(1);
    }
    let result = run(&cli).and_then(|out| {
        let Some(out) = out else {
            return Ok(String::new());
        };
        let format = if cli.format.json {
            Format::Json
        } else if cli.format.csv {
            Format::Csv
        } else {
            out.default
        };
        emit(&out, format, cli.precision)
    });
    match result {
        Ok(text) => {
            let mut stdout = io::stdout().lock();
            if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
