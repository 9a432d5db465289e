//! `layerwave` command-line front end.
//!
//! Every command reads and writes JSON (models as `{"tau","R"}`, data as
//! `{"sigma","alpha"}`), optionally emitting CSV side files for plotting.
//! Failures print a JSON object on stderr and exit with 2 (validation),
//! 3 (guard), 4 (algorithm) or 5 (I/O).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use layerwave::inverse::{default_cluster_tol, CorrectionSets};
use layerwave::io::{
    data_from_json, data_to_json, model_from_json, model_to_json, profile_from_json, read_json,
    report_to_json, to_pretty,
};
use layerwave::lattice::{
    enumerate_lattice_set_with, enumerate_restricted_with, DEFAULT_MAX_TERMS,
};
use layerwave::oracle::{oracle_weight_sums, write_weight_sums_csv, DEFAULT_MAX_SEQUENCES};
use layerwave::perturb::{self, PerturbSpec, SpuriousSpec, DEFAULT_OMEGA};
use layerwave::{
    correct_reflectivity, correct_reflectivity_with, forward_with, from_physical,
    gen_random_generic, invert, invert_corrected, is_generic, Data, Error, ErrorKind,
    ForwardOptions, GenOptions, InverseOptions, Model, Rational, Result, Scalar,
};

const MAX_TERMS_ENV: &str = "LAYERWAVE_MAX_TERMS";

#[derive(Parser)]
#[command(
    name = "layerwave",
    version,
    about = "Exact impulse responses of 1-D layered media"
)]
struct Cli {
    /// Use exact rational arithmetic instead of f64.
    #[arg(long, global = true)]
    rational: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// Output JSON path; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Impulse response of a model.
    Forward {
        model: PathBuf,
        /// Read a physical profile (depths, densities, moduli) instead of a model.
        #[arg(long)]
        profile: bool,
        /// End of the time window; defaults to the total travel time.
        #[arg(long)]
        t_max: Option<String>,
        #[arg(long)]
        time_tol: Option<String>,
        /// Write the enumeration map (k, time, amplitude, psi) as CSV.
        #[arg(long)]
        emit_psi: Option<PathBuf>,
        /// Also report the genericity test on stderr.
        #[arg(long)]
        check_generic: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Recover a model from its impulse response.
    Invert {
        data: PathBuf,
        /// Reject arrivals without corroborating multiples.
        #[arg(long)]
        robust: bool,
        #[arg(long)]
        time_tol: Option<String>,
        #[arg(long, default_value_t = 64)]
        max_layers: usize,
        /// Write the full report (rejections, matches, primaries) instead of the model.
        #[arg(long)]
        report: bool,
        #[command(flatten)]
        out: Output,
    },
    /// Reflectivity correction from redundant multiples.
    Correct {
        data: PathBuf,
        /// Model from a previous inversion; when absent travel times come
        /// straight from the arrival times.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        robust: bool,
        #[arg(long)]
        cluster_tol: Option<String>,
        #[arg(long)]
        time_tol: Option<String>,
        /// Write the correction sets as CSV.
        #[arg(long)]
        emit_sets: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Impulse response by brute-force enumeration of scattering sequences.
    Oracle {
        model: PathBuf,
        #[arg(long)]
        t_max: Option<String>,
        #[arg(long, default_value_t = DEFAULT_MAX_SEQUENCES)]
        max_sequences: usize,
        /// Write per-k weight sums as CSV.
        #[arg(long)]
        emit_weights: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Perturb data: decimate, add spurious arrivals, sine distortion, shift.
    Distort {
        data: PathBuf,
        #[arg(long)]
        decimate: Option<String>,
        /// Explicit spurious arrival `time:amplitude`; repeatable.
        #[arg(long = "spurious", value_name = "T:A")]
        spurious: Vec<String>,
        /// Number of random spurious arrivals.
        #[arg(long, default_value_t = 0)]
        spurious_count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Minimum distance between a spurious arrival and any other.
        #[arg(long, default_value = "1e-6")]
        guard_tol: String,
        /// Sine amplitude.
        #[arg(long)]
        sine: Option<f64>,
        /// Sine window `start,end`.
        #[arg(long)]
        window: Option<String>,
        #[arg(long, default_value_t = DEFAULT_OMEGA)]
        omega: f64,
        #[arg(long, default_value_t = 0.0)]
        phase: f64,
        #[arg(long)]
        shift: Option<String>,
        #[command(flatten)]
        out: Output,
    },
    /// Random generic model with dyadic entries.
    Gen {
        #[arg(long)]
        layers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        margin_floor: f64,
        /// Range of |R| as `lo,hi`.
        #[arg(long)]
        refl_range: Option<String>,
        #[arg(long, default_value_t = 1000)]
        max_attempts: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Lattice set of a model as CSV.
    Lattice {
        model: PathBuf,
        /// Time bound; defaults to the total travel time.
        #[arg(long)]
        bound: Option<String>,
        /// Restrict to vectors with k_0..k_n all positive over the first n+1 layers.
        #[arg(long)]
        restricted: Option<usize>,
        /// Output CSV path; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn max_terms() -> Result<usize> {
    match std::env::var(MAX_TERMS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            Error::InvalidArgument(format!(
                "{MAX_TERMS_ENV} must be a positive integer, got {v:?}"
            ))
        }),
        Err(_) => Ok(DEFAULT_MAX_TERMS),
    }
}

fn pair(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::InvalidArgument(format!("expected two numbers `lo,hi`, got {s:?}"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

fn scalar<S: Scalar>(s: &Option<String>) -> Result<Option<S>> {
    s.as_deref().map(S::parse_str).transpose()
}

fn writer(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn emit(out: &Output, v: &Value) -> Result<()> {
    let mut w = writer(&out.output)?;
    w.write_all(to_pretty(v).as_bytes())?;
    w.flush()?;
    Ok(())
}

fn csv_file(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn load_model<S: Scalar>(path: &Path) -> Result<Model<S>> {
    model_from_json(&read_json(path)?)
}

fn load_data<S: Scalar>(path: &Path) -> Result<Data<S>> {
    data_from_json(&read_json(path)?)
}

fn write_sets<S: Scalar>(path: &Option<PathBuf>, sets: &CorrectionSets<S>) -> Result<()> {
    if let Some(p) = path {
        let mut f = csv_file(p)?;
        sets.write_csv(&mut f)?;
        f.flush()?;
    }
    Ok(())
}

fn run<S: Scalar>(command: Command) -> Result<()> {
    let guard = max_terms()?;
    match command {
        Command::Forward {
            model,
            profile,
            t_max,
            time_tol,
            emit_psi,
            check_generic,
            out,
        } => {
            let m: Model<S> = if profile {
                from_physical(&profile_from_json(&read_json(&model)?)?)?.convert()
            } else {
                load_model(&model)?
            };
            let opts = ForwardOptions {
                t_max: scalar(&t_max)?,
                time_tol: scalar(&time_tol)?,
                max_terms: guard,
            };
            let (data, map) = forward_with(&m, &opts)?;
            if let Some(p) = emit_psi {
                let mut f = csv_file(&p)?;
                map.write_csv(&mut f)?;
                f.flush()?;
            }
            if check_generic {
                let report = is_generic(&m)?;
                let margin = report.margin.as_ref().map(|v| v.to_json());
                let summary = json!({
                    "generic": report.is_generic(),
                    "time_injective": report.time_injective,
                    "collisions": report.collisions.len(),
                    "zero_amplitudes": report.zero_amplitudes.len(),
                    "margin": margin,
                });
                eprintln!("{summary}");
            }
            emit(&out, &data_to_json(&data))
        }
        Command::Invert {
            data,
            robust,
            time_tol,
            max_layers,
            report,
            out,
        } => {
            let d: Data<S> = load_data(&data)?;
            let opts = InverseOptions {
                time_tol: scalar(&time_tol)?,
                robust,
                max_layers,
                max_terms: guard,
                ..Default::default()
            };
            let r = invert(&d, &opts)?;
            emit(
                &out,
                &if report {
                    report_to_json(&r)
                } else {
                    model_to_json(&r.model)
                },
            )
        }
        Command::Correct {
            data,
            model,
            robust,
            cluster_tol,
            time_tol,
            emit_sets,
            out,
        } => {
            let d: Data<S> = load_data(&data)?;
            let cluster = scalar(&cluster_tol)?.unwrap_or_else(default_cluster_tol);
            let time_tol: Option<S> = scalar(&time_tol)?;
            let corrected = match model {
                Some(p) => {
                    let m: Model<S> = load_model(&p)?;
                    let (refl, sets) = correct_reflectivity_with(
                        m.tau(),
                        &m.refl()[0],
                        &d,
                        &cluster,
                        time_tol.as_ref(),
                    )?;
                    write_sets(&emit_sets, &sets)?;
                    Model::new(m.tau().to_vec(), refl)?
                }
                None => {
                    let opts = InverseOptions {
                        time_tol,
                        robust,
                        max_terms: guard,
                        ..Default::default()
                    };
                    let (m, sets) = match invert(&d, &opts) {
                        Ok(report) => {
                            let (refl, sets) = correct_reflectivity(&report, &d, &cluster)?;
                            (Model::new(report.model.tau().to_vec(), refl)?, sets)
                        }
                        Err(e) if e.kind() == ErrorKind::Algorithm => {
                            invert_corrected(&d, &opts, &cluster)?
                        }
                        Err(e) => return Err(e),
                    };
                    write_sets(&emit_sets, &sets)?;
                    m
                }
            };
            emit(&out, &model_to_json(&corrected))
        }
        Command::Oracle {
            model,
            t_max,
            max_sequences,
            emit_weights,
            out,
        } => {
            let m: Model<S> = load_model(&model)?;
            let t = scalar(&t_max)?.unwrap_or_else(|| m.total_travel_time());
            let limit = if std::env::var_os(MAX_TERMS_ENV).is_some() {
                guard
            } else {
                max_sequences
            };
            if let Some(p) = emit_weights {
                let sums = oracle_weight_sums(&m, &t, limit)?;
                let mut f = csv_file(&p)?;
                write_weight_sums_csv(&sums, m.tau(), &mut f)?;
                f.flush()?;
            }
            let data = layerwave::oracle::oracle_response_with(&m, &t, limit)?;
            emit(&out, &data_to_json(&data))
        }
        Command::Distort {
            data,
            decimate,
            spurious,
            spurious_count,
            seed,
            guard_tol,
            sine,
            window,
            omega,
            phase,
            shift,
            out,
        } => {
            let d: Data<S> = load_data(&data)?;
            let spurious_points = spurious
                .iter()
                .map(|p| {
                    let (t, a) = p.split_once(':').ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "spurious point {p:?} is not time:amplitude"
                        ))
                    })?;
                    Ok((S::parse_str(t)?, S::parse_str(a)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let guard_f = guard_tol.parse::<f64>().map_err(|_| {
                Error::InvalidArgument(format!("guard tolerance {guard_tol:?} is not a number"))
            })?;
            let spurious_random = (spurious_count > 0).then(|| SpuriousSpec {
                guard_tol: guard_f,
                ..SpuriousSpec::new(spurious_count, seed)
            });
            let sine = match (sine, window) {
                (Some(a), Some(w)) => Some((a, pair(&w)?, omega, phase)),
                (Some(_), None) => {
                    return Err(Error::InvalidArgument(
                        "--sine needs --window start,end".into(),
                    ))
                }
                (None, _) => None,
            };
            let spec = PerturbSpec {
                decimate_threshold: scalar(&decimate)?,
                spurious_points,
                spurious_random,
                spurious_guard_tol: Some(S::parse_str(&guard_tol)?),
                sine,
                shift: scalar(&shift)?,
            };
            emit(&out, &data_to_json(&perturb::apply(&d, &spec)?))
        }
        Command::Gen {
            layers,
            seed,
            margin_floor,
            refl_range,
            max_attempts,
            out,
        } => {
            let mut opts = GenOptions {
                margin_floor,
                max_attempts,
                max_terms: guard,
                ..Default::default()
            };
            if let Some(r) = refl_range {
                opts.refl_range = pair(&r)?;
            }
            let m = gen_random_generic(layers, seed, &opts)?;
            emit(&out, &model_to_json(&m.convert::<S>()))
        }
        Command::Lattice {
            model,
            bound,
            restricted,
            output,
        } => {
            let m: Model<S> = load_model(&model)?;
            let b = scalar(&bound)?.unwrap_or_else(|| m.total_travel_time());
            let set = match restricted {
                Some(n) => {
                    let prefix = m.tau().get(..=n).ok_or(Error::IndexOutOfRange {
                        index: n,
                        limit: m.layers(),
                    })?;
                    enumerate_restricted_with(prefix, n, &b, guard)?
                }
                None => enumerate_lattice_set_with(m.tau(), &b, guard)?,
            };
            let mut w = writer(&output)?;
            set.write_csv(&mut w)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 2,
        ErrorKind::Guard => 3,
        ErrorKind::Algorithm => 4,
        ErrorKind::Io => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = if cli.rational {
        run::<Rational>(cli.command)
    } else {
        run::<f64>(cli.command)
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.kind();
            eprintln!(
                "{}",
                json!({ "error": e.tag(), "kind": format!("{kind:?}").to_lowercase(), "message": e.to_string() })
            );
            ExitCode::from(exit_code(kind))
        }
    }
}
