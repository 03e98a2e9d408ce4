//! Command line front end: exact volumes, width estimates, sphere nets,
//! partial-transpose fractions, and the theorem harnesses, all emitting a
//! JSON object on stdout with the keys `inputs`, `estimates`, `bounds`,
//! `pass`, `seed`.
//!
//! Exit status: 0 when every check passed, 2 when the run completed but a
//! bound check failed, 1 on usage errors.

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sepvol::bodies::{BodyOracle, GammaBody, SigmaBody, StateBody, TraceBall};
use sepvol::ellipsoids::alpha_d;
use sepvol::nets::SphereNet;
use sepvol::ppt::ppt_fraction_mc;
use sepvol::tensor_norms::inradius_inclusion_sigma;
use sepvol::widths::{gaussian_width_mc, vol_density_set_exact, WidthEstimate};
use sepvol::{
    experiments, FactorShape, SeededStream,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "sepvol",
    version,
    about = "Volume and width estimates for multipartite state spaces"
)]
struct Cli {
    /// Also write the flattened report as a key,value table to this path.
    #[arg(long, global = true, value_name = "path")]
    csv: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BodyChoice {
    /// Density matrices, recentred at the maximally mixed state.
    #[value(name = "D", alias = "d")]
    States,
    /// Trace-norm unit ball.
    #[value(name = "Delta", alias = "delta")]
    TraceBall,
    /// Symmetrized separable states (certified-lower-bound oracle).
    #[value(name = "Sigma", alias = "sigma")]
    Sigma,
    /// Hull of rank-one product operators (certified-lower-bound oracle).
    #[value(name = "Gamma", alias = "gamma")]
    Gamma,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact volume and volume radius of the density set.
    VolExact {
        /// Total Hilbert-space dimension (2..=256).
        #[arg(long)]
        d: usize,
    },
    /// Monte Carlo Gaussian mean-width estimate of a convex body.
    Width {
        #[arg(long, value_enum)]
        body: BodyChoice,
        /// Local dimension of each tensor factor.
        #[arg(long = "D", default_value_t = 2)]
        local_dim: usize,
        /// Number of tensor factors.
        #[arg(long = "N", default_value_t = 2)]
        factors: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build a covering net of the unit sphere and save it.
    NetBuild {
        /// Real ambient dimension of the sphere (2..=64).
        #[arg(long)]
        dim: usize,
        /// Covering radius target, in (0, 2).
        #[arg(long)]
        delta: f64,
        /// Output path for the binary net file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fraction of random bipartite states passing the partial-transpose test.
    PptFraction {
        /// Local dimension of the two factors.
        #[arg(long = "D", default_value_t = 2)]
        local_dim: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run one of the four theorem harnesses and report its checks.
    Theorem {
        /// Which harness: 1 unbalanced regime, 2 balanced regime,
        /// 3 projected-width gap, 4 partial-transpose fraction.
        #[arg(value_parser = clap::value_parser!(u8).range(1..=4))]
        id: u8,
        /// Local dimension (ignored by theorem 3, which fixes qubits).
        #[arg(long = "D", default_value_t = 2)]
        local_dim: usize,
        /// Number of factors (ignored by theorem 4, which fixes two).
        #[arg(long = "N", default_value_t = 2)]
        factors: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exponent in the extremal-ellipsoid determinant scaling.
    Alpha {
        #[arg(long = "D")]
        local_dim: usize,
    },
}

fn width_estimate_json(w: &WidthEstimate, gamma: f64) -> Value {
    json!({
        "body": w.body,
        "mean": w.mean,
        "std_error": w.std_error,
        "ci_lower": w.lower_confidence(3.0),
        "ci_upper": w.upper_confidence(3.0),
        "spherical_mean": w.mean / gamma,
        "samples": w.samples,
        "ambient_dim": w.ambient_dim,
        "exactness": format!("{:?}", w.exactness),
    })
}

fn run(cmd: &Cmd) -> sepvol::Result<Value> {
    match *cmd {
        Cmd::VolExact { d } => {
            let vol = vol_density_set_exact(d)?;
            let scaled = vol.vrad * (d as f64).sqrt();
            Ok(json!({
                "inputs": {"d": d},
                "estimates": {
                    "log_volume": vol.log_volume,
                    "vrad": vol.vrad,
                    "exact": true,
                },
                "bounds": {"vrad_sqrt_d": scaled, "lower": 0.5, "upper": 2.0},
                "pass": (0.5..=2.0).contains(&scaled),
                "seed": Value::Null,
            }))
        }
        Cmd::Width {
            body,
            local_dim,
            factors,
            samples,
            seed,
        } => {
            let shape = FactorShape::new(local_dim, factors)?;
            let d = shape.dim() as f64;
            let stream = SeededStream::new(seed);
            let (estimate, gamma, lower) = match body {
                BodyChoice::States => {
                    let b = StateBody::new(shape);
                    let w = gaussian_width_mc(&b, samples, stream.substream(0))?;
                    let g = sepvol::widths::gamma_n(b.ambient_dim())?;
                    (w, g, Some(0.5 / d.sqrt()))
                }
                BodyChoice::TraceBall => {
                    let b = TraceBall::new(shape);
                    let w = gaussian_width_mc(&b, samples, stream.substream(0))?;
                    let g = sepvol::widths::gamma_n(b.ambient_dim())?;
                    (w, g, Some(1.0 / d.sqrt()))
                }
                BodyChoice::Sigma => {
                    let b = SigmaBody::new(shape, stream.substream(1));
                    let w = gaussian_width_mc(&b, samples, stream.substream(0))?;
                    let g = sepvol::widths::gamma_n(b.ambient_dim())?;
                    (w, g, Some(inradius_inclusion_sigma(shape).radius))
                }
                BodyChoice::Gamma => {
                    let b = GammaBody::new(shape, stream.substream(1));
                    let w = gaussian_width_mc(&b, samples, stream.substream(0))?;
                    let g = sepvol::widths::gamma_n(b.ambient_dim())?;
                    (w, g, None)
                }
            };
            // Every body here sits inside the trace-norm ball, whose
            // spherical mean width is at most 2/sqrt(d). Lower references:
            // the density set's volume radius floor, the trace-norm ball's,
            // or the separable inradius certificate. Lower-bound oracles
            // only ever under-report, so the upper comparison stays sound.
            let upper = 2.0 / d.sqrt();
            let spherical = estimate.mean / gamma;
            let sigma_sph = 3.0 * estimate.std_error / gamma;
            let mut pass = spherical - sigma_sph <= upper;
            if let Some(lo) = lower {
                pass = pass && spherical + sigma_sph >= lo;
            }
            Ok(json!({
                "inputs": {
                    "body": format!("{body:?}"),
                    "D": local_dim,
                    "N": factors,
                    "samples": samples,
                    "seed": seed,
                },
                "estimates": [width_estimate_json(&estimate, gamma)],
                "bounds": {
                    "spherical_upper": upper,
                    "spherical_lower": lower,
                },
                "pass": pass,
                "seed": seed,
            }))
        }
        Cmd::NetBuild {
            dim,
            delta,
            ref out,
            seed,
        } => {
            let net = SphereNet::build(dim, delta, SeededStream::new(seed))?;
            net.save(out)?;
            let log_bound = dim as f64 * (1.0 + 2.0 / delta).ln();
            let within_bound = (net.len() as f64).ln() <= log_bound;
            let covered = net.covering_radius_estimate() <= delta;
            Ok(json!({
                "inputs": {
                    "dim": dim,
                    "delta": delta,
                    "out": out.display().to_string(),
                    "seed": seed,
                },
                "estimates": {
                    "points": net.len(),
                    "covering_radius_observed": net.covering_radius_estimate(),
                    "construction": format!("{:?}", net.construction()),
                },
                "bounds": {"log_cardinality_bound": log_bound},
                "pass": within_bound && covered,
                "seed": seed,
            }))
        }
        Cmd::PptFraction {
            local_dim,
            samples,
            seed,
        } => {
            let shape = FactorShape::new(local_dim, 2)?;
            let fraction = ppt_fraction_mc(shape, samples, SeededStream::new(seed))?;
            let n = fraction.n as f64;
            let root_lower_ci = fraction.wilson_lower.powf(1.0 / n);
            let root_upper_ci = fraction.wilson_upper.powf(1.0 / n);
            let sigma = (root_upper_ci - root_lower_ci) / 6.0;
            Ok(json!({
                "inputs": {"D": local_dim, "samples": samples, "seed": seed},
                "estimates": [{
                    "label": "fraction",
                    "mean": fraction.fraction,
                    "hits": fraction.hits,
                    "ci_lower": fraction.wilson_lower,
                    "ci_upper": fraction.wilson_upper,
                    "samples": fraction.samples,
                }, {
                    "label": "fraction root",
                    "mean": fraction.fraction_root,
                    "ci_lower": root_lower_ci,
                    "ci_upper": root_upper_ci,
                    "samples": fraction.samples,
                }],
                "bounds": {"root_lower": experiments::C_PPT_ROOT},
                "pass": fraction.fraction_root + 3.0 * sigma >= experiments::C_PPT_ROOT,
                "seed": seed,
            }))
        }
        Cmd::Theorem {
            id,
            local_dim,
            factors,
            samples,
            seed,
        } => {
            let report = match id {
                1 => experiments::run_theorem1(local_dim, factors, samples, seed)?,
                2 => experiments::run_theorem2(local_dim, factors, seed)?,
                3 => experiments::run_theorem3(factors, samples, seed)?,
                _ => experiments::run_theorem4(local_dim, samples, seed)?,
            };
            Ok(json!({
                "inputs": {
                    "theorem": report.theorem,
                    "D": report.local_dim,
                    "N": report.factors,
                    "samples": report.samples,
                    "seed": report.seed,
                },
                "estimates": report.estimates,
                "bounds": {
                    "lower_bound": report.lower_bound,
                    "upper_bound": report.upper_bound,
                    "constants": report.constants,
                    "checks": report.rows,
                },
                "pass": report.pass,
                "seed": report.seed,
                "retried": report.retried,
                "wall_time_ms": report.wall_time_ms,
            }))
        }
        Cmd::Alpha { local_dim } => {
            let alpha = alpha_d(local_dim)?;
            Ok(json!({
                "inputs": {"D": local_dim},
                "estimates": {"alpha": alpha, "exact": true},
                "bounds": {"lower": 0.0, "upper": 0.5},
                "pass": alpha > 0.0 && alpha < 0.5,
                "seed": Value::Null,
            }))
        }
    }
}

/// Flatten a JSON value into `path,value` rows for the CSV table.
fn flatten(prefix: &str, value: &Value, rows: &mut Vec<(String, String)>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let path = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&path, v, rows);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), v, rows);
            }
        }
        Value::String(s) => rows.push((prefix.to_string(), format!("\"{}\"", s.replace('"', "\"\"")))),
        other => rows.push((prefix.to_string(), other.to_string())),
    }
}

fn write_csv(path: &PathBuf, value: &Value) -> std::io::Result<()> {
    let mut rows = Vec::new();
    flatten("", value, &mut rows);
    let mut table = String::from("key,value\n");
    for (k, v) in rows {
        table.push_str(&format!("{k},{v}\n"));
    }
    std::fs::write(path, table)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli.cmd) {
        Ok(output) => {
            let rendered = serde_json::to_string_pretty(&output).expect("report serializes");
            // Tolerate a closed pipe (e.g. piping into `head`); any other
            // stdout failure is a real error.
            use std::io::Write;
            if let Err(e) = writeln!(std::io::stdout().lock(), "{rendered}") {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    eprintln!("error: failed writing to stdout: {e}");
                    return ExitCode::from(1);
                }
            }
            if let Some(path) = &cli.csv {
                if let Err(e) = write_csv(path, &output) {
                    eprintln!("error: failed to write csv: {e}");
                    return ExitCode::from(1);
                }
            }
            if output["pass"].as_bool() == Some(true) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
