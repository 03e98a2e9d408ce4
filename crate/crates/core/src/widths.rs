//! Mean widths and volume radii: exact log-volume formulas where available,
//! Monte Carlo Gaussian-width estimators otherwise, and the transfer
//! inequalities between a body in a hyperplane and its symmetrization.
//!
//! All volumes are handled in log space; the exact density-set volume
//! overflows `f64` in linear space beyond dimension ten or so.

use crate::bodies::{BodyOracle, Exactness};
use crate::error::{Error, Result};
use crate::sampling::{self, SeededStream};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

/// Gaussian mean of the Euclidean norm in `R^m`:
/// `γ_m = √2 Γ((m+1)/2) / Γ(m/2)`.
///
/// Satisfies `γ_m < √m` with `γ_m/√m` increasing in `m`; the Gaussian width
/// of the unit ball of `R^m`, and the conversion factor between Gaussian and
/// spherical mean widths.
pub fn gamma_n(m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParameter {
            name: "m",
            value: 0.0,
            constraint: "m >= 1",
        });
    }
    let m = m as f64;
    Ok(std::f64::consts::SQRT_2 * (ln_gamma((m + 1.0) / 2.0) - ln_gamma(m / 2.0)).exp())
}

/// Log-volume of the Euclidean unit ball in `R^n`.
pub fn log_unit_ball_volume(n: usize) -> f64 {
    let n = n as f64;
    (n / 2.0) * std::f64::consts::PI.ln() - ln_gamma(n / 2.0 + 1.0)
}

/// Exact volume data for the set of `d x d` density matrices, an
/// `(d²-1)`-dimensional body inside the trace-one hyperplane.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ExactVolume {
    pub d: usize,
    /// Natural log of the body's volume in its `d²-1`-dimensional hyperplane.
    pub log_volume: f64,
    /// Volume radius: radius of the Euclidean ball of the same dimension and
    /// volume.
    pub vrad: f64,
}

/// Exact log-volume of the density-matrix set:
/// `ln vol = ½ ln d + (d(d-1)/2) ln 2π + Σ_{k=1}^{d} ln Γ(k) - ln Γ(d²)`.
pub fn vol_density_set_exact(d: usize) -> Result<ExactVolume> {
    if !(2..=256).contains(&d) {
        return Err(Error::InvalidParameter {
            name: "d",
            value: d as f64,
            constraint: "2 <= d <= 256",
        });
    }
    let df = d as f64;
    let mut log_volume = 0.5 * df.ln()
        + (df * (df - 1.0) / 2.0) * (2.0 * std::f64::consts::PI).ln()
        - ln_gamma(df * df);
    for k in 1..=d {
        log_volume += ln_gamma(k as f64);
    }
    let n = d * d - 1;
    let vrad = ((log_volume - log_unit_ball_volume(n)) / n as f64).exp();
    Ok(ExactVolume { d, log_volume, vrad })
}

/// A Monte Carlo mean-width estimate, tagged with enough provenance to keep
/// one-sided estimates from being misused as two-sided values.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WidthEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
    pub body: String,
    /// `true` for the Gaussian width (expectation over standard Gaussian
    /// probes); `false` for the spherical mean width.
    pub gaussian: bool,
    /// Real dimension of the probe space, needed to convert between the
    /// Gaussian and spherical normalizations.
    pub ambient_dim: usize,
    /// Inherited from the support oracle: a `LowerBound` oracle yields an
    /// estimate of a quantity that is itself only a lower bound.
    pub exactness: Exactness,
}

impl WidthEstimate {
    /// Spherical mean width `w = w_G / γ_m` for a Gaussian-width estimate.
    pub fn spherical_mean(&self) -> Result<f64> {
        if !self.gaussian {
            return Ok(self.mean);
        }
        Ok(self.mean / gamma_n(self.ambient_dim)?)
    }

    /// `mean + z·std_error`.
    pub fn upper_confidence(&self, z: f64) -> f64 {
        self.mean + z * self.std_error
    }

    /// `mean - z·std_error`.
    pub fn lower_confidence(&self, z: f64) -> f64 {
        self.mean - z * self.std_error
    }
}

/// Monte Carlo estimate of the Gaussian mean width
/// `w_G(K) = E max_{x in K} <x, G>`, averaging the support oracle over
/// standard Gaussian probes drawn from independent substreams.
pub fn gaussian_width_mc<B: BodyOracle>(
    body: &B,
    samples: usize,
    stream: SeededStream,
) -> Result<WidthEstimate> {
    if samples < 2 {
        return Err(Error::InvalidParameter {
            name: "samples",
            value: samples as f64,
            constraint: "samples >= 2",
        });
    }
    let values = sampling::collect_samples(stream, samples, |rng| {
        let probe = body.sample_probe(rng);
        body.support(&probe)
    });
    let (mean, _, std_error) = sampling::moments(&values);
    Ok(WidthEstimate {
        mean,
        std_error,
        samples,
        seed: stream.seed,
        body: body.name().to_string(),
        gaussian: true,
        ambient_dim: body.ambient_dim(),
        exactness: body.exactness(),
    })
}

/// Spherical-width bound for a symmetric polytope with `2v` vertices in the
/// unit ball of `R^m`: `√(2 ln v) / γ_m`. Requires `v > 1`.
pub fn polytope_width_bound(v: usize, m: usize) -> Result<f64> {
    if v <= 1 {
        return Err(Error::InvalidParameter {
            name: "v",
            value: v as f64,
            constraint: "v > 1",
        });
    }
    Ok((2.0 * (v as f64).ln()).sqrt() / gamma_n(m)?)
}

/// Urysohn upper bound on the volume radius from a Gaussian-width estimate:
/// `vrad(K) <= w(K) = w_G(K)/γ_m`, reported with a `+3σ` safety margin.
///
/// Rejects lower-bound estimates: an underestimated width cannot certify an
/// upper bound on the volume radius.
pub fn urysohn_vrad_bound(width: &WidthEstimate) -> Result<f64> {
    if !width.gaussian {
        return Err(Error::InvalidParameter {
            name: "width.gaussian",
            value: 0.0,
            constraint: "Gaussian-width estimate required",
        });
    }
    if width.exactness == Exactness::LowerBound {
        return Err(Error::InvalidParameter {
            name: "width.exactness",
            value: 0.0,
            constraint: "exact support oracle required for an upper bound",
        });
    }
    Ok(width.upper_confidence(3.0) / gamma_n(width.ambient_dim)?)
}

/// Check record for the hyperplane-symmetrization volume inequalities.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SymmetrizationCheck {
    pub n: usize,
    pub h: f64,
    pub log_vol_w: f64,
    pub log_vol_omega: f64,
    /// `ln(2h) + ln vol(W)`; equality for centrally symmetric `W`.
    pub log_lower: f64,
    /// `ln(2h) + n ln 2 - ln(n+1) + ln vol(W)`.
    pub log_upper: f64,
    /// `log_vol_omega - log_lower` (≥ 0 when the lower inequality holds).
    pub slack_lower: f64,
    /// `log_upper - log_vol_omega` (≥ 0 when the upper inequality holds).
    pub slack_upper: f64,
    pub pass: bool,
    /// Multiplicative gap over the lower bound read at exponent `1/n`
    /// (the dimension of `W`); lands in `[1, 2)` when the check passes.
    pub ratio_root_n: f64,
    /// Same gap read at exponent `1/(n+1)` (the dimension of the
    /// symmetrization); both exponents are reported rather than choosing.
    pub ratio_root_dim: f64,
}

/// Volume transfer between a convex body `W` in a hyperplane at distance `h`
/// from the origin (dimension `n`) and its symmetrization
/// `Ω = conv(W ∪ -W)` (dimension `n+1`):
/// `2h vol(W) <= vol(Ω) <= 2h (2ⁿ/(n+1)) vol(W)`,
/// with the left side an equality for centrally symmetric `W`. Inputs are
/// volume radii in the respective dimensions; all arithmetic is in log space.
pub fn symmetrization_ratio_bounds(
    vrad_w: f64,
    vrad_omega: f64,
    n: usize,
    h: f64,
) -> Result<SymmetrizationCheck> {
    for (name, value) in [("vrad_w", vrad_w), ("vrad_omega", vrad_omega), ("h", h)] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::InvalidParameter {
                name: match name {
                    "vrad_w" => "vrad_w",
                    "vrad_omega" => "vrad_omega",
                    _ => "h",
                },
                value,
                constraint: "positive and finite",
            });
        }
    }
    let nf = n as f64;
    let log_vol_w = nf * vrad_w.ln() + log_unit_ball_volume(n);
    let log_vol_omega = (nf + 1.0) * vrad_omega.ln() + log_unit_ball_volume(n + 1);
    let log_lower = (2.0 * h).ln() + log_vol_w;
    let log_upper = (2.0 * h).ln() + nf * 2.0f64.ln() - (nf + 1.0).ln() + log_vol_w;
    let slack_lower = log_vol_omega - log_lower;
    let slack_upper = log_upper - log_vol_omega;
    const TOL: f64 = 1e-9;
    Ok(SymmetrizationCheck {
        n,
        h,
        log_vol_w,
        log_vol_omega,
        log_lower,
        log_upper,
        slack_lower,
        slack_upper,
        pass: slack_lower >= -TOL && slack_upper >= -TOL,
        ratio_root_n: (slack_lower / nf).exp(),
        ratio_root_dim: (slack_lower / (nf + 1.0)).exp(),
    })
}
