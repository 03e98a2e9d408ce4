//! The minimal-volume ellipsoid containing the trace-norm ball, its tensor
//! powers, and the associated determinant bookkeeping.
//!
//! On `B_sa(C^D)` the ellipsoid is the unit ball of the quadratic form
//! `(1+1/D) tr(AB) - (1/D) tr(A) tr(B)`. Equivalently it is the image of the
//! Hilbert-Schmidt unit ball under the map `Φ` that multiplies traceless
//! operators by `(1+1/D)^{-1/2}` and sends `Id` to `√D · Id`. Tensor powers
//! of the ellipsoid are images under `Φ^{⊗N}`, and all volume ratios reduce
//! to powers of `det Φ`.

use crate::error::{Error, Result};
use crate::operators::{FactorShape, HermitianOp};
use crate::sampling::{self, SeededStream};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// The extremal-ellipsoid form on `N`-fold tensor products of `B_sa(C^D)`.
#[derive(Clone, Copy, Debug)]
pub struct LownerForm {
    shape: FactorShape,
}

impl LownerForm {
    pub fn new(local_dim: usize, factors: usize) -> Result<Self> {
        Ok(LownerForm {
            shape: FactorShape::new(local_dim, factors)?,
        })
    }

    pub fn shape(&self) -> FactorShape {
        self.shape
    }

    /// Coefficient of `tr(AB)` in the single-factor form.
    pub fn alpha(&self) -> f64 {
        1.0 + 1.0 / self.shape.local_dim() as f64
    }

    /// Coefficient of `tr(A) tr(B)` in the single-factor form.
    pub fn beta(&self) -> f64 {
        -1.0 / self.shape.local_dim() as f64
    }

    fn check_shape(&self, a: &HermitianOp) -> Result<()> {
        if a.shape() != self.shape {
            return Err(Error::ShapeMismatch {
                left: format!("{}", self.shape),
                right: format!("{}", a.shape()),
            });
        }
        Ok(())
    }

    /// Apply `Φ^{⊗N}`: on every factor, scale the traceless component by
    /// `(1+1/D)^{-1/2}` and the identity component by `√D`.
    pub fn phi(&self, a: &HermitianOp) -> Result<HermitianOp> {
        self.factor_map(a, false)
    }

    /// Apply `(Φ^{-1})^{⊗N}`.
    pub fn phi_inverse(&self, a: &HermitianOp) -> Result<HermitianOp> {
        self.factor_map(a, true)
    }

    fn factor_map(&self, a: &HermitianOp, inverse: bool) -> Result<HermitianOp> {
        self.check_shape(a)?;
        let dd = self.shape.local_dim() as f64;
        let (scale_traceless, scale_identity) = if inverse {
            ((1.0 + 1.0 / dd).sqrt(), 1.0 / dd.sqrt())
        } else {
            ((1.0 + 1.0 / dd).powf(-0.5), dd.sqrt())
        };
        let mut cur = a.clone();
        for j in 0..self.shape.factors() {
            let avg = cur.average_factor(j);
            let rest = &cur - &avg;
            cur = &rest.scale(scale_traceless) + &avg.scale(scale_identity);
        }
        Ok(cur)
    }

    /// The ellipsoid inner product `⟨A, B⟩ = ⟨Φ^{-1}A, Φ^{-1}B⟩_HS`. For a
    /// single factor this equals `(1+1/D) tr(AB) - (1/D) tr(A) tr(B)`.
    pub fn inner(&self, a: &HermitianOp, b: &HermitianOp) -> Result<f64> {
        let fa = self.phi_inverse(a)?;
        let fb = self.phi_inverse(b)?;
        Ok(fa.hs_inner(&fb))
    }

    pub fn norm(&self, a: &HermitianOp) -> Result<f64> {
        Ok(self.inner(a, a)?.max(0.0).sqrt())
    }

    /// `ln det Φ` on one factor: the traceless subspace (dimension `D²-1`)
    /// contributes `(1+1/D)^{-1/2}` each, the identity direction `√D`.
    pub fn log_det_phi_factor(&self) -> f64 {
        let dd = self.shape.local_dim() as f64;
        0.5 * dd.ln() + (1.0 - dd * dd) / 2.0 * (1.0 + 1.0 / dd).ln()
    }

    /// `ln det Φ^{⊗N}` on the full `d²`-dimensional operator space: each
    /// factor map acts `D^{2N-2}`-fold across the complementary factors.
    pub fn log_det_psi(&self) -> f64 {
        let dd = self.shape.local_dim() as f64;
        let nn = self.shape.factors() as f64;
        nn * dd.powf(2.0 * nn - 2.0) * self.log_det_phi_factor()
    }
}

/// Volume-ratio exponent of the extremal ellipsoid:
/// `α_D = ½ log_D(1+1/D) - (1/(2D²)) log_D(D+1)`, so that
/// `vol(ellipsoid)/vol(B_HS) = d^{-α_D d²}`.
pub fn alpha_d(local_dim: usize) -> Result<f64> {
    if local_dim < 2 {
        return Err(Error::InvalidParameter {
            name: "local_dim",
            value: local_dim as f64,
            constraint: "local_dim >= 2",
        });
    }
    let dd = local_dim as f64;
    let log_d = |x: f64| x.ln() / dd.ln();
    Ok(0.5 * log_d(1.0 + 1.0 / dd) - log_d(dd + 1.0) / (2.0 * dd * dd))
}

/// Both sides of the dimension identity
/// `d^{1/2 + α_D} = ((D+1)^{1 - 1/D²})^{N/2}` for `d = D^N`.
pub fn d_power_identity(local_dim: usize, factors: usize) -> Result<(f64, f64)> {
    let shape = FactorShape::new(local_dim, factors)?;
    let dd = local_dim as f64;
    let d = shape.dim() as f64;
    let lhs = d.powf(0.5 + alpha_d(local_dim)?);
    let rhs = (dd + 1.0)
        .powf(1.0 - 1.0 / (dd * dd))
        .powf(factors as f64 / 2.0);
    Ok((lhs, rhs))
}

/// HS-orthonormal coordinates of a Hermitian matrix: diagonal entries, then
/// `√2 Re`, `√2 Im` of each strictly-upper entry.
pub(crate) fn hermitian_coords(a: &HermitianOp) -> Vec<f64> {
    let d = a.dim();
    let m = a.matrix();
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        out.push(m[(i, i)].re);
    }
    let s = std::f64::consts::SQRT_2;
    for i in 0..d {
        for j in (i + 1)..d {
            out.push(s * m[(i, j)].re);
            out.push(s * m[(i, j)].im);
        }
    }
    out
}

/// Empirical test that Haar pure states, mapped to the ellipsoid's unit
/// sphere, form a tight frame on `B_sa(C^D)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct JohnResolutionCheck {
    pub local_dim: usize,
    pub n_pure: usize,
    /// Smallest and largest eigenvalue of the empirical second-moment
    /// operator; the exact second moment is `Id / D²`.
    pub eigen_min: f64,
    pub eigen_max: f64,
    /// Eigenvalue spread `eigen_max - eigen_min`; exactly 0 for the
    /// continuous frame.
    pub deviation: f64,
    /// Concentration budget `5/√n_pure`.
    pub tolerance: f64,
    /// Squared ellipsoid norm of the center `Id/D`; the contact geometry
    /// puts the inscribed-ball radius at `1/√(D²)`.
    pub h_squared: f64,
    /// Largest deviation of a sampled pure state from the form-unit sphere.
    pub contact_max_error: f64,
    pub pass: bool,
}

/// Sample `n_pure` Haar pure states, normalize them in the ellipsoid
/// geometry, and compare the spectrum of their second-moment operator
/// against the exact tight-frame value `Id / D²`. Also checks that every
/// pure state is a contact point (form norm 1) and that the center `Id/D`
/// sits at form distance `1/D` from the origin.
pub fn john_resolution_check(
    local_dim: usize,
    n_pure: usize,
    stream: SeededStream,
) -> Result<JohnResolutionCheck> {
    if n_pure < 100 {
        return Err(Error::InvalidParameter {
            name: "n_pure",
            value: n_pure as f64,
            constraint: "n_pure >= 100",
        });
    }
    let form = LownerForm::new(local_dim, 1)?;
    let shape = form.shape();
    let dim_sq = local_dim * local_dim;

    const CHUNK: usize = 256;
    let chunks = n_pure.div_ceil(CHUNK);
    let (frame, contact_max_error) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream.substream(c as u64).rng();
            let count = CHUNK.min(n_pure - c * CHUNK);
            let mut local_frame = DMatrix::<f64>::zeros(dim_sq, dim_sq);
            let mut worst = 0.0f64;
            for _ in 0..count {
                let x = sampling::sample_haar_vector(local_dim, &mut rng);
                let rho = crate::operators::ProductVector::new(shape, vec![x])
                    .expect("unit vector")
                    .projector();
                worst = worst.max((form.norm(&rho).expect("shape") - 1.0).abs());
                let v = form.phi_inverse(&rho).expect("shape");
                let c = DMatrix::from_vec(dim_sq, 1, hermitian_coords(&v));
                local_frame += &c * c.transpose();
            }
            (local_frame, worst)
        })
        .reduce(
            || (DMatrix::<f64>::zeros(dim_sq, dim_sq), 0.0f64),
            |(fa, wa), (fb, wb)| (fa + fb, wa.max(wb)),
        );
    let frame = frame / n_pure as f64;
    let eigs = frame.symmetric_eigenvalues();
    let eigen_min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    let eigen_max = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let deviation = eigen_max - eigen_min;
    let tolerance = 5.0 / (n_pure as f64).sqrt();

    let center = HermitianOp::maximally_mixed(shape);
    let h_squared = form.inner(&center, &center)?;
    let h_ok = (h_squared - 1.0 / dim_sq as f64).abs() <= 1e-12;

    Ok(JohnResolutionCheck {
        local_dim,
        n_pure,
        eigen_min,
        eigen_max,
        deviation,
        tolerance,
        h_squared,
        contact_max_error,
        pass: deviation <= tolerance && h_ok && contact_max_error <= 1e-10,
    })
}
