//! Hermitian operators on a tensor power of a local Hilbert space.
//!
//! Everything downstream (support oracles, width estimators, partial
//! transposition) works in the real vector space of Hermitian operators on
//! `(C^D)^{⊗N}`, with the Hilbert-Schmidt inner product `<a, b> = tr(a b)`.
//! This module owns the dense representation, the factor-index bookkeeping,
//! and the spectral primitives (eigenvalues, trace norm, operator norm).
//!
//! Matrices are dense `nalgebra` storage; the supported envelope is a total
//! dimension of at most [`MAX_TOTAL_DIM`]. The eigensolver contract is that
//! every returned pair satisfies `‖a v − λ v‖ ≤ 1e-9 · ‖a‖_op`; the test
//! suite checks this against independent oracles.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Largest supported total dimension `D^N` for dense operators.
pub const MAX_TOTAL_DIM: usize = 256;

/// Tolerance below which an eigenvalue is considered non-negative when
/// validating positive semidefiniteness.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;
/// Dense complex matrix, the storage behind every operator.
pub type CMatrix = DMatrix<C64>;
/// Dense complex vector (pure states, tensor factors, net points).
pub type CVector = DVector<C64>;

/// Shape of a homogeneous tensor-product space: `factors` copies of `C^local_dim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct FactorShape {
    local_dim: usize,
    factors: usize,
}

impl FactorShape {
    /// A shape with `factors` tensor factors of local dimension `local_dim`.
    pub fn new(local_dim: usize, factors: usize) -> Result<Self> {
        if local_dim < 2 || factors == 0 {
            return Err(Error::DegenerateShape {
                local_dim,
                factors,
            });
        }
        let total = local_dim
            .checked_pow(factors as u32)
            .unwrap_or(usize::MAX);
        if total > MAX_TOTAL_DIM {
            return Err(Error::ShapeTooLarge {
                local_dim,
                factors,
                total,
                max: MAX_TOTAL_DIM,
            });
        }
        Ok(FactorShape { local_dim, factors })
    }

    /// Single-factor shape on `C^d`.
    pub fn qudit(d: usize) -> Result<Self> {
        FactorShape::new(d, 1)
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn factors(&self) -> usize {
        self.factors
    }

    /// Total Hilbert space dimension `D^N`.
    pub fn dim(&self) -> usize {
        self.local_dim.pow(self.factors as u32)
    }

    /// Real dimension of the space of Hermitian operators, `d^2`.
    pub fn ambient_real_dim(&self) -> usize {
        self.dim() * self.dim()
    }

    /// Real dimension of the traceless hyperplane, `d^2 - 1`.
    pub fn traceless_dim(&self) -> usize {
        self.ambient_real_dim() - 1
    }

    /// Decompose the index range for factor `j` as
    /// `(pre, local, post)`: a full index is `a * local * post + b * post + c`
    /// with `a < pre`, `b < local`, `c < post`.
    pub fn factor_strides(&self, factor: usize) -> (usize, usize, usize) {
        assert!(factor < self.factors, "factor index out of range");
        let pre = self.local_dim.pow(factor as u32);
        let post = self.local_dim.pow((self.factors - 1 - factor) as u32);
        (pre, self.local_dim, post)
    }

    /// Shape of the tensor product with another shape of equal local dimension.
    pub fn tensor(&self, other: &FactorShape) -> Result<FactorShape> {
        if self.local_dim != other.local_dim {
            return Err(Error::ShapeMismatch {
                left: format!("{self:?}"),
                right: format!("{other:?}"),
            });
        }
        FactorShape::new(self.local_dim, self.factors + other.factors)
    }
}

impl std::fmt::Display for FactorShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(C^{})^⊗{}", self.local_dim, self.factors)
    }
}

/// A Hermitian operator with its factor shape.
///
/// The stored matrix is exactly Hermitian: constructors symmetrize after
/// checking that the input is Hermitian up to a small tolerance. Use
/// [`hermitian_part`] to project an arbitrary complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOp {
    shape: FactorShape,
    mat: CMatrix,
}

impl HermitianOp {
    /// Wrap a matrix that is already Hermitian (up to `1e-12` relative
    /// asymmetry); the stored copy is exactly symmetrized.
    pub fn new(shape: FactorShape, mat: CMatrix) -> Result<Self> {
        let d = shape.dim();
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::InvalidOperator(format!(
                "expected {d}x{d} matrix for shape {shape}, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let scale = mat.norm().max(1.0);
        let adj = mat.adjoint();
        let asym = (&mat - &adj).norm();
        if asym > 1e-12 * scale {
            return Err(Error::InvalidOperator(format!(
                "matrix is not Hermitian: asymmetry {asym:.3e} at scale {scale:.3e}"
            )));
        }
        let sym = (mat + adj).scale(0.5);
        Ok(HermitianOp { shape, mat: sym })
    }

    pub(crate) fn from_parts_unchecked(shape: FactorShape, mat: CMatrix) -> Self {
        HermitianOp { shape, mat }
    }

    /// The identity operator on the given shape.
    pub fn identity(shape: FactorShape) -> Self {
        HermitianOp {
            shape,
            mat: CMatrix::identity(shape.dim(), shape.dim()),
        }
    }

    /// The zero operator on the given shape.
    pub fn zero(shape: FactorShape) -> Self {
        HermitianOp {
            shape,
            mat: CMatrix::zeros(shape.dim(), shape.dim()),
        }
    }

    /// The maximally mixed state `Id / d`.
    pub fn maximally_mixed(shape: FactorShape) -> Self {
        HermitianOp::identity(shape).scale(1.0 / shape.dim() as f64)
    }

    pub fn shape(&self) -> FactorShape {
        self.shape
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    /// Trace (real for Hermitian operators).
    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    /// Hilbert-Schmidt inner product `tr(a b)`, real for Hermitian operands.
    pub fn hs_inner(&self, other: &HermitianOp) -> f64 {
        assert_eq!(
            self.shape, other.shape,
            "hs_inner: operands on different spaces"
        );
        let mut acc = 0.0;
        for (a, b) in self.mat.iter().zip(other.mat.iter()) {
            acc += a.re * b.re + a.im * b.im;
        }
        acc
    }

    /// Hilbert-Schmidt (Frobenius) norm.
    pub fn hs_norm(&self) -> f64 {
        self.hs_inner(self).sqrt()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut vals: Vec<f64> = self
            .mat
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals
    }

    /// Full eigendecomposition: eigenvalues ascending, matching eigenvector
    /// columns. Satisfies the residual contract `‖a v − λ v‖ ≤ 1e-9 ‖a‖_op`.
    pub fn eigh(&self) -> (Vec<f64>, CMatrix) {
        let eig = self.mat.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let d = self.dim();
        let mut vectors = CMatrix::zeros(d, d);
        for (col, &i) in order.iter().enumerate() {
            vectors.set_column(col, &eig.eigenvectors.column(i));
        }
        (values, vectors)
    }

    /// Largest eigenvalue.
    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap()
    }

    /// Smallest eigenvalue.
    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap()
    }

    /// Trace norm `Σ |λ_i|`.
    pub fn trace_norm(&self) -> f64 {
        self.eigenvalues().iter().map(|l| l.abs()).sum()
    }

    /// Operator norm `max |λ_i|`.
    pub fn operator_norm(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .fold(0.0f64, |m, l| m.max(l.abs()))
    }

    /// Scalar multiple.
    pub fn scale(&self, t: f64) -> HermitianOp {
        HermitianOp {
            shape: self.shape,
            mat: self.mat.scale(t),
        }
    }

    /// Kronecker product, concatenating factor shapes.
    pub fn tensor(&self, other: &HermitianOp) -> Result<HermitianOp> {
        let shape = self.shape.tensor(&other.shape)?;
        Ok(HermitianOp {
            shape,
            mat: self.mat.kronecker(&other.mat),
        })
    }

    /// Quadratic form `<x| a |x>` (real for Hermitian `a`).
    pub fn expectation(&self, x: &CVector) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        let ax = &self.mat * x;
        let mut acc = 0.0;
        for (xi, yi) in x.iter().zip(ax.iter()) {
            acc += xi.re * yi.re + xi.im * yi.im;
        }
        acc
    }

    /// Replace factor `j` by its average: partial trace over factor `j`
    /// re-inserted as `Id / D`. This is the orthogonal projection onto
    /// operators acting as identity on that factor.
    pub(crate) fn average_factor(&self, factor: usize) -> HermitianOp {
        let (pre, local, post) = self.shape.factor_strides(factor);
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        let inv = 1.0 / local as f64;
        for a in 0..pre {
            for ap in 0..pre {
                for c in 0..post {
                    for cp in 0..post {
                        // Partial trace entry over factor j.
                        let mut s = C64::new(0.0, 0.0);
                        for t in 0..local {
                            let r = (a * local + t) * post + c;
                            let q = (ap * local + t) * post + cp;
                            s += self.mat[(r, q)];
                        }
                        s *= inv;
                        for b in 0..local {
                            let r = (a * local + b) * post + c;
                            let q = (ap * local + b) * post + cp;
                            out[(r, q)] = s;
                        }
                    }
                }
            }
        }
        HermitianOp {
            shape: self.shape,
            mat: out,
        }
    }

    /// Remove the trace component.
    ///
    /// With `per_factor = false` this subtracts `(tr a / d) Id`. With
    /// `per_factor = true` it applies the traceless projection on every
    /// factor: in a product operator basis whose first element is the
    /// normalized identity, every component touching any factor identity is
    /// zeroed, not just the global one.
    pub fn traceless_project(&self, per_factor: bool) -> HermitianOp {
        if !per_factor {
            let t = self.trace() / self.dim() as f64;
            let mut mat = self.mat.clone();
            for i in 0..self.dim() {
                mat[(i, i)] -= C64::new(t, 0.0);
            }
            return HermitianOp {
                shape: self.shape,
                mat,
            };
        }
        let mut cur = self.clone();
        for j in 0..self.shape.factors() {
            let avg = cur.average_factor(j);
            cur = &cur - &avg;
        }
        cur
    }
}

impl std::ops::Add for &HermitianOp {
    type Output = HermitianOp;
    fn add(self, rhs: &HermitianOp) -> HermitianOp {
        assert_eq!(self.shape, rhs.shape, "add: operands on different spaces");
        HermitianOp {
            shape: self.shape,
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl std::ops::Sub for &HermitianOp {
    type Output = HermitianOp;
    fn sub(self, rhs: &HermitianOp) -> HermitianOp {
        assert_eq!(self.shape, rhs.shape, "sub: operands on different spaces");
        HermitianOp {
            shape: self.shape,
            mat: &self.mat - &rhs.mat,
        }
    }
}

impl std::ops::Neg for &HermitianOp {
    type Output = HermitianOp;
    fn neg(self) -> HermitianOp {
        self.scale(-1.0)
    }
}

/// Hermitian part `(m + m†)/2` of an arbitrary complex matrix.
pub fn hermitian_part(shape: FactorShape, mat: &CMatrix) -> Result<HermitianOp> {
    let d = shape.dim();
    if mat.nrows() != d || mat.ncols() != d {
        return Err(Error::InvalidOperator(format!(
            "expected {d}x{d} matrix for shape {shape}, got {}x{}",
            mat.nrows(),
            mat.ncols()
        )));
    }
    let sym = (mat + mat.adjoint()).scale(0.5);
    Ok(HermitianOp { shape, mat: sym })
}

/// A trace-one positive semidefinite operator.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    op: HermitianOp,
}

impl DensityMatrix {
    /// Validate trace one (within `1e-12`) and positive semidefiniteness
    /// (smallest eigenvalue at least `-1e-10`).
    pub fn new(op: HermitianOp) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDensityMatrix(format!(
                "trace {tr} differs from 1 by more than 1e-12"
            )));
        }
        let min = op.lambda_min();
        if min < -PSD_TOLERANCE {
            return Err(Error::InvalidDensityMatrix(format!(
                "smallest eigenvalue {min:.3e} below -{PSD_TOLERANCE:e}"
            )));
        }
        Ok(DensityMatrix { op })
    }

    /// Wrap an operator that is positive by construction (e.g. `G G† / tr`).
    pub(crate) fn new_unchecked(op: HermitianOp) -> Self {
        debug_assert!((op.trace() - 1.0).abs() <= 1e-10);
        DensityMatrix { op }
    }

    /// The maximally mixed state `Id / d`.
    pub fn maximally_mixed(shape: FactorShape) -> Self {
        DensityMatrix {
            op: HermitianOp::maximally_mixed(shape),
        }
    }

    pub fn as_op(&self) -> &HermitianOp {
        &self.op
    }

    pub fn into_op(self) -> HermitianOp {
        self.op
    }

    pub fn shape(&self) -> FactorShape {
        self.op.shape()
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }

    /// `tr(ρ^2)`, between `1/d` and `1`.
    pub fn purity(&self) -> f64 {
        self.op.hs_inner(&self.op)
    }

    /// Re-run the constructor invariants.
    pub fn validate(&self) -> Result<()> {
        DensityMatrix::new(self.op.clone()).map(|_| ())
    }
}

/// A normalized product vector `x_1 ⊗ … ⊗ x_N`.
#[derive(Clone, Debug)]
pub struct ProductVector {
    shape: FactorShape,
    factors: Vec<CVector>,
}

impl ProductVector {
    /// Build from per-factor vectors; each must be a unit vector within `1e-12`.
    pub fn new(shape: FactorShape, factors: Vec<CVector>) -> Result<Self> {
        if factors.len() != shape.factors() {
            return Err(Error::InvalidOperator(format!(
                "expected {} factors, got {}",
                shape.factors(),
                factors.len()
            )));
        }
        for (j, x) in factors.iter().enumerate() {
            if x.len() != shape.local_dim() {
                return Err(Error::InvalidOperator(format!(
                    "factor {j} has dimension {}, expected {}",
                    x.len(),
                    shape.local_dim()
                )));
            }
            if (x.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidOperator(format!(
                    "factor {j} is not normalized: |norm - 1| = {:.3e}",
                    (x.norm() - 1.0).abs()
                )));
            }
        }
        Ok(ProductVector { shape, factors })
    }

    pub fn shape(&self) -> FactorShape {
        self.shape
    }

    pub fn factor(&self, j: usize) -> &CVector {
        &self.factors[j]
    }

    /// The full tensor-product vector in `C^{D^N}`.
    pub fn vector(&self) -> CVector {
        let mut v = self.factors[0].clone();
        for x in &self.factors[1..] {
            v = v.kronecker(x);
        }
        v
    }

    /// The rank-one projector `|x><x|` as a Hermitian operator.
    pub fn projector(&self) -> HermitianOp {
        let v = self.vector();
        let d = v.len();
        let mut mat = CMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                mat[(i, j)] = v[i] * v[j].conj();
            }
        }
        HermitianOp {
            shape: self.shape,
            mat,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{self, SeededStream};
    use approx::assert_relative_eq;

    pub(crate) fn pauli_x() -> HermitianOp {
        let shape = FactorShape::qudit(2).unwrap();
        let mat = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        );
        HermitianOp::new(shape, mat).unwrap()
    }

    pub(crate) fn pauli_y() -> HermitianOp {
        let shape = FactorShape::qudit(2).unwrap();
        let mat = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(0.0, -1.0),
                C64::new(0.0, 1.0),
                C64::new(0.0, 0.0),
            ],
        );
        HermitianOp::new(shape, mat).unwrap()
    }

    pub(crate) fn pauli_z() -> HermitianOp {
        let shape = FactorShape::qudit(2).unwrap();
        let mat = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(-1.0, 0.0),
            ],
        );
        HermitianOp::new(shape, mat).unwrap()
    }

    /// Eigenvalues of a 3x3 Hermitian matrix from the characteristic
    /// polynomial (trigonometric solution of the cubic). Independent of the
    /// library eigensolver; used as an oracle.
    fn eigenvalues_3x3_cubic(m: &CMatrix) -> [f64; 3] {
        assert_eq!(m.nrows(), 3);
        let p1 = m[(0, 1)].norm_sqr() + m[(0, 2)].norm_sqr() + m[(1, 2)].norm_sqr();
        let q = (m[(0, 0)].re + m[(1, 1)].re + m[(2, 2)].re) / 3.0;
        if p1 == 0.0 {
            let mut d = [m[(0, 0)].re, m[(1, 1)].re, m[(2, 2)].re];
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            return d;
        }
        let p2 = (m[(0, 0)].re - q).powi(2)
            + (m[(1, 1)].re - q).powi(2)
            + (m[(2, 2)].re - q).powi(2)
            + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let mut b = m.clone();
        for i in 0..3 {
            b[(i, i)] -= C64::new(q, 0.0);
        }
        b = b.scale(1.0 / p);
        let det = b[(0, 0)] * (b[(1, 1)] * b[(2, 2)] - b[(1, 2)] * b[(2, 1)])
            - b[(0, 1)] * (b[(1, 0)] * b[(2, 2)] - b[(1, 2)] * b[(2, 0)])
            + b[(0, 2)] * (b[(1, 0)] * b[(2, 1)] - b[(1, 1)] * b[(2, 0)]);
        let r = (det.re / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e_hi = q + 2.0 * p * phi.cos();
        let e_lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let e_mid = 3.0 * q - e_hi - e_lo;
        [e_lo, e_mid, e_hi]
    }

    #[test]
    fn shape_arithmetic() {
        let s = FactorShape::new(2, 3).unwrap();
        assert_eq!(s.dim(), 8);
        assert_eq!(s.ambient_real_dim(), 64);
        assert_eq!(s.traceless_dim(), 63);
        assert_eq!(s.factor_strides(0), (1, 2, 4));
        assert_eq!(s.factor_strides(2), (4, 2, 1));
        assert!(FactorShape::new(2, 9).is_err());
        assert!(FactorShape::new(1, 2).is_err());
        assert!(FactorShape::new(4, 4).unwrap().dim() == 256);
        assert!(FactorShape::new(5, 4).is_err());
    }

    #[test]
    fn pauli_inner_products() {
        let x = pauli_x();
        let y = pauli_y();
        let z = pauli_z();
        assert_relative_eq!(x.hs_inner(&x), 2.0, epsilon = 1e-14);
        assert_relative_eq!(y.hs_inner(&y), 2.0, epsilon = 1e-14);
        assert!(x.hs_inner(&y).abs() < 1e-14);
        assert!(x.hs_inner(&z).abs() < 1e-14);
        assert_relative_eq!(z.trace_norm(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(z.operator_norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(x.operator_norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tensor_concatenates_shapes_and_multiplies_norms() {
        let x = pauli_x();
        let z = pauli_z();
        let xz = x.tensor(&z).unwrap();
        assert_eq!(xz.shape(), FactorShape::new(2, 2).unwrap());
        assert_relative_eq!(xz.hs_norm(), x.hs_norm() * z.hs_norm(), epsilon = 1e-12);
        let eigs = xz.eigenvalues();
        assert_relative_eq!(eigs[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(eigs[3], 1.0, epsilon = 1e-12);
        assert!(xz.trace().abs() < 1e-14);
    }

    #[test]
    fn hermitian_part_projects() {
        let shape = FactorShape::qudit(3).unwrap();
        let mut rng = SeededStream::new(7).rng();
        let g = sampling::complex_ginibre(3, &mut rng);
        let h = hermitian_part(shape, &g).unwrap();
        let m = h.matrix();
        for i in 0..3 {
            for j in 0..3 {
                let diff = m[(i, j)] - m[(j, i)].conj();
                assert!(diff.norm() < 1e-15);
            }
        }
        // Idempotent on Hermitian input.
        let h2 = hermitian_part(shape, h.matrix()).unwrap();
        assert!((&h2 - &h).hs_norm() < 1e-15);
    }

    #[test]
    fn trace_norm_matches_cubic_oracle() {
        let shape = FactorShape::qudit(3).unwrap();
        let stream = SeededStream::new(11);
        for k in 0..50 {
            let mut rng = stream.substream(k).rng();
            let a = sampling::sample_gaussian_hermitian(shape, false, &mut rng);
            let oracle = eigenvalues_3x3_cubic(a.matrix());
            let got = a.eigenvalues();
            for (g, o) in got.iter().zip(oracle.iter()) {
                assert!((g - o).abs() < 1e-10, "eigenvalue mismatch: {g} vs {o}");
            }
            let tn_oracle: f64 = oracle.iter().map(|l| l.abs()).sum();
            assert!((a.trace_norm() - tn_oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn eigh_residual_contract() {
        for (d, seed) in [(2usize, 1u64), (3, 2), (4, 3), (8, 4), (16, 5)] {
            let shape = FactorShape::qudit(d).unwrap();
            let mut rng = SeededStream::new(seed).rng();
            let a = sampling::sample_gaussian_hermitian(shape, false, &mut rng);
            let (vals, vecs) = a.eigh();
            let bound = 1e-9 * a.operator_norm();
            for (k, &lam) in vals.iter().enumerate() {
                let v = vecs.column(k).clone_owned();
                let residual = (a.matrix() * &v - v.scale(lam)).norm();
                assert!(
                    residual <= bound,
                    "d={d}: residual {residual:.3e} exceeds {bound:.3e}"
                );
            }
        }
    }

    #[test]
    fn traceless_projection_global() {
        let shape = FactorShape::new(2, 2).unwrap();
        let stream = SeededStream::new(13);
        let mut rng = stream.rng();
        let a = sampling::sample_gaussian_hermitian(shape, false, &mut rng);
        let t = a.traceless_project(false);
        assert!(t.trace().abs() < 1e-12);
        // Projection is orthogonal: subtracting it leaves the identity component.
        let diff = &a - &t;
        let id = HermitianOp::identity(shape);
        let coeff = a.trace() / 4.0;
        assert!((&diff - &id.scale(coeff)).hs_norm() < 1e-12);
    }

    #[test]
    fn traceless_projection_per_factor() {
        let x = pauli_x();
        let z = pauli_z();
        let id = HermitianOp::identity(FactorShape::qudit(2).unwrap());
        // a = x⊗id + id⊗z + id⊗id + x⊗z; only the bilateral term survives.
        let a = &(&x.tensor(&id).unwrap() + &id.tensor(&z).unwrap())
            + &(&id.tensor(&id).unwrap() + &x.tensor(&z).unwrap());
        let proj = a.traceless_project(true);
        let expected = x.tensor(&z).unwrap();
        assert!((&proj - &expected).hs_norm() < 1e-12);
        // Idempotent.
        let again = proj.traceless_project(true);
        assert!((&again - &proj).hs_norm() < 1e-12);
        // Global projection only removes id⊗id.
        let glob = a.traceless_project(false);
        let expected_glob = &(&x.tensor(&id).unwrap() + &id.tensor(&z).unwrap())
            + &x.tensor(&z).unwrap();
        assert!((&glob - &expected_glob).hs_norm() < 1e-12);
    }

    #[test]
    fn product_vector_projector() {
        let shape = FactorShape::new(2, 2).unwrap();
        let mut rng = SeededStream::new(17).rng();
        let p = sampling::sample_pure_product(shape, &mut rng);
        let proj = p.projector();
        assert_relative_eq!(proj.trace(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(proj.hs_norm(), 1.0, epsilon = 1e-12);
        // Projector squares to itself: operator norm 1, trace norm 1.
        assert_relative_eq!(proj.operator_norm(), 1.0, epsilon = 1e-10);
        assert_relative_eq!(proj.trace_norm(), 1.0, epsilon = 1e-9);
        let rho = DensityMatrix::new(proj).unwrap();
        assert_relative_eq!(rho.purity(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn density_matrix_rejects_bad_inputs() {
        let shape = FactorShape::qudit(2).unwrap();
        let z = pauli_z();
        assert!(DensityMatrix::new(z.clone()).is_err()); // trace 0
        let half = &HermitianOp::maximally_mixed(shape) + &z.scale(0.75);
        assert!(DensityMatrix::new(half).is_err()); // eigenvalue -0.25
        let ok = &HermitianOp::maximally_mixed(shape) + &z.scale(0.25);
        assert!(DensityMatrix::new(ok).is_ok());
    }

    #[test]
    fn expectation_matches_inner_product_with_projector() {
        let shape = FactorShape::new(2, 2).unwrap();
        let mut rng = SeededStream::new(23).rng();
        let a = sampling::sample_gaussian_hermitian(shape, false, &mut rng);
        let p = sampling::sample_pure_product(shape, &mut rng);
        let via_projector = a.hs_inner(&p.projector());
        let via_quadratic = a.expectation(&p.vector());
        assert_relative_eq!(via_projector, via_quadratic, epsilon = 1e-10);
    }
}
