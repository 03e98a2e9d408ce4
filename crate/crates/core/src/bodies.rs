//! Support-function oracles for the convex bodies under study.
//!
//! A body is exposed through [`BodyOracle`]: a support function
//! `h(u) = sup { <x, u> : x in K }` over probes `u` in the body's ambient
//! real inner-product space, together with a [`Exactness`] flag. Bodies whose
//! support requires maximizing over product vectors (the separable
//! symmetrization and the product-operator hull) only certify lower bounds:
//! their value is always attained by a feasible point, never above the truth.
//!
//! The bodies centered inside the trace-one hyperplane (the density-matrix
//! set and its partial-transpose image) are probed in the traceless
//! hyperplane about the center `Id/d`; the symmetrized bodies live in the
//! full Hermitian space about the origin.

use crate::error::{Error, Result};
use crate::operators::{CMatrix, CVector, FactorShape, HermitianOp, C64};
use crate::sampling::{self, SeededStream, StreamRng};
use nalgebra::DVector;
use rand_distr::StandardNormal;
use rand::Rng;

/// Whether a support oracle returns the exact value or a certified lower bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Exactness {
    Exact,
    LowerBound,
}

/// A convex body described by its support function.
pub trait BodyOracle: Sync {
    /// Probe type: an element of the ambient real inner-product space.
    type Probe;

    fn name(&self) -> &str;

    /// Real dimension of the ambient subspace the body spans.
    fn ambient_dim(&self) -> usize;

    fn exactness(&self) -> Exactness;

    /// Support value `h(u)`; for `LowerBound` oracles a value attained by a
    /// feasible point of the body.
    fn support(&self, probe: &Self::Probe) -> f64;

    /// Standard Gaussian probe in the ambient subspace.
    fn sample_probe(&self, rng: &mut StreamRng) -> Self::Probe;
}

// ---------------------------------------------------------------------------
// Density-matrix set, probed about its center Id/d.
// ---------------------------------------------------------------------------

/// The set of density matrices, centered at `Id/d` inside the trace-one
/// hyperplane. Probes are traceless; for robustness the support subtracts the
/// trace component explicitly, so `h(u) = λ_max(u) - tr(u)/d`.
#[derive(Clone, Debug)]
pub struct StateBody {
    shape: FactorShape,
}

impl StateBody {
    pub fn new(shape: FactorShape) -> Self {
        StateBody { shape }
    }

    pub fn shape(&self) -> FactorShape {
        self.shape
    }
}

impl BodyOracle for StateBody {
    type Probe = HermitianOp;

    fn name(&self) -> &str {
        "density-set"
    }

    fn ambient_dim(&self) -> usize {
        self.shape.traceless_dim()
    }

    fn exactness(&self) -> Exactness {
        Exactness::Exact
    }

    fn support(&self, probe: &HermitianOp) -> f64 {
        probe.lambda_max() - probe.trace() / self.shape.dim() as f64
    }

    fn sample_probe(&self, rng: &mut StreamRng) -> HermitianOp {
        sampling::sample_gaussian_hermitian(self.shape, true, rng)
    }
}

// ---------------------------------------------------------------------------
// Trace-norm unit ball (symmetrization of the density-matrix set).
// ---------------------------------------------------------------------------

/// The trace-norm unit ball; its support function is the operator norm.
#[derive(Clone, Debug)]
pub struct TraceBall {
    shape: FactorShape,
}

impl TraceBall {
    pub fn new(shape: FactorShape) -> Self {
        TraceBall { shape }
    }
}

impl BodyOracle for TraceBall {
    type Probe = HermitianOp;

    fn name(&self) -> &str {
        "trace-ball"
    }

    fn ambient_dim(&self) -> usize {
        self.shape.ambient_real_dim()
    }

    fn exactness(&self) -> Exactness {
        Exactness::Exact
    }

    fn support(&self, probe: &HermitianOp) -> f64 {
        probe.operator_norm()
    }

    fn sample_probe(&self, rng: &mut StreamRng) -> HermitianOp {
        sampling::sample_gaussian_hermitian(self.shape, false, rng)
    }
}

// ---------------------------------------------------------------------------
// Alternating maximization over product vectors.
// ---------------------------------------------------------------------------

/// Contract `<x_1 ⊗ … x̂_j … ⊗ x_N | u | x_1 ⊗ … x̂_j … ⊗ x_N>` down to the
/// effective local matrix seen by factor `j`.
fn effective_local_matrix(
    u: &CMatrix,
    shape: FactorShape,
    xs: &[CVector],
    j: usize,
) -> CMatrix {
    let (pre, local, post) = shape.factor_strides(j);
    let d = shape.dim();
    let coeff_pre = partial_products(&xs[..j]);
    let coeff_post = partial_products(&xs[j + 1..]);
    debug_assert_eq!(coeff_pre.len(), pre);
    debug_assert_eq!(coeff_post.len(), post);

    // First contract columns with the coefficient vector, then rows.
    let mut tmp = CMatrix::zeros(d, local);
    for bp in 0..local {
        for ap in 0..pre {
            for cp in 0..post {
                let col = (ap * local + bp) * post + cp;
                let w = coeff_pre[ap] * coeff_post[cp];
                if w.norm_sqr() == 0.0 {
                    continue;
                }
                for r in 0..d {
                    tmp[(r, bp)] += u[(r, col)] * w;
                }
            }
        }
    }
    let mut m = CMatrix::zeros(local, local);
    for b in 0..local {
        for a in 0..pre {
            for c in 0..post {
                let row = (a * local + b) * post + c;
                let w = (coeff_pre[a] * coeff_post[c]).conj();
                for bp in 0..local {
                    m[(b, bp)] += w * tmp[(row, bp)];
                }
            }
        }
    }
    m
}

/// All products `x_0[i_0] x_1[i_1] …` over a list of local vectors, indexed in
/// row-major mixed radix. The empty list yields `[1]`.
fn partial_products(xs: &[CVector]) -> Vec<C64> {
    let mut out = vec![C64::new(1.0, 0.0)];
    for x in xs {
        let mut next = Vec::with_capacity(out.len() * x.len());
        for v in &out {
            for b in 0..x.len() {
                next.push(v * x[b]);
            }
        }
        out = next;
    }
    out
}

/// Top eigenvector by absolute eigenvalue of a small Hermitian matrix.
fn extreme_eigenvector(m: &CMatrix) -> (f64, CVector) {
    let eig = m.clone().symmetric_eigen();
    let mut best = 0usize;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i].abs() > eig.eigenvalues[best].abs() {
            best = i;
        }
    }
    (
        eig.eigenvalues[best],
        eig.eigenvectors.column(best).clone_owned(),
    )
}

/// Initial product vector from an eigenvector `v` of the probe: each factor
/// takes the top eigenvector of the corresponding reduced matrix of `|v><v|`.
fn reduced_init(v: &CVector, shape: FactorShape) -> Vec<CVector> {
    (0..shape.factors())
        .map(|j| {
            let (pre, local, post) = shape.factor_strides(j);
            let mut r = CMatrix::zeros(local, local);
            for b in 0..local {
                for bp in 0..local {
                    let mut s = C64::new(0.0, 0.0);
                    for a in 0..pre {
                        for c in 0..post {
                            s += v[(a * local + b) * post + c]
                                * v[(a * local + bp) * post + c].conj();
                        }
                    }
                    r[(b, bp)] = s;
                }
            }
            let eig = r.symmetric_eigen();
            let mut best = 0usize;
            for i in 1..eig.eigenvalues.len() {
                if eig.eigenvalues[i] > eig.eigenvalues[best] {
                    best = i;
                }
            }
            normalize(eig.eigenvectors.column(best).clone_owned())
        })
        .collect()
}

fn normalize(v: CVector) -> CVector {
    let n = v.norm();
    if n > 1e-300 {
        v.scale(1.0 / n)
    } else {
        let mut e = CVector::zeros(v.len());
        e[0] = C64::new(1.0, 0.0);
        e
    }
}

/// One alternating-maximization run of `max |<p| u |p>|` over product vectors
/// starting from the given factors. Monotone in the absolute value: each
/// factor update jumps to the extreme-|eigenvalue| eigenvector of the
/// effective local matrix.
pub(crate) fn alternating_product_expectation(
    u: &CMatrix,
    shape: FactorShape,
    mut xs: Vec<CVector>,
    n_sweeps: usize,
    tol: f64,
) -> f64 {
    let mut value = 0.0f64;
    for _ in 0..n_sweeps {
        let before = value;
        for j in 0..shape.factors() {
            let m = effective_local_matrix(u, shape, &xs, j);
            let (lam, vec) = extreme_eigenvector(&m);
            xs[j] = normalize(vec);
            value = lam.abs();
        }
        if value - before <= tol {
            break;
        }
    }
    value
}

// ---------------------------------------------------------------------------
// Separable symmetrization.
// ---------------------------------------------------------------------------

/// Symmetrized separable states: the convex hull of the separable states and
/// their negatives. The support function is `max |<p| u |p>|` over product
/// states, computed by alternating maximization with deterministic
/// eigenvector-based starts plus seeded random restarts (a lower-bound
/// oracle for more than one factor; exact for a single factor).
pub struct SigmaBody {
    shape: FactorShape,
    n_starts: usize,
    n_sweeps: usize,
    tol: f64,
    random_starts: Vec<Vec<CVector>>,
}

/// Default number of alternating-maximization restarts.
pub const DEFAULT_N_STARTS: usize = 16;
/// Default sweep cap per restart.
pub const DEFAULT_N_SWEEPS: usize = 50;
/// Default early-stopping tolerance on the objective.
pub const DEFAULT_ALT_TOL: f64 = 1e-10;

impl SigmaBody {
    pub fn new(shape: FactorShape, stream: SeededStream) -> Self {
        Self::with_options(shape, stream, DEFAULT_N_STARTS, DEFAULT_N_SWEEPS)
    }

    /// `n_starts` counts all starts; the first two are eigenvector-derived,
    /// the rest are seeded random product vectors. Restart `i` always uses
    /// `stream.substream(i)`, so enlarging `n_starts` refines monotonically.
    pub fn with_options(
        shape: FactorShape,
        stream: SeededStream,
        n_starts: usize,
        n_sweeps: usize,
    ) -> Self {
        let n_random = n_starts.saturating_sub(2);
        let random_starts = (0..n_random)
            .map(|i| {
                let mut rng = stream.substream(2 + i as u64).rng();
                (0..shape.factors())
                    .map(|_| sampling::sample_haar_vector(shape.local_dim(), &mut rng))
                    .collect()
            })
            .collect();
        SigmaBody {
            shape,
            n_starts: n_starts.max(1),
            n_sweeps,
            tol: DEFAULT_ALT_TOL,
            random_starts,
        }
    }

    pub fn shape(&self) -> FactorShape {
        self.shape
    }

    /// The alternating lower bound regardless of factor count (used by tests
    /// to compare against the exact single-factor value).
    pub(crate) fn alternating_support(&self, probe: &HermitianOp) -> f64 {
        let u = probe.matrix();
        let mut best = 0.0f64;
        if self.n_starts >= 1 {
            let (_, vecs) = probe.eigh();
            let top = vecs.column(vecs.ncols() - 1).clone_owned();
            let init = reduced_init(&top, self.shape);
            best = best.max(alternating_product_expectation(
                u,
                self.shape,
                init,
                self.n_sweeps,
                self.tol,
            ));
            if self.n_starts >= 2 {
                let bottom = vecs.column(0).clone_owned();
                let init = reduced_init(&bottom, self.shape);
                best = best.max(alternating_product_expectation(
                    u,
                    self.shape,
                    init,
                    self.n_sweeps,
                    self.tol,
                ));
            }
        }
        for start in &self.random_starts {
            best = best.max(alternating_product_expectation(
                u,
                self.shape,
                start.clone(),
                self.n_sweeps,
                self.tol,
            ));
        }
        best
    }
}

impl BodyOracle for SigmaBody {
    type Probe = HermitianOp;

    fn name(&self) -> &str {
        "separable-symmetrization"
    }

    fn ambient_dim(&self) -> usize {
        self.shape.ambient_real_dim()
    }

    fn exactness(&self) -> Exactness {
        if self.shape.factors() == 1 {
            Exactness::Exact
        } else {
            Exactness::LowerBound
        }
    }

    fn support(&self, probe: &HermitianOp) -> f64 {
        if self.shape.factors() == 1 {
            return probe.operator_norm();
        }
        self.alternating_support(probe)
    }

    fn sample_probe(&self, rng: &mut StreamRng) -> HermitianOp {
        sampling::sample_gaussian_hermitian(self.shape, false, rng)
    }
}

// ---------------------------------------------------------------------------
// Hull of rank-one product operators.
// ---------------------------------------------------------------------------

/// The convex hull of rank-one product operators `|x><y|` with `x, y`
/// products of unit vectors, a circled body in the full (non-Hermitian)
/// operator space viewed as a real inner-product space under `Re tr(a† b)`.
/// Support is `max |<x| u |y>|` over product pairs: alternating maximization
/// where the one-factor subproblem is the top singular pair of an effective
/// `D x D` block. Exact for one factor, lower bound otherwise.
pub struct GammaBody {
    shape: FactorShape,
    n_sweeps: usize,
    tol: f64,
    random_starts: Vec<(Vec<CVector>, Vec<CVector>)>,
}

impl GammaBody {
    pub fn new(shape: FactorShape, stream: SeededStream) -> Self {
        Self::with_options(shape, stream, DEFAULT_N_STARTS, DEFAULT_N_SWEEPS)
    }

    pub fn with_options(
        shape: FactorShape,
        stream: SeededStream,
        n_starts: usize,
        n_sweeps: usize,
    ) -> Self {
        let random_starts = (0..n_starts.max(1))
            .map(|i| {
                let mut rng = stream.substream(i as u64).rng();
                let xs = (0..shape.factors())
                    .map(|_| sampling::sample_haar_vector(shape.local_dim(), &mut rng))
                    .collect();
                let ys = (0..shape.factors())
                    .map(|_| sampling::sample_haar_vector(shape.local_dim(), &mut rng))
                    .collect();
                (xs, ys)
            })
            .collect();
        GammaBody {
            shape,
            n_sweeps,
            tol: DEFAULT_ALT_TOL,
            random_starts,
        }
    }

    /// Effective `D x D` block for the joint `(x_j, y_j)` update.
    fn effective_block(&self, u: &CMatrix, xs: &[CVector], ys: &[CVector], j: usize) -> CMatrix {
        let shape = self.shape;
        let (pre, local, post) = shape.factor_strides(j);
        let d = shape.dim();
        let cx_pre = partial_products(&xs[..j]);
        let cx_post = partial_products(&xs[j + 1..]);
        let cy_pre = partial_products(&ys[..j]);
        let cy_post = partial_products(&ys[j + 1..]);
        let mut tmp = CMatrix::zeros(d, local);
        for bp in 0..local {
            for ap in 0..pre {
                for cp in 0..post {
                    let col = (ap * local + bp) * post + cp;
                    let w = cy_pre[ap] * cy_post[cp];
                    for r in 0..d {
                        tmp[(r, bp)] += u[(r, col)] * w;
                    }
                }
            }
        }
        let mut m = CMatrix::zeros(local, local);
        for b in 0..local {
            for a in 0..pre {
                for c in 0..post {
                    let row = (a * local + b) * post + c;
                    let w = (cx_pre[a] * cx_post[c]).conj();
                    for bp in 0..local {
                        m[(b, bp)] += w * tmp[(row, bp)];
                    }
                }
            }
        }
        m
    }

    pub(crate) fn alternating_support(&self, u: &CMatrix) -> f64 {
        let mut best = 0.0f64;
        for (xs0, ys0) in &self.random_starts {
            let mut xs = xs0.clone();
            let mut ys = ys0.clone();
            let mut value = 0.0f64;
            for _ in 0..self.n_sweeps {
                let before = value;
                for j in 0..self.shape.factors() {
                    let w = self.effective_block(u, &xs, &ys, j);
                    let svd = w.svd(true, true);
                    let (mut bi, mut bs) = (0usize, -1.0f64);
                    for (i, s) in svd.singular_values.iter().enumerate() {
                        if *s > bs {
                            bs = *s;
                            bi = i;
                        }
                    }
                    let us = svd.u.as_ref().expect("u requested");
                    let vt = svd.v_t.as_ref().expect("v_t requested");
                    xs[j] = normalize(us.column(bi).clone_owned());
                    ys[j] = normalize(vt.row(bi).adjoint());
                    value = bs;
                }
                if value - before <= self.tol {
                    break;
                }
            }
            best = best.max(value);
        }
        best
    }
}

impl BodyOracle for GammaBody {
    /// Probes are arbitrary complex matrices.
    type Probe = CMatrix;

    fn name(&self) -> &str {
        "product-operator-hull"
    }

    fn ambient_dim(&self) -> usize {
        2 * self.shape.ambient_real_dim()
    }

    fn exactness(&self) -> Exactness {
        if self.shape.factors() == 1 {
            Exactness::Exact
        } else {
            Exactness::LowerBound
        }
    }

    fn support(&self, probe: &CMatrix) -> f64 {
        if self.shape.factors() == 1 {
            let svd = probe.clone().svd(false, false);
            return svd
                .singular_values
                .iter()
                .fold(0.0f64, |m, s| m.max(*s));
        }
        self.alternating_support(probe)
    }

    /// Standard Gaussian for the real inner product `Re tr(a† b)`:
    /// independent `N(0,1)` real and imaginary parts per entry.
    fn sample_probe(&self, rng: &mut StreamRng) -> CMatrix {
        let d = self.shape.dim();
        CMatrix::from_fn(d, d, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }
}

// ---------------------------------------------------------------------------
// Derived bodies.
// ---------------------------------------------------------------------------

/// Image of a body under a linear isometry of the Hermitian space, described
/// by its adjoint map: `h_{T K}(u) = h_K(T* u)`.
pub struct IsometryImage<B: BodyOracle<Probe = HermitianOp>> {
    base: B,
    adjoint: Box<dyn Fn(&HermitianOp) -> HermitianOp + Send + Sync>,
    name: String,
}

impl<B: BodyOracle<Probe = HermitianOp>> IsometryImage<B> {
    /// `adjoint` must be the adjoint of the isometry with respect to the
    /// Hilbert-Schmidt inner product (equal to the map itself for
    /// self-adjoint isometries such as partial transposition).
    pub fn new(
        base: B,
        name: impl Into<String>,
        adjoint: Box<dyn Fn(&HermitianOp) -> HermitianOp + Send + Sync>,
    ) -> Self {
        IsometryImage {
            base,
            adjoint,
            name: name.into(),
        }
    }
}

impl<B: BodyOracle<Probe = HermitianOp>> BodyOracle for IsometryImage<B> {
    type Probe = HermitianOp;

    fn name(&self) -> &str {
        &self.name
    }

    fn ambient_dim(&self) -> usize {
        self.base.ambient_dim()
    }

    fn exactness(&self) -> Exactness {
        self.base.exactness()
    }

    fn support(&self, probe: &HermitianOp) -> f64 {
        self.base.support(&(self.adjoint)(probe))
    }

    fn sample_probe(&self, rng: &mut StreamRng) -> HermitianOp {
        self.base.sample_probe(rng)
    }
}

/// Minkowski difference `K - L` of two bodies sharing a probe space:
/// `h_{K-L}(u) = h_K(u) + h_L(-u)`.
pub struct MinkowskiDiff<A, B>
where
    A: BodyOracle<Probe = HermitianOp>,
    B: BodyOracle<Probe = HermitianOp>,
{
    left: A,
    right: B,
    name: String,
}

impl<A, B> MinkowskiDiff<A, B>
where
    A: BodyOracle<Probe = HermitianOp>,
    B: BodyOracle<Probe = HermitianOp>,
{
    pub fn new(left: A, right: B) -> Result<Self> {
        if left.ambient_dim() != right.ambient_dim() {
            return Err(Error::ShapeMismatch {
                left: format!("{} (dim {})", left.name(), left.ambient_dim()),
                right: format!("{} (dim {})", right.name(), right.ambient_dim()),
            });
        }
        let name = format!("{} - {}", left.name(), right.name());
        Ok(MinkowskiDiff { left, right, name })
    }
}

impl<A, B> BodyOracle for MinkowskiDiff<A, B>
where
    A: BodyOracle<Probe = HermitianOp>,
    B: BodyOracle<Probe = HermitianOp>,
{
    type Probe = HermitianOp;

    fn name(&self) -> &str {
        &self.name
    }

    fn ambient_dim(&self) -> usize {
        self.left.ambient_dim()
    }

    fn exactness(&self) -> Exactness {
        if self.left.exactness() == Exactness::Exact
            && self.right.exactness() == Exactness::Exact
        {
            Exactness::Exact
        } else {
            Exactness::LowerBound
        }
    }

    fn support(&self, probe: &HermitianOp) -> f64 {
        self.left.support(probe) + self.right.support(&-probe)
    }

    fn sample_probe(&self, rng: &mut StreamRng) -> HermitianOp {
        self.left.sample_probe(rng)
    }
}

// ---------------------------------------------------------------------------
// Plain vector-space bodies (reference objects for width estimation).
// ---------------------------------------------------------------------------

/// Euclidean unit ball in `R^dim`.
#[derive(Clone, Debug)]
pub struct EuclideanBall {
    dim: usize,
}

impl EuclideanBall {
    pub fn new(dim: usize) -> Self {
        EuclideanBall { dim }
    }
}

impl BodyOracle for EuclideanBall {
    type Probe = DVector<f64>;

    fn name(&self) -> &str {
        "euclidean-ball"
    }

    fn ambient_dim(&self) -> usize {
        self.dim
    }

    fn exactness(&self) -> Exactness {
        Exactness::Exact
    }

    fn support(&self, probe: &DVector<f64>) -> f64 {
        probe.norm()
    }

    fn sample_probe(&self, rng: &mut StreamRng) -> DVector<f64> {
        DVector::from_fn(self.dim, |_, _| rng.sample::<f64, _>(StandardNormal))
    }
}

/// Symmetric segment `conv{ -x, x }` in `R^dim`.
#[derive(Clone, Debug)]
pub struct Segment {
    direction: DVector<f64>,
}

impl Segment {
    pub fn new(direction: DVector<f64>) -> Self {
        Segment { direction }
    }
}

impl BodyOracle for Segment {
    type Probe = DVector<f64>;

    fn name(&self) -> &str {
        "segment"
    }

    fn ambient_dim(&self) -> usize {
        self.direction.len()
    }

    fn exactness(&self) -> Exactness {
        Exactness::Exact
    }

    fn support(&self, probe: &DVector<f64>) -> f64 {
        self.direction.dot(probe).abs()
    }

    fn sample_probe(&self, rng: &mut StreamRng) -> DVector<f64> {
        DVector::from_fn(self.direction.len(), |_, _| {
            rng.sample::<f64, _>(StandardNormal)
        })
    }
}

/// Symmetric polytope `conv{ ±v_1, …, ±v_k }` in `R^dim`.
#[derive(Clone, Debug)]
pub struct SymmetricPolytope {
    vertices: Vec<DVector<f64>>,
    dim: usize,
}

impl SymmetricPolytope {
    pub fn new(vertices: Vec<DVector<f64>>) -> Result<Self> {
        let dim = vertices
            .first()
            .map(|v| v.len())
            .ok_or(Error::InvalidParameter {
                name: "vertices",
                value: 0.0,
                constraint: "at least one vertex",
            })?;
        if vertices.iter().any(|v| v.len() != dim) {
            return Err(Error::InvalidOperator(
                "polytope vertices of mixed dimension".into(),
            ));
        }
        Ok(SymmetricPolytope { vertices, dim })
    }

    pub fn n_vertex_pairs(&self) -> usize {
        self.vertices.len()
    }
}

impl BodyOracle for SymmetricPolytope {
    type Probe = DVector<f64>;

    fn name(&self) -> &str {
        "symmetric-polytope"
    }

    fn ambient_dim(&self) -> usize {
        self.dim
    }

    fn exactness(&self) -> Exactness {
        Exactness::Exact
    }

    fn support(&self, probe: &DVector<f64>) -> f64 {
        self.vertices
            .iter()
            .map(|v| v.dot(probe).abs())
            .fold(0.0, f64::max)
    }

    fn sample_probe(&self, rng: &mut StreamRng) -> DVector<f64> {
        DVector::from_fn(self.dim, |_, _| rng.sample::<f64, _>(StandardNormal))
    }
}
