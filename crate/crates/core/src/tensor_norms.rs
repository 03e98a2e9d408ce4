//! Injective-norm machinery for projective tensor products of Euclidean
//! balls: alternating maximization, the random-slice inradius certificate,
//! width subadditivity for tensor products, and the net-based width bound
//! for tensor powers of a ball.

use crate::error::{Error, Result};
use crate::operators::{CVector, C64};
use crate::sampling::{self, SeededStream, StreamRng};
use crate::widths::gamma_n;
use serde::{Deserialize, Serialize};

/// Scalar field of a generalized matrix: real entries restrict the
/// maximization to real unit vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldMarker {
    Real,
    Complex,
}

const MAX_ENTRIES: usize = 1 << 21;

/// An order-`m` array `a_{i_1 … i_m}` with every index ranging over a common
/// local dimension `D`, stored in row-major mixed radix. The coefficient
/// array of an element of the `m`-fold tensor product of `C^D` (or `R^D`).
#[derive(Clone, Debug)]
pub struct GeneralizedMatrix {
    local_dim: usize,
    order: usize,
    field: FieldMarker,
    entries: Vec<C64>,
}

impl GeneralizedMatrix {
    pub fn new_complex(local_dim: usize, order: usize, entries: Vec<C64>) -> Result<Self> {
        Self::validated(local_dim, order, FieldMarker::Complex, entries)
    }

    pub fn new_real(local_dim: usize, order: usize, entries: Vec<f64>) -> Result<Self> {
        let entries = entries.into_iter().map(|x| C64::new(x, 0.0)).collect();
        Self::validated(local_dim, order, FieldMarker::Real, entries)
    }

    fn validated(
        local_dim: usize,
        order: usize,
        field: FieldMarker,
        entries: Vec<C64>,
    ) -> Result<Self> {
        if local_dim < 2 || order < 1 {
            return Err(Error::DegenerateShape {
                local_dim,
                factors: order,
            });
        }
        let len = local_dim
            .checked_pow(order as u32)
            .filter(|l| *l <= MAX_ENTRIES)
            .ok_or(Error::ShapeTooLarge {
                local_dim,
                factors: order,
                total: usize::MAX,
                max: MAX_ENTRIES,
            })?;
        if entries.len() != len {
            return Err(Error::InvalidOperator(format!(
                "expected {len} entries, got {}",
                entries.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidOperator("non-finite entry".into()));
        }
        Ok(GeneralizedMatrix {
            local_dim,
            order,
            field,
            entries,
        })
    }

    /// Entries i.i.d. standard Gaussian for the field's real inner product:
    /// `N(0,1)` real entries, or `N(0,1) + i N(0,1)` complex ones.
    pub fn random_gaussian(
        local_dim: usize,
        order: usize,
        field: FieldMarker,
        rng: &mut StreamRng,
    ) -> Result<Self> {
        use rand::Rng;
        use rand_distr::StandardNormal;
        let len = local_dim
            .checked_pow(order as u32)
            .filter(|l| *l <= MAX_ENTRIES)
            .ok_or(Error::ShapeTooLarge {
                local_dim,
                factors: order,
                total: usize::MAX,
                max: MAX_ENTRIES,
            })?;
        let entries = (0..len)
            .map(|_| match field {
                FieldMarker::Real => C64::new(rng.sample(StandardNormal), 0.0),
                FieldMarker::Complex => {
                    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                }
            })
            .collect();
        Self::validated(local_dim, order, field, entries)
    }

    /// Random Gaussian entries rescaled to unit Hilbert-Schmidt norm.
    pub fn random_unit(
        local_dim: usize,
        order: usize,
        field: FieldMarker,
        rng: &mut StreamRng,
    ) -> Result<Self> {
        let mut a = Self::random_gaussian(local_dim, order, field, rng)?;
        let norm = a.norm2();
        for z in &mut a.entries {
            *z /= norm;
        }
        Ok(a)
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn field(&self) -> FieldMarker {
        self.field
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    /// Hilbert-Schmidt norm `(Σ |a|²)^{1/2}`.
    pub fn norm2(&self) -> f64 {
        self.entries
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Contract the first index with `x` (no conjugation; the pairing is
    /// multilinear).
    fn contract_front(arr: &[C64], x: &CVector) -> Vec<C64> {
        let d = x.len();
        let rest = arr.len() / d;
        let mut out = vec![C64::new(0.0, 0.0); rest];
        for i in 0..d {
            let base = i * rest;
            let xi = x[i];
            for r in 0..rest {
                out[r] += xi * arr[base + r];
            }
        }
        out
    }

    /// Contract the last index with `x`.
    fn contract_back(arr: &[C64], x: &CVector) -> Vec<C64> {
        let d = x.len();
        let rest = arr.len() / d;
        let mut out = vec![C64::new(0.0, 0.0); rest];
        for (p, slot) in out.iter_mut().enumerate() {
            let base = p * d;
            let mut s = C64::new(0.0, 0.0);
            for q in 0..d {
                s += arr[base + q] * x[q];
            }
            *slot = s;
        }
        out
    }

    /// Full multilinear evaluation `Σ a x¹ … x^m`.
    pub fn contract_all(&self, xs: &[CVector]) -> C64 {
        assert_eq!(xs.len(), self.order);
        let mut arr = self.entries.clone();
        for x in xs {
            arr = Self::contract_front(&arr, x);
        }
        arr[0]
    }

    /// Contract every factor except `j`, leaving a length-`D` vector.
    fn contract_except(&self, xs: &[CVector], j: usize) -> Vec<C64> {
        let mut arr = self.entries.clone();
        for x in xs.iter().take(j) {
            arr = Self::contract_front(&arr, x);
        }
        for x in xs.iter().skip(j + 1).rev() {
            arr = Self::contract_back(&arr, x);
        }
        arr
    }

    /// Slice values `Y_k = Σ_{i_1…i_{m-1}} a_{i_1…i_{m-1} k} x¹ … x^{m-1}`
    /// for `m-1` witness vectors, leaving the last index free.
    pub fn slice_values(&self, witnesses: &[CVector]) -> Vec<C64> {
        assert_eq!(witnesses.len(), self.order - 1);
        let mut arr = self.entries.clone();
        for x in witnesses {
            arr = Self::contract_front(&arr, x);
        }
        arr
    }
}

fn sample_field_vector(d: usize, field: FieldMarker, rng: &mut StreamRng) -> CVector {
    match field {
        FieldMarker::Complex => sampling::sample_haar_vector(d, rng),
        FieldMarker::Real => {
            let x = sampling::sample_sphere(d, rng);
            CVector::from_fn(d, |i, _| C64::new(x[i], 0.0))
        }
    }
}

fn normalize_step(c: &[C64]) -> (f64, CVector) {
    let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm <= 1e-300 {
        let mut e = CVector::zeros(c.len());
        e[0] = C64::new(1.0, 0.0);
        return (0.0, e);
    }
    // Maximizer of |Σ c_i x_i| over the unit sphere is conj(c)/‖c‖ (equal to
    // c/‖c‖ in the real case), attaining ‖c‖.
    (norm, CVector::from_fn(c.len(), |i, _| c[i].conj() / norm))
}

pub(crate) fn alternating_injective(
    a: &GeneralizedMatrix,
    mut xs: Vec<CVector>,
    n_sweeps: usize,
    tol: f64,
) -> f64 {
    let mut value = 0.0f64;
    for _ in 0..n_sweeps {
        let before = value;
        for j in 0..a.order() {
            let c = a.contract_except(&xs, j);
            let (norm, x) = normalize_step(&c);
            xs[j] = x;
            value = norm;
        }
        if value - before <= tol {
            break;
        }
    }
    value
}

/// Lower bound on the injective norm
/// `max |Σ a x¹…x^m|` over unit vectors in the matrix's field:
/// exact for order 1 (the Euclidean norm) and order 2 (the top singular
/// value); alternating maximization with seeded restarts otherwise.
/// Restart `i` draws from `stream.substream(i)`, so the value is monotone
/// nondecreasing in `n_starts`.
pub fn injective_norm(
    a: &GeneralizedMatrix,
    n_starts: usize,
    n_sweeps: usize,
    stream: SeededStream,
) -> f64 {
    match a.order() {
        1 => a.norm2(),
        2 => top_singular_value(a),
        _ => {
            let mut best = 0.0f64;
            for i in 0..n_starts.max(1) {
                let mut rng = stream.substream(i as u64).rng();
                let xs: Vec<CVector> = (0..a.order())
                    .map(|_| sample_field_vector(a.local_dim(), a.field(), &mut rng))
                    .collect();
                best = best.max(alternating_injective(a, xs, n_sweeps, 1e-12));
            }
            best
        }
    }
}

fn top_singular_value(a: &GeneralizedMatrix) -> f64 {
    let d = a.local_dim();
    let m = crate::operators::CMatrix::from_fn(d, d, |i, j| a.entries()[i * d + j]);
    let svd = m.svd(false, false);
    svd.singular_values.iter().fold(0.0f64, |acc, s| acc.max(*s))
}

/// A feasible-point certificate for the inradius of the projective tensor
/// ball: witnesses plug into the injective norm, so the certified bound
/// never exceeds it.
#[derive(Clone, Debug)]
pub struct SliceCertificate {
    pub local_dim: usize,
    pub order: usize,
    /// The `m-1` unit witness vectors.
    pub witnesses: Vec<CVector>,
    /// Slice values `Y_k` computed from the witnesses.
    pub slice_values: Vec<C64>,
    /// Certified lower bound `(Σ |Y_k|²)^{1/2}` on the injective norm.
    pub bound: f64,
    /// `‖A‖₂² / D^{m-1}`, the exact mean of `Σ|Y_k|²` under uniform
    /// sphere witnesses.
    pub target_mass: f64,
    /// Sample mean of `Σ|Y_k|²` over the first `n_trials` draws.
    pub mean_mass: f64,
    pub std_error_mass: f64,
    pub trials_used: usize,
    /// Whether the retry loop reached `(1-slack)·target_mass`.
    pub reached_target: bool,
}

impl SliceCertificate {
    /// Recompute the bound from the stored witnesses; bit-identical to the
    /// stored value because it reruns the same contraction.
    pub fn recompute_bound(&self, a: &GeneralizedMatrix) -> f64 {
        let y = a.slice_values(&self.witnesses);
        y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Default relative slack for the slice retry loop.
pub const SLICE_SLACK_DEFAULT: f64 = 0.05;
/// Trial cap for the retry loop.
pub const SLICE_TRIAL_CAP: usize = 100_000;

/// Randomized inradius certificate: draw `m-1` uniform sphere witnesses,
/// keep the draw with the largest slice mass `Σ|Y_k|²`. The mean of the mass
/// is exactly `‖A‖₂²/D^{m-1}`, so draws at or above the mean exist; the loop
/// keeps sampling past `n_trials` until the best mass reaches
/// `(1-slack)·mean`, up to [`SLICE_TRIAL_CAP`] trials.
pub fn slice_lower_bound(
    a: &GeneralizedMatrix,
    n_trials: usize,
    stream: SeededStream,
) -> Result<SliceCertificate> {
    slice_lower_bound_with_slack(a, n_trials, stream, SLICE_SLACK_DEFAULT)
}

/// [`slice_lower_bound`] with an explicit slack; `slack = 0` insists on the
/// full mean-value target `‖A‖₂²/D^{m-1}`.
pub fn slice_lower_bound_with_slack(
    a: &GeneralizedMatrix,
    n_trials: usize,
    stream: SeededStream,
    slack: f64,
) -> Result<SliceCertificate> {
    if a.order() < 2 {
        return Err(Error::InvalidParameter {
            name: "order",
            value: a.order() as f64,
            constraint: "order >= 2 for slice certificates",
        });
    }
    if !(0.0..1.0).contains(&slack) {
        return Err(Error::InvalidParameter {
            name: "slack",
            value: slack,
            constraint: "0 <= slack < 1",
        });
    }
    if n_trials == 0 {
        return Err(Error::InvalidParameter {
            name: "n_trials",
            value: 0.0,
            constraint: "n_trials >= 1",
        });
    }
    let d = a.local_dim();
    let m = a.order();
    let norm2_sq = a.norm2().powi(2);
    let target_mass = norm2_sq / (d as f64).powi(m as i32 - 1);
    let threshold = (1.0 - slack) * target_mass;

    let mut best_mass = -1.0f64;
    let mut best_witnesses: Vec<CVector> = Vec::new();
    let mut masses = Vec::with_capacity(n_trials);
    let mut trials_used = 0usize;

    for t in 0..SLICE_TRIAL_CAP {
        let mut rng = stream.substream(t as u64).rng();
        let witnesses: Vec<CVector> = (0..m - 1)
            .map(|_| sample_field_vector(d, a.field(), &mut rng))
            .collect();
        let y = a.slice_values(&witnesses);
        let mass: f64 = y.iter().map(|z| z.norm_sqr()).sum();
        if t < n_trials {
            masses.push(mass);
        }
        if mass > best_mass {
            best_mass = mass;
            best_witnesses = witnesses;
        }
        trials_used = t + 1;
        if trials_used >= n_trials && best_mass >= threshold {
            break;
        }
    }

    let (mean_mass, _, std_error_mass) = sampling::moments(&masses);
    let slice_values = a.slice_values(&best_witnesses);
    let bound = slice_values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ok(SliceCertificate {
        local_dim: d,
        order: m,
        witnesses: best_witnesses,
        slice_values,
        bound,
        target_mass,
        mean_mass,
        std_error_mass,
        trials_used,
        reached_target: best_mass >= threshold,
    })
}

/// Width subadditivity for the projective tensor product of two bodies, one
/// of them spanned by points of the unit sphere:
/// `w_G(K ⊗̂ K') <= w_G(K) + w_G(K')`.
pub fn chevet_gordon_bound(wg_k: f64, wg_kp: f64) -> f64 {
    wg_k + wg_kp
}

/// Spherical-width corollary of [`chevet_gordon_bound`] in the product
/// ambient dimension.
pub fn chevet_gordon_spherical(wg_k: f64, wg_kp: f64, product_dim: usize) -> Result<f64> {
    Ok(chevet_gordon_bound(wg_k, wg_kp) / gamma_n(product_dim)?)
}

/// Which route produced a tensor-power width bound.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub enum BoundRoute {
    /// Net-polytope bound at the recorded `delta`.
    Net { delta: f64 },
    /// Subadditive split into two smaller tensor powers.
    Split { left: usize, right: usize },
}

/// Upper bound on the Gaussian and spherical mean widths of the `m`-fold
/// projective tensor power of a Euclidean ball.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TensorPowerBound {
    pub local_dim: usize,
    pub order: usize,
    pub field: FieldMarker,
    /// Real dimension of the ambient space of the tensor power.
    pub ambient_real_dim: usize,
    pub gaussian_bound: f64,
    /// `gaussian_bound / γ_ambient`: an upper bound on both the spherical
    /// mean width and (through the Urysohn inequality) the volume radius.
    pub spherical_bound: f64,
    pub route: BoundRoute,
}

fn per_factor_net_cardinality(local_dim: usize, field: FieldMarker, delta: f64) -> f64 {
    match field {
        FieldMarker::Real if local_dim == 3 => 16.0 / (delta * delta),
        FieldMarker::Real => (1.0 + 2.0 / delta).powi(local_dim as i32),
        FieldMarker::Complex => (1.0 + 2.0 / delta).powi(2 * local_dim as i32),
    }
}

/// Gaussian width of a polytope whose vertex pairs are products of
/// per-factor net points, inflated by the net-hull shrinkage `(1-δ²/2)^m`,
/// minimized over `δ ∈ (0, √2)` on a fine grid.
fn net_route(local_dim: usize, order: usize, field: FieldMarker) -> (f64, f64) {
    let m = order as f64;
    let steps = 20_000usize;
    let mut best = (f64::INFINITY, 0.0f64);
    for i in 1..steps {
        let delta = std::f64::consts::SQRT_2 * i as f64 / steps as f64;
        let shrink = 1.0 - delta * delta / 2.0;
        if shrink <= 0.0 {
            break;
        }
        let v1 = per_factor_net_cardinality(local_dim, field, delta);
        if v1 <= 1.0 {
            continue;
        }
        let value = (2.0 * m * v1.ln()).sqrt() / shrink.powi(order as i32);
        if value < best.0 {
            best = (value, delta);
        }
    }
    best
}

/// Width bound for `(B₂^D)^⊗̂m`: the minimum of the net-polytope route and
/// every subadditive split into smaller powers (single factors contribute
/// their exact ball width).
pub fn vrad_tensor_power_bound(
    local_dim: usize,
    order: usize,
    field: FieldMarker,
) -> Result<TensorPowerBound> {
    if local_dim < 2 || order < 2 {
        return Err(Error::InvalidParameter {
            name: "order",
            value: order as f64,
            constraint: "local_dim >= 2 and order >= 2",
        });
    }
    let factor_real_dim = match field {
        FieldMarker::Real => local_dim,
        FieldMarker::Complex => 2 * local_dim,
    };
    let total = local_dim
        .checked_pow(order as u32)
        .filter(|t| *t <= MAX_ENTRIES)
        .ok_or(Error::ShapeTooLarge {
            local_dim,
            factors: order,
            total: usize::MAX,
            max: MAX_ENTRIES,
        })?;
    let ambient_real_dim = match field {
        FieldMarker::Real => total,
        FieldMarker::Complex => 2 * total,
    };

    let mut table: Vec<(f64, BoundRoute)> = Vec::with_capacity(order + 1);
    table.push((0.0, BoundRoute::Net { delta: 0.0 }));
    table.push((
        gamma_n(factor_real_dim)?,
        BoundRoute::Net { delta: 0.0 },
    ));
    for m in 2..=order {
        let (net_value, delta) = net_route(local_dim, m, field);
        let mut best = (net_value, BoundRoute::Net { delta });
        for k in 1..m {
            let cand = table[k].0 + table[m - k].0;
            if cand < best.0 {
                best = (cand, BoundRoute::Split { left: k, right: m - k });
            }
        }
        table.push(best);
    }
    let (gaussian_bound, route) = table[order];
    Ok(TensorPowerBound {
        local_dim,
        order,
        field,
        ambient_real_dim,
        gaussian_bound,
        spherical_bound: gaussian_bound / gamma_n(ambient_real_dim)?,
        route,
    })
}

/// Certified Hilbert-Schmidt inradius of the symmetrized separable body
/// about the origin.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SigmaInradius {
    pub local_dim: usize,
    pub factors: usize,
    /// `(3/2) · 6^{-N/2} · D^{-(2N-1)/2}`.
    pub radius: f64,
    /// The same value written through the total dimension:
    /// `(3/2) · 6^{-N/2} / d^{1 - 1/(2N)}`.
    pub radius_via_total_dim: f64,
    /// Upper bound `(2/3) · 6^{N/2}` on the geometric distance between the
    /// trace-norm ball and the symmetrized separable body (qubit factors).
    pub qubit_distance_bound: f64,
}

/// Inradius certificate for the symmetrized separable body: combining the
/// slice inclusion of the product-operator hull with the geometric-distance
/// bound yields
/// `Σ ⊇ (3/2) 6^{-N/2} D^{-(2N-1)/2} · B_HS`.
pub fn inradius_inclusion_sigma(shape: crate::operators::FactorShape) -> SigmaInradius {
    let dd = shape.local_dim() as f64;
    let nn = shape.factors() as f64;
    let d = shape.dim() as f64;
    let radius = 1.5 * 6.0f64.powf(-nn / 2.0) * dd.powf(-(2.0 * nn - 1.0) / 2.0);
    let radius_via_total_dim = 1.5 * 6.0f64.powf(-nn / 2.0) / d.powf(1.0 - 1.0 / (2.0 * nn));
    SigmaInradius {
        local_dim: shape.local_dim(),
        factors: shape.factors(),
        radius,
        radius_via_total_dim,
        qubit_distance_bound: (2.0 / 3.0) * 6.0f64.powf(nn / 2.0),
    }
}
