//! Sphere nets, the rank-one polytopes they span, and the net-based width
//! bound for the symmetrized separable body.
//!
//! Nets are built by greedy random packing: candidate points drawn uniformly
//! from the sphere are inserted when no existing point lies within `delta`.
//! A maximal `delta`-packing is automatically a `delta`-net, and maximality
//! is enforced empirically: after the rejection budget is exhausted, probe
//! rounds insert any sphere point found outside the covering radius, and a
//! final fresh-probe validation must confirm the radius before a net is
//! returned. When saturating a packing would be too slow (small `delta` in
//! higher dimension), an oversampled i.i.d. covering replaces the greedy
//! phase; the probe rounds and validation are unchanged. Construction is
//! sequential; validation parallelizes.

use crate::ellipsoids::alpha_d;
use crate::error::{Error, Result};
use crate::operators::{CVector, FactorShape, HermitianOp, ProductVector, C64};
use crate::sampling::{self, SeededStream, StreamRng};
use crate::widths::gamma_n;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read as _, Write as _};

/// Largest admissible `delta` for the rank-one polytope sandwich,
/// `√(2-√2)`: beyond it the sandwich constant `1-2δ²+δ⁴/2` is not positive.
pub const SANDWICH_DELTA_MAX: f64 = 0.7653668647301795;

const COVERING_PROBES: usize = 10_000;
const REPAIR_ROUNDS_MAX: usize = 64;
const REJECTION_BUDGET: usize = 100_000;
const MAX_DENSE_CELLS: usize = 1 << 22;
const MAX_NET_DIM: usize = 64;
const MAX_NET_POINTS: usize = 1 << 22;
const VALIDATION_SUBSTREAM: u64 = 0xC0FE;
const VALIDATION_ATTEMPTS: u64 = 16;
/// Greedy saturation cost scales like (covering number) · 3^dim per attempt;
/// past this the oversampled random covering takes over.
const GREEDY_COST_CAP: f64 = 150_000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NetConstruction {
    /// Greedy random packing saturated by rejection budget; points are also
    /// pairwise at least `delta` apart.
    GreedyRandom,
    /// Oversampled i.i.d. covering; no packing separation is claimed.
    RandomCovering,
    /// Externally supplied point set (including nets loaded from disk).
    Explicit,
}

/// A finite subset of the unit sphere of `R^{dim_real}` with validated
/// covering radius at most `delta` (chordal metric).
#[derive(Clone, Debug)]
pub struct SphereNet {
    dim_real: usize,
    delta: f64,
    points: Vec<DVector<f64>>,
    construction: NetConstruction,
    covering_radius_estimate: f64,
}

/// Point store with an optional dense cell grid over `[-1,1]^dim` for
/// nearest-neighbor queries; falls back to linear scans when the grid would
/// not fit. Cells have side `delta`, so any point within chord `delta` of a
/// query lives in one of the `3^dim` adjacent cells.
struct Packing {
    dim: usize,
    delta: f64,
    flat: Vec<f64>,
    count: usize,
    grid: Option<Grid>,
}

struct Grid {
    per_axis: usize,
    cells: Vec<Vec<u32>>,
}

impl Packing {
    fn new(dim: usize, delta: f64, max_dense_cells: usize) -> Packing {
        let per_axis = (2.0 / delta).ceil() as usize;
        let total = per_axis.checked_pow(dim as u32);
        let grid = match total {
            Some(t) if t <= max_dense_cells => Some(Grid {
                per_axis,
                cells: vec![Vec::new(); t],
            }),
            _ => None,
        };
        Packing {
            dim,
            delta,
            flat: Vec::new(),
            count: 0,
            grid,
        }
    }

    fn cell_of(&self, x: &[f64]) -> usize {
        let g = self.grid.as_ref().expect("grid");
        let mut idx = 0usize;
        for &c in x {
            let k = (((c + 1.0) / self.delta) as isize)
                .clamp(0, g.per_axis as isize - 1) as usize;
            idx = idx * g.per_axis + k;
        }
        idx
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.flat[i * self.dim..(i + 1) * self.dim]
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// Largest inner product against stored points, restricted to grid
    /// neighbors when the grid is present. Exact whenever the true nearest
    /// point is within chord `delta` (both points unit).
    fn local_max_dot(&self, x: &[f64]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        match &self.grid {
            None => {
                for i in 0..self.count {
                    best = best.max(Self::dot(self.point(i), x));
                }
            }
            Some(g) => {
                let mut base = vec![0usize; self.dim];
                for (k, &c) in x.iter().enumerate() {
                    base[k] = (((c + 1.0) / self.delta) as isize)
                        .clamp(0, g.per_axis as isize - 1) as usize;
                }
                let mut offsets = vec![-1i64; self.dim];
                'outer: loop {
                    let mut idx = 0usize;
                    let mut valid = true;
                    for k in 0..self.dim {
                        let c = base[k] as i64 + offsets[k];
                        if c < 0 || c >= g.per_axis as i64 {
                            valid = false;
                            break;
                        }
                        idx = idx * g.per_axis + c as usize;
                    }
                    if valid {
                        for &i in &g.cells[idx] {
                            best = best.max(Self::dot(self.point(i as usize), x));
                        }
                    }
                    for k in (0..self.dim).rev() {
                        offsets[k] += 1;
                        if offsets[k] <= 1 {
                            continue 'outer;
                        }
                        offsets[k] = -1;
                    }
                    break;
                }
            }
        }
        best
    }

    fn full_max_dot(&self, x: &[f64]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for i in 0..self.count {
            best = best.max(Self::dot(self.point(i), x));
        }
        best
    }

    /// Exact chordal distance from `x` to the nearest stored point.
    fn nearest_distance(&self, x: &[f64]) -> f64 {
        let threshold = 1.0 - self.delta * self.delta / 2.0;
        let local = self.local_max_dot(x);
        let dot = if local >= threshold {
            local
        } else {
            self.full_max_dot(x)
        };
        (2.0 - 2.0 * dot).max(0.0).sqrt()
    }

    fn is_within_delta(&self, x: &[f64]) -> bool {
        self.local_max_dot(x) >= 1.0 - self.delta * self.delta / 2.0
    }

    fn insert(&mut self, x: &[f64]) {
        let idx = self.count;
        self.flat.extend_from_slice(x);
        self.count += 1;
        if self.grid.is_some() {
            let cell = self.cell_of(x);
            self.grid.as_mut().unwrap().cells[cell].push(idx as u32);
        }
    }
}

fn check_net_parameters(dim_real: usize, delta: f64) -> Result<()> {
    if !(2..=MAX_NET_DIM).contains(&dim_real) {
        return Err(Error::InvalidParameter {
            name: "dim_real",
            value: dim_real as f64,
            constraint: "2 <= dim_real <= 64",
        });
    }
    if !(delta > 0.0 && delta < 2.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: delta,
            constraint: "0 < delta < 2",
        });
    }
    Ok(())
}

/// Fraction of the sphere `S^{dim-1}` covered by a single chordal
/// `delta`-cap, via Simpson integration of `sin^{dim-2}`.
fn cap_fraction(dim_real: usize, delta: f64) -> f64 {
    let theta = 2.0 * (delta / 2.0).asin();
    let integral = |upper: f64| -> f64 {
        let n = 1024usize;
        let h = upper / n as f64;
        let f = |t: f64| t.sin().powi(dim_real as i32 - 2);
        let mut acc = f(0.0) + f(upper);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(k as f64 * h);
        }
        acc * h / 3.0
    };
    integral(theta) / integral(std::f64::consts::PI)
}

impl SphereNet {
    /// Covering net of chordal radius `delta`: greedy random packing where
    /// saturation is affordable, otherwise an oversampled random covering;
    /// either way extended by probe rounds and validated on fresh probes.
    pub fn build(dim_real: usize, delta: f64, stream: SeededStream) -> Result<SphereNet> {
        check_net_parameters(dim_real, delta)?;
        let cost = 3f64.powi(dim_real as i32) / cap_fraction(dim_real, delta);
        if cost > GREEDY_COST_CAP {
            Self::build_random_covering(dim_real, delta, stream)
        } else {
            Self::build_with_cell_budget(dim_real, delta, stream, MAX_DENSE_CELLS)
        }
    }

    /// Oversampled covering: i.i.d. uniform points, enough that the expected
    /// uncovered fraction is far below one validation probe, then the usual
    /// probe-round extension and fresh-probe validation.  No packing lower
    /// bound is claimed for nets built this way.
    pub fn build_random_covering(
        dim_real: usize,
        delta: f64,
        stream: SeededStream,
    ) -> Result<SphereNet> {
        check_net_parameters(dim_real, delta)?;
        let fraction = cap_fraction(dim_real, delta);
        let oversample = (40.0 * COVERING_PROBES as f64).ln();
        let n = (oversample / fraction).ceil() as usize;
        if n > MAX_NET_POINTS {
            return Err(Error::InvalidParameter {
                name: "net size",
                value: n as f64,
                constraint: "random covering would exceed the point budget",
            });
        }
        let mut packing = Packing::new(dim_real, delta, MAX_DENSE_CELLS);
        let mut rng = stream.substream(0).rng();
        for _ in 0..n {
            let x = sampling::sample_sphere(dim_real, &mut rng);
            packing.insert(x.as_slice());
        }
        Self::finish_net(packing, dim_real, delta, stream, NetConstruction::RandomCovering)
    }

    pub(crate) fn build_with_cell_budget(
        dim_real: usize,
        delta: f64,
        stream: SeededStream,
        max_dense_cells: usize,
    ) -> Result<SphereNet> {
        check_net_parameters(dim_real, delta)?;

        let mut packing = Packing::new(dim_real, delta, max_dense_cells);
        let mut rng = stream.substream(0).rng();
        let mut consecutive_rejections = 0usize;
        loop {
            if consecutive_rejections >= REJECTION_BUDGET {
                break;
            }
            let x = sampling::sample_sphere(dim_real, &mut rng);
            if packing.is_within_delta(x.as_slice()) {
                consecutive_rejections += 1;
            } else {
                packing.insert(x.as_slice());
                consecutive_rejections = 0;
            }
        }

        Self::finish_net(packing, dim_real, delta, stream, NetConstruction::GreedyRandom)
    }

    /// Shared tail of the random constructions: probe rounds that insert any
    /// uncovered point found (each insertion is itself a legal net point),
    /// then fresh-probe validation of the covering radius. A validation pass
    /// that finds uncovered probes feeds them back as net points and retries
    /// on a new probe set, so only a clean, untouched pass is accepted.
    fn finish_net(
        mut packing: Packing,
        dim_real: usize,
        delta: f64,
        stream: SeededStream,
        construction: NetConstruction,
    ) -> Result<SphereNet> {
        for round in 0..REPAIR_ROUNDS_MAX {
            let mut rng = stream.substream(1_000 + round as u64).rng();
            let mut inserted = 0usize;
            for _ in 0..COVERING_PROBES {
                let x = sampling::sample_sphere(dim_real, &mut rng);
                if !packing.is_within_delta(x.as_slice()) {
                    packing.insert(x.as_slice());
                    inserted += 1;
                }
            }
            if inserted == 0 {
                break;
            }
        }

        let mut result = Err(Error::CoveringValidation {
            observed: f64::INFINITY,
            delta,
        });
        for attempt in 0..VALIDATION_ATTEMPTS {
            let probes = stream.substream(VALIDATION_SUBSTREAM + attempt);
            let (observed, uncovered) = probe_covering(&packing, dim_real, delta, probes);
            if uncovered.is_empty() {
                result = Ok(observed);
                break;
            }
            result = Err(Error::CoveringValidation { observed, delta });
            for x in &uncovered {
                packing.insert(x);
            }
        }
        let covering = result?;

        let points: Vec<DVector<f64>> = (0..packing.count)
            .map(|i| DVector::from_column_slice(packing.point(i)))
            .collect();
        Ok(SphereNet {
            dim_real,
            delta,
            points,
            construction,
            covering_radius_estimate: covering,
        })
    }

    /// Wrap externally supplied points, validating unit norms and the
    /// covering radius (with an internally fixed probe stream).
    pub fn explicit(dim_real: usize, delta: f64, points: Vec<DVector<f64>>) -> Result<SphereNet> {
        check_net_parameters(dim_real, delta)?;
        if points.is_empty() {
            return Err(Error::InvalidParameter {
                name: "points",
                value: 0.0,
                constraint: "at least one point",
            });
        }
        let mut packing = Packing::new(dim_real, delta, MAX_DENSE_CELLS);
        for p in &points {
            if p.len() != dim_real {
                return Err(Error::InvalidOperator(format!(
                    "net point of length {} in dimension {dim_real}",
                    p.len()
                )));
            }
            if (p.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidOperator(format!(
                    "net point of norm {} is not on the sphere",
                    p.norm()
                )));
            }
            packing.insert(p.as_slice());
        }
        let covering = validate_covering(
            &packing,
            dim_real,
            delta,
            SeededStream::new(0).substream(VALIDATION_SUBSTREAM),
        )?;
        Ok(SphereNet {
            dim_real,
            delta,
            points,
            construction: NetConstruction::Explicit,
            covering_radius_estimate: covering,
        })
    }

    pub fn dim_real(&self) -> usize {
        self.dim_real
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn construction(&self) -> NetConstruction {
        self.construction
    }

    /// Covering radius observed on the validation probes (at most `delta`).
    pub fn covering_radius_estimate(&self) -> f64 {
        self.covering_radius_estimate
    }

    /// Smallest pairwise chordal distance; quadratic in the net size.
    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                best = best.min((&self.points[i] - &self.points[j]).norm());
            }
        }
        best
    }

    /// Reinterpret points on `S^{2D-1}` as unit vectors of `C^D`
    /// (coordinates interleaved as `re, im`).
    pub fn complex_points(&self) -> Result<Vec<CVector>> {
        if self.dim_real % 2 != 0 {
            return Err(Error::InvalidParameter {
                name: "dim_real",
                value: self.dim_real as f64,
                constraint: "even dimension required for a complex sphere",
            });
        }
        let d = self.dim_real / 2;
        Ok(self
            .points
            .iter()
            .map(|p| CVector::from_fn(d, |k, _| C64::new(p[2 * k], p[2 * k + 1])))
            .collect())
    }

    /// Write `dim_real: u32, count: u32` then row-major little-endian
    /// `f64` coordinates.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(&(self.dim_real as u32).to_le_bytes())?;
        w.write_all(&(self.points.len() as u32).to_le_bytes())?;
        for p in &self.points {
            for c in p.iter() {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Read a net saved by [`SphereNet::save`]; unit norms and the covering
    /// radius for `delta` are re-validated.
    pub fn load(path: &std::path::Path, delta: f64) -> Result<SphereNet> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut header = [0u8; 8];
        r.read_exact(&mut header)?;
        let dim_real = u32::from_le_bytes(header[0..4].try_into().unwrap()) as usize;
        let count = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        if dim_real == 0 || count == 0 || dim_real > MAX_NET_DIM {
            return Err(Error::Serialization(format!(
                "implausible net header: dim {dim_real}, count {count}"
            )));
        }
        let mut buf = vec![0u8; 8 * dim_real * count];
        r.read_exact(&mut buf)?;
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(Error::Serialization("trailing bytes after net data".into()));
        }
        let points = (0..count)
            .map(|i| {
                DVector::from_fn(dim_real, |k, _| {
                    let o = 8 * (i * dim_real + k);
                    f64::from_le_bytes(buf[o..o + 8].try_into().unwrap())
                })
            })
            .collect();
        SphereNet::explicit(dim_real, delta, points)
    }
}

/// Probe the covering radius on fresh random points: returns the worst
/// nearest-point distance seen and every probe that fell outside `delta`.
fn probe_covering(
    packing: &Packing,
    dim_real: usize,
    delta: f64,
    probe_stream: SeededStream,
) -> (f64, Vec<Vec<f64>>) {
    const CHUNK: usize = 250;
    let chunks = COVERING_PROBES / CHUNK;
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = probe_stream.substream(c as u64).rng();
            let mut worst = 0.0f64;
            let mut uncovered = Vec::new();
            for _ in 0..CHUNK {
                let x = sampling::sample_sphere(dim_real, &mut rng);
                let dist = packing.nearest_distance(x.as_slice());
                worst = worst.max(dist);
                if dist > delta {
                    uncovered.push(x.as_slice().to_vec());
                }
            }
            (worst, uncovered)
        })
        .reduce(
            || (0.0f64, Vec::new()),
            |(wa, mut ua), (wb, ub)| {
                ua.extend(ub);
                (wa.max(wb), ua)
            },
        )
}

fn validate_covering(
    packing: &Packing,
    dim_real: usize,
    delta: f64,
    probe_stream: SeededStream,
) -> Result<f64> {
    let (observed, uncovered) = probe_covering(packing, dim_real, delta, probe_stream);
    if !uncovered.is_empty() {
        return Err(Error::CoveringValidation { observed, delta });
    }
    Ok(observed)
}

/// The symmetric polytope spanned by signed rank-one projectors onto net
/// points, or tensor products of them. Vertices are constructed on demand;
/// the full vertex set is never materialized.
#[derive(Clone, Debug)]
pub struct NetPolytope {
    local_dim: usize,
    factors: usize,
    shape: FactorShape,
    points: Vec<CVector>,
}

impl NetPolytope {
    pub fn new(net: &SphereNet, factors: usize) -> Result<NetPolytope> {
        let points = net.complex_points()?;
        let local_dim = net.dim_real() / 2;
        let shape = FactorShape::new(local_dim, factors)?;
        Ok(NetPolytope {
            local_dim,
            factors,
            shape,
            points,
        })
    }

    pub fn shape(&self) -> FactorShape {
        self.shape
    }

    pub fn n_net_points(&self) -> usize {
        self.points.len()
    }

    /// `ln` of the number of vertices, `2 · (#net)^factors`.
    pub fn log_vertex_count(&self) -> f64 {
        std::f64::consts::LN_2 + self.factors as f64 * (self.points.len() as f64).ln()
    }

    /// The vertex `± |x_{i_1}⟩⟨x_{i_1}| ⊗ … ⊗ |x_{i_N}⟩⟨x_{i_N}|`.
    pub fn vertex(&self, indices: &[usize], negate: bool) -> Result<HermitianOp> {
        if indices.len() != self.factors || indices.iter().any(|i| *i >= self.points.len()) {
            return Err(Error::InvalidParameter {
                name: "indices",
                value: indices.len() as f64,
                constraint: "one valid net index per factor",
            });
        }
        let vecs = indices.iter().map(|i| self.points[*i].clone()).collect();
        let proj = ProductVector::new(self.shape, vecs)?.projector();
        Ok(if negate { proj.scale(-1.0) } else { proj })
    }

    pub fn sample_vertex(&self, rng: &mut StreamRng) -> HermitianOp {
        use rand::Rng;
        let indices: Vec<usize> = (0..self.factors)
            .map(|_| rng.gen_range(0..self.points.len()))
            .collect();
        let negate = rng.gen_bool(0.5);
        self.vertex(&indices, negate).expect("sampled indices valid")
    }

    /// The polytope's dual norm `max_y |⟨y|A|y⟩|` over net points; single
    /// factor only, where the vertex set is exactly `± |y⟩⟨y|`.
    pub fn dual_norm(&self, a: &HermitianOp) -> Result<f64> {
        if self.factors != 1 {
            return Err(Error::InvalidParameter {
                name: "factors",
                value: self.factors as f64,
                constraint: "dual norm enumerates vertices only for one factor",
            });
        }
        if a.shape() != self.shape {
            return Err(Error::ShapeMismatch {
                left: format!("{}", self.shape),
                right: format!("{}", a.shape()),
            });
        }
        Ok(self
            .points
            .iter()
            .map(|y| a.expectation(y).abs())
            .fold(0.0, f64::max))
    }

    fn local_dim(&self) -> usize {
        self.local_dim
    }
}

/// Net-quality constant `(1 - 2δ² + δ⁴/2)^factors`: the rank-one polytope of
/// a `δ`-net contains that multiple of the trace-norm ball, and the constant
/// tensors multiplicatively.
pub fn sandwich_constant(delta: f64, factors: usize) -> f64 {
    (1.0 - 2.0 * delta * delta + delta.powi(4) / 2.0).powi(factors as i32)
}

/// Empirical dual-norm comparison between a rank-one net polytope and the
/// trace-norm ball.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SandwichCheck {
    pub local_dim: usize,
    pub delta: f64,
    pub probes: usize,
    pub net_size: usize,
    /// `1 - 2δ² + δ⁴/2`, the guaranteed lower inclusion constant.
    pub lower_constant: f64,
    /// Smallest observed `max_y |⟨y|A|y⟩| / ‖A‖_op`.
    pub worst_ratio: f64,
    /// Largest observed ratio; the upper inclusion forces it below 1.
    pub max_ratio: f64,
    pub pass: bool,
}

/// Check `(1-2δ²+δ⁴/2) Δ ⊂ P ⊂ Δ` in dual-norm form on random Hermitian
/// probes: the polytope's dual norm must land between `lower_constant` times
/// the operator norm and the operator norm itself.
pub fn polytope_sandwich_check(
    net: &SphereNet,
    probes: usize,
    stream: SeededStream,
) -> Result<SandwichCheck> {
    if !(net.delta() > 0.0 && net.delta() < SANDWICH_DELTA_MAX) {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: net.delta(),
            constraint: "0 < delta < sqrt(2 - sqrt 2)",
        });
    }
    if probes == 0 {
        return Err(Error::InvalidParameter {
            name: "probes",
            value: 0.0,
            constraint: "probes >= 1",
        });
    }
    let poly = NetPolytope::new(net, 1)?;
    let shape = FactorShape::qudit(poly.local_dim())?;
    let (worst_ratio, max_ratio) = (0..probes)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream.substream(k as u64).rng();
            let a = sampling::sample_gaussian_hermitian(shape, false, &mut rng);
            let ratio = poly.dual_norm(&a).expect("single factor") / a.operator_norm();
            (ratio, ratio)
        })
        .reduce(
            || (f64::INFINITY, f64::NEG_INFINITY),
            |(lo1, hi1), (lo2, hi2)| (lo1.min(lo2), hi1.max(hi2)),
        );
    let lower_constant = sandwich_constant(net.delta(), 1);
    Ok(SandwichCheck {
        local_dim: poly.local_dim(),
        delta: net.delta(),
        probes,
        net_size: net.len(),
        lower_constant,
        worst_ratio,
        max_ratio,
        pass: worst_ratio >= lower_constant && max_ratio <= 1.0 + 1e-12,
    })
}

/// Reference ellipsoid for the volume-ratio bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EllipsoidChoice {
    /// Hilbert-Schmidt unit ball.
    HsBall,
    /// Extremal ellipsoid of the symmetrized separable body; multiplies the
    /// bound by its volume-radius ratio `d^{-α_D}`.
    Lowner,
}

/// Closed-form upper bound on `(vol Σ / vol ellipsoid)^{1/d²}` through the
/// vertex count of the net polytope.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SigmaWidthBound {
    pub local_dim: usize,
    pub factors: usize,
    pub dim: usize,
    pub ellipsoid: EllipsoidChoice,
    /// `d^{-α_D}` under [`EllipsoidChoice::Lowner`], 1 otherwise.
    pub ellipsoid_factor: f64,
    pub delta: f64,
    pub value_at_delta: f64,
    /// `1/√(N ln 2N)`, clamped into the admissible range.
    pub default_delta: f64,
    pub value_at_default: f64,
    pub delta_optimal: f64,
    pub value_optimal: f64,
}

/// Evaluate
/// `√(2 ln((1+2/δ)^{2DN})) / (γ_{d²} (1-2δ²+δ⁴/2)^N)`
/// at the requested `δ`, at the default `δ = 1/√(N ln 2N)`, and at a
/// grid-optimized `δ`, optionally rescaled by the ellipsoid volume factor.
///
/// Closed-form: unlike the dense-operator types, `local_dim^factors` is not
/// capped here beyond `2^20`.
pub fn sigma_width_upper(
    local_dim: usize,
    factors: usize,
    delta: f64,
    ellipsoid: EllipsoidChoice,
) -> Result<SigmaWidthBound> {
    if !(delta > 0.0 && delta < SANDWICH_DELTA_MAX) {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: delta,
            constraint: "0 < delta < sqrt(2 - sqrt 2)",
        });
    }
    if local_dim < 2 || factors < 1 {
        return Err(Error::DegenerateShape { local_dim, factors });
    }
    let dim = local_dim
        .checked_pow(factors as u32)
        .filter(|t| *t <= 1 << 20)
        .ok_or(Error::ShapeTooLarge {
            local_dim,
            factors,
            total: usize::MAX,
            max: 1 << 20,
        })?;
    let dd = local_dim as f64;
    let nn = factors as f64;
    let d = dim as f64;
    let gamma = gamma_n(dim * dim)?;
    let ellipsoid_factor = match ellipsoid {
        EllipsoidChoice::HsBall => 1.0,
        EllipsoidChoice::Lowner => d.powf(-alpha_d(local_dim)?),
    };
    let eval = |del: f64| -> f64 {
        let log_vertices = 2.0 * dd * nn * (1.0 + 2.0 / del).ln();
        ellipsoid_factor * (2.0 * log_vertices).sqrt() / (gamma * sandwich_constant(del, factors))
    };

    let default_delta = (1.0 / (nn * (2.0 * nn).ln()).sqrt()).min(0.98 * SANDWICH_DELTA_MAX);
    let steps = 4_000usize;
    let mut best = (f64::INFINITY, delta);
    for i in 1..steps {
        let del = SANDWICH_DELTA_MAX * i as f64 / steps as f64;
        let v = eval(del);
        if v < best.0 {
            best = (v, del);
        }
    }
    Ok(SigmaWidthBound {
        local_dim,
        factors,
        dim,
        ellipsoid,
        ellipsoid_factor,
        delta,
        value_at_delta: eval(delta),
        default_delta,
        value_at_default: eval(default_delta),
        delta_optimal: best.1,
        value_optimal: best.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn circle_net_respects_covering_and_packing_counts() {
        let net = SphereNet::build(2, 0.5, SeededStream::new(901)).unwrap();
        // Chord-0.5 coverage needs at least 7 points on the circle; a
        // chord-0.5 packing fits at most 12.
        assert!((7..=12).contains(&net.len()), "size {}", net.len());
        assert!(net.covering_radius_estimate() <= 0.5);
        assert!(net.min_pairwise_distance() >= 0.5 - 1e-9);
        for p in net.points() {
            assert_relative_eq!(p.norm(), 1.0, epsilon = 1e-12);
        }
        assert_eq!(net.construction(), NetConstruction::GreedyRandom);
    }

    #[test]
    fn qubit_sphere_net_stays_under_the_volumetric_bound() {
        let net = SphereNet::build(4, 0.5, SeededStream::new(907)).unwrap();
        assert!(net.len() <= 625, "size {}", net.len());
        assert!(net.covering_radius_estimate() <= 0.5);
        assert!(net.min_pairwise_distance() >= 0.5 - 1e-9);
    }

    #[test]
    fn grid_and_linear_paths_build_identical_nets() {
        let fast = SphereNet::build(4, 0.6, SeededStream::new(911)).unwrap();
        let slow =
            SphereNet::build_with_cell_budget(4, 0.6, SeededStream::new(911), 0).unwrap();
        assert_eq!(fast.len(), slow.len());
        for (a, b) in fast.points().iter().zip(slow.points()) {
            assert_eq!(a.as_slice(), b.as_slice());
        }
    }

    #[test]
    fn tight_nets_in_higher_dimension_switch_to_random_covering() {
        // Saturating a greedy packing on S^5 at this radius would take far
        // too long; the builder must dispatch to the oversampled covering.
        let net = SphereNet::build(6, 0.2, SeededStream::new(913)).unwrap();
        assert_eq!(net.construction(), NetConstruction::RandomCovering);
        assert!(net.covering_radius_estimate() <= 0.2);
        // Any chordal 0.2-covering of S^5 needs at least 1/cap_fraction
        // points; the oversampled construction stays within a modest
        // logarithmic factor of that.
        let minimum = 1.0 / cap_fraction(6, 0.2);
        assert!((net.len() as f64) >= minimum, "size {}", net.len());
        assert!((net.len() as f64) <= 16.0 * minimum, "size {}", net.len());

        // The cheap regime keeps the greedy packing construction.
        let greedy = SphereNet::build(2, 0.5, SeededStream::new(915)).unwrap();
        assert_eq!(greedy.construction(), NetConstruction::GreedyRandom);
    }

    #[test]
    fn build_rejects_bad_parameters() {
        assert!(SphereNet::build(1, 0.5, SeededStream::new(1)).is_err());
        assert!(SphereNet::build(4, 0.0, SeededStream::new(1)).is_err());
        assert!(SphereNet::build(4, 2.0, SeededStream::new(1)).is_err());
        assert!(SphereNet::build(65, 0.5, SeededStream::new(1)).is_err());
    }

    #[test]
    fn explicit_nets_validate_norms_and_coverage() {
        let good = vec![
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![-1.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0]),
            DVector::from_vec(vec![0.0, -1.0]),
        ];
        // Four equally spaced points cover the circle at chord √(2-√2)…
        let net = SphereNet::explicit(2, 0.8, good.clone()).unwrap();
        assert_eq!(net.len(), 4);
        assert_eq!(net.construction(), NetConstruction::Explicit);
        // …but not at chord 0.5.
        assert!(matches!(
            SphereNet::explicit(2, 0.5, good),
            Err(Error::CoveringValidation { .. })
        ));
        let bad = vec![DVector::from_vec(vec![0.9, 0.0])];
        assert!(SphereNet::explicit(2, 1.9, bad).is_err());
    }

    #[test]
    fn nets_roundtrip_through_the_binary_format() {
        let net = SphereNet::build(4, 0.7, SeededStream::new(919)).unwrap();
        let path = std::env::temp_dir().join(format!("sphere-net-{}.bin", std::process::id()));
        net.save(&path).unwrap();
        let loaded = SphereNet::load(&path, 0.7).unwrap();
        assert_eq!(loaded.len(), net.len());
        for (a, b) in loaded.points().iter().zip(net.points()) {
            assert_eq!(a.as_slice(), b.as_slice());
        }
        assert_eq!(loaded.construction(), NetConstruction::Explicit);
        // A tighter delta than the net provides fails the re-validation.
        assert!(matches!(
            SphereNet::load(&path, 0.1),
            Err(Error::CoveringValidation { .. })
        ));
        std::fs::remove_file(&path).unwrap();
        assert!(SphereNet::load(&path, 0.7).is_err());
    }

    #[test]
    fn polytope_vertices_are_signed_unit_trace_norm_products() {
        let net = SphereNet::build(4, 0.5, SeededStream::new(929)).unwrap();
        let poly = NetPolytope::new(&net, 2).unwrap();
        let v = poly.vertex(&[0, 1], false).unwrap();
        assert_relative_eq!(v.trace_norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(v.trace(), 1.0, epsilon = 1e-12);
        let neg = poly.vertex(&[0, 1], true).unwrap();
        assert_relative_eq!((&v + &neg).hs_norm(), 0.0, epsilon = 1e-14);
        assert!(poly.vertex(&[0], false).is_err());
        assert!(poly.vertex(&[0, poly.n_net_points()], false).is_err());
        assert!(poly.dual_norm(&v).is_err());
        assert_relative_eq!(
            poly.log_vertex_count(),
            (2.0 * (net.len() as f64).powi(2)).ln(),
            epsilon = 1e-12
        );

        let mut rng = SeededStream::new(931).rng();
        for _ in 0..20 {
            let v = poly.sample_vertex(&mut rng);
            assert_relative_eq!(v.trace_norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sandwich_check_holds_for_qubits_at_delta_03() {
        let net = SphereNet::build(4, 0.3, SeededStream::new(937)).unwrap();
        let check = polytope_sandwich_check(&net, 1_000, SeededStream::new(941)).unwrap();
        assert!(check.pass);
        assert_relative_eq!(check.lower_constant, 0.82405, epsilon = 1e-12);
        assert!(
            check.worst_ratio >= 0.824,
            "worst ratio {}",
            check.worst_ratio
        );
        assert!(check.max_ratio <= 1.0 + 1e-12);

        // A net point plugged back in as a probe is its own witness.
        let poly = NetPolytope::new(&net, 1).unwrap();
        let probe = poly.vertex(&[0], false).unwrap();
        let ratio = poly.dual_norm(&probe).unwrap() / probe.operator_norm();
        assert_relative_eq!(ratio, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sandwich_check_rejects_wide_deltas() {
        let net = SphereNet::build(4, 0.8, SeededStream::new(947)).unwrap();
        assert!(polytope_sandwich_check(&net, 10, SeededStream::new(1)).is_err());
    }

    #[test]
    fn sandwich_constant_tensors_multiplicatively() {
        for delta in [0.1, 0.3, 0.5, 0.7] {
            for factors in [1usize, 2, 3, 5] {
                assert_relative_eq!(
                    sandwich_constant(delta, factors),
                    sandwich_constant(delta, 1).powi(factors as i32),
                    epsilon = 1e-15
                );
            }
        }
    }

    #[test]
    fn sampled_vertex_hulls_obey_the_polytope_width_bound() {
        let net = SphereNet::build(4, 0.4, SeededStream::new(953)).unwrap();
        let poly = NetPolytope::new(&net, 2).unwrap();
        let mut rng = SeededStream::new(959).rng();
        let vertices: Vec<HermitianOp> = (0..512).map(|_| poly.sample_vertex(&mut rng)).collect();
        let shape = poly.shape();
        let vals = sampling::collect_samples(SeededStream::new(961), 3_000, |rng| {
            let g = sampling::sample_gaussian_hermitian(shape, false, rng);
            vertices
                .iter()
                .map(|v| g.hs_inner(v).abs())
                .fold(0.0, f64::max)
        });
        let (mean, _, se) = sampling::moments(&vals);
        let bound = (2.0 * (2.0 * 512.0f64).ln()).sqrt();
        assert!(
            mean <= bound + 3.0 * se,
            "sampled hull width {mean} above {bound}"
        );
    }

    #[test]
    fn sigma_width_bound_pins_the_two_qubit_value() {
        let b = sigma_width_upper(2, 2, 0.25, EllipsoidChoice::HsBall).unwrap();
        let gamma16 = gamma_n(16).unwrap();
        let expected = (2.0 * (2.0f64 * 2.0 * 2.0) * 9.0f64.ln()).sqrt()
            / (gamma16 * sandwich_constant(0.25, 2));
        assert_relative_eq!(b.value_at_delta, expected, epsilon = 1e-12);
        assert!(b.value_at_delta > 0.0 && b.value_at_delta.is_finite());
        assert_relative_eq!(b.ellipsoid_factor, 1.0, epsilon = 1e-15);

        let l = sigma_width_upper(2, 2, 0.25, EllipsoidChoice::Lowner).unwrap();
        assert!(l.value_at_delta < b.value_at_delta);
        assert_relative_eq!(
            l.ellipsoid_factor,
            4.0f64.powf(-crate::ellipsoids::alpha_d(2).unwrap()),
            epsilon = 1e-15
        );
        assert!(sigma_width_upper(2, 2, 0.8, EllipsoidChoice::HsBall).is_err());
        assert!(sigma_width_upper(1, 2, 0.25, EllipsoidChoice::HsBall).is_err());
    }

    #[test]
    fn sigma_width_bound_has_the_advertised_asymptotic_shape() {
        // bound · d / √(DN ln N) stays bounded: the optimized δ keeps it
        // below 4.5 over the whole range (it decreases from ≈4.36 at N = 2),
        // while the default δ = 1/√(N ln 2N) needs N ≥ 4 before the sandwich
        // constant stops hurting.
        let mut prev = f64::INFINITY;
        for nn in 2..=12usize {
            let b = sigma_width_upper(2, nn, 0.25, EllipsoidChoice::HsBall).unwrap();
            let d = 2.0f64.powi(nn as i32);
            let norm = d / (2.0 * nn as f64 * (nn as f64).ln()).sqrt();
            let scaled_opt = b.value_optimal * norm;
            assert!(
                scaled_opt > 1.0 && scaled_opt <= 4.5,
                "scaled optimal bound {scaled_opt} at N = {nn}"
            );
            assert!(scaled_opt <= prev, "not decreasing at N = {nn}");
            prev = scaled_opt;
            if nn >= 4 {
                assert!(b.value_at_default * norm <= 7.0);
            }
        }
        let b2 = sigma_width_upper(2, 2, 0.25, EllipsoidChoice::HsBall).unwrap();
        assert!((b2.value_optimal - 1.815962).abs() <= 1e-5);
    }

    #[test]
    fn optimized_delta_beats_fixed_choices() {
        let b = sigma_width_upper(2, 3, 0.5, EllipsoidChoice::HsBall).unwrap();
        assert!(b.value_optimal <= b.value_at_delta + 1e-12);
        assert!(b.value_optimal <= b.value_at_default + 1e-12);
        assert!(b.delta_optimal > 0.0 && b.delta_optimal < SANDWICH_DELTA_MAX);
    }
}
