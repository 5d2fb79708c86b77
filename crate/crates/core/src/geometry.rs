//! Decision sets, Euclidean projections and lattice δ-covers.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, CocoError, Result};

/// Default cap on the number of lattice cells a cover may enumerate.
pub const DEFAULT_MAX_CENTERS: usize = 10_000_000;

type MembershipFn = dyn Fn(&[f64]) -> bool + Send + Sync;
type ProjectionFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A convex set known only through callbacks.
#[derive(Clone)]
pub struct OracleSet {
    membership: Arc<MembershipFn>,
    projection: Option<Arc<ProjectionFn>>,
    bounding_box: Option<(Vec<f64>, Vec<f64>)>,
}

impl fmt::Debug for OracleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OracleSet")
            .field("has_projection", &self.projection.is_some())
            .field("bounding_box", &self.bounding_box)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum SetKind {
    /// Probability simplex in `R^n`.
    Simplex {
        n: usize,
    },
    /// Axis-aligned box.
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// Euclidean ball.
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Oracle(OracleSet),
}

/// A convex decision set with its diameter and ambient dimension.
#[derive(Debug, Clone)]
pub struct DecisionSet {
    kind: SetKind,
    diameter: f64,
    dimension: usize,
}

impl DecisionSet {
    pub fn simplex(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("simplex needs at least one vertex"));
        }
        let diameter = if n >= 2 { 2f64.sqrt() } else { 0.0 };
        Ok(Self {
            kind: SetKind::Simplex { n },
            diameter,
            dimension: n,
        })
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(invalid("box bounds must be non-empty and of equal length"));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u))
        {
            return Err(invalid("box bounds must be finite with lower <= upper"));
        }
        let diameter = dist(&lower, &upper);
        let dimension = lower.len();
        Ok(Self {
            kind: SetKind::Box { lower, upper },
            diameter,
            dimension,
        })
    }

    /// The cube `[lo, hi]^d`.
    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::boxed(vec![lo; d], vec![hi; d])
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(invalid("ball center must be a non-empty finite vector"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("ball radius must be positive"));
        }
        let dimension = center.len();
        Ok(Self {
            kind: SetKind::Ball { center, radius },
            diameter: 2.0 * radius,
            dimension,
        })
    }

    /// A set given by a membership test, an optional projection and an
    /// optional bounding box (needed for covers). The declared diameter must
    /// not exceed the bounding box diagonal.
    pub fn oracle(
        dimension: usize,
        diameter: f64,
        membership: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
        projection: Option<Arc<ProjectionFn>>,
        bounding_box: Option<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self> {
        if dimension == 0 || !(diameter > 0.0 && diameter.is_finite()) {
            return Err(invalid(
                "oracle set needs a dimension and a positive diameter",
            ));
        }
        if let Some((lo, hi)) = &bounding_box {
            if lo.len() != dimension || hi.len() != dimension {
                return Err(invalid("bounding box dimension mismatch"));
            }
            if diameter > dist(lo, hi) * (1.0 + 1e-12) {
                return Err(invalid("declared diameter exceeds bounding box diagonal"));
            }
        }
        Ok(Self {
            kind: SetKind::Oracle(OracleSet {
                membership: Arc::new(membership),
                projection,
                bounding_box,
            }),
            diameter,
            dimension,
        })
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dimension {
            return false;
        }
        match &self.kind {
            SetKind::Simplex { n } => {
                x.iter().all(|&v| v >= -tol)
                    && (x.iter().sum::<f64>() - 1.0).abs() <= tol * *n as f64
            }
            SetKind::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            SetKind::Ball { center, radius } => dist(x, center) <= radius + tol,
            SetKind::Oracle(o) => (o.membership)(x),
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, point: &[f64]) -> Result<Vec<f64>> {
        project(self, point)
    }

    /// Axis-aligned box containing the set.
    pub fn bounding_box(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        match &self.kind {
            SetKind::Simplex { n } => Ok((vec![0.0; *n], vec![1.0; *n])),
            SetKind::Box { lower, upper } => Ok((lower.clone(), upper.clone())),
            SetKind::Ball { center, radius } => Ok((
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            )),
            SetKind::Oracle(o) => o
                .bounding_box
                .clone()
                .ok_or_else(|| invalid("oracle set has no bounding box")),
        }
    }
}

/// Textual form used by the CLI: `simplex:N`, `box:lo:hi,lo:hi,...`,
/// `ball:R:c1,c2,...`.
impl FromStr for DecisionSet {
    type Err = CocoError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: &str| CocoError::Config(format!("set '{s}': {m}"));
        let num = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .map_err(|_| bad(&format!("bad number '{t}'")))
        };
        let (kind, rest) = s.split_once(':').ok_or_else(|| bad("missing ':'"))?;
        match kind.trim() {
            "simplex" => {
                let n = rest
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| bad("simplex size must be an integer"))?;
                DecisionSet::simplex(n)
            }
            "box" => {
                let mut lower = Vec::new();
                let mut upper = Vec::new();
                for axis in rest.split(',') {
                    let (l, u) = axis
                        .split_once(':')
                        .ok_or_else(|| bad("axis must be lo:hi"))?;
                    lower.push(num(l)?);
                    upper.push(num(u)?);
                }
                DecisionSet::boxed(lower, upper)
            }
            "ball" => {
                let (r, c) = rest
                    .split_once(':')
                    .ok_or_else(|| bad("expected ball:R:c1,..."))?;
                let center = c.split(',').map(num).collect::<Result<Vec<_>>>()?;
                DecisionSet::ball(center, num(r)?)
            }
            other => Err(bad(&format!("unknown set kind '{other}'"))),
        }
    }
}

impl fmt::Display for DecisionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        match &self.kind {
            SetKind::Simplex { n } => write!(f, "simplex:{n}"),
            SetKind::Box { lower, upper } => {
                let axes: Vec<String> = lower
                    .iter()
                    .zip(upper)
                    .map(|(l, u)| format!("{l}:{u}"))
                    .collect();
                write!(f, "box:{}", axes.join(","))
            }
            SetKind::Ball { center, radius } => write!(f, "ball:{radius}:{}", join(center)),
            SetKind::Oracle(_) => write!(f, "oracle:{}", self.dimension),
        }
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn project(set: &DecisionSet, point: &[f64]) -> Result<Vec<f64>> {
    if point.len() != set.dimension {
        return Err(CocoError::DimensionMismatch {
            expected: set.dimension,
            got: point.len(),
        });
    }
    if point.iter().any(|v| !v.is_finite()) {
        return Err(CocoError::NonFinite("projection input"));
    }
    match &set.kind {
        SetKind::Simplex { .. } => Ok(project_simplex(point)),
        SetKind::Box { lower, upper } => Ok(point
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(v, (l, u))| v.clamp(*l, *u))
            .collect()),
        SetKind::Ball { center, radius } => {
            let r = dist(point, center);
            if r <= *radius {
                Ok(point.to_vec())
            } else {
                let s = radius / r;
                Ok(point
                    .iter()
                    .zip(center)
                    .map(|(p, c)| c + (p - c) * s)
                    .collect())
            }
        }
        SetKind::Oracle(o) => {
            let proj = o
                .projection
                .as_ref()
                .ok_or(CocoError::UnsupportedProjection)?;
            Ok(proj(point))
        }
    }
}

/// Sort-and-threshold projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    if v.iter().all(|&x| x >= 0.0) && v.iter().sum::<f64>() == 1.0 {
        return v.to_vec();
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// `(1 + 2D/δ)^d`.
pub fn cover_size_bound(diameter: f64, delta: f64, d: usize) -> f64 {
    (1.0 + 2.0 * diameter / delta).powi(d as i32)
}

/// A finite δ-cover of a decision set.
#[derive(Debug, Clone)]
pub struct Cover {
    centers: Vec<Vec<f64>>,
    delta: f64,
    source_set: DecisionSet,
}

impl Cover {
    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn source_set(&self) -> &DecisionSet {
        &self.source_set
    }

    /// Index of and distance to the closest center.
    pub fn nearest(&self, x: &[f64]) -> (usize, f64) {
        self.centers
            .iter()
            .enumerate()
            .map(|(i, c)| (i, dist(c, x)))
            .fold(
                (0, f64::INFINITY),
                |best, cur| if cur.1 < best.1 { cur } else { best },
            )
    }

    /// `Σ_i w_i x^i`.
    pub fn combine(&self, weights: &[f64]) -> Vec<f64> {
        let d = self.source_set.dimension();
        let mut x = vec![0.0; d];
        for (w, c) in weights.iter().zip(&self.centers) {
            for (xi, ci) in x.iter_mut().zip(c) {
                *xi += w * ci;
            }
        }
        x
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CoverOptions {
    pub max_centers: usize,
}

impl Default for CoverOptions {
    fn default() -> Self {
        Self {
            max_centers: DEFAULT_MAX_CENTERS,
        }
    }
}

pub fn build_cover(set: &DecisionSet, delta: f64) -> Result<Cover> {
    build_cover_with(set, delta, &CoverOptions::default())
}

/// Lattice cover: cells of side `δ/√d` over the bounding box, each
/// represented by the projection of its midpoint. A cell is kept when its
/// midpoint lies within half a cell diagonal (`δ/2`) of the set, which
/// includes every cell that meets the set. Any `x` in the set sits in some
/// kept cell with midpoint `c`, and `‖x − Proj(c)‖ ≤ ‖x − c‖ + dist(c, X) ≤ δ`.
pub fn build_cover_with(set: &DecisionSet, delta: f64, opts: &CoverOptions) -> Result<Cover> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    let d = set.dimension();
    let (lo, hi) = set.bounding_box()?;
    let spacing = delta / (d as f64).sqrt();
    let half_diag = 0.5 * delta;

    let counts: Vec<usize> = lo
        .iter()
        .zip(&hi)
        .map(|(l, h)| (((h - l) / spacing).ceil() as usize).max(1))
        .collect();
    // Center the lattice in the bounding box so symmetric sets get
    // symmetric covers.
    let origin: Vec<f64> = lo
        .iter()
        .zip(&hi)
        .zip(&counts)
        .map(|((l, h), &c)| l + 0.5 * ((h - l) - c as f64 * spacing))
        .collect();
    let estimate: f64 = counts.iter().map(|&c| c as f64).product();
    if estimate > opts.max_centers as f64 {
        return Err(CocoError::CoverTooLarge {
            estimate,
            cap: opts.max_centers,
        });
    }
    let total = estimate as usize;

    let reps: Vec<Option<Vec<f64>>> = (0..total)
        .into_par_iter()
        .map(|cell| {
            let mut rem = cell;
            let mid: Vec<f64> = counts
                .iter()
                .zip(&origin)
                .map(|(&c, &l)| {
                    let k = rem % c;
                    rem /= c;
                    l + (k as f64 + 0.5) * spacing
                })
                .collect();
            let rep = set.project(&mid)?;
            Ok((dist(&mid, &rep) <= half_diag).then_some(rep))
        })
        .collect::<Result<_>>()?;

    let mut seen = HashSet::new();
    let centers: Vec<Vec<f64>> = reps
        .into_iter()
        .flatten()
        .filter(|c| seen.insert(c.iter().map(|v| v.to_bits()).collect::<Vec<u64>>()))
        .collect();

    Ok(Cover {
        centers,
        delta,
        source_set: set.clone(),
    })
}
