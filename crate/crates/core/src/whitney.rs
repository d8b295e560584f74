//! Whitney-type dyadic refinement over `[-4, 4]²` driven by the unoriented
//! excess and the height of a Q-sheeted graph current of codimension one.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Mesh, SampledField};

const HALF: f64 = 4.0;
/// Generation of the root cube `[-4, 4]²`.
pub const ROOT_GENERATION: i32 = -2;
const M: f64 = 2.0;

/// Q sheets over a square grid of `[-4, 4]²`, sorted per node.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphCurrent {
    q: usize,
    n: usize,
    h: f64,
    heights: Vec<f64>,
    grads: Vec<[f64; 2]>,
}

/// A compactly supported bump `a (1 - |x - c|²/ρ²)³`, added to sheet `i`
/// with weight `i + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 2],
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        let t2 = ((p[0] - self.center[0]).powi(2) + (p[1] - self.center[1]).powi(2)) / (self.radius * self.radius);
        if t2 >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - t2).powi(3)
        }
    }
}

impl GraphCurrent {
    /// Samples `f` at the `n × n` nodes; each node's sheets are sorted.
    pub fn from_fn(q: usize, n: usize, f: impl Fn([f64; 2]) -> Vec<f64>) -> Result<GraphCurrent> {
        if q == 0 {
            return Err(Error::InvalidArgument("q must be positive".into()));
        }
        if n < 3 {
            return Err(Error::InvalidArgument("need at least 3 nodes per side".into()));
        }
        let h = 2.0 * HALF / (n - 1) as f64;
        let mut heights = Vec::with_capacity(n * n * q);
        for iy in 0..n {
            for ix in 0..n {
                let mut v = f([-HALF + ix as f64 * h, -HALF + iy as f64 * h]);
                if v.len() != q {
                    return Err(Error::Multiplicity { expected: q, found: v.len() });
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidArgument("sheet heights must be finite".into()));
                }
                v.sort_by(|a, b| a.total_cmp(b));
                heights.extend(v);
            }
        }
        let mut c = GraphCurrent {
            q,
            n,
            h,
            heights,
            grads: vec![],
        };
        c.grads = c.compute_gradients();
        Ok(c)
    }

    pub fn flat(q: usize, n: usize, level: f64) -> Result<GraphCurrent> {
        GraphCurrent::from_fn(q, n, |_| vec![level; q])
    }

    pub fn bumps(q: usize, n: usize, bumps: &[Bump]) -> Result<GraphCurrent> {
        GraphCurrent::from_fn(q, n, |p| {
            let b: f64 = bumps.iter().map(|b| b.eval(p)).sum();
            (0..q).map(|i| (i + 1) as f64 * b).collect()
        })
    }

    /// Sheets taken from the values of a field on an unmasked square grid
    /// spanning `[-4, 4]²`; signs are ignored.
    pub fn from_field(field: &SampledField) -> Result<GraphCurrent> {
        let Mesh::Grid(g) = field.mesh() else {
            return Err(Error::InvalidArgument("a graph current needs a 2D grid field".into()));
        };
        let fits = |a: f64, b: f64| (a - b).abs() < 1e-9;
        if g.disk.is_some() || g.nx != g.ny || !fits(g.x0, -HALF) || !fits(g.y0, -HALF) || !fits(g.x1(), HALF) {
            return Err(Error::InvalidArgument("the field grid must be the full square [-4, 4]^2".into()));
        }
        let n = g.nx;
        GraphCurrent::from_fn(field.q(), n, |p| {
            let ix = ((p[0] + HALF) / g.h).round() as usize;
            let iy = ((p[1] + HALF) / g.h).round() as usize;
            field.values(g.index(ix, iy)).to_vec()
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn nodes_per_side(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn node_xy(&self, ix: usize, iy: usize) -> [f64; 2] {
        [-HALF + ix as f64 * self.h, -HALF + iy as f64 * self.h]
    }

    pub fn sheets(&self, ix: usize, iy: usize) -> &[f64] {
        let k = (ix + self.n * iy) * self.q;
        &self.heights[k..k + self.q]
    }

    /// Finite-difference gradient of sheet `i` (central inside, one-sided at the edge).
    pub fn gradient(&self, ix: usize, iy: usize, i: usize) -> [f64; 2] {
        self.grads[(ix + self.n * iy) * self.q + i]
    }

    fn compute_gradients(&self) -> Vec<[f64; 2]> {
        let (n, q, h) = (self.n, self.q, self.h);
        let at = |ix: usize, iy: usize, i: usize| self.heights[(ix + n * iy) * q + i];
        let d = |lo: f64, hi: f64, span: usize| (hi - lo) / (span as f64 * h);
        let mut out = Vec::with_capacity(n * n * q);
        for iy in 0..n {
            for ix in 0..n {
                let (xl, xh) = (ix.saturating_sub(1), (ix + 1).min(n - 1));
                let (yl, yh) = (iy.saturating_sub(1), (iy + 1).min(n - 1));
                for i in 0..q {
                    out.push([
                        d(at(xl, iy, i), at(xh, iy, i), xh - xl),
                        d(at(ix, yl, i), at(ix, yh, i), yh - yl),
                    ]);
                }
            }
        }
        out
    }

    /// Lowest sheet at the node nearest `p` (clamped to the square).
    pub fn lowest_sheet_near(&self, p: [f64; 2]) -> f64 {
        let idx = |x: f64| (((x + HALF) / self.h).round().max(0.0) as usize).min(self.n - 1);
        self.sheets(idx(p[0]), idx(p[1]))[0]
    }

    /// Mass-weighted sheet samples whose graph point lies in the ball; the
    /// current is extended outside the square by its constant boundary values.
    fn ball_samples(&self, center: [f64; 3], r: f64, mut f: impl FnMut([f64; 3], [f64; 3], f64)) -> bool {
        let (n, h) = (self.n as i64, self.h);
        let lo = |c: f64| ((c - r + HALF) / h).floor() as i64;
        let hi = |c: f64| ((c + r + HALF) / h).ceil() as i64;
        let mut extended = false;
        for jy in lo(center[1])..=hi(center[1]) {
            let y = -HALF + jy as f64 * h;
            let dy = y - center[1];
            for jx in lo(center[0])..=hi(center[0]) {
                let x = -HALF + jx as f64 * h;
                let dx = x - center[0];
                let rxy = dx * dx + dy * dy;
                if rxy > r * r {
                    continue;
                }
                let ox = jx < 0 || jx >= n;
                let oy = jy < 0 || jy >= n;
                let (cx, cy) = (jx.clamp(0, n - 1) as usize, jy.clamp(0, n - 1) as usize);
                for i in 0..self.q {
                    let z = self.sheets(cx, cy)[i];
                    let dz = z - center[2];
                    if rxy + dz * dz > r * r {
                        continue;
                    }
                    extended |= ox || oy;
                    let g = self.gradient(cx, cy, i);
                    let (gx, gy) = (if ox { 0.0 } else { g[0] }, if oy { 0.0 } else { g[1] });
                    let j = (1.0 + gx * gx + gy * gy).sqrt();
                    f([x, y, z], [-gx / j, -gy / j, 1.0 / j], j * h * h);
                }
            }
        }
        extended
    }
}

/// A hyperplane of `ℝ³` through the origin given by its unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: [f64; 3],
}

impl Plane {
    pub const HORIZONTAL: Plane = Plane { normal: [0.0, 0.0, 1.0] };

    pub fn from_normal(v: [f64; 3]) -> Result<Plane> {
        let l = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidArgument("plane normal must be nonzero".into()));
        }
        let s = if v[2] < 0.0 { -1.0 } else { 1.0 };
        Ok(Plane {
            normal: [s * v[0] / l, s * v[1] / l, s * v[2] / l],
        })
    }

    /// Tangent plane of the graph of a linear function with gradient `g`.
    pub fn graph_of(g: [f64; 2]) -> Plane {
        Plane::from_normal([-g[0], -g[1], 1.0]).expect("nonzero normal")
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("ball radius must be positive, got {r}")));
    }
    Ok(())
}

/// `(2 ω_m r^m)^-1 ∫ |π(x) - π|²` over the part of the current in the ball,
/// the integrand being the squared Frobenius distance of the projections.
pub fn unoriented_excess(current: &GraphCurrent, center: [f64; 3], r: f64, plane: &Plane) -> Result<f64> {
    check_radius(r)?;
    let mut acc = 0.0;
    current.ball_samples(center, r, |_, nu, w| {
        let c = dot(nu, plane.normal);
        acc += w * (2.0 - 2.0 * c * c);
    });
    Ok((acc / (2.0 * PI * r.powf(M))).max(0.0))
}

/// Excess minimized over planes: the normal is the top eigenvector of the
/// mass-weighted average of `ν νᵀ`.
pub fn best_plane_excess(current: &GraphCurrent, center: [f64; 3], r: f64) -> Result<(Plane, f64)> {
    check_radius(r)?;
    let s = accumulate(current, center, r);
    Ok(s.best(r))
}

/// `sup |p_π⊥(q₁ - q₂)|` over pairs of graph points in the ball.
pub fn height(current: &GraphCurrent, center: [f64; 3], r: f64, plane: &Plane) -> Result<f64> {
    check_radius(r)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    current.ball_samples(center, r, |p, _, _| {
        let t = dot(p, plane.normal);
        lo = lo.min(t);
        hi = hi.max(t);
    });
    Ok(if hi >= lo { hi - lo } else { 0.0 })
}

struct BallStats {
    mass: f64,
    moment: Matrix3<f64>,
    points: Vec<[f64; 3]>,
    extended: bool,
}

fn accumulate(current: &GraphCurrent, center: [f64; 3], r: f64) -> BallStats {
    let mut mass = 0.0;
    let mut moment = Matrix3::zeros();
    let mut points = vec![];
    let extended = current.ball_samples(center, r, |p, nu, w| {
        let v = Vector3::from(nu);
        mass += w;
        moment += w * v * v.transpose();
        points.push(p);
    });
    BallStats {
        mass,
        moment,
        points,
        extended,
    }
}

impl BallStats {
    fn best(&self, r: f64) -> (Plane, f64) {
        if self.mass == 0.0 {
            return (Plane::HORIZONTAL, 0.0);
        }
        // exactly flat balls stay exactly at zero
        if self.moment[(0, 0)] == 0.0 && self.moment[(1, 1)] == 0.0 {
            return (Plane::HORIZONTAL, 0.0);
        }
        let eig = SymmetricEigen::new(self.moment);
        let k = eig.eigenvalues.imax();
        let v = eig.eigenvectors.column(k);
        let plane = Plane::from_normal([v[0], v[1], v[2]]).unwrap_or(Plane::HORIZONTAL);
        let top = eig.eigenvalues[k];
        let e = (2.0 * self.mass - 2.0 * top) / (2.0 * PI * r.powf(M));
        (plane, e.max(0.0))
    }

    fn height(&self, plane: &Plane) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &self.points {
            let t = dot(*p, plane.normal);
            lo = lo.min(t);
            hi = hi.max(t);
        }
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WhitneyParams {
    pub n0: i32,
    pub m0_side: f64,
    pub ce: f64,
    pub ch: f64,
    pub delta2: f64,
    pub beta2: f64,
    /// Overrides the excess scale measured from the input.
    pub m0: Option<f64>,
    /// Curvature scale of the ambient surface; `m₀ ≥ c²`.
    pub c_sigma: f64,
}

impl Default for WhitneyParams {
    fn default() -> Self {
        WhitneyParams {
            n0: 10,
            m0_side: 4.0,
            ce: 1.0,
            ch: 1.0,
            delta2: 1.0 / 16.0,
            beta2: 0.25,
            m0: None,
            c_sigma: 0.0,
        }
    }
}

impl WhitneyParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Constraint(m));
        if !(self.delta2 > 0.0 && self.beta2 > 0.0) {
            return bad("delta2 and beta2 must be positive".into());
        }
        if (self.beta2 - 4.0 * self.delta2).abs() > 1e-12 {
            return bad(format!("beta2 = {} must equal 4 delta2 = {}", self.beta2, 4.0 * self.delta2));
        }
        if self.m0_side < 4.0 {
            return bad(format!("M0 = {} must be at least 4", self.m0_side));
        }
        if M.sqrt() * self.m0_side * 2f64.powi(7 - self.n0) > 1.0 {
            return bad(format!("sqrt(m) M0 2^(7-N0) <= 1 fails for M0 = {}, N0 = {}", self.m0_side, self.n0));
        }
        if !(self.ce > 0.0 && self.ch > 0.0) {
            return bad("Ce and Ch must be positive".into());
        }
        if self.c_sigma < 0.0 || self.m0.is_some_and(|m| !(m >= 0.0)) {
            return bad("m0 and c_sigma must be nonnegative".into());
        }
        Ok(())
    }

    /// Half-side `ℓ = 2^-j`.
    pub fn half_side(j: i32) -> f64 {
        2f64.powi(-j)
    }

    /// Radius `64 M₀ √m ℓ` of the ball attached to a generation-`j` cube.
    pub fn ball_radius(&self, j: i32) -> f64 {
        64.0 * self.m0_side * M.sqrt() * Self::half_side(j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CubeClass {
    S,
    We,
    Wh,
    Wn,
}

impl CubeClass {
    pub fn label(self) -> &'static str {
        match self {
            CubeClass::S => "S",
            CubeClass::We => "We",
            CubeClass::Wh => "Wh",
            CubeClass::Wn => "Wn",
        }
    }
}

/// Dyadic cube of generation `j`: `[-4 + 2ℓ ix, -4 + 2ℓ (ix + 1)] × ...`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CubeKey {
    pub j: i32,
    pub ix: i64,
    pub iy: i64,
}

impl CubeKey {
    pub const ROOT: CubeKey = CubeKey {
        j: ROOT_GENERATION,
        ix: 0,
        iy: 0,
    };

    pub fn half_side(&self) -> f64 {
        WhitneyParams::half_side(self.j)
    }

    pub fn center(&self) -> [f64; 2] {
        let s = 2.0 * self.half_side();
        [-HALF + (self.ix as f64 + 0.5) * s, -HALF + (self.iy as f64 + 0.5) * s]
    }

    pub fn per_side(j: i32) -> i64 {
        1i64 << (j - ROOT_GENERATION)
    }

    pub fn ancestor(&self, k: i32) -> CubeKey {
        debug_assert!(k <= self.j);
        let s = self.j - k;
        CubeKey {
            j: k,
            ix: self.ix >> s,
            iy: self.iy >> s,
        }
    }

    pub fn father(&self) -> CubeKey {
        self.ancestor(self.j - 1)
    }

    pub fn children(&self) -> [CubeKey; 4] {
        let (x, y, j) = (2 * self.ix, 2 * self.iy, self.j + 1);
        [
            CubeKey { j, ix: x, iy: y },
            CubeKey { j, ix: x + 1, iy: y },
            CubeKey { j, ix: x, iy: y + 1 },
            CubeKey { j, ix: x + 1, iy: y + 1 },
        ]
    }

    /// Closed squares `[x0, x1] × [y0, y1]`.
    pub fn bounds(&self) -> [f64; 4] {
        let s = 2.0 * self.half_side();
        let (x0, y0) = (-HALF + self.ix as f64 * s, -HALF + self.iy as f64 * s);
        [x0, x0 + s, y0, y0 + s]
    }

    /// Euclidean distance from a point to the closed square.
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        let b = self.bounds();
        let dx = (b[0] - p[0]).max(0.0).max(p[0] - b[1]);
        let dy = (b[2] - p[1]).max(0.0).max(p[1] - b[3]);
        dx.hypot(dy)
    }

    /// Whether the closed squares intersect.
    pub fn touches(&self, other: &CubeKey) -> bool {
        let (a, b) = (self.bounds(), other.bounds());
        a[0] <= b[1] && b[0] <= a[1] && a[2] <= b[3] && b[2] <= a[3]
    }

    /// Whether `other` is this cube or one of its descendants.
    pub fn contains_key(&self, other: &CubeKey) -> bool {
        other.j >= self.j && other.ancestor(self.j) == *self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubeNode {
    pub key: CubeKey,
    pub center: [f64; 2],
    pub half_side: f64,
    pub anchor: f64,
    pub class: CubeClass,
    pub e_no: f64,
    pub height: f64,
}

/// One element of `𝒮ʲ`: an evaluated cube of generation `j`, or a block
/// of an earlier generation whose generation-`j` descendants all see a flat
/// current (zero excess and height).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SItem {
    Cube(CubeNode),
    Quiet(CubeKey),
}

impl SItem {
    pub fn key(&self) -> CubeKey {
        match self {
            SItem::Cube(c) => c.key,
            SItem::Quiet(k) => *k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSnapshot {
    pub j: i32,
    pub s: Vec<SItem>,
    pub we: Vec<CubeNode>,
    pub wh: Vec<CubeNode>,
    pub wn: Vec<CubeNode>,
    pub evaluated: usize,
}

impl GenerationSnapshot {
    pub fn w(&self) -> impl Iterator<Item = &CubeNode> {
        self.we.iter().chain(&self.wh).chain(&self.wn)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeForest {
    pub params: WhitneyParams,
    pub j_max: i32,
    pub m0: f64,
    pub ex_threshold: Vec<f64>,
    pub ht_threshold: Vec<f64>,
    pub generations: Vec<GenerationSnapshot>,
    pub father_rule_checked: usize,
    pub father_rule_violations: usize,
    /// Some ball left `[-4, 4]²` and used the constant boundary extension.
    pub boundary_extended: bool,
    /// Per grid node of the current (row-major): in the contact set.
    pub gamma: Vec<bool>,
    pub gamma_side: usize,
    pub notes: Vec<String>,
}

struct Flatness {
    n: usize,
    h: f64,
    rough: Vec<bool>,
    prefix: Vec<u32>,
}

impl Flatness {
    /// Marks nodes where some sheet differs from the lowest sheet at the
    /// corner `(-4, -4)` or has a nonzero gradient.
    fn new(c: &GraphCurrent) -> Flatness {
        let n = c.n;
        let reference = c.sheets(0, 0)[0];
        let w = n + 1;
        let mut rough = vec![false; n * n];
        let mut prefix = vec![0u32; w * w];
        for iy in 0..n {
            let mut row = 0u32;
            for ix in 0..n {
                let r = (0..c.q).any(|i| {
                    let g = c.gradient(ix, iy, i);
                    c.sheets(ix, iy)[i] != reference || g[0] != 0.0 || g[1] != 0.0
                });
                rough[ix + n * iy] = r;
                row += r as u32;
                prefix[ix + 1 + w * (iy + 1)] = prefix[ix + 1 + w * iy] + row;
            }
        }
        Flatness { n, h: c.h, rough, prefix }
    }

    /// Node index range `[lo, hi)` with coordinates in `[a, b]`, clamped.
    fn range(&self, a: f64, b: f64) -> (usize, usize) {
        let n = self.n as i64;
        let lo = (((a + HALF) / self.h) - 1e-9).ceil() as i64;
        let hi = (((b + HALF) / self.h) + 1e-9).floor() as i64 + 1;
        (lo.clamp(0, n) as usize, hi.clamp(0, n) as usize)
    }

    fn count(&self, x: (usize, usize), y: (usize, usize)) -> u32 {
        if x.0 >= x.1 || y.0 >= y.1 {
            return 0;
        }
        let w = self.n + 1;
        self.prefix[x.1 + w * y.1] + self.prefix[x.0 + w * y.0] - self.prefix[x.0 + w * y.1] - self.prefix[x.1 + w * y.0]
    }

    /// No rough node lies within `R_j` of the closed square, so every ball of
    /// a generation-`j` (or finer) descendant sees a flat current. Nodes
    /// outside the square take the value of their clamped node, which is no
    /// farther from any center inside the square.
    fn quiet(&self, key: &CubeKey, params: &WhitneyParams, j: i32) -> bool {
        let r = params.ball_radius(j) * (1.0 + 1e-12);
        let b = key.bounds();
        let (x_in, y_in) = (self.range(b[0], b[1]), self.range(b[2], b[3]));
        let (x_out, y_out) = (self.range(b[0] - r, b[1] + r), self.range(b[2] - r, b[3] + r));
        if self.count(x_out, y_in) > 0 || self.count(x_in, y_out) > 0 {
            return false;
        }
        for (cx, cy) in [(b[0], b[2]), (b[1], b[2]), (b[0], b[3]), (b[1], b[3])] {
            let xr = if cx == b[0] { self.range(b[0] - r, b[0]) } else { self.range(b[1], b[1] + r) };
            let yr = if cy == b[2] { self.range(b[2] - r, b[2]) } else { self.range(b[3], b[3] + r) };
            if self.count(xr, yr) == 0 {
                continue;
            }
            for iy in yr.0..yr.1 {
                for ix in xr.0..xr.1 {
                    if !self.rough[ix + self.n * iy] {
                        continue;
                    }
                    let (x, y) = (-HALF + ix as f64 * self.h, -HALF + iy as f64 * self.h);
                    if (x - cx).hypot(y - cy) <= r {
                        return false;
                    }
                }
            }
        }
        true
    }
}

struct Evaluation {
    key: CubeKey,
    anchor: f64,
    e_no: f64,
    height: f64,
    extended: bool,
}

fn evaluate(current: &GraphCurrent, params: &WhitneyParams, key: CubeKey) -> Evaluation {
    let c = key.center();
    let anchor = current.lowest_sheet_near(c);
    let r = params.ball_radius(key.j);
    let stats = accumulate(current, [c[0], c[1], anchor], r);
    let (plane, e_no) = stats.best(r);
    let height = stats.height(&plane);
    Evaluation {
        key,
        anchor,
        e_no,
        height,
        extended: stats.extended,
    }
}

fn node(ev: &Evaluation, class: CubeClass) -> CubeNode {
    CubeNode {
        key: ev.key,
        center: ev.key.center(),
        half_side: ev.key.half_side(),
        anchor: ev.anchor,
        class,
        e_no: ev.e_no,
        height: ev.height,
    }
}

fn find_ancestor<V>(items: &BTreeMap<CubeKey, V>, key: &CubeKey) -> Option<CubeKey> {
    (ROOT_GENERATION..=key.j).rev().map(|k| key.ancestor(k)).find(|a| items.contains_key(a))
}

/// Measured excess scale: `max(E(B_{6√m}(0), π₀), c²)`.
pub fn excess_scale(current: &GraphCurrent, c_sigma: f64) -> Result<f64> {
    let e = unoriented_excess(current, [0.0; 3], 6.0 * M.sqrt(), &Plane::HORIZONTAL)?;
    Ok(e.max(c_sigma * c_sigma))
}

/// Runs the stopping procedure for generations `N₀..=j_max`.
pub fn refine(current: &GraphCurrent, params: &WhitneyParams, j_max: i32) -> Result<CubeForest> {
    params.validate()?;
    if j_max < params.n0 {
        return Err(Error::InvalidArgument(format!("j_max = {j_max} must be at least N0 = {}", params.n0)));
    }
    if j_max > 40 {
        return Err(Error::InvalidArgument("j_max above 40 is not supported".into()));
    }
    let m0 = match params.m0 {
        Some(m) => m,
        None => excess_scale(current, params.c_sigma)?,
    };
    let flat = Flatness::new(current);
    let ex = |j: i32| params.ce * m0 * WhitneyParams::half_side(j).powf(2.0 - 2.0 * params.delta2);
    let ht = |j: i32| params.ch * m0.powf(1.0 / M) * WhitneyParams::half_side(j).powf(1.0 + params.beta2);

    let mut generations: Vec<GenerationSnapshot> = vec![];
    let mut prev: BTreeMap<CubeKey, SItem> = BTreeMap::new();
    let mut extended = false;
    let (mut checked, mut violations) = (0usize, 0usize);
    for j in params.n0..=j_max {
        let mut items: BTreeMap<CubeKey, SItem> = BTreeMap::new();
        let mut candidates = vec![];
        if j == params.n0 {
            let mut stack = vec![CubeKey::ROOT];
            while let Some(k) = stack.pop() {
                if flat.quiet(&k, params, j) {
                    items.insert(k, SItem::Quiet(k));
                } else if k.j < j {
                    stack.extend(k.children());
                } else {
                    candidates.push(k);
                }
            }
        } else {
            for (k, it) in &prev {
                match it {
                    SItem::Quiet(_) => {
                        items.insert(*k, *it);
                    }
                    SItem::Cube(_) => {
                        for ch in k.children() {
                            if flat.quiet(&ch, params, j) {
                                items.insert(ch, SItem::Quiet(ch));
                            } else {
                                candidates.push(ch);
                            }
                        }
                    }
                }
            }
        }
        candidates.sort();
        let evals: Vec<Evaluation> = candidates.par_iter().map(|k| evaluate(current, params, *k)).collect();
        let (tex, tht) = (ex(j), ht(j));
        let mut snap = GenerationSnapshot {
            j,
            s: vec![],
            we: vec![],
            wh: vec![],
            wn: vec![],
            evaluated: evals.len(),
        };
        for ev in &evals {
            extended |= ev.extended;
            if ev.e_no > tex {
                snap.we.push(node(ev, CubeClass::We));
            } else if ev.height > tht {
                snap.wh.push(node(ev, CubeClass::Wh));
            } else {
                items.insert(ev.key, SItem::Cube(node(ev, CubeClass::S)));
            }
        }
        if let Some(last) = generations.last() {
            let mut ring: Vec<CubeKey> = last.w().flat_map(|w| ring_cells(&w.key)).collect();
            ring.sort();
            ring.dedup();
            for cell in ring {
                let Some(owner) = find_ancestor(&items, &cell) else { continue };
                let it = items.remove(&owner).expect("present");
                let nn = match it {
                    SItem::Cube(c) => CubeNode { class: CubeClass::Wn, ..c },
                    SItem::Quiet(_) => {
                        // split the block down to the cell
                        for l in owner.j + 1..=j {
                            let parent = cell.ancestor(l - 1);
                            let own = cell.ancestor(l);
                            for sib in parent.children() {
                                if sib != own {
                                    items.insert(sib, SItem::Quiet(sib));
                                }
                            }
                        }
                        CubeNode {
                            key: cell,
                            center: cell.center(),
                            half_side: cell.half_side(),
                            anchor: current.lowest_sheet_near(cell.center()),
                            class: CubeClass::Wn,
                            e_no: 0.0,
                            height: 0.0,
                        }
                    }
                };
                snap.wn.push(nn);
            }
        }
        // father rule against the previous generation
        if j > params.n0 {
            let keys = items.keys().copied().chain(snap.w().map(|c| c.key));
            for k in keys.collect::<Vec<_>>() {
                let target = if k.j == j { k.father() } else { k };
                checked += 1;
                if find_ancestor(&prev, &target).is_none() {
                    violations += 1;
                }
            }
        }
        snap.we.sort_by_key(|c| c.key);
        snap.wh.sort_by_key(|c| c.key);
        snap.wn.sort_by_key(|c| c.key);
        snap.s = items.values().copied().collect();
        generations.push(snap);
        prev = items;
    }
    if violations > 0 {
        return Err(Error::Constraint(format!("father rule violated by {violations} cubes")));
    }
    let n = current.n;
    let mut gamma = vec![false; n * n];
    let cell = 2.0 * WhitneyParams::half_side(j_max);
    let side = CubeKey::per_side(j_max);
    let cands = |x: f64| {
        let t = (x + HALF) / cell;
        let f = t.floor() as i64;
        let mut v = vec![f];
        if t == f as f64 {
            v.push(f - 1);
        }
        v.into_iter().filter(move |i| *i >= 0 && *i < side)
    };
    for iy in 0..n {
        for ix in 0..n {
            let p = current.node_xy(ix, iy);
            gamma[ix + n * iy] = cands(p[0]).any(|cx| {
                cands(p[1]).any(|cy| find_ancestor(&prev, &CubeKey { j: j_max, ix: cx, iy: cy }).is_some())
            });
        }
    }
    let mut notes = vec!["delta2 ignores the external exponent gamma1".to_string()];
    if extended {
        notes.push("some balls left [-4,4]^2; the current was extended by its boundary values".into());
    }
    Ok(CubeForest {
        params: *params,
        j_max,
        m0,
        ex_threshold: (params.n0..=j_max).map(ex).collect(),
        ht_threshold: (params.n0..=j_max).map(ht).collect(),
        generations,
        father_rule_checked: checked,
        father_rule_violations: violations,
        boundary_extended: extended,
        gamma,
        gamma_side: n,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineCmViolation {
    pub mark: [f64; 2],
    pub cube: CubeKey,
    pub half_side: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineCmReport {
    pub pass: bool,
    pub cubes_checked: usize,
    pub violations: Vec<FineCmViolation>,
}

/// Checks `ℓ(L) < dist(x, L)/(64 √m)` for every stopped cube and mark.
pub fn check_fine_cm(forest: &CubeForest, marks: &[[f64; 2]]) -> FineCmReport {
    let mut violations = vec![];
    let mut n = 0;
    for w in forest.w_cubes() {
        n += 1;
        for &m in marks {
            let d = w.key.distance(m);
            if !(w.half_side < d / (64.0 * M.sqrt())) {
                violations.push(FineCmViolation {
                    mark: m,
                    cube: w.key,
                    half_side: w.half_side,
                    distance: d,
                });
            }
        }
    }
    FineCmReport {
        pass: violations.is_empty(),
        cubes_checked: n,
        violations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NnAudit {
    pub wn_checked: usize,
    pub wn_without_neighbor: usize,
    pub survivors_touching_w: usize,
}

impl CubeForest {
    pub fn snapshot(&self, j: i32) -> Option<&GenerationSnapshot> {
        self.generations.iter().find(|g| g.j == j)
    }

    pub fn w_cubes(&self) -> impl Iterator<Item = &CubeNode> {
        self.generations.iter().flat_map(|g| g.w())
    }

    pub fn w_count(&self) -> usize {
        self.w_cubes().count()
    }

    pub fn index(&self) -> ForestIndex {
        let mut w = BTreeMap::new();
        let mut evaluated = BTreeMap::new();
        for g in &self.generations {
            for c in g.w() {
                w.insert(c.key, *c);
                evaluated.insert(c.key, *c);
            }
            for it in &g.s {
                if let SItem::Cube(c) = it {
                    evaluated.insert(c.key, *c);
                }
            }
        }
        ForestIndex { w, evaluated }
    }

    /// Total area of `𝒮^{j_max}` plus all stopped cubes; equals 64 exactly
    /// when the family tiles the square.
    pub fn covered_area(&self) -> f64 {
        let area = |k: &CubeKey| (2.0 * k.half_side()).powi(2);
        let last = self.generations.last().expect("at least one generation");
        last.s.iter().map(|it| area(&it.key())).sum::<f64>() + self.w_cubes().map(|c| area(&c.key)).sum::<f64>()
    }

    /// Pairs of stopped cubes with overlapping interiors (one contains the other
    /// or they coincide).
    pub fn overlapping_w_pairs(&self) -> usize {
        let all: BTreeSet<CubeKey> = self.w_cubes().map(|c| c.key).collect();
        let mut bad = self.w_count() - all.len();
        for k in &all {
            bad += (ROOT_GENERATION..k.j).filter(|&a| all.contains(&k.ancestor(a))).count();
        }
        bad
    }

    /// `𝒲_n` cubes touch a stopped cube of the previous generation, and no
    /// surviving cube does.
    pub fn nn_audit(&self) -> NnAudit {
        let mut a = NnAudit {
            wn_checked: 0,
            wn_without_neighbor: 0,
            survivors_touching_w: 0,
        };
        for pair in self.generations.windows(2) {
            let (prev, cur) = (&pair[0], &pair[1]);
            let prev_w: BTreeSet<CubeKey> = prev.w().map(|c| c.key).collect();
            let survivors: BTreeMap<CubeKey, ()> = cur.s.iter().map(|it| (it.key(), ())).collect();
            let side = CubeKey::per_side(prev.j);
            for c in &cur.wn {
                a.wn_checked += 1;
                let f = c.key.father();
                let touching = (-1..=1i64).any(|dy| {
                    (-1..=1i64).any(|dx| {
                        let k = CubeKey {
                            j: f.j,
                            ix: f.ix + dx,
                            iy: f.iy + dy,
                        };
                        k.ix >= 0 && k.iy >= 0 && k.ix < side && k.iy < side && prev_w.contains(&k) && k.touches(&c.key)
                    })
                });
                if !touching {
                    a.wn_without_neighbor += 1;
                }
            }
            // a surviving item touching a stopped cube contains one of its ring cells
            let mut hit = BTreeSet::new();
            for w in &prev_w {
                for cell in ring_cells(w) {
                    if let Some(owner) = find_ancestor(&survivors, &cell) {
                        hit.insert(owner);
                    }
                }
            }
            a.survivors_touching_w += hit.len();
        }
        a
    }
}

/// The 12 cells of generation `j + 1` around a generation-`j` cube.
fn ring_cells(w: &CubeKey) -> impl Iterator<Item = CubeKey> + '_ {
    let j = w.j + 1;
    let side = CubeKey::per_side(j);
    let (bx, by) = (2 * w.ix, 2 * w.iy);
    (-1..=2i64).flat_map(move |dy| {
        (-1..=2i64).filter_map(move |dx| {
            let inner = (0..=1).contains(&dx) && (0..=1).contains(&dy);
            let (x, y) = (bx + dx, by + dy);
            (!inner && x >= 0 && y >= 0 && x < side && y < side).then_some(CubeKey { j, ix: x, iy: y })
        })
    })
}

/// Key lookups over a forest.
#[derive(Debug, Clone)]
pub struct ForestIndex {
    w: BTreeMap<CubeKey, CubeNode>,
    evaluated: BTreeMap<CubeKey, CubeNode>,
}

impl ForestIndex {
    /// The stopped cube containing `key` (itself or an ancestor), if any.
    pub fn stopped_cover(&self, key: &CubeKey) -> Option<&CubeNode> {
        find_ancestor(&self.w, key).map(|k| &self.w[&k])
    }

    /// The cube as classified where it was evaluated or stopped.
    pub fn record(&self, key: &CubeKey) -> Option<&CubeNode> {
        self.evaluated.get(key)
    }
}

/// Cubes of `𝒲_e ∪ 𝒲_h` in `raised` (a run with larger `C_e`, `C_h`) that
/// are not accounted for by `base`: a cube evaluated in `base` at the same
/// generation must have stopped there by EX or HT, any other cube must lie
/// inside a cube stopped earlier in `base`.
pub fn shrinkage_violations(base: &CubeForest, raised: &CubeForest) -> Vec<CubeKey> {
    let idx = base.index();
    let mut bad = vec![];
    for g in &raised.generations {
        for c in g.we.iter().chain(&g.wh) {
            let ok = match idx.record(&c.key) {
                Some(r) => matches!(r.class, CubeClass::We | CubeClass::Wh),
                None => idx.stopped_cover(&c.key).is_some_and(|w| w.key.j < c.key.j),
            };
            if !ok {
                bad.push(c.key);
            }
        }
    }
    bad
}

fn fmt_node(out: &mut String, j: i32, c: &CubeNode) {
    out.push_str(&format!(
        "{j},{},{},{},{},{},{}\n",
        c.center[0],
        c.center[1],
        c.half_side,
        c.class.label(),
        c.e_no,
        c.height
    ));
}

/// One row per cube and generation: `j,cx,cy,half,class,e_no,height`; quiet
/// blocks of `𝒮ʲ` appear with class `Sq`.
pub fn forest_csv(forest: &CubeForest) -> String {
    let mut out = String::from("j,cx,cy,half,class,e_no,height\n");
    for g in &forest.generations {
        for it in &g.s {
            match it {
                SItem::Cube(c) => fmt_node(&mut out, g.j, c),
                SItem::Quiet(k) => {
                    let c = k.center();
                    out.push_str(&format!("{},{},{},{},Sq,0,0\n", g.j, c[0], c[1], k.half_side()));
                }
            }
        }
        for c in g.w() {
            fmt_node(&mut out, g.j, c);
        }
    }
    out
}

/// Contact-set mask on the nodes of the current: `x,y,gamma`.
pub fn gamma_csv(forest: &CubeForest, current: &GraphCurrent) -> String {
    let n = forest.gamma_side;
    let mut out = String::from("x,y,gamma\n");
    for iy in 0..n {
        for ix in 0..n {
            let p = current.node_xy(ix, iy);
            out.push_str(&format!("{},{},{}\n", p[0], p[1], forest.gamma[ix + n * iy] as u8));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tilted(s: f64) -> GraphCurrent {
        GraphCurrent::from_fn(1, 129, |p| vec![s * p[0]]).unwrap()
    }

    #[test]
    fn flat_excess_and_height_vanish() {
        let c = GraphCurrent::flat(2, 65, 0.0).unwrap();
        let e = unoriented_excess(&c, [0.0; 3], 1.0, &Plane::HORIZONTAL).unwrap();
        assert_eq!(e, 0.0);
        let (p, e) = best_plane_excess(&c, [0.5, 0.5, 0.0], 1.0).unwrap();
        assert_eq!((p, e), (Plane::HORIZONTAL, 0.0));
        assert_eq!(height(&c, [0.0; 3], 1.0, &Plane::HORIZONTAL).unwrap(), 0.0);
        assert!(unoriented_excess(&c, [0.0; 3], 0.0, &Plane::HORIZONTAL).is_err());
    }

    #[test]
    fn tilted_sheet_excess() {
        for s in [0.05, 0.1, 0.2] {
            let c = tilted(s);
            let r = 1.5;
            let e = unoriented_excess(&c, [0.0; 3], r, &Plane::HORIZONTAL).unwrap();
            let exact = s * s / (1.0 + s * s);
            assert!((e - exact).abs() < 0.03 * exact, "{s} {e} {exact}");
            assert!((e - s * s).abs() < 0.05 * s * s);
            let own = unoriented_excess(&c, [0.0; 3], r, &Plane::graph_of([s, 0.0])).unwrap();
            assert!(own < 1e-12);
            let (p, best) = best_plane_excess(&c, [0.0; 3], r).unwrap();
            assert!(best < 1e-12);
            let want = Plane::graph_of([s, 0.0]).normal;
            assert!(p.normal.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-9));
        }
    }

    #[test]
    fn opposite_slopes_prefer_horizontal() {
        let s = 0.1;
        // the sorted sheets kink along x = 0, where the central difference is biased
        let c = GraphCurrent::from_fn(2, 257, |p| vec![s * p[0], -s * p[0]]).unwrap();
        let (p, e) = best_plane_excess(&c, [0.0; 3], 1.5).unwrap();
        assert!(p.normal[2] > 1.0 - 1e-9, "{p:?}");
        let exact = 2.0 * s * s / (1.0 + s * s);
        assert!((e - exact).abs() < 0.03 * exact, "{e} {exact}");
    }

    #[test]
    fn heights() {
        let c = GraphCurrent::from_fn(2, 65, |_| vec![0.0, 0.3]).unwrap();
        let h = height(&c, [0.0; 3], 1.0, &Plane::HORIZONTAL).unwrap();
        assert!((h - 0.3).abs() < 1e-14);
        let s = 0.1;
        let r = 1.0;
        let c = tilted(s);
        let h = height(&c, [0.0; 3], r, &Plane::HORIZONTAL).unwrap();
        // extremal pair on the diameter of the tilted disk
        let exact = 2.0 * r * s / (1.0 + s * s).sqrt();
        assert!((h - exact).abs() <= 2.0 * s * c.spacing(), "{h} {exact}");
    }

    #[test]
    fn params_validation() {
        let p = WhitneyParams::default();
        p.validate().unwrap();
        assert!(WhitneyParams { beta2: 0.3, ..p }.validate().is_err());
        assert!(WhitneyParams { n0: 9, ..p }.validate().is_err());
        assert!(WhitneyParams { m0_side: 3.0, ..p }.validate().is_err());
        assert!(WhitneyParams { ce: 0.0, ..p }.validate().is_err());
        let c = GraphCurrent::flat(1, 17, 0.0).unwrap();
        assert!(refine(&c, &p, 9).is_err());
    }

    #[test]
    fn flat_forest_is_empty() {
        let c = GraphCurrent::flat(2, 65, 0.25).unwrap();
        let f = refine(&c, &WhitneyParams::default(), 12).unwrap();
        assert_eq!(f.w_count(), 0);
        assert!(f.gamma.iter().all(|&g| g));
        assert_eq!(f.covered_area(), 64.0);
        assert_eq!(f.generations[0].s, vec![SItem::Quiet(CubeKey::ROOT)]);
    }

    fn bump_current() -> GraphCurrent {
        GraphCurrent::bumps(
            2,
            129,
            &[Bump {
                center: [1.0, -0.5],
                radius: 0.3,
                amplitude: 0.5,
            }],
        )
        .unwrap()
    }

    #[test]
    fn bump_forest_structure() {
        let c = bump_current();
        let f = refine(&c, &WhitneyParams::default(), 12).unwrap();
        assert!(f.w_count() > 0);
        assert!(f.father_rule_checked > 0);
        assert_eq!(f.father_rule_violations, 0);
        assert_eq!(f.covered_area(), 64.0);
        assert_eq!(f.overlapping_w_pairs(), 0);
        let a = f.nn_audit();
        assert_eq!((a.wn_without_neighbor, a.survivors_touching_w), (0, 0));
        // the bump center (1, -0.5) is node (80, 56)
        assert_eq!(c.node_xy(80, 56), [1.0, -0.5]);
        assert!(!f.gamma[80 + 129 * 56]);
        assert!(f.index().stopped_cover(&CubeKey { j: 12, ix: 5 * 2048, iy: 3 * 2048 + 1024 }).is_some());
        assert!(f.gamma[0]);
    }

    #[test]
    fn fine_cm_checks() {
        let c = GraphCurrent::flat(1, 33, 0.0).unwrap();
        let f = refine(&c, &WhitneyParams::default(), 10).unwrap();
        assert!(check_fine_cm(&f, &[[0.0, 0.0]]).pass);
        let f = refine(&bump_current(), &WhitneyParams::default(), 11).unwrap();
        let far = [-3.5, 3.5];
        assert!(check_fine_cm(&f, &[far]).pass);
        let w = f.w_cubes().next().unwrap();
        let r = check_fine_cm(&f, &[w.center]);
        assert!(!r.pass);
        assert!(r.violations.iter().any(|v| v.distance == 0.0));
    }

    #[test]
    fn cube_geometry() {
        let k = CubeKey { j: 3, ix: 5, iy: 2 };
        assert_eq!(k.father(), CubeKey { j: 2, ix: 2, iy: 1 });
        assert_eq!(k.ancestor(ROOT_GENERATION), CubeKey::ROOT);
        assert_eq!(CubeKey::ROOT.bounds(), [-4.0, 4.0, -4.0, 4.0]);
        assert_eq!(CubeKey::per_side(10), 4096);
        for ch in k.children() {
            assert_eq!(ch.father(), k);
            assert!(k.contains_key(&ch) && k.touches(&ch));
        }
        let b = k.bounds();
        assert_eq!(k.distance([b[0] - 3.0, b[3] + 4.0]), 5.0);
    }
}
