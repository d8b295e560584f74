//! Special Q-valued functions sampled on uniform 1D or 2D meshes, their
//! discrete Dirichlet energy, domain decomposition and shared quadrature.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qspace::{self, QPoint, Sign};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskMask {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineMesh {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

impl LineMesh {
    pub fn h(&self) -> f64 {
        (self.b - self.a) / (self.n - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMesh {
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub disk: Option<DiskMask>,
    active: Vec<bool>,
}

impl GridMesh {
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix + self.nx * iy
    }

    pub fn ij(&self, node: usize) -> (usize, usize) {
        (node % self.nx, node / self.nx)
    }

    pub fn xy(&self, ix: usize, iy: usize) -> [f64; 2] {
        [self.x0 + ix as f64 * self.h, self.y0 + iy as f64 * self.h]
    }

    pub fn active_ij(&self, ix: isize, iy: isize) -> bool {
        ix >= 0
            && iy >= 0
            && (ix as usize) < self.nx
            && (iy as usize) < self.ny
            && self.active[self.index(ix as usize, iy as usize)]
    }

    pub fn x1(&self) -> f64 {
        self.x0 + (self.nx - 1) as f64 * self.h
    }

    pub fn y1(&self) -> f64 {
        self.y0 + (self.ny - 1) as f64 * self.h
    }
}

/// Uniform mesh: an interval, a rectangle, or a disk-masked grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Mesh {
    Line(LineMesh),
    Grid(GridMesh),
}

impl Mesh {
    pub fn line(a: f64, b: f64, n: usize) -> Result<Mesh> {
        if n < 3 || !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "line mesh needs a < b and n >= 3 (got [{a}, {b}], n = {n})"
            )));
        }
        Ok(Mesh::Line(LineMesh { a, b, n }))
    }

    pub fn grid(x0: f64, y0: f64, h: f64, nx: usize, ny: usize) -> Result<Mesh> {
        Self::grid_masked(x0, y0, h, nx, ny, None)
    }

    /// Square grid over `[-half, half]²` with `n` nodes per side.
    pub fn square(half: f64, n: usize) -> Result<Mesh> {
        if n < 3 || !(half > 0.0) {
            return Err(Error::InvalidArgument("square mesh needs half > 0, n >= 3".into()));
        }
        let h = 2.0 * half / (n - 1) as f64;
        Self::grid(-half, -half, h, n, n)
    }

    /// Disk of the given radius centered at the origin, masked out of an
    /// `n × n` grid over `[-radius, radius]²`.
    pub fn disk(radius: f64, n: usize) -> Result<Mesh> {
        if n < 3 || !(radius > 0.0) {
            return Err(Error::InvalidArgument("disk mesh needs radius > 0, n >= 3".into()));
        }
        let h = 2.0 * radius / (n - 1) as f64;
        Self::grid_masked(
            -radius,
            -radius,
            h,
            n,
            n,
            Some(DiskMask {
                cx: 0.0,
                cy: 0.0,
                radius,
            }),
        )
    }

    pub fn grid_masked(
        x0: f64,
        y0: f64,
        h: f64,
        nx: usize,
        ny: usize,
        disk: Option<DiskMask>,
    ) -> Result<Mesh> {
        if nx < 3 || ny < 3 || !(h > 0.0) || !x0.is_finite() || !y0.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "grid mesh needs h > 0 and at least 3 nodes per side (h = {h}, {nx} x {ny})"
            )));
        }
        let mut active = vec![true; nx * ny];
        if let Some(d) = disk {
            let tol = 1e-12 * d.radius.max(1.0);
            for iy in 0..ny {
                for ix in 0..nx {
                    let x = x0 + ix as f64 * h - d.cx;
                    let y = y0 + iy as f64 * h - d.cy;
                    active[ix + nx * iy] = (x * x + y * y).sqrt() <= d.radius + tol;
                }
            }
            if active.iter().filter(|&&a| a).count() < 3 {
                return Err(Error::InvalidArgument("disk mask keeps fewer than 3 nodes".into()));
            }
        }
        Ok(Mesh::Grid(GridMesh {
            x0,
            y0,
            h,
            nx,
            ny,
            disk,
            active,
        }))
    }

    pub fn dim(&self) -> usize {
        match self {
            Mesh::Line(_) => 1,
            Mesh::Grid(_) => 2,
        }
    }

    pub fn h(&self) -> f64 {
        match self {
            Mesh::Line(l) => l.h(),
            Mesh::Grid(g) => g.h,
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Mesh::Line(l) => l.n,
            Mesh::Grid(g) => g.nx * g.ny,
        }
    }

    pub fn is_active(&self, node: usize) -> bool {
        match self {
            Mesh::Line(l) => node < l.n,
            Mesh::Grid(g) => g.active[node],
        }
    }

    pub fn active_count(&self) -> usize {
        (0..self.node_count()).filter(|&i| self.is_active(i)).count()
    }

    pub fn coords(&self, node: usize) -> [f64; 2] {
        match self {
            Mesh::Line(l) => [l.a + node as f64 * l.h(), 0.0],
            Mesh::Grid(g) => {
                let (ix, iy) = g.ij(node);
                g.xy(ix, iy)
            }
        }
    }

    /// Calls `f(a, b)` for every edge between active nodes, in a fixed order.
    pub fn for_each_edge(&self, mut f: impl FnMut(usize, usize)) {
        match self {
            Mesh::Line(l) => (0..l.n - 1).for_each(|i| f(i, i + 1)),
            Mesh::Grid(g) => {
                for iy in 0..g.ny {
                    for ix in 0..g.nx {
                        let a = g.index(ix, iy);
                        if !g.active[a] {
                            continue;
                        }
                        if ix + 1 < g.nx && g.active[a + 1] {
                            f(a, a + 1);
                        }
                        if iy + 1 < g.ny && g.active[a + g.nx] {
                            f(a, a + g.nx);
                        }
                    }
                }
            }
        }
    }

    pub fn neighbors(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(4);
        match self {
            Mesh::Line(l) => {
                if node > 0 {
                    out.push(node - 1);
                }
                if node + 1 < l.n {
                    out.push(node + 1);
                }
            }
            Mesh::Grid(g) => {
                let (ix, iy) = g.ij(node);
                let (ix, iy) = (ix as isize, iy as isize);
                for (dx, dy) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                    if g.active_ij(ix + dx, iy + dy) {
                        out.push(g.index((ix + dx) as usize, (iy + dy) as usize));
                    }
                }
            }
        }
        out
    }

    /// Active nodes missing at least one axis neighbor.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        match self {
            Mesh::Line(l) => vec![0, l.n - 1],
            Mesh::Grid(_) => (0..self.node_count())
                .filter(|&i| self.is_active(i) && self.neighbors(i).len() < 4)
                .collect(),
        }
    }

    pub fn nearest_node(&self, p: [f64; 2]) -> Option<usize> {
        match self {
            Mesh::Line(l) => {
                let t = ((p[0] - l.a) / l.h()).round();
                let i = t.clamp(0.0, (l.n - 1) as f64) as usize;
                Some(i)
            }
            Mesh::Grid(g) => {
                let ix = ((p[0] - g.x0) / g.h).round().clamp(0.0, (g.nx - 1) as f64) as usize;
                let iy = ((p[1] - g.y0) / g.h).round().clamp(0.0, (g.ny - 1) as f64) as usize;
                let i = g.index(ix, iy);
                g.active[i].then_some(i)
            }
        }
    }

    /// Distance from `p` to the edge of the sampled domain (negative outside).
    pub fn inner_distance(&self, p: [f64; 2]) -> f64 {
        match self {
            Mesh::Line(l) => (p[0] - l.a).min(l.b - p[0]),
            Mesh::Grid(g) => {
                let rect = (p[0] - g.x0)
                    .min(g.x1() - p[0])
                    .min(p[1] - g.y0)
                    .min(g.y1() - p[1]);
                match g.disk {
                    Some(d) => {
                        let r = ((p[0] - d.cx).powi(2) + (p[1] - d.cy).powi(2)).sqrt();
                        rect.min(d.radius - r)
                    }
                    None => rect,
                }
            }
        }
    }

    pub(crate) fn check_ball(&self, center: [f64; 2], r: f64, margin: f64) -> Result<()> {
        let tol = 1e-9 * self.h();
        if !(r > 0.0) || self.inner_distance(center) + tol < r + margin {
            return Err(Error::BallOutsideDomain {
                cx: center[0],
                cy: center[1],
                radius: r,
            });
        }
        Ok(())
    }

    /// Mesh with every other node, same extent. Requires an odd node count
    /// per side.
    pub fn coarsen(&self) -> Option<Mesh> {
        match self {
            Mesh::Line(l) => {
                if l.n % 2 == 0 || l.n < 5 {
                    return None;
                }
                Mesh::line(l.a, l.b, l.n / 2 + 1).ok()
            }
            Mesh::Grid(g) => {
                if g.nx % 2 == 0 || g.ny % 2 == 0 || g.nx < 5 || g.ny < 5 {
                    return None;
                }
                Mesh::grid_masked(g.x0, g.y0, 2.0 * g.h, g.nx / 2 + 1, g.ny / 2 + 1, g.disk).ok()
            }
        }
    }
}

/// A special Q-valued function sampled at the nodes of a mesh. Values are
/// stored node-major and canonical per node; inactive nodes hold `Q[[0]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    mesh: Mesh,
    q: usize,
    values: Vec<f64>,
    signs: Vec<Sign>,
    zero_average: bool,
}

impl SampledField {
    pub fn constant(mesh: Mesh, p: &QPoint) -> SampledField {
        let n = mesh.node_count();
        let q = p.q();
        let mut values = Vec::with_capacity(n * q);
        let mut signs = Vec::with_capacity(n);
        for i in 0..n {
            if mesh.is_active(i) {
                values.extend_from_slice(p.values());
                signs.push(p.sign());
            } else {
                values.extend(std::iter::repeat(0.0).take(q));
                signs.push(Sign::Plus);
            }
        }
        SampledField {
            mesh,
            q,
            values,
            signs,
            zero_average: false,
        }
    }

    pub fn from_fn(mesh: Mesh, q: usize, f: impl Fn([f64; 2]) -> QPoint) -> Result<SampledField> {
        let mut out = SampledField::constant(mesh, &QPoint::zero(q));
        for i in 0..out.mesh.node_count() {
            if out.mesh.is_active(i) {
                let p = f(out.mesh.coords(i));
                out.set(i, &p)?;
            }
        }
        Ok(out)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn values(&self, node: usize) -> &[f64] {
        &self.values[node * self.q..(node + 1) * self.q]
    }

    pub fn sign(&self, node: usize) -> Sign {
        self.signs[node]
    }

    pub fn point(&self, node: usize) -> QPoint {
        QPoint::from_canonical(self.values(node), self.signs[node])
    }

    pub fn set(&mut self, node: usize, p: &QPoint) -> Result<()> {
        if p.q() != self.q {
            return Err(Error::Multiplicity {
                expected: self.q,
                found: p.q(),
            });
        }
        self.values[node * self.q..(node + 1) * self.q].copy_from_slice(p.values());
        self.signs[node] = p.sign();
        Ok(())
    }

    pub(crate) fn raw_mut(&mut self) -> (&mut [f64], &mut [Sign]) {
        (&mut self.values, &mut self.signs)
    }

    pub fn zero_average(&self) -> bool {
        self.zero_average
    }

    /// Asserts `η∘u ≡ 0`; fails if some node has `|η| > 1e-9`.
    pub fn set_zero_average(&mut self, flag: bool) -> Result<()> {
        if flag {
            let worst = self.max_abs_eta();
            if worst > 1e-9 {
                return Err(Error::Constraint(format!(
                    "zero_average requested but max |eta| = {worst:e}"
                )));
            }
        }
        self.zero_average = flag;
        Ok(())
    }

    pub fn max_abs_eta(&self) -> f64 {
        (0..self.mesh.node_count())
            .filter(|&i| self.mesh.is_active(i))
            .map(|i| qspace::mean(self.values(i)).abs())
            .fold(0.0, f64::max)
    }

    /// Field with every sign flipped.
    pub fn flip_signs(&self) -> SampledField {
        let mut out = self.clone();
        for i in 0..out.signs.len() {
            if !qspace::is_collapsed(self.values(i)) {
                out.signs[i] = self.signs[i].flip();
            }
        }
        out
    }

    pub fn scaled(&self, lambda: f64) -> SampledField {
        let mut out = self.clone();
        for i in 0..out.mesh.node_count() {
            let p = self.point(i).scale(lambda);
            out.set(i, &p).expect("same q");
        }
        out
    }

    /// Squared length distance between two nodes.
    pub fn edge_dist2(&self, a: usize, b: usize) -> f64 {
        qspace::intrinsic2_raw(self.values(a), self.signs[a], self.values(b), self.signs[b])
    }

    /// Interpolated value at `p`: per-rank Catmull-Rom where the full stencil
    /// is active, otherwise (bi)linear; sign from the nearest node.
    pub fn interpolate(&self, p: [f64; 2]) -> Option<QPoint> {
        let q = self.q;
        let mut out = vec![0.0; q];
        match &self.mesh {
            Mesh::Line(l) => {
                let t = (p[0] - l.a) / l.h();
                if t < -1e-9 || t > (l.n - 1) as f64 + 1e-9 {
                    return None;
                }
                let i = (t.floor() as isize).clamp(0, l.n as isize - 2) as usize;
                let f = t - i as f64;
                if i >= 1 && i + 2 < l.n {
                    let w = catmull_rom(f);
                    for (k, wk) in w.iter().enumerate() {
                        let v = self.values(i + k - 1);
                        out.iter_mut().zip(v).for_each(|(o, x)| *o += wk * x);
                    }
                } else {
                    let (va, vb) = (self.values(i), self.values(i + 1));
                    for r in 0..q {
                        out[r] = (1.0 - f) * va[r] + f * vb[r];
                    }
                }
                let near = if f < 0.5 { i } else { i + 1 };
                QPoint::new(out, self.signs[near]).ok()
            }
            Mesh::Grid(g) => {
                let tx = (p[0] - g.x0) / g.h;
                let ty = (p[1] - g.y0) / g.h;
                if tx < -1e-9 || ty < -1e-9 {
                    return None;
                }
                let ix = (tx.floor() as isize).clamp(0, g.nx as isize - 2);
                let iy = (ty.floor() as isize).clamp(0, g.ny as isize - 2);
                let fx = tx - ix as f64;
                let fy = ty - iy as f64;
                if fx > 1.0 + 1e-9 || fy > 1.0 + 1e-9 {
                    return None;
                }
                let full = (-1..=2).all(|dy| (-1..=2).all(|dx| g.active_ij(ix + dx, iy + dy)));
                if full {
                    let wx = catmull_rom(fx);
                    let wy = catmull_rom(fy);
                    for (ky, wyk) in wy.iter().enumerate() {
                        for (kx, wxk) in wx.iter().enumerate() {
                            let node = g.index(
                                (ix + kx as isize - 1) as usize,
                                (iy + ky as isize - 1) as usize,
                            );
                            let w = wxk * wyk;
                            out.iter_mut()
                                .zip(self.values(node))
                                .for_each(|(o, x)| *o += w * x);
                        }
                    }
                } else {
                    let corners = [(0, 0), (1, 0), (0, 1), (1, 1)];
                    if !corners.iter().all(|&(dx, dy)| g.active_ij(ix + dx, iy + dy)) {
                        return None;
                    }
                    for &(dx, dy) in &corners {
                        let w = if dx == 0 { 1.0 - fx } else { fx } * if dy == 0 { 1.0 - fy } else { fy };
                        let node = g.index((ix + dx) as usize, (iy + dy) as usize);
                        out.iter_mut()
                            .zip(self.values(node))
                            .for_each(|(o, x)| *o += w * x);
                    }
                }
                let nx = (ix + (fx >= 0.5) as isize) as usize;
                let ny = (iy + (fy >= 0.5) as isize) as usize;
                let near = g.index(nx.min(g.nx - 1), ny.min(g.ny - 1));
                let sign = if g.active[near] {
                    self.signs[near]
                } else {
                    Sign::Plus
                };
                QPoint::new(out, sign).ok()
            }
        }
    }
}

fn catmull_rom(f: f64) -> [f64; 4] {
    let f2 = f * f;
    let f3 = f2 * f;
    [
        0.5 * (-f3 + 2.0 * f2 - f),
        0.5 * (3.0 * f3 - 5.0 * f2 + 2.0),
        0.5 * (-3.0 * f3 + 4.0 * f2 + f),
        0.5 * (f3 - f2),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Plus,
    Minus,
    Zero,
}

/// Per-node labels of the canonical decomposition. Inactive nodes carry
/// `Zero`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionLabel {
    pub labels: Vec<Label>,
}

impl RegionLabel {
    pub fn count(&self, l: Label) -> usize {
        self.labels.iter().filter(|&&x| x == l).count()
    }
}

pub fn decompose(field: &SampledField) -> RegionLabel {
    let labels = (0..field.mesh.node_count())
        .map(|i| {
            if !field.mesh.is_active(i) || qspace::is_collapsed(field.values(i)) {
                Label::Zero
            } else {
                match field.sign(i) {
                    Sign::Plus => Label::Plus,
                    Sign::Minus => Label::Minus,
                }
            }
        })
        .collect();
    RegionLabel { labels }
}

/// Edge weight `h^(dim-2)` turning a squared difference into energy.
pub(crate) fn edge_weight(dim: usize, h: f64) -> f64 {
    if dim == 1 {
        1.0 / h
    } else {
        1.0
    }
}

/// Discrete Dirichlet energy over edges with both endpoints in `region`
/// (all active nodes when `None`). Each edge contributes
/// `h^dim · d(u(a), u(b))² / h²` with `d` the length distance.
pub fn dirichlet_energy(field: &SampledField, region: Option<&[bool]>) -> f64 {
    let w = edge_weight(field.mesh.dim(), field.mesh.h());
    let mut e = 0.0;
    field.mesh.for_each_edge(|a, b| {
        if region.map_or(true, |r| r[a] && r[b]) {
            e += field.edge_dist2(a, b);
        }
    });
    e * w
}

/// Largest edge difference quotient.
pub fn lipschitz_estimate(field: &SampledField) -> f64 {
    let mut m: f64 = 0.0;
    field.mesh.for_each_edge(|a, b| m = m.max(field.edge_dist2(a, b)));
    m.sqrt() / field.mesh.h()
}

/// Area of `[x0,x1] × [y0,y1]` inside the disk of radius `r` at the origin.
pub fn disk_rect_area(r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let a = x0.max(-r);
    let b = x1.min(r);
    if b <= a || y1 <= y0 {
        return 0.0;
    }
    let prim = |x: f64| {
        let x = x.clamp(-r, r);
        0.5 * (x * (r * r - x * x).max(0.0).sqrt() + r * r * (x / r).clamp(-1.0, 1.0).asin())
    };
    let mut cuts = vec![a, b];
    for y in [y0, y1] {
        if y.abs() <= r {
            let c = (r * r - y * y).sqrt();
            for x in [-c, c] {
                if x > a && x < b {
                    cuts.push(x);
                }
            }
        }
    }
    cuts.sort_by(|p, q| p.total_cmp(q));
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (u, v) = (w[0], w[1]);
        if v <= u {
            continue;
        }
        let m = 0.5 * (u + v);
        let s = (r * r - m * m).max(0.0).sqrt();
        let top_is_circle = s <= y1;
        let bot_is_circle = -s >= y0;
        let top = if top_is_circle { s } else { y1 };
        let bot = if bot_is_circle { -s } else { y0 };
        if top <= bot {
            continue;
        }
        let int_top = if top_is_circle { prim(v) - prim(u) } else { y1 * (v - u) };
        let int_bot = if bot_is_circle { -(prim(v) - prim(u)) } else { y0 * (v - u) };
        area += int_top - int_bot;
    }
    area.max(0.0)
}

/// Energy inside `B_r(center)` on the sub-lattice of the given stride. Each
/// edge is weighted by the exact fraction of its cell lying in the ball.
pub fn ball_energy_stride(
    field: &SampledField,
    center: [f64; 2],
    r: f64,
    stride: usize,
) -> Result<f64> {
    let mesh = &field.mesh;
    mesh.check_ball(center, r, 1.5 * stride as f64 * mesh.h())?;
    let s = stride.max(1);
    match mesh {
        Mesh::Line(l) => {
            let h = l.h() * s as f64;
            let mut e = 0.0;
            let mut i = 0;
            while i + s < l.n {
                let xa = l.a + i as f64 * l.h();
                let xb = xa + h;
                let lo = xa.max(center[0] - r);
                let hi = xb.min(center[0] + r);
                if hi > lo {
                    e += field.edge_dist2(i, i + s) / h * ((hi - lo) / h);
                }
                i += s;
            }
            Ok(e)
        }
        Mesh::Grid(g) => {
            let hs = g.h * s as f64;
            let half = 0.5 * hs;
            let lo_x = (((center[0] - r - g.x0) / hs).floor() as isize - 1).max(0) as usize;
            let hi_x = ((((center[0] + r - g.x0) / hs).ceil() as isize + 1).max(0) as usize)
                .min((g.nx - 1) / s);
            let lo_y = (((center[1] - r - g.y0) / hs).floor() as isize - 1).max(0) as usize;
            let hi_y = ((((center[1] + r - g.y0) / hs).ceil() as isize + 1).max(0) as usize)
                .min((g.ny - 1) / s);
            let cell = hs * hs;
            let frac = |mx: f64, my: f64| {
                let dx = mx - center[0];
                let dy = my - center[1];
                let near = (dx.abs() - half).max(0.0).hypot((dy.abs() - half).max(0.0));
                if near >= r {
                    return 0.0;
                }
                let far = (dx.abs() + half).hypot(dy.abs() + half);
                if far <= r {
                    return 1.0;
                }
                disk_rect_area(r, dx - half, dx + half, dy - half, dy + half) / cell
            };
            let mut e = 0.0;
            for jy in lo_y..=hi_y {
                for jx in lo_x..=hi_x {
                    let (ix, iy) = (jx * s, jy * s);
                    let a = g.index(ix, iy);
                    let [x, y] = g.xy(ix, iy);
                    if jx < hi_x {
                        let f = frac(x + half, y);
                        if f > 0.0 {
                            e += f * field.edge_dist2(a, g.index(ix + s, iy));
                        }
                    }
                    if jy < hi_y {
                        let f = frac(x, y + half);
                        if f > 0.0 {
                            e += f * field.edge_dist2(a, g.index(ix, iy + s));
                        }
                    }
                }
            }
            Ok(e)
        }
    }
}

/// `Dir(u, B_r(center))` from the full and the stride-2 lattice, combined by
/// Richardson extrapolation `(4 D_h − D_2h) / 3`.
pub fn ball_energy(field: &SampledField, center: [f64; 2], r: f64) -> Result<f64> {
    let fine = ball_energy_stride(field, center, r, 1)?;
    let coarse = ball_energy_stride(field, center, r, 2)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// `∫_{∂B_r} |u|²`: two-point sum in 1D, trapezoidal rule with `n_angles`
/// points in 2D.
pub fn circle_norm2(field: &SampledField, center: [f64; 2], r: f64, n_angles: usize) -> Result<f64> {
    let mesh = &field.mesh;
    mesh.check_ball(center, r, 2.0 * mesh.h())?;
    let eval = |p: [f64; 2]| {
        field
            .interpolate(p)
            .map(|u| u.norm2())
            .ok_or(Error::BallOutsideDomain {
                cx: center[0],
                cy: center[1],
                radius: r,
            })
    };
    match mesh {
        Mesh::Line(_) => Ok(eval([center[0] - r, 0.0])? + eval([center[0] + r, 0.0])?),
        Mesh::Grid(_) => {
            let mut s = 0.0;
            for k in 0..n_angles {
                let t = 2.0 * PI * k as f64 / n_angles as f64;
                s += eval([center[0] + r * t.cos(), center[1] + r * t.sin()])?;
            }
            Ok(s * 2.0 * PI * r / n_angles as f64)
        }
    }
}

fn header_line(field: &SampledField) -> String {
    let q = field.q;
    let mut s = match &field.mesh {
        Mesh::Line(l) => format!("1 {q} line {:?} {:?} {}", l.a, l.b, l.n),
        Mesh::Grid(g) => match g.disk {
            Some(d) if d.cx == 0.0 && d.cy == 0.0 && g.nx == g.ny && g.x0 == -d.radius && g.y0 == -d.radius => {
                format!("2 {q} disk {:?} {}", d.radius, g.nx)
            }
            Some(_) => format!("2 {q} grid {:?} {:?} {:?} {} {}", g.x0, g.y0, g.h, g.nx, g.ny),
            None => format!("2 {q} grid {:?} {:?} {:?} {} {}", g.x0, g.y0, g.h, g.nx, g.ny),
        },
    };
    if field.zero_average {
        s.push_str(" zero_average");
    }
    s
}

/// Text serialization: header `dim q shape...`, then one line per active
/// node with its coordinates and Q-point encoding.
pub fn format_field(field: &SampledField) -> String {
    let mut out = header_line(field);
    out.push('\n');
    for i in 0..field.mesh.node_count() {
        if !field.mesh.is_active(i) {
            continue;
        }
        let [x, y] = field.mesh.coords(i);
        match field.mesh.dim() {
            1 => writeln!(out, "{x:?} {}", field.point(i)).unwrap(),
            _ => writeln!(out, "{x:?} {y:?} {}", field.point(i)).unwrap(),
        }
    }
    out
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| Error::parse(line, format!("missing {what}")))?
        .parse::<T>()
        .map_err(|_| Error::parse(line, format!("bad {what}")))
}

pub fn parse_field(text: &str) -> Result<SampledField> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hl, header) = lines.next().ok_or_else(|| Error::parse(1, "empty field file"))?;
    let mut toks = header.split_whitespace();
    let dim: usize = parse_num(toks.next(), hl, "dim")?;
    let q: usize = parse_num(toks.next(), hl, "q")?;
    if q == 0 {
        return Err(Error::parse(hl, "q must be positive"));
    }
    let shape = toks.next().ok_or_else(|| Error::parse(hl, "missing shape"))?;
    let mesh = match (dim, shape) {
        (1, "line") => {
            let a = parse_num(toks.next(), hl, "a")?;
            let b = parse_num(toks.next(), hl, "b")?;
            let n = parse_num(toks.next(), hl, "n")?;
            Mesh::line(a, b, n)?
        }
        (2, "grid") => {
            let x0 = parse_num(toks.next(), hl, "x0")?;
            let y0 = parse_num(toks.next(), hl, "y0")?;
            let h = parse_num(toks.next(), hl, "h")?;
            let nx = parse_num(toks.next(), hl, "nx")?;
            let ny = parse_num(toks.next(), hl, "ny")?;
            Mesh::grid(x0, y0, h, nx, ny)?
        }
        (2, "disk") => {
            let r = parse_num(toks.next(), hl, "radius")?;
            let n = parse_num(toks.next(), hl, "n")?;
            Mesh::disk(r, n)?
        }
        _ => return Err(Error::parse(hl, format!("unknown shape `{dim} {shape}`"))),
    };
    let zero_average = match toks.next() {
        None => false,
        Some("zero_average") => true,
        Some(t) => return Err(Error::parse(hl, format!("unexpected header token `{t}`"))),
    };
    let mut field = SampledField::constant(mesh, &QPoint::zero(q));
    let mut seen = vec![false; field.mesh.node_count()];
    let mut count = 0usize;
    for (ln, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != dim + 1 {
            return Err(Error::parse(ln, format!("expected {} fields", dim + 1)));
        }
        let mut p = [0.0; 2];
        for k in 0..dim {
            p[k] = parse_num(Some(toks[k]), ln, "coordinate")?;
        }
        let node = locate(&field.mesh, p).ok_or_else(|| Error::parse(ln, "coordinates are not an active node"))?;
        if seen[node] {
            return Err(Error::parse(ln, "duplicate node"));
        }
        let qp: QPoint = toks[dim].parse().map_err(|e: Error| Error::parse(ln, e.to_string()))?;
        if qp.q() != q {
            return Err(Error::parse(ln, format!("q mismatch: header {q}, node {}", qp.q())));
        }
        field.set(node, &qp)?;
        seen[node] = true;
        count += 1;
    }
    let expected = field.mesh.active_count();
    if count != expected {
        return Err(Error::parse(hl, format!("node count mismatch: expected {expected}, found {count}")));
    }
    field.set_zero_average(zero_average)?;
    Ok(field)
}

fn locate(mesh: &Mesh, p: [f64; 2]) -> Option<usize> {
    let node = mesh.nearest_node(p)?;
    let c = mesh.coords(node);
    let d = (c[0] - p[0]).abs().max((c[1] - p[1]).abs());
    (d <= 1e-6 * mesh.h()).then_some(node)
}

pub fn read_field(path: &Path) -> Result<SampledField> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_field(&text)
}

pub fn write_field(field: &SampledField, path: &Path) -> Result<()> {
    std::fs::write(path, format_field(field)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_1d(n: usize) -> SampledField {
        SampledField::from_fn(Mesh::line(-1.0, 1.0, n).unwrap(), 2, |p| {
            QPoint::new(vec![p[0], -p[0]], Sign::of(p[0])).unwrap()
        })
        .unwrap()
    }

    #[test]
    fn decompose_examples() {
        let f = SampledField::constant(Mesh::line(0.0, 1.0, 5).unwrap(), &QPoint::zero(2));
        assert_eq!(decompose(&f).count(Label::Zero), 5);
        let m = model_1d(5);
        let l = decompose(&m).labels;
        assert_eq!(l, vec![Label::Minus, Label::Minus, Label::Zero, Label::Plus, Label::Plus]);
        let g = SampledField::from_fn(Mesh::square(1.0, 5).unwrap(), 2, |p| {
            QPoint::new(vec![p[0] + 3.0, p[0] - 3.0], Sign::Plus).unwrap()
        })
        .unwrap();
        assert_eq!(decompose(&g).count(Label::Plus), 25);
    }

    #[test]
    fn energy_examples() {
        let c = SampledField::constant(Mesh::square(1.0, 9).unwrap(), &QPoint::collapsed(3, 2.0));
        assert_eq!(dirichlet_energy(&c, None), 0.0);
        let lin = SampledField::from_fn(Mesh::line(0.0, 1.0, 11).unwrap(), 1, |p| {
            QPoint::new(vec![p[0]], Sign::Plus).unwrap()
        })
        .unwrap();
        assert!((dirichlet_energy(&lin, None) - 1.0).abs() < 1e-12);
        // nodes straddle the origin, so the crossing edge is exercised
        assert!((dirichlet_energy(&model_1d(10), None) - 4.0).abs() < 1e-12);
        assert!((dirichlet_energy(&model_1d(11), None) - 4.0).abs() < 1e-12);
        let sq = SampledField::from_fn(Mesh::square(1.0, 21).unwrap(), 1, |p| {
            QPoint::new(vec![2.0 * p[0] - p[1]], Sign::Plus).unwrap()
        })
        .unwrap();
        // |∇u|² = 5 on [-1,1]², minus the missing half-cells along the border
        let e = dirichlet_energy(&sq, None);
        assert!((e - 20.0).abs() < 20.0 * 0.06, "{e}");
    }

    #[test]
    fn lipschitz_examples() {
        let c = SampledField::constant(Mesh::line(0.0, 1.0, 5).unwrap(), &QPoint::zero(2));
        assert_eq!(lipschitz_estimate(&c), 0.0);
        assert!((lipschitz_estimate(&model_1d(10)) - 2f64.sqrt()).abs() < 1e-12);
        let s3 = SampledField::from_fn(Mesh::line(0.0, 1.0, 50).unwrap(), 1, |p| {
            QPoint::new(vec![3.0 * p[0]], Sign::Plus).unwrap()
        })
        .unwrap();
        assert!((lipschitz_estimate(&s3) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn area_of_full_and_partial_cells() {
        assert!((disk_rect_area(1.0, -1.0, 1.0, -1.0, 1.0) - PI).abs() < 1e-14);
        assert!((disk_rect_area(1.0, 0.0, 1.0, 0.0, 1.0) - PI / 4.0).abs() < 1e-14);
        assert!((disk_rect_area(2.0, -0.5, 0.5, -0.5, 0.5) - 1.0).abs() < 1e-14);
        assert_eq!(disk_rect_area(1.0, 2.0, 3.0, 0.0, 1.0), 0.0);
        // brute-force oracle on an off-center rectangle
        let (x0, x1, y0, y1, r) = (0.3, 1.1, -0.2, 0.9, 1.0);
        let n = 2000;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = x0 + (i as f64 + 0.5) * (x1 - x0) / n as f64;
                let y = y0 + (j as f64 + 0.5) * (y1 - y0) / n as f64;
                if x * x + y * y <= r * r {
                    acc += 1.0;
                }
            }
        }
        let mc = acc / (n * n) as f64 * (x1 - x0) * (y1 - y0);
        assert!((disk_rect_area(r, x0, x1, y0, y1) - mc).abs() < 1e-3);
    }

    #[test]
    fn ball_energy_of_linear_sheet() {
        let f = SampledField::from_fn(Mesh::square(1.0, 65).unwrap(), 1, |p| {
            QPoint::new(vec![p[0] + 2.0 * p[1]], Sign::Plus).unwrap()
        })
        .unwrap();
        let e = ball_energy(&f, [0.1, -0.05], 0.6).unwrap();
        let exact = 5.0 * PI * 0.36;
        assert!((e - exact).abs() < 1e-3 * exact, "{e} vs {exact}");
        assert!(ball_energy(&f, [0.9, 0.0], 0.5).is_err());
    }

    #[test]
    fn circle_norm_of_constant() {
        let f = SampledField::constant(Mesh::disk(1.0, 33).unwrap(), &QPoint::new(vec![1.0, 2.0], Sign::Minus).unwrap());
        let h = circle_norm2(&f, [0.0, 0.0], 0.5, 720).unwrap();
        assert!((h - 5.0 * PI).abs() < 1e-12);
        let m = model_1d(21);
        assert!((circle_norm2(&m, [0.0, 0.0], 0.5, 720).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn field_file_round_trip() {
        let f = SampledField::from_fn(Mesh::disk(1.0, 9).unwrap(), 2, |p| {
            QPoint::new(vec![p[0] * 0.3, -p[0] * 0.3], Sign::of(p[0])).unwrap()
        })
        .unwrap();
        let back = parse_field(&format_field(&f)).unwrap();
        assert_eq!(back, f);
        let c = SampledField::constant(Mesh::line(0.0, 1.0, 4).unwrap(), &QPoint::collapsed(2, 1.5));
        assert_eq!(parse_field(&format_field(&c)).unwrap(), c);
    }

    #[test]
    fn field_file_validation() {
        let bad_q = "1 2 line 0 1 3\n0 +:1,2\n0.5 +:1\n1 +:0,0\n";
        assert!(matches!(parse_field(bad_q), Err(Error::Parse { line: 3, .. })));
        let short = "1 2 line 0 1 3\n0 +:1,2\n";
        assert!(parse_field(short).is_err());
        let unsorted = "1 2 line 0 1 3\n0 +:2,1\n0.5 -:3,-3\n1 +:0,0\n";
        let f = parse_field(unsorted).unwrap();
        assert_eq!(f.values(0), &[1.0, 2.0]);
        assert_eq!(f.values(1), &[-3.0, 3.0]);
        assert!(parse_field("3 2 cube 1\n").is_err());
    }
}
