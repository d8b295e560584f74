//! Homogeneous minimizers: the harmonic-polynomial representation in two
//! dimensions, the one-dimensional classification, and stationarity checks.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{self, Label, Mesh, SampledField};
use crate::frequency;
use crate::qspace::{self, QPoint, Sign};

/// `r^α (c_cos cos αφ + c_sin sin αφ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicPolynomial2D {
    pub degree: u32,
    pub c_cos: f64,
    pub c_sin: f64,
}

impl HarmonicPolynomial2D {
    pub fn new(degree: u32, c_cos: f64, c_sin: f64) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidArgument("degree must be positive".into()));
        }
        if c_cos == 0.0 && c_sin == 0.0 {
            return Err(Error::InvalidArgument("coefficients must not both vanish".into()));
        }
        Ok(HarmonicPolynomial2D { degree, c_cos, c_sin })
    }

    /// `a z^α` and `a α z^(α-1)` with `a = c_cos - i c_sin`, so that
    /// `p = Re(a z^α)`.
    fn powers(&self, x: f64, y: f64) -> ((f64, f64), (f64, f64)) {
        let mut zk = (1.0, 0.0);
        for _ in 0..self.degree - 1 {
            zk = (zk.0 * x - zk.1 * y, zk.0 * y + zk.1 * x);
        }
        let zn = (zk.0 * x - zk.1 * y, zk.0 * y + zk.1 * x);
        let a = (self.c_cos, -self.c_sin);
        let mul = |u: (f64, f64), v: (f64, f64)| (u.0 * v.0 - u.1 * v.1, u.0 * v.1 + u.1 * v.0);
        let az = mul(a, zn);
        let d = mul(a, zk);
        let al = self.degree as f64;
        (az, (al * d.0, al * d.1))
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.powers(x, y).0 .0
    }

    pub fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        let (_, d) = self.powers(x, y);
        [d.0, -d.1]
    }

    pub fn amplitude(&self) -> f64 {
        self.c_cos.hypot(self.c_sin)
    }

    /// Direction of a maximum of `p` on the unit circle.
    pub fn phase(&self) -> f64 {
        self.c_sin.atan2(self.c_cos) / self.degree as f64
    }

    /// Index of the positive (negative) sector containing the angle. Plus
    /// sector `j` is centered at `φ₀ + 2πj/α`, minus sector `j` at
    /// `φ₀ + π/α + 2πj/α`.
    pub fn sector(&self, angle: f64) -> (Sign, usize) {
        let a = self.degree as f64;
        let width = PI / a;
        let t = (angle - self.phase() + 0.5 * width).rem_euclid(2.0 * PI);
        let k = ((t / width).floor() as usize).min(2 * self.degree as usize - 1);
        if k % 2 == 0 {
            (Sign::Plus, k / 2)
        } else {
            (Sign::Minus, k / 2)
        }
    }
}

/// Polynomial plus one coefficient vector per nodal component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousSpec {
    pub p: HarmonicPolynomial2D,
    pub plus: Vec<Vec<f64>>,
    pub minus: Vec<Vec<f64>>,
}

impl HomogeneousSpec {
    /// The same vector on every component.
    pub fn uniform(p: HarmonicPolynomial2D, a: &[f64]) -> HomogeneousSpec {
        let n = p.degree as usize;
        HomogeneousSpec {
            p,
            plus: vec![a.to_vec(); n],
            minus: vec![a.to_vec(); n],
        }
    }

    pub fn q(&self) -> usize {
        self.plus.first().map_or(0, |v| v.len())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.p.degree as usize;
        if self.plus.len() != n || self.minus.len() != n {
            return Err(Error::Constraint(format!(
                "component count: degree {n} needs {n} plus and {n} minus vectors, got {} and {}",
                self.plus.len(),
                self.minus.len()
            )));
        }
        let q = self.q();
        if q == 0 {
            return Err(Error::Constraint("empty coefficient vectors".into()));
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (tag, set) in [("+", &self.plus), ("-", &self.minus)] {
            for (j, v) in set.iter().enumerate() {
                if v.len() != q {
                    return Err(Error::Multiplicity {
                        expected: q,
                        found: v.len(),
                    });
                }
                let s: f64 = v.iter().sum();
                if s.abs() > 1e-9 * (1.0 + norm(v)) {
                    return Err(Error::Constraint(format!(
                        "zero-sum: component {tag}{j} has coefficient sum {s:e}"
                    )));
                }
            }
        }
        for j in 0..n {
            let a = norm(&self.plus[j]);
            for k in [j, (j + n - 1) % n] {
                let b = norm(&self.minus[k]);
                if (a - b).abs() > 1e-9 * (1.0 + a.max(b)) {
                    return Err(Error::Constraint(format!(
                        "transmission: |A+_{j}| = {a} differs from adjacent |A-_{k}| = {b}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The field value at `(x, y)`.
    pub fn value_at(&self, x: f64, y: f64) -> QPoint {
        let q = self.q();
        let pv = self.p.eval(x, y);
        if pv == 0.0 {
            return QPoint::zero(q);
        }
        let (sign, j) = self.p.sector(y.atan2(x));
        // the sector test near the nodal lines can disagree with the sign of
        // p by rounding; the value of p decides
        let sign_p = Sign::of(pv);
        let a = match (sign_p, sign) {
            (Sign::Plus, Sign::Plus) | (Sign::Minus, Sign::Minus) => match sign_p {
                Sign::Plus => &self.plus[j],
                Sign::Minus => &self.minus[j],
            },
            _ => {
                let (_, jj) = self.p.sector(y.atan2(x) + 1e-9 * sign.as_f64());
                match sign_p {
                    Sign::Plus => &self.plus[jj],
                    Sign::Minus => &self.minus[jj],
                }
            }
        };
        QPoint::new(a.iter().map(|c| c * pv).collect(), sign_p).expect("finite")
    }
}

pub fn parse_spec(text: &str) -> Result<HomogeneousSpec> {
    let mut degree = None;
    let mut coeffs = None;
    let mut plus: Vec<(usize, Vec<f64>)> = vec![];
    let mut minus: Vec<(usize, Vec<f64>)> = vec![];
    for (ln, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let num = |t: &str| t.parse::<f64>().map_err(|_| Error::parse(ln, format!("bad number `{t}`")));
        match toks[0] {
            "degree" if toks.len() == 2 => {
                degree = Some(toks[1].parse::<u32>().map_err(|_| Error::parse(ln, "bad degree"))?)
            }
            "coeffs" if toks.len() == 3 => coeffs = Some((num(toks[1])?, num(toks[2])?)),
            "+" | "-" if toks.len() >= 3 => {
                let j = toks[1].parse::<usize>().map_err(|_| Error::parse(ln, "bad component index"))?;
                let v = toks[2..].iter().map(|t| num(t)).collect::<Result<Vec<_>>>()?;
                if toks[0] == "+" { &mut plus } else { &mut minus }.push((j, v));
            }
            _ => return Err(Error::parse(ln, format!("unrecognized line `{line}`"))),
        }
    }
    let degree = degree.ok_or_else(|| Error::parse(0, "missing `degree` line"))?;
    let (c, s) = coeffs.ok_or_else(|| Error::parse(0, "missing `coeffs` line"))?;
    let p = HarmonicPolynomial2D::new(degree, c, s)?;
    let order = |mut v: Vec<(usize, Vec<f64>)>, tag: &str| -> Result<Vec<Vec<f64>>> {
        v.sort_by_key(|e| e.0);
        for (k, e) in v.iter().enumerate() {
            if e.0 != k {
                return Err(Error::parse(0, format!("{tag} component indices must be 0..{}", v.len())));
            }
        }
        Ok(v.into_iter().map(|e| e.1).collect())
    };
    Ok(HomogeneousSpec {
        p,
        plus: order(plus, "+")?,
        minus: order(minus, "-")?,
    })
}

pub fn format_spec(spec: &HomogeneousSpec) -> String {
    let mut s = format!("degree {}\ncoeffs {:?} {:?}\n", spec.p.degree, spec.p.c_cos, spec.p.c_sin);
    for (tag, set) in [("+", &spec.plus), ("-", &spec.minus)] {
        for (j, v) in set.iter().enumerate() {
            let vals: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
            s.push_str(&format!("{tag} {j} {}\n", vals.join(" ")));
        }
    }
    s
}

pub fn read_spec(path: &Path) -> Result<HomogeneousSpec> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_spec(&text)
}

/// Flood-fill components of `{p > 0}` and `{p < 0}` outside the band
/// `|p| ≤ h |∇p|`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalComponents {
    pub labels: Vec<Option<(Sign, usize)>>,
    pub plus: usize,
    pub minus: usize,
}

impl NodalComponents {
    pub fn matches_degree(&self, degree: u32) -> bool {
        self.plus == degree as usize && self.minus == degree as usize
    }
}

pub fn components_of_nodal_partition(p: &HarmonicPolynomial2D, mesh: &Mesh) -> Result<NodalComponents> {
    let Mesh::Grid(g) = mesh else {
        return Err(Error::InvalidArgument("nodal components need a 2D mesh".into()));
    };
    let n = mesh.node_count();
    let h = g.h;
    let side: Vec<Option<Sign>> = (0..n)
        .map(|i| {
            if !mesh.is_active(i) {
                return None;
            }
            let [x, y] = mesh.coords(i);
            let v = p.eval(x, y);
            let gr = p.grad(x, y);
            if v.abs() <= h * gr[0].hypot(gr[1]) {
                None
            } else {
                Some(Sign::of(v))
            }
        })
        .collect();
    let mut labels = vec![None; n];
    let (mut plus, mut minus) = (0, 0);
    for start in 0..n {
        let Some(s) = side[start] else { continue };
        if labels[start].is_some() {
            continue;
        }
        let idx = match s {
            Sign::Plus => {
                plus += 1;
                plus - 1
            }
            Sign::Minus => {
                minus += 1;
                minus - 1
            }
        };
        labels[start] = Some((s, idx));
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for j in mesh.neighbors(i) {
                if side[j] == Some(s) && labels[j].is_none() {
                    labels[j] = Some((s, idx));
                    queue.push_back(j);
                }
            }
        }
    }
    Ok(NodalComponents { labels, plus, minus })
}

/// `u = (A±_j p, ±)` on the components, `Q[[0]]` where `p = 0`.
pub fn build_homogeneous(spec: &HomogeneousSpec, mesh: &Mesh) -> Result<SampledField> {
    spec.validate()?;
    build_homogeneous_unchecked(spec, mesh)
}

/// As [`build_homogeneous`] without validating the spec (negative controls).
pub fn build_homogeneous_unchecked(spec: &HomogeneousSpec, mesh: &Mesh) -> Result<SampledField> {
    if mesh.dim() != 2 {
        return Err(Error::InvalidArgument("homogeneous construction needs a 2D mesh".into()));
    }
    let mut f = SampledField::from_fn(mesh.clone(), spec.q(), |x| spec.value_at(x[0], x[1]))?;
    if f.max_abs_eta() <= 1e-9 {
        f.set_zero_average(true)?;
    }
    Ok(f)
}

/// One-dimensional profile `u = (b (x - x0), +)` right of `x0` and
/// `(a (x - x0), -)` left of it.
pub fn build_1d(a: &[f64], b: &[f64], x0: f64, mesh: &Mesh) -> Result<SampledField> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Multiplicity {
            expected: a.len(),
            found: b.len(),
        });
    }
    if mesh.dim() != 1 {
        return Err(Error::InvalidArgument("1D profile needs a line mesh".into()));
    }
    SampledField::from_fn(mesh.clone(), a.len(), |p| {
        let t = p[0] - x0;
        if t > 0.0 {
            QPoint::new(b.iter().map(|c| c * t).collect(), Sign::Plus).unwrap()
        } else {
            QPoint::new(a.iter().map(|c| c * t).collect(), Sign::Minus).unwrap()
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneDClassification {
    pub singular_point: Option<f64>,
    /// Slopes left of the singular point, sorted ascending.
    pub a: Vec<f64>,
    /// Slopes right of the singular point, sorted ascending.
    pub b: Vec<f64>,
    pub residual: f64,
    pub sum_a: f64,
    pub sum_b: f64,
    /// `| |a| - |b| |`.
    pub norm_gap: f64,
    pub tolerance: f64,
    pub invariants_ok: bool,
}

fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let s = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (s, my - s * mx)
}

/// Locates the singular point of a 1D field and fits the sheet slopes on
/// both sides, anchored there. `tolerance` bounds `|Σa|`, `|Σb|` and
/// `| |a| - |b| |`.
pub fn classify_1d(field: &SampledField, tolerance: f64) -> Result<OneDClassification> {
    let Mesh::Line(l) = field.mesh() else {
        return Err(Error::InvalidArgument("classification needs a 1D field".into()));
    };
    let n = l.n;
    let q = field.q();
    let centered: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let v = field.values(i);
            let e = qspace::mean(v);
            v.iter().map(|x| x - e).collect()
        })
        .collect();
    let labels = fields::decompose(field).labels;
    // singular markers: zero nodes, and sign changes between nonzero neighbors
    let mut marks: Vec<(usize, usize)> = vec![];
    for i in 0..n {
        if labels[i] == Label::Zero {
            marks.push((i, i));
        }
        if i + 1 < n
            && labels[i] != Label::Zero
            && labels[i + 1] != Label::Zero
            && labels[i] != labels[i + 1]
        {
            marks.push((i, i + 1));
        }
    }
    let mut clusters: Vec<(usize, usize)> = vec![];
    for m in marks {
        match clusters.last_mut() {
            Some(c) if m.0 <= c.1 + 1 => c.1 = c.1.max(m.1),
            _ => clusters.push(m),
        }
    }
    if clusters.len() > 1 {
        return Err(Error::MultipleClusters(clusters.len()));
    }
    let xs: Vec<f64> = (0..n).map(|i| field.mesh().coords(i)[0]).collect();
    let Some(&(lo, hi)) = clusters.first() else {
        let mut slopes: Vec<f64> = (0..q)
            .map(|r| fit_line(&xs, &centered.iter().map(|v| v[r]).collect::<Vec<_>>()).0)
            .collect();
        slopes.sort_by(|a, b| a.total_cmp(b));
        return Ok(OneDClassification {
            singular_point: None,
            a: slopes.clone(),
            b: slopes,
            residual: 0.0,
            sum_a: 0.0,
            sum_b: 0.0,
            norm_gap: 0.0,
            tolerance,
            invariants_ok: true,
        });
    };
    let left: Vec<usize> = (0..lo).filter(|&i| labels[i] != Label::Zero).collect();
    let right: Vec<usize> = (hi + 1..n).filter(|&i| labels[i] != Label::Zero).collect();
    let left = if labels[lo] != Label::Zero && lo < hi { [left, vec![lo]].concat() } else { left };
    let right = if labels[hi] != Label::Zero && lo < hi { [vec![hi], right].concat() } else { right };
    if left.len() < 2 || right.len() < 2 {
        return Err(Error::InvalidArgument("singular point too close to the boundary to classify".into()));
    }
    // x0 from the zero crossings of per-sheet fits on both sides
    let mut num = 0.0;
    let mut den = 0.0;
    for side in [&left, &right] {
        let sx: Vec<f64> = side.iter().map(|&i| xs[i]).collect();
        for r in 0..q {
            let sy: Vec<f64> = side.iter().map(|&i| centered[i][r]).collect();
            let (s, c) = fit_line(&sx, &sy);
            num += s * c;
            den += s * s;
        }
    }
    let x0 = if den > 0.0 {
        -num / den
    } else {
        0.5 * (xs[lo] + xs[hi])
    };
    let anchored = |side: &[usize]| -> (Vec<f64>, f64) {
        let mut slopes = vec![0.0; q];
        let mut res: f64 = 0.0;
        let sxx: f64 = side.iter().map(|&i| (xs[i] - x0).powi(2)).sum();
        for (r, s) in slopes.iter_mut().enumerate() {
            let sxy: f64 = side.iter().map(|&i| (xs[i] - x0) * centered[i][r]).sum();
            *s = sxy / sxx;
            for &i in side {
                res = res.max((centered[i][r] - *s * (xs[i] - x0)).abs());
            }
        }
        slopes.sort_by(|a, b| a.total_cmp(b));
        (slopes, res)
    };
    let (a, ra) = anchored(&left);
    let (b, rb) = anchored(&right);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sum_a: f64 = a.iter().sum();
    let sum_b: f64 = b.iter().sum();
    let norm_gap = (norm(&a) - norm(&b)).abs();
    Ok(OneDClassification {
        singular_point: Some(x0),
        invariants_ok: sum_a.abs() <= tolerance && sum_b.abs() <= tolerance && norm_gap <= tolerance,
        a,
        b,
        residual: ra.max(rb),
        sum_a,
        sum_b,
        norm_gap,
        tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub dim: usize,
    /// Mean squared-gradient density over the sampled nodes or edges.
    pub density_mean: f64,
    /// 1D: largest deviation of the edge density from its mean.
    pub density_max_dev: f64,
    /// 2D: largest per-sheet 5-point Laplacian away from the zero set.
    pub laplacian_max: f64,
    /// 2D: largest `|Σ|∇u⁺ᵢ|² - Σ|∇u⁻ᵢ|²|` next to the zero set.
    pub transmission_max: f64,
    pub transmission_samples: usize,
}

pub fn check_stationarity(field: &SampledField) -> StationarityReport {
    let mesh = field.mesh();
    let h = mesh.h();
    match mesh {
        Mesh::Line(l) => {
            let dens: Vec<f64> = (0..l.n - 1).map(|i| field.edge_dist2(i, i + 1) / (h * h)).collect();
            let mean = dens.iter().sum::<f64>() / dens.len() as f64;
            let dev = dens.iter().map(|d| (d - mean).abs()).fold(0.0, f64::max);
            StationarityReport {
                dim: 1,
                density_mean: mean,
                density_max_dev: dev,
                laplacian_max: 0.0,
                transmission_max: 0.0,
                transmission_samples: 0,
            }
        }
        Mesh::Grid(g) => {
            let labels = fields::decompose(field).labels;
            let q = field.q();
            let n = mesh.node_count();
            let mut full = vec![false; n];
            let mut density = vec![0.0; n];
            let mut lap_max: f64 = 0.0;
            for i in 0..n {
                if !mesh.is_active(i) || labels[i] == Label::Zero {
                    continue;
                }
                let nb = mesh.neighbors(i);
                if nb.len() < 4 || nb.iter().any(|&j| labels[j] != labels[i]) {
                    continue;
                }
                full[i] = true;
                let (ix, iy) = g.ij(i);
                let (w, e, s, nn) = (
                    g.index(ix - 1, iy),
                    g.index(ix + 1, iy),
                    g.index(ix, iy - 1),
                    g.index(ix, iy + 1),
                );
                let mut dsum = 0.0;
                for r in 0..q {
                    let v = field.values(i)[r];
                    let lap = field.values(w)[r] + field.values(e)[r] + field.values(s)[r] + field.values(nn)[r] - 4.0 * v;
                    lap_max = lap_max.max(lap.abs() / (h * h));
                    let dx = (field.values(e)[r] - field.values(w)[r]) / (2.0 * h);
                    let dy = (field.values(nn)[r] - field.values(s)[r]) / (2.0 * h);
                    dsum += dx * dx + dy * dy;
                }
                density[i] = dsum;
            }
            let cnt = full.iter().filter(|&&f| f).count().max(1);
            let density_mean = density.iter().sum::<f64>() / cnt as f64;
            // interface samples: zero nodes and midpoints of sign-change edges
            let mut samples: Vec<[f64; 2]> = vec![];
            for i in 0..n {
                if mesh.is_active(i) && labels[i] == Label::Zero {
                    samples.push(mesh.coords(i));
                }
            }
            mesh.for_each_edge(|a, b| {
                let (la, lb) = (labels[a], labels[b]);
                if la != Label::Zero && lb != Label::Zero && la != lb {
                    let (pa, pb) = (mesh.coords(a), mesh.coords(b));
                    samples.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                }
            });
            let reach = 3;
            let mut tmax: f64 = 0.0;
            let mut tcount = 0;
            for p in samples {
                let cx = ((p[0] - g.x0) / h).round() as isize;
                let cy = ((p[1] - g.y0) / h).round() as isize;
                let mut best = [None::<(f64, usize)>; 2];
                for dy in -reach..=reach {
                    for dx in -reach..=reach {
                        let (ix, iy) = (cx + dx, cy + dy);
                        if !g.active_ij(ix, iy) {
                            continue;
                        }
                        let k = g.index(ix as usize, iy as usize);
                        if !full[k] {
                            continue;
                        }
                        let c = mesh.coords(k);
                        let d = (c[0] - p[0]).hypot(c[1] - p[1]);
                        if d > reach as f64 * h + 1e-12 {
                            continue;
                        }
                        let slot = if labels[k] == Label::Plus { 0 } else { 1 };
                        if best[slot].map_or(true, |b| d < b.0) {
                            best[slot] = Some((d, k));
                        }
                    }
                }
                if let [Some((_, kp)), Some((_, km))] = best {
                    tmax = tmax.max((density[kp] - density[km]).abs());
                    tcount += 1;
                }
            }
            StationarityReport {
                dim: 2,
                density_mean,
                density_max_dev: 0.0,
                laplacian_max: lap_max,
                transmission_max: tmax,
                transmission_samples: tcount,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegerFrequencyReport {
    pub center: [f64; 2],
    pub radii: Vec<f64>,
    pub frequencies: Vec<Option<f64>>,
    /// Median of the defined frequencies.
    pub i_bar: f64,
    pub nearest: u32,
    pub distance: f64,
    pub pass: bool,
}

/// Median frequency over nine log-spaced radii spanning a decade (cut off at
/// eight cells) and its distance to the nearest positive integer.
pub fn measured_frequency_is_integer(field: &SampledField, center: [f64; 2]) -> Result<IntegerFrequencyReport> {
    let mesh = field.mesh();
    let h = mesh.h();
    let r_max = 0.8 * mesh.inner_distance(center) - 3.0 * h;
    let r_min = (0.1 * r_max).max(8.0 * h);
    if !(r_max > r_min) {
        return Err(Error::InvalidArgument("center too close to the domain edge".into()));
    }
    let radii: Vec<f64> = (0..9).map(|k| r_min * (r_max / r_min).powf(k as f64 / 8.0)).collect();
    let prof = frequency::profile(field, center, &radii)?;
    let mut defined = prof.defined_frequencies();
    if defined.is_empty() {
        return Err(Error::Constraint("H vanishes on the whole radius range".into()));
    }
    defined.sort_by(|a, b| a.total_cmp(b));
    let m = defined.len();
    let i_bar = if m % 2 == 1 {
        defined[m / 2]
    } else {
        0.5 * (defined[m / 2 - 1] + defined[m / 2])
    };
    let nearest = i_bar.round().max(1.0) as u32;
    let distance = (i_bar - nearest as f64).abs();
    Ok(IntegerFrequencyReport {
        center,
        radii,
        frequencies: prof.i,
        i_bar,
        nearest,
        distance,
        pass: distance <= 0.05,
    })
}
