//! Discrete Dirichlet minimization: Gauss-Seidel relaxation with a closed-form
//! local update, nested coarse-to-fine starts and seeded restarts.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{self, Mesh, SampledField};
use crate::qspace::{self, QPoint, Sign};

pub type AngularFn = Arc<dyn Fn(f64) -> QPoint + Send + Sync>;

/// Dirichlet data: one Q-point per boundary node, and optionally the angular
/// function it was sampled from.
#[derive(Clone)]
pub struct BoundaryTrace {
    entries: Vec<(usize, QPoint)>,
    angular: Option<AngularFn>,
}

impl std::fmt::Debug for BoundaryTrace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundaryTrace")
            .field("entries", &self.entries.len())
            .field("angular", &self.angular.is_some())
            .finish()
    }
}

impl BoundaryTrace {
    pub fn new(entries: Vec<(usize, QPoint)>) -> BoundaryTrace {
        BoundaryTrace {
            entries,
            angular: None,
        }
    }

    /// Endpoint data for an interval mesh.
    pub fn line(mesh: &Mesh, left: QPoint, right: QPoint) -> Result<BoundaryTrace> {
        match mesh {
            Mesh::Line(l) => Ok(BoundaryTrace::new(vec![(0, left), (l.n - 1, right)])),
            _ => Err(Error::InvalidTrace("endpoint data needs a line mesh".into())),
        }
    }

    /// Samples `f(angle)` at every boundary node of a 2D mesh, the angle
    /// being measured around the disk center (or the origin).
    pub fn from_angular(mesh: &Mesh, f: AngularFn) -> Result<BoundaryTrace> {
        let Mesh::Grid(g) = mesh else {
            return Err(Error::InvalidTrace("angular data needs a 2D mesh".into()));
        };
        let (cx, cy) = g.disk.map_or((0.0, 0.0), |d| (d.cx, d.cy));
        let entries = mesh
            .boundary_nodes()
            .into_iter()
            .map(|i| {
                let [x, y] = mesh.coords(i);
                (i, f((y - cy).atan2(x - cx)))
            })
            .collect();
        Ok(BoundaryTrace {
            entries,
            angular: Some(f),
        })
    }

    pub fn entries(&self) -> &[(usize, QPoint)] {
        &self.entries
    }

    pub fn q(&self) -> Option<usize> {
        self.entries.first().map(|(_, p)| p.q())
    }

    pub fn flip_signs(&self) -> BoundaryTrace {
        let entries = self.entries.iter().map(|(i, p)| (*i, p.flip_sign())).collect();
        let angular = self.angular.clone().map(|f| {
            let g: AngularFn = Arc::new(move |t| f(t).flip_sign());
            g
        });
        BoundaryTrace { entries, angular }
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<usize> {
        let q = self
            .q()
            .ok_or_else(|| Error::InvalidTrace("empty boundary trace".into()))?;
        let mut hit = vec![false; mesh.node_count()];
        for (i, p) in &self.entries {
            if p.q() != q {
                return Err(Error::Multiplicity {
                    expected: q,
                    found: p.q(),
                });
            }
            if *i >= hit.len() || !mesh.is_active(*i) {
                return Err(Error::InvalidTrace(format!("node {i} is not an active mesh node")));
            }
            if hit[*i] {
                return Err(Error::InvalidTrace(format!("node {i} appears twice")));
            }
            hit[*i] = true;
        }
        let bnd = mesh.boundary_nodes();
        if let Some(b) = bnd.iter().find(|&&b| !hit[b]) {
            return Err(Error::InvalidTrace(format!("boundary node {b} has no data")));
        }
        if self.entries.len() != bnd.len() {
            return Err(Error::InvalidTrace("trace assigns data to interior nodes".into()));
        }
        Ok(q)
    }

    fn restrict(&self, fine: &Mesh, coarse: &Mesh) -> Result<BoundaryTrace> {
        if let Some(f) = &self.angular {
            return BoundaryTrace::from_angular(coarse, f.clone());
        }
        if let (Mesh::Line(_), Mesh::Line(c)) = (fine, coarse) {
            let first = self.entries.iter().find(|(i, _)| *i == 0);
            let last = self.entries.iter().find(|(i, _)| *i != 0);
            if let (Some(a), Some(b)) = (first, last) {
                return Ok(BoundaryTrace::new(vec![(0, a.1.clone()), (c.n - 1, b.1.clone())]));
            }
        }
        let entries = coarse
            .boundary_nodes()
            .into_iter()
            .map(|cb| {
                let p = coarse.coords(cb);
                let nearest = self
                    .entries
                    .iter()
                    .min_by(|a, b| {
                        dist2(fine.coords(a.0), p).total_cmp(&dist2(fine.coords(b.0), p))
                    })
                    .expect("non-empty trace");
                (cb, nearest.1.clone())
            })
            .collect();
        Ok(BoundaryTrace::new(entries))
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SolveParams {
    pub max_sweeps: usize,
    /// Stop once the relative energy decrease of a sweep falls below this.
    pub tol: f64,
    pub restarts: usize,
    pub rng_seed: u64,
    pub enforce_zero_average: bool,
    /// Over-relaxation factor in (0, 2); 1 is plain Gauss-Seidel.
    pub omega: f64,
    /// Solve on coarser nested meshes first and interpolate.
    pub multilevel: bool,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            max_sweeps: 5000,
            tol: 1e-10,
            restarts: 1,
            rng_seed: 0,
            enforce_zero_average: false,
            omega: 1.0,
            multilevel: true,
        }
    }
}

impl SolveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if self.restarts < 1 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(Error::InvalidArgument("omega must lie in (0, 2)".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidArgument("max_sweeps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolveReport {
    pub energy: f64,
    pub converged: bool,
    pub sweeps: usize,
    pub best_restart: usize,
    pub restart_energies: Vec<f64>,
    /// Energy after each sweep on the finest mesh of the best restart; entry
    /// 0 is the starting energy.
    pub history: Vec<f64>,
}

/// Minimizer over the values for a fixed sign of the local energy
/// `Σ_j d(p, n_j)²`, together with that energy.
pub fn best_for_sign(neighbors: &[QPoint], sign: Sign) -> QPoint {
    let q = neighbors[0].q();
    let st = LocalStats::gather(neighbors.iter().map(|p| (p.values(), p.sign())), q);
    let mut out = vec![0.0; q];
    st.candidate(sign, &mut out);
    QPoint::new(out, sign).expect("finite")
}

/// Local energy of `p` against its neighbors.
pub fn local_energy(p: &QPoint, neighbors: &[QPoint]) -> f64 {
    neighbors
        .iter()
        .map(|n| qspace::intrinsic2_raw(p.values(), p.sign(), n.values(), n.sign()))
        .sum()
}

/// Best local value over both signs; on a tie the sign of `current` is kept.
pub fn local_node_update(neighbors: &[QPoint], current: &QPoint) -> Result<QPoint> {
    if neighbors.is_empty() {
        return Err(Error::InvalidArgument("local update needs at least one neighbor".into()));
    }
    let q = current.q();
    if let Some(bad) = neighbors.iter().find(|n| n.q() != q) {
        return Err(Error::Multiplicity {
            expected: q,
            found: bad.q(),
        });
    }
    let st = LocalStats::gather(neighbors.iter().map(|p| (p.values(), p.sign())), q);
    let sign = st.choose(current.sign());
    let mut out = vec![0.0; q];
    st.candidate(sign, &mut out);
    QPoint::new(out, sign)
}

/// Sufficient statistics of a neighborhood for the closed-form update.
struct LocalStats {
    n: usize,
    eta: f64,
    m_plus: Vec<f64>,
    m_minus: Vec<f64>,
    c_plus: f64,
    c_minus: f64,
}

impl LocalStats {
    fn gather<'a>(it: impl Iterator<Item = (&'a [f64], Sign)>, q: usize) -> LocalStats {
        let mut st = LocalStats {
            n: 0,
            eta: 0.0,
            m_plus: vec![0.0; q],
            m_minus: vec![0.0; q],
            c_plus: 0.0,
            c_minus: 0.0,
        };
        for (v, s) in it {
            st.add(v, s);
        }
        st.eta /= st.n.max(1) as f64;
        st
    }

    fn add(&mut self, v: &[f64], s: Sign) {
        self.n += 1;
        let e = qspace::mean(v);
        self.eta += e;
        if qspace::is_collapsed(v) {
            return;
        }
        let (m, c) = match s {
            Sign::Plus => (&mut self.m_plus, &mut self.c_minus),
            Sign::Minus => (&mut self.m_minus, &mut self.c_plus),
        };
        let mut n2 = 0.0;
        for (mi, x) in m.iter_mut().zip(v) {
            *mi += x - e;
            n2 += (x - e) * (x - e);
        }
        *c += n2.sqrt();
    }

    /// Radius of the centered part for the given sign. The local energy is a
    /// common constant minus `n ρ²`, so a larger radius is strictly better.
    fn rho(&self, s: Sign) -> f64 {
        let (m, c) = match s {
            Sign::Plus => (&self.m_plus, self.c_plus),
            Sign::Minus => (&self.m_minus, self.c_minus),
        };
        let norm = m.iter().map(|x| x * x).sum::<f64>().sqrt();
        ((norm - c) / self.n as f64).max(0.0)
    }

    fn choose(&self, current: Sign) -> Sign {
        let rp = self.rho(Sign::Plus);
        let rm = self.rho(Sign::Minus);
        if rp > rm {
            Sign::Plus
        } else if rm > rp {
            Sign::Minus
        } else {
            current
        }
    }

    fn candidate(&self, s: Sign, out: &mut [f64]) -> Sign {
        let m = match s {
            Sign::Plus => &self.m_plus,
            Sign::Minus => &self.m_minus,
        };
        let rho = self.rho(s);
        let norm = m.iter().map(|x| x * x).sum::<f64>().sqrt();
        if rho > 0.0 && norm > 0.0 {
            for (o, mi) in out.iter_mut().zip(m) {
                *o = self.eta + rho * mi / norm;
            }
        } else {
            out.iter_mut().for_each(|o| *o = self.eta);
        }
        qspace::canonicalize(out, s)
    }
}

/// Mesh adjacency in compressed form.
struct Adjacency {
    offs: Vec<usize>,
    nbrs: Vec<usize>,
}

impl Adjacency {
    fn new(mesh: &Mesh) -> Adjacency {
        let mut offs = vec![0];
        let mut nbrs = Vec::new();
        for i in 0..mesh.node_count() {
            if mesh.is_active(i) {
                nbrs.extend(mesh.neighbors(i));
            }
            offs.push(nbrs.len());
        }
        Adjacency { offs, nbrs }
    }

    fn of(&self, i: usize) -> &[usize] {
        &self.nbrs[self.offs[i]..self.offs[i + 1]]
    }
}

struct Relaxer {
    q: usize,
    interior: Vec<usize>,
    adj: Adjacency,
    omega: f64,
    zero_average: bool,
}

impl Relaxer {
    fn new(mesh: &Mesh, trace: &BoundaryTrace, q: usize, params: &SolveParams) -> Relaxer {
        let mut fixed = vec![false; mesh.node_count()];
        for (i, _) in trace.entries() {
            fixed[*i] = true;
        }
        let interior = (0..mesh.node_count())
            .filter(|&i| mesh.is_active(i) && !fixed[i])
            .collect();
        Relaxer {
            q,
            interior,
            adj: Adjacency::new(mesh),
            omega: params.omega,
            zero_average: params.enforce_zero_average,
        }
    }

    fn sweep(&self, field: &mut SampledField) {
        let q = self.q;
        let mut cand = vec![0.0; q];
        let mut relaxed = vec![0.0; q];
        for &i in &self.interior {
            let (vals, signs) = field.raw_mut();
            let st = LocalStats::gather(
                self.adj.of(i).iter().map(|&j| (&vals[j * q..(j + 1) * q], signs[j])),
                q,
            );
            let cur_sign = signs[i];
            let sign = st.choose(cur_sign);
            let sign = st.candidate(sign, &mut cand);
            let mut chosen: &[f64] = &cand;
            let mut chosen_sign = sign;
            if self.omega != 1.0 && sign == cur_sign {
                let old = &vals[i * q..(i + 1) * q];
                for r in 0..q {
                    relaxed[r] = old[r] + self.omega * (cand[r] - old[r]);
                }
                let rs = qspace::canonicalize(&mut relaxed, sign);
                let energy = |p: &[f64], s: Sign| -> f64 {
                    self.adj
                        .of(i)
                        .iter()
                        .map(|&j| qspace::intrinsic2_raw(p, s, &vals[j * q..(j + 1) * q], signs[j]))
                        .sum()
                };
                if energy(&relaxed, rs) <= energy(old, cur_sign) {
                    chosen = &relaxed;
                    chosen_sign = rs;
                }
            }
            vals[i * q..(i + 1) * q].copy_from_slice(chosen);
            signs[i] = chosen_sign;
        }
        if self.zero_average {
            self.project(field);
        }
    }

    fn project(&self, field: &mut SampledField) {
        let q = self.q;
        let (vals, signs) = field.raw_mut();
        for &i in &self.interior {
            let v = &mut vals[i * q..(i + 1) * q];
            let e = qspace::mean(v);
            v.iter_mut().for_each(|x| *x -= e);
            signs[i] = qspace::canonicalize(v, signs[i]);
        }
    }

    /// Sweeps until the relative decrease drops below `tol`. Returns the
    /// history (starting energy first) and whether it converged.
    fn run(&self, field: &mut SampledField, params: &SolveParams) -> (Vec<f64>, bool) {
        let mut hist = vec![fields::dirichlet_energy(field, None)];
        if self.interior.is_empty() {
            return (hist, true);
        }
        for _ in 0..params.max_sweeps {
            self.sweep(field);
            let e = fields::dirichlet_energy(field, None);
            let prev = *hist.last().unwrap();
            hist.push(e);
            if e == 0.0 || (prev - e) <= params.tol * prev.abs() {
                return (hist, true);
            }
        }
        (hist, false)
    }
}

fn apply_trace(field: &mut SampledField, trace: &BoundaryTrace) -> Result<()> {
    for (i, p) in trace.entries() {
        field.set(*i, p)?;
    }
    Ok(())
}

fn initial_field(
    mesh: &Mesh,
    trace: &BoundaryTrace,
    q: usize,
    restart: usize,
    params: &SolveParams,
) -> Result<SampledField> {
    let base = trace
        .entries()
        .iter()
        .map(|(_, p)| p.eta())
        .sum::<f64>()
        / trace.entries().len() as f64;
    let base = if params.enforce_zero_average { 0.0 } else { base };
    let mut field = SampledField::constant(mesh.clone(), &QPoint::collapsed(q, base));
    if restart > 0 {
        let scale = trace
            .entries()
            .iter()
            .flat_map(|(_, p)| p.values().iter().map(|v| v.abs()))
            .fold(0.0, f64::max)
            .max(1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(
            params
                .rng_seed
                .wrapping_add((restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        );
        for i in 0..mesh.node_count() {
            if !mesh.is_active(i) {
                continue;
            }
            let mut v: Vec<f64> = (0..q).map(|_| rng.gen_range(-scale..=scale)).collect();
            if params.enforce_zero_average {
                let e = qspace::mean(&v);
                v.iter_mut().for_each(|x| *x -= e);
            }
            let s = if rng.gen_bool(0.5) { Sign::Plus } else { Sign::Minus };
            field.set(i, &QPoint::new(v, s)?)?;
        }
    }
    apply_trace(&mut field, trace)?;
    Ok(field)
}

fn prolong(coarse: &SampledField, fine_mesh: &Mesh, trace: &BoundaryTrace) -> Result<SampledField> {
    let q = coarse.q();
    let mut fine = SampledField::constant(fine_mesh.clone(), &QPoint::zero(q));
    for i in 0..fine_mesh.node_count() {
        if !fine_mesh.is_active(i) {
            continue;
        }
        let p = fine_mesh.coords(i);
        let v = match coarse.interpolate(p) {
            Some(v) => v,
            None => {
                let j = nearest_active(coarse.mesh(), p);
                coarse.point(j)
            }
        };
        fine.set(i, &v)?;
    }
    apply_trace(&mut fine, trace)?;
    Ok(fine)
}

fn nearest_active(mesh: &Mesh, p: [f64; 2]) -> usize {
    if let Some(i) = mesh.nearest_node(p) {
        return i;
    }
    (0..mesh.node_count())
        .filter(|&i| mesh.is_active(i))
        .min_by(|&a, &b| dist2(mesh.coords(a), p).total_cmp(&dist2(mesh.coords(b), p)))
        .expect("mesh has active nodes")
}

fn level_meshes(mesh: &Mesh, multilevel: bool) -> Vec<Mesh> {
    let mut levels = vec![mesh.clone()];
    if !multilevel {
        return levels;
    }
    let min_nodes = match mesh {
        Mesh::Line(_) => 9,
        Mesh::Grid(_) => 17,
    };
    while let Some(c) = levels.last().unwrap().coarsen() {
        let size = match &c {
            Mesh::Line(l) => l.n,
            Mesh::Grid(g) => g.nx.min(g.ny),
        };
        if size < min_nodes {
            break;
        }
        levels.push(c);
    }
    levels.reverse();
    levels
}

/// Approximate Dirichlet minimizer with the given boundary data.
pub fn solve(
    trace: &BoundaryTrace,
    mesh: &Mesh,
    params: &SolveParams,
) -> Result<(SampledField, SolveReport)> {
    params.validate()?;
    let q = trace.validate(mesh)?;
    if params.enforce_zero_average {
        if let Some((i, p)) = trace.entries().iter().find(|(_, p)| p.eta().abs() > 1e-9) {
            return Err(Error::InvalidTrace(format!(
                "zero average requested but boundary node {i} has eta = {}",
                p.eta()
            )));
        }
    }
    let levels = level_meshes(mesh, params.multilevel);
    let mut traces = vec![trace.clone()];
    for w in levels.windows(2).rev() {
        let t = traces.last().unwrap().restrict(&w[1], &w[0])?;
        traces.push(t);
    }
    traces.reverse();

    let mut best: Option<(SampledField, Vec<f64>, bool, usize)> = None;
    let mut energies = Vec::with_capacity(params.restarts);
    for restart in 0..params.restarts {
        let mut field = initial_field(&levels[0], &traces[0], q, restart, params)?;
        let mut hist = Vec::new();
        let mut converged = false;
        for (k, m) in levels.iter().enumerate() {
            if k > 0 {
                field = prolong(&field, m, &traces[k])?;
            }
            let relax = Relaxer::new(m, &traces[k], q, params);
            if params.enforce_zero_average {
                relax.project(&mut field);
            }
            let (h, c) = relax.run(&mut field, params);
            hist = h;
            converged = c;
        }
        let e = *hist.last().unwrap();
        energies.push(e);
        let better = best.as_ref().map_or(true, |b| e < *b.1.last().unwrap());
        if better {
            best = Some((field, hist, converged, restart));
        }
    }
    let (mut field, history, converged, best_restart) = best.expect("at least one restart");
    if params.enforce_zero_average {
        field.set_zero_average(true)?;
    }
    let report = SolveReport {
        energy: *history.last().unwrap(),
        converged,
        sweeps: history.len() - 1,
        best_restart,
        restart_energies: energies,
        history,
    };
    Ok((field, report))
}

/// `sweep,energy` rows.
pub fn history_csv(report: &SolveReport) -> String {
    let mut s = String::from("sweep,energy\n");
    for (k, e) in report.history.iter().enumerate() {
        s.push_str(&format!("{k},{e:.17e}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qp(v: &[f64], s: Sign) -> QPoint {
        QPoint::new(v.to_vec(), s).unwrap()
    }

    #[test]
    fn update_fixed_point() {
        let p = qp(&[-1.0, 2.0, 5.0], Sign::Minus);
        let n = vec![p.clone(); 4];
        assert_eq!(local_node_update(&n, &p).unwrap(), p);
    }

    #[test]
    fn update_rank_averages() {
        let n = [qp(&[0.0, 2.0], Sign::Plus), qp(&[2.0, 4.0], Sign::Plus)];
        let out = local_node_update(&n, &QPoint::zero(2)).unwrap();
        assert_eq!(out, qp(&[1.0, 3.0], Sign::Plus));
    }

    #[test]
    fn update_across_sign_change_collapses() {
        let n = [qp(&[1.0, -1.0], Sign::Plus), qp(&[1.0, -1.0], Sign::Minus)];
        let out = local_node_update(&n, &QPoint::zero(2)).unwrap();
        assert_eq!(out, QPoint::zero(2));
        let e0 = local_energy(&out, &n);
        assert!(e0 < local_energy(&n[0], &n));
        assert!(e0 < local_energy(&n[1], &n));
        assert!((e0 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn update_is_local_minimum() {
        let n = [
            qp(&[-2.0, 0.5, 1.0], Sign::Plus),
            qp(&[-1.0, 0.0, 1.0], Sign::Minus),
            qp(&[-0.5, 0.2, 3.0], Sign::Plus),
        ];
        let best = local_node_update(&n, &QPoint::zero(3)).unwrap();
        let e = local_energy(&best, &n);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let v: Vec<f64> = best.values().iter().map(|x| x + rng.gen_range(-0.3..0.3)).collect();
            for s in [Sign::Plus, Sign::Minus] {
                let p = QPoint::new(v.clone(), s).unwrap();
                assert!(local_energy(&p, &n) >= e - 1e-12);
            }
        }
    }

    #[test]
    fn trace_validation() {
        let m = Mesh::line(-1.0, 1.0, 5).unwrap();
        let bad = BoundaryTrace::new(vec![(0, QPoint::zero(2))]);
        assert!(bad.validate(&m).is_err());
        let mixed = BoundaryTrace::new(vec![(0, QPoint::zero(2)), (4, QPoint::zero(3))]);
        assert!(matches!(mixed.validate(&m), Err(Error::Multiplicity { .. })));
        let ok = BoundaryTrace::line(&m, QPoint::zero(2), QPoint::zero(2)).unwrap();
        assert_eq!(ok.validate(&m).unwrap(), 2);
    }

    #[test]
    fn constant_data_extends_constantly() {
        let m = Mesh::line(-1.0, 1.0, 21).unwrap();
        let p = qp(&[1.0, -1.0], Sign::Plus);
        let t = BoundaryTrace::line(&m, p.clone(), p.clone()).unwrap();
        let (f, rep) = solve(&t, &m, &SolveParams::default()).unwrap();
        assert!(rep.energy < 1e-20);
        for i in 0..21 {
            assert!(qspace::gs2_raw(f.values(i), f.sign(i), p.values(), p.sign()) < 1e-20);
        }
    }

    #[test]
    fn params_validation() {
        let p = SolveParams {
            restarts: 0,
            ..SolveParams::default()
        };
        assert!(p.validate().is_err());
        let p = SolveParams {
            tol: 0.0,
            ..SolveParams::default()
        };
        assert!(p.validate().is_err());
    }
}
