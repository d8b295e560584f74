//! Radial analytics: `D`, `H`, the frequency `I`, the Weiss functional,
//! homogeneous extensions and the smoothed frequency.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{self, Mesh, SampledField};
use crate::qspace::{self, QPoint};

/// Angular quadrature points on circles.
pub const CIRCLE_POINTS: usize = 720;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyProfile {
    pub center: [f64; 2],
    pub dim: usize,
    pub radii: Vec<f64>,
    pub d: Vec<f64>,
    pub h: Vec<f64>,
    /// `r D / H`, `None` where `H = 0`.
    pub i: Vec<Option<f64>>,
    pub i0: Option<f64>,
    pub w: Option<Vec<f64>>,
}

impl FrequencyProfile {
    pub fn defined_frequencies(&self) -> Vec<f64> {
        self.i.iter().flatten().copied().collect()
    }

    pub fn with_weiss(mut self, i0: f64) -> Result<Self> {
        let w = weiss(&self, i0)?;
        self.i0 = Some(i0);
        self.w = Some(w);
        Ok(self)
    }
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::InvalidArgument("no radii given".into()));
    }
    if radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("radii must be positive and strictly increasing".into()));
    }
    Ok(())
}

/// Samples `D(r)`, `H(r)` and `I(r)` around `x`.
pub fn profile(field: &SampledField, x: [f64; 2], radii: &[f64]) -> Result<FrequencyProfile> {
    check_radii(radii)?;
    let mut d = Vec::with_capacity(radii.len());
    let mut h = Vec::with_capacity(radii.len());
    let mut i = Vec::with_capacity(radii.len());
    for &r in radii {
        let dr = fields::ball_energy(field, x, r)?.max(0.0);
        let hr = fields::circle_norm2(field, x, r, CIRCLE_POINTS)?;
        d.push(dr);
        h.push(hr);
        i.push((hr > 0.0).then(|| r * dr / hr));
    }
    Ok(FrequencyProfile {
        center: x,
        dim: field.mesh().dim(),
        radii: radii.to_vec(),
        d,
        h,
        i,
        i0: None,
        w: None,
    })
}

/// `W(r) = r^-(m+2I0-2) D(r) - I0 r^-(m+2I0-1) H(r)`.
pub fn weiss(profile: &FrequencyProfile, i0: f64) -> Result<Vec<f64>> {
    if !(i0 > 0.0) {
        return Err(Error::InvalidArgument("I0 must be positive".into()));
    }
    let m = profile.dim as f64;
    Ok(profile
        .radii
        .iter()
        .zip(profile.d.iter().zip(&profile.h))
        .map(|(&r, (&d, &h))| r.powf(-(m + 2.0 * i0 - 2.0)) * d - i0 * r.powf(-(m + 2.0 * i0 - 1.0)) * h)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub pass: bool,
    pub tolerance: f64,
    /// Largest `W(s) - W(r)` over `s < r`, zero when nondecreasing.
    pub max_violation: f64,
    /// The radii `(s, r)` realizing the violation.
    pub at: Option<(f64, f64)>,
}

pub fn check_weiss_monotone(radii: &[f64], w: &[f64], tolerance: f64) -> Result<MonotoneReport> {
    if radii.len() != w.len() || w.len() < 3 {
        return Err(Error::InvalidArgument("monotonicity check needs at least 3 samples".into()));
    }
    let mut best = (w[0], radii[0]);
    let mut worst = 0.0;
    let mut at = None;
    for k in 1..w.len() {
        let v = best.0 - w[k];
        if v > worst {
            worst = v;
            at = Some((best.1, radii[k]));
        }
        if w[k] > best.0 {
            best = (w[k], radii[k]);
        }
    }
    Ok(MonotoneReport {
        pass: worst <= tolerance,
        tolerance,
        max_violation: worst,
        at,
    })
}

/// `3 h Lip²`: the slack granted to discrete monotonicity.
pub fn default_monotonicity_tolerance(field: &SampledField) -> f64 {
    let l = fields::lipschitz_estimate(field);
    3.0 * field.mesh().h() * l * l
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub pass: bool,
    pub alpha: f64,
    pub trivially_satisfied: bool,
    /// Least-squares slope of `log W` against `log r` over `W > 0`.
    pub alpha_hat: Option<f64>,
    /// Radii `s` where `W(s) > (s/r_max)^alpha W(r_max)`.
    pub violations: Vec<f64>,
}

pub fn check_weiss_decay(radii: &[f64], w: &[f64], alpha: f64) -> Result<DecayReport> {
    if radii.len() != w.len() || w.is_empty() {
        return Err(Error::InvalidArgument("decay check needs W samples".into()));
    }
    let n = w.len();
    let (rmax, wmax) = (radii[n - 1], w[n - 1]);
    if w.iter().all(|&x| x <= 0.0) {
        return Ok(DecayReport {
            pass: true,
            alpha,
            trivially_satisfied: true,
            alpha_hat: None,
            violations: vec![],
        });
    }
    let violations: Vec<f64> = (0..n - 1)
        .filter(|&k| {
            let bound = (radii[k] / rmax).powf(alpha) * wmax;
            w[k] > bound + 1e-12 * (bound.abs() + w[k].abs())
        })
        .map(|k| radii[k])
        .collect();
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(w)
        .filter(|(_, &x)| x > 0.0)
        .map(|(&r, &x)| (r.ln(), x.ln()))
        .collect();
    let alpha_hat = (pts.len() >= 2).then(|| {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(DecayReport {
        pass: violations.is_empty(),
        alpha,
        trivially_satisfied: false,
        alpha_hat,
        violations,
    })
}

/// Values on `∂B₁` sampled at equispaced angles `2πk/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleTrace {
    samples: Vec<QPoint>,
}

impl CircleTrace {
    pub fn new(samples: Vec<QPoint>) -> Result<CircleTrace> {
        let q = samples
            .first()
            .map(|p| p.q())
            .ok_or_else(|| Error::InvalidTrace("empty circle trace".into()))?;
        if samples.len() < 8 {
            return Err(Error::InvalidTrace("circle trace needs at least 8 samples".into()));
        }
        if let Some(p) = samples.iter().find(|p| p.q() != q) {
            return Err(Error::Multiplicity {
                expected: q,
                found: p.q(),
            });
        }
        Ok(CircleTrace { samples })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> QPoint) -> Result<CircleTrace> {
        CircleTrace::new((0..n).map(|k| f(2.0 * PI * k as f64 / n as f64)).collect())
    }

    pub fn q(&self) -> usize {
        self.samples[0].q()
    }

    pub fn samples(&self) -> &[QPoint] {
        &self.samples
    }

    /// Piecewise-linear in the sorted values, sign from the nearest sample.
    pub fn eval(&self, angle: f64) -> QPoint {
        let n = self.samples.len();
        let t = angle.rem_euclid(2.0 * PI) / (2.0 * PI) * n as f64;
        let k = (t.floor() as usize) % n;
        let f = t - t.floor();
        let (a, b) = (&self.samples[k], &self.samples[(k + 1) % n]);
        let v = a.values().iter().zip(b.values()).map(|(x, y)| (1.0 - f) * x + f * y).collect();
        let sign = if f < 0.5 { a.sign() } else { b.sign() };
        QPoint::new(v, sign).expect("finite samples")
    }
}

/// `u^I(x) = |x|^I u(x/|x|)` on the given mesh, `Q[[0]]` at the origin.
pub fn homogeneous_extension(
    trace: &dyn Fn(f64) -> QPoint,
    i: f64,
    mesh: &Mesh,
) -> Result<SampledField> {
    if !(i > 0.0) {
        return Err(Error::InvalidArgument("homogeneity must be positive".into()));
    }
    if mesh.dim() != 2 {
        return Err(Error::InvalidArgument("homogeneous extension needs a 2D mesh".into()));
    }
    let q = trace(0.0).q();
    SampledField::from_fn(mesh.clone(), q, |p| {
        let r = p[0].hypot(p[1]);
        if r == 0.0 {
            return QPoint::zero(q);
        }
        trace(p[1].atan2(p[0])).scale(r.powf(i))
    })
}

/// `(1/(m+2I-2)) ∫_{∂B₁} (|D_τ u|² + I²|u|²)` with `m = 2`. The tangential
/// term uses squared length distances between neighboring samples.
pub fn extension_energy_spectral(trace: &CircleTrace, i: f64) -> Result<f64> {
    if !(i > 0.0) {
        return Err(Error::InvalidArgument("homogeneity must be positive".into()));
    }
    let n = trace.samples.len();
    let dphi = 2.0 * PI / n as f64;
    let mut tang = 0.0;
    let mut mass = 0.0;
    for k in 0..n {
        let a = &trace.samples[k];
        let b = &trace.samples[(k + 1) % n];
        tang += qspace::intrinsic2_raw(a.values(), a.sign(), b.values(), b.sign());
        mass += a.norm2();
    }
    Ok((tang / dphi + i * i * mass * dphi) / (2.0 * i))
}

/// Piecewise-linear radial weight: 1 on `[0, 1/2]`, `2 - 2t` on `(1/2, 1]`,
/// 0 beyond.
pub fn phi_weight(t: f64) -> f64 {
    if t <= 0.5 {
        1.0
    } else if t <= 1.0 {
        2.0 - 2.0 * t
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedFrequencySample {
    pub q: [f64; 2],
    pub r: f64,
    pub d_phi: f64,
    pub h_phi: f64,
    pub i_phi: Option<f64>,
}

/// Weighted energy and boundary mass with the weight `φ(|x - q| / r)`.
pub fn smoothed_frequency(field: &SampledField, q: [f64; 2], r: f64) -> Result<SmoothedFrequencySample> {
    let mesh = field.mesh();
    mesh.check_ball(q, r, mesh.h())?;
    let h = mesh.h();
    let dim = mesh.dim();
    let w = fields::edge_weight(dim, h);
    let dist = |p: [f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]);
    let mut d_phi = 0.0;
    mesh.for_each_edge(|a, b| {
        let (pa, pb) = (mesh.coords(a), mesh.coords(b));
        let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
        let wt = phi_weight(dist(mid) / r);
        if wt > 0.0 {
            d_phi += wt * w * field.edge_dist2(a, b);
        }
    });
    let cell = h.powi(dim as i32);
    let mut h_phi = 0.0;
    for k in 0..mesh.node_count() {
        if !mesh.is_active(k) {
            continue;
        }
        let d = dist(mesh.coords(k));
        let t = d / r;
        if t > 0.5 && t <= 1.0 {
            h_phi += 2.0 * qspace::intrinsic2_raw(field.values(k), field.sign(k), &vec![0.0; field.q()], qspace::Sign::Plus) / d * cell;
        }
    }
    Ok(SmoothedFrequencySample {
        q,
        r,
        d_phi,
        h_phi,
        i_phi: (h_phi > 0.0).then(|| r * d_phi / h_phi),
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:.12e}"))
}

/// Columns `r,D,H,I,W`; undefined entries are left empty.
pub fn profile_csv(p: &FrequencyProfile) -> String {
    let mut s = String::from("r,D,H,I,W\n");
    for k in 0..p.radii.len() {
        let w = p.w.as_ref().map(|w| w[k]);
        s.push_str(&format!(
            "{:.12e},{:.12e},{:.12e},{},{}\n",
            p.radii[k],
            p.d[k],
            p.h[k],
            opt(p.i[k]),
            opt(w)
        ));
    }
    s
}

/// Columns `q,r,D_phi,H_phi,I_phi` with `q` written as `x;y`.
pub fn smoothed_csv(samples: &[SmoothedFrequencySample]) -> String {
    let mut s = String::from("q,r,D_phi,H_phi,I_phi\n");
    for x in samples {
        s.push_str(&format!(
            "{:.6};{:.6},{:.12e},{:.12e},{:.12e},{}\n",
            x.q[0],
            x.q[1],
            x.r,
            x.d_phi,
            x.h_phi,
            opt(x.i_phi)
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qspace::Sign;

    fn model_1d() -> SampledField {
        SampledField::from_fn(Mesh::line(-1.0, 1.0, 201).unwrap(), 2, |p| {
            QPoint::new(vec![p[0], -p[0]], Sign::of(p[0])).unwrap()
        })
        .unwrap()
    }

    #[test]
    fn model_frequency_is_one() {
        let radii = [0.1, 0.3, 0.5, 0.8];
        let p = profile(&model_1d(), [0.0, 0.0], &radii).unwrap();
        for (k, &r) in radii.iter().enumerate() {
            assert!((p.d[k] - 4.0 * r).abs() < 1e-10);
            assert!((p.h[k] - 4.0 * r * r).abs() < 1e-10);
            assert!((p.i[k].unwrap() - 1.0).abs() < 1e-10);
        }
        let w = weiss(&p, 1.0).unwrap();
        assert!(w.iter().all(|x| x.abs() < 1e-9));
        assert!(profile(&model_1d(), [0.0, 0.0], &[0.5, 0.99]).is_err());
    }

    #[test]
    fn constant_field_frequency_zero() {
        let f = SampledField::constant(Mesh::disk(1.0, 65).unwrap(), &QPoint::new(vec![1.0, 2.0], Sign::Plus).unwrap());
        let p = profile(&f, [0.1, 0.0], &[0.2, 0.4]).unwrap();
        assert!(p.i.iter().all(|i| i.unwrap().abs() < 1e-12));
        let s = smoothed_frequency(&f, [0.0, 0.0], 0.5).unwrap();
        assert!(s.i_phi.unwrap().abs() < 1e-12);
    }

    #[test]
    fn harmonic_degree_two() {
        let f = SampledField::from_fn(Mesh::disk(1.0, 129).unwrap(), 1, |p| {
            QPoint::new(vec![p[0] * p[0] - p[1] * p[1]], Sign::Plus).unwrap()
        })
        .unwrap();
        let p = profile(&f, [0.0, 0.0], &[0.3, 0.6]).unwrap();
        for i in p.defined_frequencies() {
            assert!((i - 2.0).abs() < 0.01, "{i}");
        }
    }

    #[test]
    fn weiss_sign_follows_frequency() {
        let p = FrequencyProfile {
            center: [0.0; 2],
            dim: 2,
            radii: vec![0.5],
            d: vec![3.0],
            h: vec![1.0],
            i: vec![Some(1.5)],
            i0: None,
            w: None,
        };
        assert!(weiss(&p, 1.0).unwrap()[0] > 0.0);
        assert!(weiss(&p, 0.0).is_err());
    }

    #[test]
    fn monotone_checks() {
        let r = [0.1, 0.2, 0.3, 0.4];
        assert!(check_weiss_monotone(&r, &[0.0; 4], 0.0).unwrap().pass);
        let rep = check_weiss_monotone(&r, &[0.4, 0.3, 0.35, 0.1], 1e-3).unwrap();
        assert!(!rep.pass);
        assert!((rep.max_violation - 0.3).abs() < 1e-15);
        assert_eq!(rep.at, Some((0.1, 0.4)));
        assert!(check_weiss_monotone(&r[..2], &[0.0; 2], 0.0).is_err());
    }

    #[test]
    fn decay_checks() {
        let r: Vec<f64> = (1..=8).map(|k| 0.1 * k as f64).collect();
        let z = check_weiss_decay(&r, &vec![0.0; 8], 0.5).unwrap();
        assert!(z.pass && z.trivially_satisfied && z.alpha_hat.is_none());
        let w: Vec<f64> = r.iter().map(|x| 2.0 * x.sqrt()).collect();
        let p = check_weiss_decay(&r, &w, 0.5).unwrap();
        assert!(p.pass);
        assert!((p.alpha_hat.unwrap() - 0.5).abs() < 1e-12);
        let c = check_weiss_decay(&r, &vec![1.0; 8], 0.1).unwrap();
        assert!(!c.pass);
    }

    #[test]
    fn spectral_energy_closed_forms() {
        let zero = CircleTrace::from_fn(64, |_| QPoint::zero(2)).unwrap();
        assert_eq!(extension_energy_spectral(&zero, 1.0).unwrap(), 0.0);
        let s1 = CircleTrace::from_fn(4096, |t| QPoint::new(vec![t.sin()], Sign::Plus).unwrap()).unwrap();
        assert!((extension_energy_spectral(&s1, 1.0).unwrap() - PI).abs() < 1e-5);
        let s2 = CircleTrace::from_fn(4096, |t| QPoint::new(vec![(2.0 * t).sin()], Sign::Plus).unwrap()).unwrap();
        assert!((extension_energy_spectral(&s2, 2.0).unwrap() - 2.0 * PI).abs() < 1e-5);
    }

    #[test]
    fn extension_of_homogeneous_is_itself() {
        let mesh = Mesh::disk(1.0, 33).unwrap();
        let tr = |t: f64| QPoint::new(vec![t.cos(), -t.cos()], Sign::of(t.cos())).unwrap();
        let f = homogeneous_extension(&tr, 1.0, &mesh).unwrap();
        for k in 0..mesh.node_count() {
            if !mesh.is_active(k) {
                continue;
            }
            let [x, _] = mesh.coords(k);
            let want = QPoint::new(vec![x, -x], Sign::of(x)).unwrap();
            assert!(qspace::gs2_raw(f.values(k), f.sign(k), want.values(), want.sign()) < 1e-24);
        }
        let z = homogeneous_extension(&|_| QPoint::zero(2), 1.5, &mesh).unwrap();
        assert_eq!(fields::dirichlet_energy(&z, None), 0.0);
        let s2 = homogeneous_extension(&|t: f64| QPoint::new(vec![(2.0 * t).sin()], Sign::Plus).unwrap(), 2.0, &mesh).unwrap();
        for k in (0..mesh.node_count()).filter(|&k| mesh.is_active(k)) {
            let [x, y] = mesh.coords(k);
            assert!((s2.values(k)[0] - 2.0 * x * y).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_shape() {
        assert_eq!(phi_weight(0.0), 1.0);
        assert_eq!(phi_weight(0.5), 1.0);
        assert!((phi_weight(0.75) - 0.5).abs() < 1e-15);
        assert_eq!(phi_weight(1.0), 0.0);
        assert_eq!(phi_weight(2.0), 0.0);
    }

    #[test]
    fn smoothed_scaling_invariance() {
        let f = SampledField::from_fn(Mesh::disk(1.0, 65).unwrap(), 2, |p| {
            QPoint::new(vec![p[0], -p[0]], Sign::of(p[0])).unwrap()
        })
        .unwrap();
        let a = smoothed_frequency(&f, [0.0, 0.0], 0.6).unwrap().i_phi.unwrap();
        for l in [0.5, 2.0] {
            let b = smoothed_frequency(&f.scaled(l), [0.0, 0.0], 0.6).unwrap().i_phi.unwrap();
            assert!((a - b).abs() <= 1e-10 * a.abs());
        }
        assert!((a - 1.0).abs() < 0.05, "{a}");
    }
}
