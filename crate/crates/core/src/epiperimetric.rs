//! Explicit epiperimetric competitor in two dimensions: Dirichlet spectra of
//! circular arcs, harmonic annulus extensions and the glued inner extension.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qspace::{QPoint, Sign};

const M: f64 = 2.0;

/// Dirichlet eigen-data of an arc of length `theta`:
/// `λ_k = (kπ/θ)²`, `μ_k = kπ/θ`, `h_k(s) = sqrt(2/θ) sin(kπ s/θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcSpectrum {
    pub theta: f64,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

impl ArcSpectrum {
    pub fn modes(&self) -> usize {
        self.lambda.len()
    }

    /// `h_k(s)` for `k = 1..=K`.
    pub fn h(&self, k: usize, s: f64) -> f64 {
        (2.0 / self.theta).sqrt() * (k as f64 * PI * s / self.theta).sin()
    }
}

pub fn arc_eigen(theta: f64, k: usize) -> Result<ArcSpectrum> {
    if !(theta > 0.0 && theta <= 2.0 * PI + 1e-12) {
        return Err(Error::InvalidArgument(format!("arc length must lie in (0, 2π], got {theta}")));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one mode".into()));
    }
    let mu: Vec<f64> = (1..=k).map(|j| j as f64 * PI / theta).collect();
    let lambda = mu.iter().map(|m| m * (M - 2.0 + m)).collect();
    Ok(ArcSpectrum { theta, lambda, mu })
}

/// Composite Simpson weights on `n` equispaced points (trapezoid for even `n`).
fn quad_weights(n: usize, ds: f64) -> Vec<f64> {
    let mut w = vec![ds; n];
    if n % 2 == 1 && n >= 3 {
        for (j, wj) in w.iter_mut().enumerate() {
            *wj = ds / 3.0
                * if j == 0 || j == n - 1 {
                    1.0
                } else if j % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
        }
    } else {
        w[0] *= 0.5;
        w[n - 1] *= 0.5;
    }
    w
}

/// `a_k = ∫ u h_k` over the arc, for samples at `s_j = jθ/(n-1)`.
pub fn fourier_on_arc(samples: &[f64], spectrum: &ArcSpectrum) -> Result<Vec<f64>> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::InvalidTrace("an arc trace needs at least 3 samples".into()));
    }
    let scale = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-8 * scale + 1e-12;
    if samples[0].abs() > tol || samples[n - 1].abs() > tol {
        return Err(Error::InvalidTrace(format!(
            "trace does not vanish at the arc endpoints ({:e}, {:e})",
            samples[0],
            samples[n - 1]
        )));
    }
    let ds = spectrum.theta / (n - 1) as f64;
    let w = quad_weights(n, ds);
    Ok((1..=spectrum.modes())
        .map(|k| {
            samples
                .iter()
                .enumerate()
                .map(|(j, u)| w[j] * u * spectrum.h(k, j as f64 * ds))
                .sum()
        })
        .collect())
}

/// `ρ(r) = A r^μ - B r^-μ` with `ρ(1) = 1`, `ρ(σ) = 0`.
pub fn coefficients_ab(sigma: f64, mu: f64) -> Result<(f64, f64)> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::InvalidArgument(format!("sigma must lie in (0, 1), got {sigma}")));
    }
    if !(mu > 0.0) {
        return Err(Error::InvalidArgument("mu must be positive".into()));
    }
    // divide through by σ^-μ to stay finite for large μ
    let t = sigma.powf(2.0 * mu);
    Ok((1.0 / (1.0 - t), t / (1.0 - t)))
}

/// Energy of the harmonic extension of mode `k` into the annulus
/// `B₁ \ B_σ` vanishing on the inner circle, per unit squared coefficient.
pub fn killed_mode_factor(sigma: f64, mu: f64) -> f64 {
    let t = sigma.powf(2.0 * mu);
    mu * (1.0 + t) / (1.0 - t)
}

/// Annulus energy of one sheet with coefficients `a`. With
/// `kill_first_mode = false` the first mode keeps its 1-homogeneous profile.
pub fn annulus_energy(a: &[f64], sigma: f64, spectrum: &ArcSpectrum, kill_first_mode: bool) -> f64 {
    a.iter()
        .enumerate()
        .take(spectrum.modes())
        .map(|(k, &ak)| {
            let f = if k == 0 && !kill_first_mode {
                (spectrum.lambda[0] + 1.0) * (1.0 - sigma.powf(M)) / M
            } else {
                killed_mode_factor(sigma, spectrum.mu[k])
            };
            f * ak * ak
        })
        .sum()
}

/// Energy of `ρ(r) f(θ)` on the annular sector with `ρ` linear from 0 at
/// `σ` to 1 at 1, given `∫f²` and `∫f'²`.
pub fn cutoff_energy(int_f2: f64, int_df2: f64, sigma: f64) -> f64 {
    let d = 1.0 - sigma;
    let radial = (1.0 - sigma * sigma) / (2.0 * d * d);
    let angular = ((1.0 - sigma * sigma) / 2.0 - 2.0 * sigma * d + sigma * sigma * (1.0 / sigma).ln()) / (d * d);
    int_f2 * radial + int_df2 * angular
}

/// A first-mode arc placed on the circle: start angle and length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcPlacement {
    pub start: f64,
    pub theta: f64,
}

/// Harmonic-extension energy of the glued first modes on the circle of
/// radius σ, from full-circle Fourier modes `1..=k_inner`.
pub fn inner_extension_energy(
    a1_plus: &[f64],
    a1_minus: &[f64],
    arc_plus: Option<ArcPlacement>,
    arc_minus: Option<ArcPlacement>,
    sigma: f64,
    k_inner: usize,
) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (cp, cm) = (norm(a1_plus), norm(a1_minus));
    let n = 16384usize.max(8 * k_inner);
    let mut u = vec![0.0; n];
    for (c, arc, sgn) in [(cp, arc_plus, 1.0), (cm, arc_minus, -1.0)] {
        let Some(arc) = arc else { continue };
        if c == 0.0 {
            continue;
        }
        for (j, uj) in u.iter_mut().enumerate() {
            let phi = 2.0 * PI * j as f64 / n as f64;
            let s = (phi - arc.start).rem_euclid(2.0 * PI);
            if s < arc.theta {
                *uj += sgn * sigma * c * (2.0 / arc.theta).sqrt() * (PI * s / arc.theta).sin();
            }
        }
    }
    let mut e = 0.0;
    for k in 1..=k_inner {
        let (mut a, mut b) = (0.0, 0.0);
        for (j, uj) in u.iter().enumerate() {
            let phi = 2.0 * PI * j as f64 / n as f64 * k as f64;
            a += uj * phi.cos();
            b += uj * phi.sin();
        }
        a *= 2.0 / n as f64;
        b *= 2.0 / n as f64;
        e += k as f64 * (a * a + b * b);
    }
    PI * e
}

/// Coefficient on the Step-1 comparison for one mode:
/// `(λ+1)(1-σ^m-δ)/m + δ - μ(1+σ^2μ)/(1-σ^2μ)`, nonnegative when the
/// killed extension wins by the margin δ.
pub fn step1_mode_margin(lambda: f64, sigma: f64, delta: f64) -> f64 {
    let mu = 0.5 * (-(M - 2.0) + ((M - 2.0).powi(2) + 4.0 * lambda).sqrt());
    (lambda + 1.0) * (1.0 - sigma.powf(M) - delta) / M + delta - killed_mode_factor(sigma, mu)
}

/// An open arc `(start, end)` with sign and sheet samples at equispaced
/// arclength, endpoints included; `samples[j]` holds the Q sorted values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub start: f64,
    pub end: f64,
    pub sign: Sign,
    pub main: bool,
    pub samples: Vec<Vec<f64>>,
}

impl Arc {
    pub fn theta(&self) -> f64 {
        self.end - self.start
    }

    pub fn sheet(&self, i: usize) -> Vec<f64> {
        self.samples.iter().map(|v| v[i]).collect()
    }

    pub fn placement(&self) -> ArcPlacement {
        ArcPlacement {
            start: self.start,
            theta: self.theta(),
        }
    }

    pub fn from_fn(start: f64, end: f64, sign: Sign, n: usize, f: impl Fn(f64) -> Vec<f64>) -> Arc {
        let theta = end - start;
        let samples = (0..n)
            .map(|j| {
                let mut v = f(theta * j as f64 / (n - 1) as f64);
                v.sort_by(|a, b| a.total_cmp(b));
                v
            })
            .collect();
        Arc {
            start,
            end,
            sign,
            main: false,
            samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPartition {
    pub q: usize,
    pub arcs: Vec<Arc>,
}

impl BoundaryPartition {
    /// Validates and flags the largest arc of each sign as main (ties: the
    /// smallest start angle in `[0, 2π)`).
    pub fn new(q: usize, arcs: Vec<Arc>) -> Result<BoundaryPartition> {
        let mut p = BoundaryPartition { q, arcs };
        p.validate()?;
        p.assign_main();
        Ok(p)
    }

    /// Keeps caller-provided main flags (at most one per sign).
    pub fn with_main_flags(q: usize, arcs: Vec<Arc>) -> Result<BoundaryPartition> {
        let p = BoundaryPartition { q, arcs };
        p.validate()?;
        for s in [Sign::Plus, Sign::Minus] {
            if p.arcs.iter().filter(|a| a.main && a.sign == s).count() > 1 {
                return Err(Error::InvalidTrace("more than one main arc of the same sign".into()));
            }
        }
        Ok(p)
    }

    fn assign_main(&mut self) {
        for a in &mut self.arcs {
            a.main = false;
        }
        for s in [Sign::Plus, Sign::Minus] {
            let best = self
                .arcs
                .iter()
                .enumerate()
                .filter(|(_, a)| a.sign == s)
                .min_by(|(_, a), (_, b)| {
                    b.theta()
                        .total_cmp(&a.theta())
                        .then(a.start.rem_euclid(2.0 * PI).total_cmp(&b.start.rem_euclid(2.0 * PI)))
                })
                .map(|(i, _)| i);
            if let Some(i) = best {
                self.arcs[i].main = true;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::InvalidTrace("q must be positive".into()));
        }
        let mut spans = vec![];
        for (k, a) in self.arcs.iter().enumerate() {
            let th = a.theta();
            if !(th > 0.0 && th <= 2.0 * PI + 1e-12) {
                return Err(Error::InvalidTrace(format!("arc {k} has length {th} outside (0, 2π]")));
            }
            if a.samples.len() < 3 {
                return Err(Error::InvalidTrace(format!("arc {k} has fewer than 3 samples")));
            }
            for v in &a.samples {
                if v.len() != self.q {
                    return Err(Error::Multiplicity {
                        expected: self.q,
                        found: v.len(),
                    });
                }
                if v.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::InvalidTrace(format!("arc {k}: sheets are not ordered")));
                }
            }
            let scale = a.samples.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
            let tol = 1e-8 * scale + 1e-12;
            let ends = [&a.samples[0], &a.samples[a.samples.len() - 1]];
            if ends.iter().any(|v| v.iter().any(|x| x.abs() > tol)) {
                return Err(Error::InvalidTrace(format!("arc {k}: trace does not vanish at the endpoints")));
            }
            let s0 = a.start.rem_euclid(2.0 * PI);
            spans.push((s0, s0 + th));
        }
        // disjointness modulo 2π
        for i in 0..spans.len() {
            for j in 0..spans.len() {
                if i == j {
                    continue;
                }
                let (a0, a1) = spans[i];
                let (b0, b1) = spans[j];
                for shift in [-2.0 * PI, 0.0, 2.0 * PI] {
                    let (c0, c1) = (b0 + shift, b1 + shift);
                    if a0 < c1 - 1e-12 && c0 < a1 - 1e-12 {
                        return Err(Error::InvalidTrace(format!("arcs {i} and {j} overlap")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Largest `|η|` over all samples.
    pub fn max_abs_eta(&self) -> f64 {
        self.arcs
            .iter()
            .flat_map(|a| a.samples.iter())
            .map(|v| (v.iter().sum::<f64>() / v.len() as f64).abs())
            .fold(0.0, f64::max)
    }

    /// Trace value at an angle: zero off the arcs.
    pub fn eval(&self, phi: f64) -> (Vec<f64>, Sign) {
        for a in &self.arcs {
            let s = (phi - a.start).rem_euclid(2.0 * PI);
            let th = a.theta();
            if s < th {
                let n = a.samples.len();
                let t = s / th * (n - 1) as f64;
                let j = (t.floor() as usize).min(n - 2);
                let f = t - j as f64;
                let v = a.samples[j]
                    .iter()
                    .zip(&a.samples[j + 1])
                    .map(|(x, y)| (1.0 - f) * x + f * y)
                    .collect();
                return (v, a.sign);
            }
        }
        (vec![0.0; self.q], Sign::Plus)
    }
}

/// Text format: `q <Q>`, then per arc a line `arc <start> <end> <+|-> <n> [main|small]`
/// followed by `n` lines of Q sheet values.
pub fn parse_partition(text: &str) -> Result<BoundaryPartition> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (ln, first) = lines.next().ok_or_else(|| Error::parse(1, "empty partition file"))?;
    let q = match first.split_whitespace().collect::<Vec<_>>()[..] {
        ["q", v] => v.parse::<usize>().map_err(|_| Error::parse(ln, "bad q"))?,
        _ => return Err(Error::parse(ln, "expected `q <Q>`")),
    };
    let mut arcs = vec![];
    let mut explicit = false;
    while let Some((ln, line)) = lines.next() {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() < 5 || t[0] != "arc" {
            return Err(Error::parse(ln, "expected `arc <start> <end> <sign> <n>`"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::parse(ln, format!("bad number `{s}`")));
        let sign = match t[3] {
            "+" => Sign::Plus,
            "-" | "\u{2212}" => Sign::Minus,
            s => return Err(Error::parse(ln, format!("bad sign `{s}`"))),
        };
        let n: usize = t[4].parse().map_err(|_| Error::parse(ln, "bad sample count"))?;
        let main = match t.get(5) {
            None => false,
            Some(&"main") => {
                explicit = true;
                true
            }
            Some(&"small") => {
                explicit = true;
                false
            }
            Some(s) => return Err(Error::parse(ln, format!("unexpected token `{s}`"))),
        };
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let (sl, sline) = lines.next().ok_or_else(|| Error::parse(ln, "missing samples"))?;
            let v = sline
                .split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|_| Error::parse(sl, format!("bad value `{s}`"))))
                .collect::<Result<Vec<_>>>()?;
            samples.push(v);
        }
        arcs.push(Arc {
            start: num(t[1])?,
            end: num(t[2])?,
            sign,
            main,
            samples,
        });
    }
    if explicit {
        BoundaryPartition::with_main_flags(q, arcs)
    } else {
        BoundaryPartition::new(q, arcs)
    }
}

pub fn format_partition(p: &BoundaryPartition) -> String {
    let mut s = format!("q {}\n", p.q);
    for a in &p.arcs {
        let sg = if a.sign == Sign::Plus { "+" } else { "-" };
        let tag = if a.main { "main" } else { "small" };
        s.push_str(&format!("arc {:?} {:?} {sg} {} {tag}\n", a.start, a.end, a.samples.len()));
        for v in &a.samples {
            let vals: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
            s.push_str(&vals.join(" "));
            s.push('\n');
        }
    }
    s
}

pub fn read_partition(path: &Path) -> Result<BoundaryPartition> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_partition(&text)
}

/// The restriction of `({x₁, -x₁}, sign x₁)` to the unit circle, with
/// `ε h₂` added along `(-1, 1)/√2` on the positive half circle.
pub fn model_partition(epsilon: f64, n: usize) -> Result<BoundaryPartition> {
    let spec = arc_eigen(PI, 2)?;
    let plus = Arc::from_fn(-0.5 * PI, 0.5 * PI, Sign::Plus, n, |s| {
        let v = (s - 0.5 * PI).cos() + epsilon * spec.h(2, s) / 2f64.sqrt();
        vec![-v, v]
    });
    let minus = Arc::from_fn(0.5 * PI, 1.5 * PI, Sign::Minus, n, |s| {
        let v = (s + 0.5 * PI).cos();
        vec![v, -v]
    });
    BoundaryPartition::new(2, vec![plus, minus])
}

/// The trace of [`model_partition`] as a special Q-point at angle `phi`.
pub fn model_trace_point(epsilon: f64, phi: f64) -> QPoint {
    let phi = (phi + 0.5 * PI).rem_euclid(2.0 * PI) - 0.5 * PI;
    let c = phi.cos();
    let (v, sign) = if phi < 0.5 * PI {
        let s = phi + 0.5 * PI;
        (c + epsilon * (2.0 / PI).sqrt() * (2.0 * s).sin() / 2f64.sqrt(), Sign::Plus)
    } else {
        (c, Sign::Minus)
    };
    QPoint::new(vec![-v, v], sign).expect("finite")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpiParams {
    pub sigma: f64,
    pub modes: usize,
    pub inner_modes: usize,
    pub delta_target: f64,
}

impl Default for EpiParams {
    fn default() -> Self {
        EpiParams {
            sigma: 1.0 / 6.0,
            modes: 16,
            inner_modes: 64,
            delta_target: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcReport {
    pub start: f64,
    pub theta: f64,
    pub sign: Sign,
    pub main: bool,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Per sheet, the first `modes` coefficients.
    pub coefficients: Vec<Vec<f64>>,
    pub energy_u_i: f64,
    pub mass: f64,
    pub energy_w: f64,
    /// Squared-norm and derivative residuals beyond the retained modes.
    pub residual_l2: f64,
    pub residual_h1: f64,
    /// Killed arcs: `∫_V |Du^I|² - ∫_V |Dw|²` and `δ (∫_U |Du^I|² - ∫_F |u|²)`.
    pub step1_lhs: Option<f64>,
    pub step1_rhs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitorReport {
    pub sigma: f64,
    pub delta_target: f64,
    pub energy_w: f64,
    pub energy_u_i: f64,
    pub energy_inner: f64,
    pub h1: f64,
    pub w1: f64,
    pub gap: f64,
    pub delta_measured: Option<f64>,
    pub trivially_satisfied: bool,
    pub pass: bool,
    pub arcs: Vec<ArcReport>,
}

fn arc_integrals(samples: &[f64], theta: f64) -> (f64, f64) {
    let n = samples.len();
    let ds = theta / (n - 1) as f64;
    let w = quad_weights(n, ds);
    let l2 = samples.iter().zip(&w).map(|(u, wj)| u * u * wj).sum();
    let h1 = samples.windows(2).map(|p| (p[1] - p[0]).powi(2)).sum::<f64>() / ds;
    (l2, h1)
}

/// Builds the competitor and compares its energy with that of the
/// 1-homogeneous extension of the trace.
pub fn verify_epiperimetric(partition: &BoundaryPartition, params: &EpiParams) -> Result<CompetitorReport> {
    let sigma = params.sigma;
    if !(sigma > 0.0 && sigma <= 0.5) {
        return Err(Error::InvalidArgument(format!("sigma must lie in (0, 1/2], got {sigma}")));
    }
    if params.modes < 2 || params.inner_modes < 1 {
        return Err(Error::InvalidArgument("need at least 2 arc modes and 1 inner mode".into()));
    }
    partition.validate()?;
    let eta = partition.max_abs_eta();
    if eta > 1e-9 {
        return Err(Error::InvalidTrace(format!("trace average is not zero (max |eta| = {eta:e})")));
    }
    let mut arcs = vec![];
    let mut first_modes: [Option<(Vec<f64>, ArcPlacement)>; 2] = [None, None];
    for arc in &partition.arcs {
        let th = arc.theta();
        let spec = arc_eigen(th, params.modes)?;
        let mut coeffs = vec![];
        let (mut e_ui, mut mass, mut e_w, mut r0s, mut r1s) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let keep_first = arc.main;
        for i in 0..partition.q {
            let sheet = arc.sheet(i);
            let a = fourier_on_arc(&sheet, &spec)?;
            let (l2, h1) = arc_integrals(&sheet, th);
            let r0 = (l2 - a.iter().map(|x| x * x).sum::<f64>()).max(0.0);
            let r1 = (h1 - a.iter().zip(&spec.lambda).map(|(x, l)| l * x * x).sum::<f64>()).max(0.0);
            e_ui += (h1 + l2) / M;
            mass += l2;
            e_w += annulus_energy(&a, sigma, &spec, !keep_first) + cutoff_energy(r0, r1, sigma);
            r0s += r0;
            r1s += r1;
            coeffs.push(a);
        }
        if keep_first {
            let slot = if arc.sign == Sign::Plus { 0 } else { 1 };
            let a1: Vec<f64> = coeffs.iter().map(|a| a[0]).collect();
            first_modes[slot] = Some((a1, arc.placement()));
        }
        let (lhs, rhs) = if keep_first {
            (None, None)
        } else {
            (
                Some(e_ui * (1.0 - sigma.powf(M)) - e_w),
                Some(params.delta_target * (e_ui - mass)),
            )
        };
        arcs.push(ArcReport {
            start: arc.start,
            theta: th,
            sign: arc.sign,
            main: arc.main,
            lambda1: spec.lambda[0],
            lambda2: spec.lambda[1],
            coefficients: coeffs,
            energy_u_i: e_ui,
            mass,
            energy_w: e_w,
            residual_l2: r0s,
            residual_h1: r1s,
            step1_lhs: lhs,
            step1_rhs: rhs,
        });
    }
    let zero = vec![0.0; partition.q];
    let (ap, pp) = first_modes[0].clone().map_or((zero.clone(), None), |(a, p)| (a, Some(p)));
    let (am, pm) = first_modes[1].clone().map_or((zero, None), |(a, p)| (a, Some(p)));
    let energy_inner = inner_extension_energy(&ap, &am, pp, pm, sigma, params.inner_modes);
    let energy_w = arcs.iter().map(|a| a.energy_w).sum::<f64>() + energy_inner;
    let energy_u_i: f64 = arcs.iter().map(|a| a.energy_u_i).sum();
    let h1: f64 = arcs.iter().map(|a| a.mass).sum();
    let w1 = energy_u_i - h1;
    let gap = energy_u_i - energy_w;
    let trivially = w1 <= 1e-6 * h1.max(f64::MIN_POSITIVE);
    let delta_measured = (!trivially).then(|| gap / w1);
    Ok(CompetitorReport {
        sigma,
        delta_target: params.delta_target,
        energy_w,
        energy_u_i,
        energy_inner,
        h1,
        w1,
        gap,
        delta_measured,
        trivially_satisfied: trivially,
        pass: trivially || gap >= params.delta_target * w1,
        arcs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_spectra() {
        let s = arc_eigen(PI, 4).unwrap();
        for k in 0..4 {
            assert!((s.lambda[k] - ((k + 1) * (k + 1)) as f64).abs() < 1e-12);
            assert!((s.mu[k] - (k + 1) as f64).abs() < 1e-12);
            assert_eq!(s.mu[k] * (M - 2.0 + s.mu[k]), s.lambda[k]);
        }
        let q = arc_eigen(PI / 2.0, 1).unwrap();
        assert!((q.lambda[0] - 4.0).abs() < 1e-12 && (q.mu[0] - 2.0).abs() < 1e-12);
        assert!(arc_eigen(0.0, 3).is_err());
        assert!(arc_eigen(-1.0, 3).is_err());
    }

    #[test]
    fn gram_matrix_is_identity() {
        let th = 1.3;
        let s = arc_eigen(th, 8).unwrap();
        let n = 2049;
        for j in 1..=8 {
            let hj: Vec<f64> = (0..n).map(|i| s.h(j, th * i as f64 / (n - 1) as f64)).collect();
            let c = fourier_on_arc(&hj, &s).unwrap();
            for (k, ck) in c.iter().enumerate() {
                let want = if k + 1 == j { 1.0 } else { 0.0 };
                assert!((ck - want).abs() < 1e-8, "{j} {k} {ck}");
            }
        }
    }

    #[test]
    fn coefficients_of_mode_combinations() {
        let th = 2.0;
        let s = arc_eigen(th, 5).unwrap();
        let n = 1025;
        let u: Vec<f64> = (0..n)
            .map(|i| {
                let x = th * i as f64 / (n - 1) as f64;
                2.0 * s.h(1, x) + 3.0 * s.h(2, x)
            })
            .collect();
        let c = fourier_on_arc(&u, &s).unwrap();
        let want = [2.0, 3.0, 0.0, 0.0, 0.0];
        for (a, b) in c.iter().zip(want) {
            assert!((a - b).abs() < 1e-9);
        }
        let mut bad = u.clone();
        bad[0] = 0.5;
        assert!(fourier_on_arc(&bad, &s).is_err());
    }

    #[test]
    fn ab_examples() {
        let (a, b) = coefficients_ab(0.5, 1.0).unwrap();
        assert!((a - 4.0 / 3.0).abs() < 1e-15 && (b - 1.0 / 3.0).abs() < 1e-15);
        for (sg, mu) in [(0.1, 0.5), (1.0 / 6.0, 3.0), (0.4, 7.5)] {
            let (a, b) = coefficients_ab(sg, mu).unwrap();
            let rho = |r: f64| a * r.powf(mu) - b * r.powf(-mu);
            assert!((rho(1.0) - 1.0).abs() < 1e-14);
            assert!(rho(sg).abs() < 1e-12);
        }
        let (a, b) = coefficients_ab(0.5, 200.0).unwrap();
        assert!((a - 1.0).abs() < 1e-15 && b < 1e-15);
        assert!(coefficients_ab(1.0, 1.0).is_err());
        assert!(coefficients_ab(0.0, 1.0).is_err());
    }

    #[test]
    fn annulus_examples() {
        let s = arc_eigen(PI, 3).unwrap();
        assert_eq!(annulus_energy(&[0.0, 0.0], 0.5, &s, true), 0.0);
        assert!((annulus_energy(&[1.0], 0.5, &s, true) - 5.0 / 3.0).abs() < 1e-14);
        assert!((annulus_energy(&[1.0], 0.5, &s, false) - 0.75).abs() < 1e-14);
    }

    #[test]
    fn cutoff_matches_quadrature() {
        // f(θ) = sin θ on [0, π]: ∫f² = ∫f'² = π/2
        let sigma = 0.2;
        let want = cutoff_energy(PI / 2.0, PI / 2.0, sigma);
        let n = 4000;
        let mut acc = 0.0;
        for i in 0..n {
            let r = sigma + (i as f64 + 0.5) * (1.0 - sigma) / n as f64;
            let rho = (r - sigma) / (1.0 - sigma);
            let drho = 1.0 / (1.0 - sigma);
            acc += (drho * drho * r + rho * rho / r) * (PI / 2.0) * (1.0 - sigma) / n as f64;
        }
        assert!((acc - want).abs() < 1e-6);
    }

    #[test]
    fn inner_energy_half_circles() {
        let c = 0.8;
        let sigma = 1.0 / 6.0;
        let plus = ArcPlacement { start: -0.5 * PI, theta: PI };
        let minus = ArcPlacement { start: 0.5 * PI, theta: PI };
        let e = inner_extension_energy(&[c], &[c], Some(plus), Some(minus), sigma, 64);
        // ũ = σ c sqrt(2/π) cos φ, a single mode of energy π (σ c)² 2/π
        let want = 2.0 * (sigma * c).powi(2);
        assert!((e - want).abs() < 1e-9 * want, "{e} {want}");
        assert_eq!(inner_extension_energy(&[0.0], &[0.0], Some(plus), Some(minus), sigma, 64), 0.0);
    }

    #[test]
    fn unperturbed_model_is_trivial() {
        let p = model_partition(0.0, 2049).unwrap();
        let r = verify_epiperimetric(&p, &EpiParams::default()).unwrap();
        assert!(r.trivially_satisfied && r.pass);
        assert!(r.gap.abs() < 1e-6 * r.energy_u_i, "{}", r.gap);
        assert!(r.w1.abs() < 1e-6);
    }

    #[test]
    fn perturbed_model_gains() {
        for eps in [0.05, 0.1, 0.2] {
            let p = model_partition(eps, 2049).unwrap();
            let r = verify_epiperimetric(&p, &EpiParams::default()).unwrap();
            assert!(r.gap > 0.0 && r.pass, "{r:?}");
            let d = r.delta_measured.unwrap();
            assert!((d - 0.3313).abs() < 0.01, "{d}");
            assert!((r.w1 - 1.5 * eps * eps).abs() < 1e-5);
        }
    }

    #[test]
    fn partition_validation() {
        let good = Arc::from_fn(0.0, 1.0, Sign::Plus, 33, |s| vec![-(PI * s).sin(), (PI * s).sin()]);
        let mut overlapping = good.clone();
        overlapping.start = 0.5;
        overlapping.end = 1.5;
        assert!(BoundaryPartition::new(2, vec![good.clone(), overlapping]).is_err());
        let mut unordered = good.clone();
        unordered.samples[5] = vec![1.0, -1.0];
        assert!(BoundaryPartition::new(2, vec![unordered]).is_err());
        let ends = Arc::from_fn(0.0, 1.0, Sign::Plus, 33, |s| vec![-1.0 - s, 1.0 + s]);
        assert!(BoundaryPartition::new(2, vec![ends]).is_err());
        let wrap = Arc::from_fn(6.0, 6.0 + 1.0, Sign::Minus, 33, |s| vec![-(PI * s).sin(), (PI * s).sin()]);
        assert!(BoundaryPartition::new(2, vec![good.clone(), wrap.clone()]).is_err());
        let p = BoundaryPartition::new(2, vec![good, Arc { start: 2.0, end: 3.0, ..wrap }]).unwrap();
        assert!(p.arcs.iter().all(|a| a.main));
    }

    #[test]
    fn main_arc_tie_break() {
        let mk = |s0: f64| Arc::from_fn(s0, s0 + 1.0, Sign::Plus, 9, |s| vec![-(PI * s).sin(), (PI * s).sin()]);
        let p = BoundaryPartition::new(2, vec![mk(3.0), mk(1.0)]).unwrap();
        assert!(!p.arcs[0].main && p.arcs[1].main);
    }

    #[test]
    fn model_trace_matches_partition() {
        let p = model_partition(0.1, 65).unwrap();
        for phi in [-1.2, -0.3, 0.4, 1.5, 2.0, 3.0, 4.5] {
            let (v, s) = p.eval(phi);
            let m = model_trace_point(0.1, phi);
            assert!((m.values()[1] - v[1].abs()).abs() < 2e-3, "{phi}");
            assert_eq!(m.sign(), s);
        }
    }

    #[test]
    fn partition_file_round_trip() {
        let p = model_partition(0.1, 17).unwrap();
        let back = parse_partition(&format_partition(&p)).unwrap();
        assert_eq!(back, p);
        assert!(parse_partition("q 2\narc 0 1 + 3\n0 0\n").is_err());
    }

    #[test]
    fn step1_margin_positive_for_large_eigenvalues() {
        let s = 1.0 / 6.0;
        assert!(step1_mode_margin(8.0, s, s) > 0.0);
        assert!(step1_mode_margin(4.0, s, s) > 0.0);
        assert!(step1_mode_margin(1.0, s, s) < 0.0);
    }
}
