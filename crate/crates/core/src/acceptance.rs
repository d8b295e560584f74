//! The acceptance suite: one result per criterion, shared by the test
//! target and `qfreq selftest`.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::epiperimetric::{self, EpiParams};
use crate::error::Result;
use crate::fields::{self, Mesh, SampledField};
use crate::frequency::{self, CircleTrace};
use crate::homogeneous::{self, HarmonicPolynomial2D, HomogeneousSpec};
use crate::minimize::{self, BoundaryTrace, SolveParams};
use crate::oracle;
use crate::qspace::{self, ClassicalQPoint, QPoint, Sign};
use crate::whitney::{self, Bump, GraphCurrent, WhitneyParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub title: String,
    pub pass: bool,
    pub detail: String,
    #[serde(skip)]
    pub seconds: f64,
    pub time_limit: Option<f64>,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        let limit = self.time_limit.map_or(String::new(), |l| format!(" < {l} s"));
        write!(f, "[{tag}] {}. {}: {} ({:.2} s{limit})", self.id, self.title, self.detail, self.seconds)
    }
}

fn run(id: u32, title: &str, limit: Option<f64>, f: impl FnOnce() -> Result<(bool, String)>) -> CriterionResult {
    let t = Instant::now();
    let (ok, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    let seconds = t.elapsed().as_secs_f64();
    let in_time = limit.is_none_or(|l| seconds < l);
    CriterionResult {
        id,
        title: title.into(),
        pass: ok && in_time,
        detail: if in_time { detail } else { format!("{detail}; over the time limit") },
        seconds,
        time_limit: limit,
    }
}

/// All criteria in order.
pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    vec![
        run(1, "metric oracle equivalence", Some(1.0), || metric_oracle(seed)),
        run(2, "1D classification", Some(5.0), classification_1d),
        run(3, "integer frequency", Some(30.0), integer_frequency),
        run(4, "Weiss behavior", None, weiss_behavior),
        run(5, "epiperimetric verification", Some(10.0), epiperimetric_check),
        run(6, "spectral energy identity", Some(20.0), spectral_identity),
        run(7, "arc spectra", None, arc_spectra),
        run(8, "Whitney forest", Some(60.0), whitney_forest),
        run(9, "smoothed frequency", None, smoothed_frequency),
    ]
}

/// `max` that keeps NaN, so undefined quantities fail their checks.
fn worse(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

fn random_point(rng: &mut ChaCha8Rng, q: usize) -> QPoint {
    let v = (0..q).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let s = if rng.gen_bool(0.5) { Sign::Plus } else { Sign::Minus };
    QPoint::new(v, s).expect("finite")
}

/// Sorted matching against all permutations (exact equality) and the
/// triangle inequality of `𝒢ₛ`.
pub fn metric_oracle(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    for _ in 0..500 {
        let q = rng.gen_range(1..=5);
        let a: Vec<f64> = (0..q).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..q).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let (ta, tb) = (ClassicalQPoint::new(a)?, ClassicalQPoint::new(b)?);
        let g = qspace::g_metric(&ta, &tb)?;
        if g != oracle::brute_force_g2(ta.values(), tb.values()).sqrt() {
            mismatches += 1;
        }
    }
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..500 {
        let q = rng.gen_range(1..=5);
        let [a, b, c] = [(); 3].map(|_| random_point(&mut rng, q));
        let d = qspace::gs_metric(&a, &c)? - qspace::gs_metric(&a, &b)? - qspace::gs_metric(&b, &c)?;
        worst = worse(worst, d);
    }
    let ok = mismatches == 0 && worst <= 1e-12;
    Ok((ok, format!("{mismatches}/500 sorted-matching mismatches, max triangle excess {worst:.3e}")))
}

fn two_sheet(v: f64, s: Sign) -> QPoint {
    QPoint::new(vec![-v, v], s).expect("finite")
}

/// Solves the 1D problem with data `({1,-1},+)` at 1 and `({2,-2},-)` at -1.
pub fn solve_1d_model() -> Result<(SampledField, minimize::SolveReport)> {
    let mesh = Mesh::line(-1.0, 1.0, 201)?;
    let trace = BoundaryTrace::line(&mesh, two_sheet(2.0, Sign::Minus), two_sheet(1.0, Sign::Plus))?;
    minimize::solve(&trace, &mesh, &SolveParams::default())
}

pub fn classification_1d() -> Result<(bool, String)> {
    let (field, rep) = solve_1d_model()?;
    let c = homogeneous::classify_1d(&field, 0.02)?;
    let (x_star, e_star) = oracle::golden_min(|x| 2.0 / (1.0 - x) + 8.0 / (1.0 + x), -0.99, 0.99, 1e-12);
    let x0 = c.singular_point.unwrap_or(f64::NAN);
    let ok = (x0 - x_star).abs() <= 0.02 && (rep.energy - e_star).abs() <= 0.1 && c.norm_gap <= 0.02;
    Ok((
        ok,
        format!(
            "x0 = {x0:.4} (oracle {x_star:.4}), energy = {:.4} (oracle {e_star:.4}), ||a|-|b|| = {:.2e}",
            rep.energy, c.norm_gap
        ),
    ))
}

/// `α`-homogeneous field with the same unit-norm zero-average vector on
/// every nodal component.
pub fn unit_homogeneous(alpha: u32, nodes: usize) -> Result<SampledField> {
    let s = 0.5f64.sqrt();
    let spec = HomogeneousSpec::uniform(HarmonicPolynomial2D::new(alpha, 1.0, 0.0)?, &[s, -s]);
    homogeneous::build_homogeneous(&spec, &Mesh::disk(1.0, nodes)?)
}

fn radii(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

pub fn integer_frequency() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = vec![];
    for alpha in 1..=3u32 {
        let f = unit_homogeneous(alpha, 257)?;
        let rep = homogeneous::measured_frequency_is_integer(&f, [0.0, 0.0])?;
        let prof = frequency::profile(&f, [0.0, 0.0], &radii(0.2, 0.8, 7))?;
        let freqs = prof.defined_frequencies();
        let mean = freqs.iter().sum::<f64>() / freqs.len() as f64;
        let spread = freqs.iter().map(|i| (i - mean).abs() / mean).fold(0.0, worse);
        let this = rep.nearest == alpha && rep.distance <= 0.05 && freqs.len() == 7 && spread <= 0.01;
        ok &= this;
        parts.push(format!("α={alpha}: I={:.4}, spread {:.2}%", rep.i_bar, 100.0 * spread));
    }
    Ok((ok, parts.join("; ")))
}

/// The 2D minimizer with the perturbed model trace on the unit disk.
pub fn solve_model_disk(epsilon: f64, nodes: usize) -> Result<(SampledField, minimize::SolveReport)> {
    let mesh = Mesh::disk(1.0, nodes)?;
    let f: minimize::AngularFn = std::sync::Arc::new(move |phi| epiperimetric::model_trace_point(epsilon, phi));
    let trace = BoundaryTrace::from_angular(&mesh, f)?;
    minimize::solve(&trace, &mesh, &SolveParams::default())
}

pub fn weiss_behavior() -> Result<(bool, String)> {
    let rs = radii(0.2, 0.8, 13);
    let mut worst = 0.0f64;
    for alpha in 1..=3u32 {
        let f = unit_homogeneous(alpha, 257)?;
        let prof = frequency::profile(&f, [0.0, 0.0], &rs)?.with_weiss(alpha as f64)?;
        worst = prof.w.unwrap().iter().fold(worst, |m, w| worse(m, w.abs()));
    }
    let (field, _) = solve_model_disk(0.1, 129)?;
    let h = field.mesh().h();
    let prof = frequency::profile(&field, [0.0, 0.0], &rs)?.with_weiss(1.0)?;
    let mono = frequency::check_weiss_monotone(&rs, prof.w.as_ref().unwrap(), 3.0 * h)?;
    let ok = worst <= 1e-3 && mono.pass;
    Ok((
        ok,
        format!(
            "max |W| on homogeneous fields {worst:.2e}; solved field W from {:.4} to {:.4}, max decrease {:.2e} (tolerance 3h = {:.2e})",
            prof.w.as_ref().unwrap()[0],
            prof.w.as_ref().unwrap()[rs.len() - 1],
            mono.max_violation,
            3.0 * h
        ),
    ))
}

pub fn epiperimetric_check() -> Result<(bool, String)> {
    let params = EpiParams {
        sigma: 1.0 / 6.0,
        delta_target: 0.01,
        ..EpiParams::default()
    };
    let mut ok = true;
    let mut parts = vec![];
    for eps in [0.05, 0.1, 0.2] {
        let p = epiperimetric::model_partition(eps, 2049)?;
        let r = epiperimetric::verify_epiperimetric(&p, &params)?;
        let d = r.delta_measured.unwrap_or(f64::NAN);
        ok &= r.pass && d >= 0.01;
        parts.push(format!("ε={eps}: δ={d:.4}"));
    }
    let s = 1.0 / 6.0;
    let n = 2000;
    let worst = (0..n)
        .map(|k| {
            let lam = 8.0 * (1e4f64 / 8.0).powf(k as f64 / (n - 1) as f64);
            epiperimetric::step1_mode_margin(lam, s, s)
        })
        .fold(f64::INFINITY, |a, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.min(b) });
    ok &= worst >= 0.0;
    parts.push(format!("min Step-1 margin on λ∈[8,1e4]: {worst:.4}"));
    Ok((ok, parts.join("; ")))
}

pub fn spectral_identity() -> Result<(bool, String)> {
    let mesh = Mesh::disk(1.1, 257)?;
    type Tr = Box<dyn Fn(f64) -> QPoint>;
    let traces: Vec<(&str, f64, Tr)> = vec![
        ("sin φ", 1.0, Box::new(|t: f64| QPoint::new(vec![t.sin()], Sign::Plus).unwrap())),
        ("sin 2φ", 2.0, Box::new(|t: f64| QPoint::new(vec![(2.0 * t).sin()], Sign::Plus).unwrap())),
        ("two-sheet", 1.0, Box::new(|t| epiperimetric::model_trace_point(0.1, t))),
    ];
    let mut ok = true;
    let mut parts = vec![];
    for (name, i, f) in traces {
        let spectral = frequency::extension_energy_spectral(&CircleTrace::from_fn(4096, &f)?, i)?;
        let field = frequency::homogeneous_extension(&f, i, &mesh)?;
        let direct = fields::ball_energy(&field, [0.0, 0.0], 1.0)?;
        let rel = (spectral - direct).abs() / direct;
        ok &= rel <= 0.01;
        parts.push(format!("{name}: {spectral:.4} vs {direct:.4} ({:.2}%)", 100.0 * rel));
    }
    Ok((ok, parts.join("; ")))
}

pub fn arc_spectra() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for theta in [PI / 3.0, PI / 2.0, PI, 1.5 * PI] {
        let s = epiperimetric::arc_eigen(theta, 5)?;
        let fd = oracle::fd_dirichlet_eigenvalues(theta, 4096, 5);
        for (a, b) in s.lambda.iter().zip(&fd) {
            worst = worse(worst, (a - b).abs() / b);
        }
    }
    Ok((worst <= 0.005, format!("max relative deviation {:.2e}", worst)))
}

/// Synthetic bump used for the forest checks.
pub fn bump_current() -> Result<GraphCurrent> {
    GraphCurrent::bumps(
        2,
        129,
        &[Bump {
            center: [1.0, -0.5],
            radius: 0.3,
            amplitude: 0.5,
        }],
    )
}

pub fn bump_params() -> WhitneyParams {
    WhitneyParams {
        ce: 1e5,
        ch: 1.0,
        ..WhitneyParams::default()
    }
}

pub fn whitney_forest() -> Result<(bool, String)> {
    let base = WhitneyParams::default();
    let j_max = base.n0 + 5;
    let flat = whitney::refine(&GraphCurrent::flat(2, 129, 0.0)?, &base, j_max)?;
    let flat_ok = flat.w_count() == 0 && flat.gamma.iter().all(|&g| g);

    let current = bump_current()?;
    let p = bump_params();
    let f1 = whitney::refine(&current, &p, j_max)?;
    let nn = f1.nn_audit();
    let structure_ok = f1.father_rule_checked > 0
        && f1.father_rule_violations == 0
        && f1.overlapping_w_pairs() == 0
        && f1.covered_area() == 64.0
        && nn.wn_without_neighbor == 0
        && nn.survivors_touching_w == 0;
    let raised = WhitneyParams {
        ce: 2.0 * p.ce,
        ch: 2.0 * p.ch,
        ..p
    };
    let f2 = whitney::refine(&current, &raised, j_max)?;
    let shrink = whitney::shrinkage_violations(&f1, &f2);
    let f3 = whitney::refine(&current, &p, j_max)?;
    let identical = whitney::forest_csv(&f1) == whitney::forest_csv(&f3);
    let ok = flat_ok && structure_ok && shrink.is_empty() && identical;
    let count = |f: &whitney::CubeForest| {
        let g = &f.generations;
        (
            g.iter().map(|s| s.we.len()).sum::<usize>(),
            g.iter().map(|s| s.wh.len()).sum::<usize>(),
            g.iter().map(|s| s.wn.len()).sum::<usize>(),
        )
    };
    Ok((
        ok,
        format!(
            "flat: |W|={}; bump (We,Wh,Wn)={:?}, father rule {}/{} ok, overlaps {}, area {}, NN audit {:?}; doubled constants (We,Wh,Wn)={:?}, {} unaccounted stops; rerun identical: {identical}",
            flat.w_count(),
            count(&f1),
            f1.father_rule_checked - f1.father_rule_violations,
            f1.father_rule_checked,
            f1.overlapping_w_pairs(),
            f1.covered_area(),
            (nn.wn_without_neighbor, nn.survivors_touching_w),
            count(&f2),
            shrink.len()
        ),
    ))
}

pub fn smoothed_frequency() -> Result<(bool, String)> {
    let mut worst_gap = 0.0f64;
    let mut worst_scale = 0.0f64;
    for alpha in 1..=3u32 {
        let f = unit_homogeneous(alpha, 257)?;
        for r in [0.3, 0.5, 0.7] {
            let i = frequency::profile(&f, [0.0, 0.0], &[r])?.i[0].unwrap_or(f64::NAN);
            let s = frequency::smoothed_frequency(&f, [0.0, 0.0], r)?;
            let ip = s.i_phi.unwrap_or(f64::NAN);
            worst_gap = worse(worst_gap, (ip - i).abs() / i);
            for lam in [0.5, 2.0] {
                let sl = frequency::smoothed_frequency(&f.scaled(lam), [0.0, 0.0], r)?;
                let il = sl.i_phi.unwrap_or(f64::NAN);
                worst_scale = worse(worst_scale, (il - ip).abs() / ip);
            }
        }
    }
    let ok = worst_gap <= 0.05 && worst_scale <= 1e-10;
    Ok((
        ok,
        format!(
            "max |I_phi - I|/I = {:.2}%, max scaling deviation {worst_scale:.1e}",
            100.0 * worst_gap
        ),
    ))
}
