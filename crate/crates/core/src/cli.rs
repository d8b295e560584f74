//! The `qfreq` experiment runner.
//!
//! One TOML file describes a run. `--out` and `--seed` override the file's
//! `out` and `seed` keys. Every subcommand writes `report.json` into the
//! output directory, plus CSV or field files where they apply. Relative
//! paths inside the config are resolved against the config's directory.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::acceptance;
use crate::epiperimetric::{self, EpiParams};
use crate::error::{Error, Result};
use crate::fields::{self, Mesh, SampledField};
use crate::frequency;
use crate::homogeneous::{self, HarmonicPolynomial2D, HomogeneousSpec};
use crate::minimize::{self, AngularFn, BoundaryTrace, SolveParams};
use crate::qspace::{QPoint, Sign};
use crate::whitney::{self, Bump, GraphCurrent, WhitneyParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qfreq", version, about = "Dirichlet-minimizing special Q-valued functions: experiments and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand)]
enum Command {
    /// Solve or load a 1D field and classify it
    Classify1d(Flags),
    /// Build a homogeneous field and check its structure
    Homogeneous(Flags),
    /// Radial frequency profile of a field
    Frequency(Flags),
    /// Weiss functional profile and its monotonicity
    Weiss(Flags),
    /// Epiperimetric competitor for a boundary partition
    Epi(Flags),
    /// Dirichlet minimization on a line or a disk
    Solve(Flags),
    /// Whitney refinement of a graph current
    Whitney(Flags),
    /// Run the acceptance suite
    Selftest(Flags),
}

#[derive(Debug, Clone, clap::Args)]
struct Flags {
    /// TOML experiment file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides `seed`)
    #[arg(long)]
    seed: Option<u64>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Classify1d(_) => "classify1d",
            Command::Homogeneous(_) => "homogeneous",
            Command::Frequency(_) => "frequency",
            Command::Weiss(_) => "weiss",
            Command::Epi(_) => "epi",
            Command::Solve(_) => "solve",
            Command::Whitney(_) => "whitney",
            Command::Selftest(_) => "selftest",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::Classify1d(f)
            | Command::Homogeneous(f)
            | Command::Frequency(f)
            | Command::Weiss(f)
            | Command::Epi(f)
            | Command::Solve(f)
            | Command::Whitney(f)
            | Command::Selftest(f) => f,
        }
    }
}

/// A Q-point written as `{ values = [..], sign = "+" }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    pub values: Vec<f64>,
    pub sign: String,
}

impl PointConfig {
    fn to_point(&self) -> Result<QPoint> {
        let sign = parse_sign(&self.sign)?;
        QPoint::new(self.values.clone(), sign)
    }
}

fn parse_sign(s: &str) -> Result<Sign> {
    match s {
        "+" | "plus" => Ok(Sign::Plus),
        "-" | "minus" => Ok(Sign::Minus),
        _ => Err(Error::Config(format!("sign must be \"+\" or \"-\", got {s:?}"))),
    }
}

/// Where `frequency` and `weiss` take their field from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceConfig {
    /// A field file.
    File { path: PathBuf },
    /// A homogeneous field with the same vector `a` on every component.
    Homogeneous {
        degree: u32,
        #[serde(default = "one")]
        c_cos: f64,
        #[serde(default)]
        c_sin: f64,
        a: Vec<f64>,
        #[serde(default = "default_disk_nodes")]
        nodes: usize,
        #[serde(default = "one")]
        radius: f64,
    },
    /// A homogeneous field described by a spec file.
    SpecFile {
        path: PathBuf,
        #[serde(default = "default_disk_nodes")]
        nodes: usize,
        #[serde(default = "one")]
        radius: f64,
    },
    /// The minimizer on the unit disk with the two-sheet model trace.
    Model {
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_model_nodes")]
        nodes: usize,
    },
}

fn one() -> f64 {
    1.0
}
fn default_disk_nodes() -> usize {
    257
}
fn default_model_nodes() -> usize {
    129
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_radii() -> Vec<f64> {
    (0..13).map(|k| (20 + 5 * k) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Classify1dConfig {
    /// Classify this field instead of solving.
    pub field: Option<PathBuf>,
    pub a: f64,
    pub b: f64,
    pub nodes: usize,
    pub left: PointConfig,
    pub right: PointConfig,
    pub tolerance: f64,
}

impl Default for Classify1dConfig {
    fn default() -> Self {
        Classify1dConfig {
            field: None,
            a: -1.0,
            b: 1.0,
            nodes: 201,
            left: PointConfig {
                values: vec![-2.0, 2.0],
                sign: "-".into(),
            },
            right: PointConfig {
                values: vec![-1.0, 1.0],
                sign: "+".into(),
            },
            tolerance: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomogeneousConfig {
    /// Spec file; overrides the inline description.
    pub spec: Option<PathBuf>,
    pub degree: u32,
    pub c_cos: f64,
    pub c_sin: f64,
    pub a: Vec<f64>,
    pub nodes: usize,
    pub radius: f64,
    pub write_field: bool,
}

impl Default for HomogeneousConfig {
    fn default() -> Self {
        let s = 0.5f64.sqrt();
        HomogeneousConfig {
            spec: None,
            degree: 1,
            c_cos: 1.0,
            c_sin: 0.0,
            a: vec![s, -s],
            nodes: 257,
            radius: 1.0,
            write_field: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrequencyConfig {
    pub center: [f64; 2],
    pub radii: Vec<f64>,
    /// Radii for the smoothed frequency; empty skips it.
    pub smoothed_radii: Vec<f64>,
    /// Asserted value of the median frequency.
    pub expect: Option<f64>,
    pub tolerance: f64,
}

impl Default for FrequencyConfig {
    fn default() -> Self {
        FrequencyConfig {
            center: [0.0, 0.0],
            radii: default_radii(),
            smoothed_radii: vec![],
            expect: None,
            tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeissConfig {
    pub center: [f64; 2],
    pub radii: Vec<f64>,
    /// Limit frequency; defaults to the median measured frequency.
    pub i0: Option<f64>,
    /// Allowed decrease; defaults to `3 h Lip²`.
    pub tolerance: Option<f64>,
    /// Decay exponent to check, if any.
    pub alpha: Option<f64>,
}

impl Default for WeissConfig {
    fn default() -> Self {
        WeissConfig {
            center: [0.0, 0.0],
            radii: default_radii(),
            i0: None,
            tolerance: None,
            alpha: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpiConfig {
    /// Partition file; the model trace is used when absent.
    pub partition: Option<PathBuf>,
    pub epsilon: f64,
    pub samples: usize,
    pub params: EpiParams,
}

impl Default for EpiConfig {
    fn default() -> Self {
        EpiConfig {
            partition: None,
            epsilon: 0.1,
            samples: 2049,
            params: EpiParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMesh {
    Line,
    Disk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiskTrace {
    /// The two-sheet model trace with perturbation `epsilon`.
    Model,
    /// The restriction of a homogeneous field.
    Homogeneous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub mesh: SolveMesh,
    pub nodes: usize,
    /// Line endpoints.
    pub a: f64,
    pub b: f64,
    pub left: PointConfig,
    pub right: PointConfig,
    /// Disk data.
    pub radius: f64,
    pub trace: DiskTrace,
    pub epsilon: f64,
    pub degree: u32,
    pub c_cos: f64,
    pub c_sin: f64,
    pub values: Vec<f64>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        let c = Classify1dConfig::default();
        let s = 0.5f64.sqrt();
        SolveConfig {
            mesh: SolveMesh::Disk,
            nodes: 129,
            a: c.a,
            b: c.b,
            left: c.left,
            right: c.right,
            radius: 1.0,
            trace: DiskTrace::Model,
            epsilon: 0.1,
            degree: 1,
            c_cos: 1.0,
            c_sin: 0.0,
            values: vec![s, -s],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurrentInput {
    Flat,
    Bumps,
    Field,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WhitneyConfig {
    pub input: CurrentInput,
    pub q: usize,
    pub nodes: usize,
    /// Height of the flat current.
    pub level: f64,
    pub bumps: Vec<Bump>,
    /// Field file for `input = "field"`.
    pub field: Option<PathBuf>,
    /// Last generation; defaults to `n0 + 5`.
    pub j_max: Option<i32>,
    /// Contact points to audit.
    pub marks: Vec<[f64; 2]>,
    pub params: WhitneyParams,
}

impl Default for WhitneyConfig {
    fn default() -> Self {
        WhitneyConfig {
            input: CurrentInput::Flat,
            q: 2,
            nodes: 129,
            level: 0.0,
            bumps: vec![],
            field: None,
            j_max: None,
            marks: vec![],
            params: WhitneyParams::default(),
        }
    }
}

/// The whole run description.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Expected subcommand; a mismatch is an input error.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<String>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub solver: SolveParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceConfig>,
    pub classify1d: Classify1dConfig,
    pub homogeneous: HomogeneousConfig,
    pub frequency: FrequencyConfig,
    pub weiss: WeissConfig,
    pub epi: EpiConfig,
    pub solve: SolveConfig,
    pub whitney: WhitneyConfig,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().replace('\n', " ")))
    }

    /// Parameter echo for one subcommand: the shared keys plus its section.
    fn echo(&self, sub: &str) -> Value {
        let full = serde_json::to_value(self).expect("config serializes");
        let mut m = serde_json::Map::new();
        m.insert("seed".into(), json!(self.seed));
        let sections: &[&str] = match sub {
            "classify1d" => &["solver", "classify1d"],
            "solve" => &["solver", "solve"],
            "frequency" => &["solver", "source", "frequency"],
            "weiss" => &["solver", "source", "weiss"],
            "homogeneous" => &["homogeneous"],
            "epi" => &["epi"],
            "whitney" => &["whitney"],
            _ => &[],
        };
        for s in sections {
            if let Some(v) = full.get(*s) {
                m.insert((*s).into(), v.clone());
            }
        }
        Value::Object(m)
    }
}

/// Hex SHA-256 of `bytes`.
pub fn digest_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// One asserted check of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: impl Into<String>) -> Check {
        Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    config_digest: &'a str,
    seed: u64,
    params: Value,
    pass: bool,
    checks: &'a [Check],
    results: Value,
}

/// What a subcommand produced: checks, a results object, and extra files.
struct Outcome {
    checks: Vec<Check>,
    results: Value,
    files: BTreeMap<String, String>,
}

impl Outcome {
    fn new() -> Outcome {
        Outcome {
            checks: vec![],
            results: Value::Object(Default::default()),
            files: BTreeMap::new(),
        }
    }

    fn set(&mut self, key: &str, v: impl Serialize) {
        let v = serde_json::to_value(v).expect("result serializes");
        self.results.as_object_mut().expect("object").insert(key.into(), v);
    }
}

struct Ctx {
    base: PathBuf,
    seed: u64,
    cfg: ExperimentConfig,
}

impl Ctx {
    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn solver(&self) -> SolveParams {
        SolveParams {
            rng_seed: self.seed,
            ..self.cfg.solver.clone()
        }
    }
}

fn linspace_check(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::Config("radii must not be empty".into()));
    }
    if radii.windows(2).any(|w| !(w[0] < w[1])) || !(radii[0] > 0.0) {
        return Err(Error::Config("radii must be positive and strictly increasing".into()));
    }
    Ok(())
}

fn load_source(ctx: &Ctx) -> Result<(SampledField, Option<Value>)> {
    let Some(src) = &ctx.cfg.source else {
        return Err(Error::Config("missing [source] section".into()));
    };
    match src {
        SourceConfig::File { path } => Ok((fields::read_field(&ctx.path(path))?, None)),
        SourceConfig::Homogeneous {
            degree,
            c_cos,
            c_sin,
            a,
            nodes,
            radius,
        } => {
            let spec = HomogeneousSpec::uniform(HarmonicPolynomial2D::new(*degree, *c_cos, *c_sin)?, a);
            Ok((homogeneous::build_homogeneous(&spec, &Mesh::disk(*radius, *nodes)?)?, None))
        }
        SourceConfig::SpecFile { path, nodes, radius } => {
            let spec = homogeneous::read_spec(&ctx.path(path))?;
            Ok((homogeneous::build_homogeneous(&spec, &Mesh::disk(*radius, *nodes)?)?, None))
        }
        SourceConfig::Model { epsilon, nodes } => {
            let mesh = Mesh::disk(1.0, *nodes)?;
            let eps = *epsilon;
            let f: AngularFn = Arc::new(move |phi| epiperimetric::model_trace_point(eps, phi));
            let trace = BoundaryTrace::from_angular(&mesh, f)?;
            let (field, rep) = minimize::solve(&trace, &mesh, &ctx.solver())?;
            let summary = json!({
                "energy": rep.energy,
                "converged": rep.converged,
                "sweeps": rep.sweeps,
            });
            Ok((field, Some(summary)))
        }
    }
}

fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Some(if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) })
}

fn cmd_classify1d(ctx: &Ctx) -> Result<Outcome> {
    let c = &ctx.cfg.classify1d;
    let mut out = Outcome::new();
    let field = match &c.field {
        Some(p) => fields::read_field(&ctx.path(p))?,
        None => {
            let mesh = Mesh::line(c.a, c.b, c.nodes)?;
            let trace = BoundaryTrace::line(&mesh, c.left.to_point()?, c.right.to_point()?)?;
            let (field, rep) = minimize::solve(&trace, &mesh, &ctx.solver())?;
            out.checks.push(Check::new("solver converged", rep.converged, format!("{} sweeps", rep.sweeps)));
            out.set("solve", &rep);
            out.files.insert("history.csv".into(), minimize::history_csv(&rep));
            out.files.insert("field.txt".into(), fields::format_field(&field));
            field
        }
    };
    let cls = homogeneous::classify_1d(&field, c.tolerance)?;
    out.checks.push(Check::new(
        "invariants",
        cls.invariants_ok,
        format!("norm gap {:.3e}, residual {:.3e}", cls.norm_gap, cls.residual),
    ));
    out.set("classification", &cls);
    Ok(out)
}

fn cmd_homogeneous(ctx: &Ctx) -> Result<Outcome> {
    let c = &ctx.cfg.homogeneous;
    let spec = match &c.spec {
        Some(p) => homogeneous::read_spec(&ctx.path(p))?,
        None => HomogeneousSpec::uniform(HarmonicPolynomial2D::new(c.degree, c.c_cos, c.c_sin)?, &c.a),
    };
    let mesh = Mesh::disk(c.radius, c.nodes)?;
    let field = homogeneous::build_homogeneous(&spec, &mesh)?;
    let stat = homogeneous::check_stationarity(&field);
    let freq = homogeneous::measured_frequency_is_integer(&field, [0.0, 0.0])?;
    let nodal = homogeneous::components_of_nodal_partition(&spec.p, &mesh)?;
    let mut out = Outcome::new();
    out.checks.push(Check::new(
        "integer frequency",
        freq.pass && freq.nearest == spec.p.degree,
        format!("I = {:.4}, nearest {}", freq.i_bar, freq.nearest),
    ));
    out.checks.push(Check::new(
        "nodal components",
        nodal.matches_degree(spec.p.degree),
        format!("{} positive, {} negative", nodal.plus, nodal.minus),
    ));
    out.set("spec", &spec);
    out.set("stationarity", &stat);
    out.set("frequency", &freq);
    out.set("nodal_components", json!({"plus": nodal.plus, "minus": nodal.minus}));
    if c.write_field {
        out.files.insert("field.txt".into(), fields::format_field(&field));
    }
    Ok(out)
}

fn cmd_frequency(ctx: &Ctx) -> Result<Outcome> {
    let c = &ctx.cfg.frequency;
    linspace_check(&c.radii)?;
    let (field, solve) = load_source(ctx)?;
    let prof = frequency::profile(&field, c.center, &c.radii)?;
    let mut out = Outcome::new();
    let freqs = prof.defined_frequencies();
    let med = median(&freqs);
    if let Some(e) = c.expect {
        let d = med.map(|m| (m - e).abs());
        out.checks.push(Check::new(
            "expected frequency",
            d.is_some_and(|d| d <= c.tolerance),
            format!("median I = {}, expected {e} ± {}", fmt_opt(med), c.tolerance),
        ));
    }
    out.files.insert("profile.csv".into(), frequency::profile_csv(&prof));
    if !c.smoothed_radii.is_empty() {
        let s = c
            .smoothed_radii
            .iter()
            .map(|&r| frequency::smoothed_frequency(&field, c.center, r))
            .collect::<Result<Vec<_>>>()?;
        out.files.insert("smoothed.csv".into(), frequency::smoothed_csv(&s));
        out.set("smoothed", &s);
    }
    if let Some(s) = solve {
        out.set("solve", s);
    }
    out.set("median_frequency", med);
    out.set("profile", &prof);
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("undefined".into(), |x| format!("{x:.4}"))
}

fn cmd_weiss(ctx: &Ctx) -> Result<Outcome> {
    let c = &ctx.cfg.weiss;
    linspace_check(&c.radii)?;
    let (field, solve) = load_source(ctx)?;
    let prof = frequency::profile(&field, c.center, &c.radii)?;
    let i0 = match c.i0 {
        Some(v) => v,
        None => median(&prof.defined_frequencies())
            .ok_or_else(|| Error::InvalidArgument("no radius with a defined frequency; set i0".into()))?,
    };
    let prof = prof.with_weiss(i0)?;
    let w = prof.w.clone().expect("weiss computed");
    let tol = c.tolerance.unwrap_or_else(|| frequency::default_monotonicity_tolerance(&field));
    let mono = frequency::check_weiss_monotone(&c.radii, &w, tol)?;
    let mut out = Outcome::new();
    out.checks.push(Check::new(
        "monotone",
        mono.pass,
        format!("max decrease {:.3e}, tolerance {:.3e}", mono.max_violation, mono.tolerance),
    ));
    if let Some(alpha) = c.alpha {
        let decay = frequency::check_weiss_decay(&c.radii, &w, alpha)?;
        out.checks.push(Check::new(
            "decay",
            decay.pass,
            format!("alpha {alpha}, fitted {}", fmt_opt(decay.alpha_hat)),
        ));
        out.set("decay", &decay);
    }
    if let Some(s) = solve {
        out.set("solve", s);
    }
    out.set("i0", i0);
    out.set("monotone", &mono);
    out.set("profile", &prof);
    out.files.insert("weiss.csv".into(), frequency::profile_csv(&prof));
    Ok(out)
}

fn cmd_epi(ctx: &Ctx) -> Result<Outcome> {
    let c = &ctx.cfg.epi;
    let part = match &c.partition {
        Some(p) => epiperimetric::read_partition(&ctx.path(p))?,
        None => epiperimetric::model_partition(c.epsilon, c.samples)?,
    };
    let rep = epiperimetric::verify_epiperimetric(&part, &c.params)?;
    let mut out = Outcome::new();
    let detail = match rep.delta_measured {
        _ if rep.trivially_satisfied => "W1 vanishes, trivially satisfied".to_string(),
        Some(d) => format!("delta {d:.4} against target {}", rep.delta_target),
        None => "delta undefined".to_string(),
    };
    out.checks.push(Check::new("epiperimetric gap", rep.pass, detail));
    let mut csv = String::from("arc,sheet,k,coefficient\n");
    for (i, arc) in rep.arcs.iter().enumerate() {
        for (s, coeffs) in arc.coefficients.iter().enumerate() {
            for (k, a) in coeffs.iter().enumerate() {
                csv.push_str(&format!("{i},{s},{},{a:.17e}\n", k + 1));
            }
        }
    }
    out.files.insert("coefficients.csv".into(), csv);
    out.set("competitor", &rep);
    Ok(out)
}

fn cmd_solve(ctx: &Ctx) -> Result<Outcome> {
    let c = &ctx.cfg.solve;
    let (mesh, trace) = match c.mesh {
        SolveMesh::Line => {
            let mesh = Mesh::line(c.a, c.b, c.nodes)?;
            let t = BoundaryTrace::line(&mesh, c.left.to_point()?, c.right.to_point()?)?;
            (mesh, t)
        }
        SolveMesh::Disk => {
            let mesh = Mesh::disk(c.radius, c.nodes)?;
            let f: AngularFn = match c.trace {
                DiskTrace::Model => {
                    let eps = c.epsilon;
                    Arc::new(move |phi| epiperimetric::model_trace_point(eps, phi))
                }
                DiskTrace::Homogeneous => {
                    let spec = HomogeneousSpec::uniform(HarmonicPolynomial2D::new(c.degree, c.c_cos, c.c_sin)?, &c.values);
                    spec.validate()?;
                    let r = c.radius;
                    Arc::new(move |phi| spec.value_at(r * phi.cos(), r * phi.sin()))
                }
            };
            let t = BoundaryTrace::from_angular(&mesh, f)?;
            (mesh, t)
        }
    };
    let (field, rep) = minimize::solve(&trace, &mesh, &ctx.solver())?;
    let mut out = Outcome::new();
    out.checks.push(Check::new(
        "converged",
        rep.converged,
        format!("energy {:.6e} after {} sweeps", rep.energy, rep.sweeps),
    ));
    out.set("solve", &rep);
    out.set("lipschitz", fields::lipschitz_estimate(&field));
    out.files.insert("history.csv".into(), minimize::history_csv(&rep));
    out.files.insert("field.txt".into(), fields::format_field(&field));
    Ok(out)
}

fn cmd_whitney(ctx: &Ctx) -> Result<Outcome> {
    let c = &ctx.cfg.whitney;
    c.params.validate()?;
    let current = match c.input {
        CurrentInput::Flat => GraphCurrent::flat(c.q, c.nodes, c.level)?,
        CurrentInput::Bumps => GraphCurrent::bumps(c.q, c.nodes, &c.bumps)?,
        CurrentInput::Field => {
            let p = c
                .field
                .as_ref()
                .ok_or_else(|| Error::Config("input = \"field\" needs a field path".into()))?;
            GraphCurrent::from_field(&fields::read_field(&ctx.path(p))?)?
        }
    };
    let j_max = c.j_max.unwrap_or(c.params.n0 + 5);
    let forest = whitney::refine(&current, &c.params, j_max)?;
    let mut out = Outcome::new();
    let area = forest.covered_area();
    let overlaps = forest.overlapping_w_pairs();
    out.checks.push(Check::new(
        "father rule",
        forest.father_rule_violations == 0,
        format!("{} checked, {} violations", forest.father_rule_checked, forest.father_rule_violations),
    ));
    out.checks.push(Check::new(
        "cover",
        (area - 64.0).abs() <= 1e-9 && overlaps == 0,
        format!("area {area}, {overlaps} overlapping pairs"),
    ));
    if !c.marks.is_empty() {
        let cm = whitney::check_fine_cm(&forest, &c.marks);
        out.checks.push(Check::new(
            "contact criterion",
            cm.pass,
            format!("{} cubes checked, {} violations", cm.cubes_checked, cm.violations.len()),
        ));
        out.set("fine_cm", &cm);
    }
    let gens: Vec<Value> = forest
        .generations
        .iter()
        .map(|g| json!({"j": g.j, "s": g.s.len(), "we": g.we.len(), "wh": g.wh.len(), "wn": g.wn.len(), "evaluated": g.evaluated}))
        .collect();
    out.set("j_max", forest.j_max);
    out.set("m0", forest.m0);
    out.set("excess_threshold", &forest.ex_threshold);
    out.set("height_threshold", &forest.ht_threshold);
    out.set("generations", gens);
    out.set("w_count", forest.w_count());
    out.set("nn_audit", forest.nn_audit());
    out.set("boundary_extended", forest.boundary_extended);
    out.set("notes", &forest.notes);
    out.files.insert("forest.csv".into(), whitney::forest_csv(&forest));
    out.files.insert("gamma.csv".into(), whitney::gamma_csv(&forest, &current));
    Ok(out)
}

fn cmd_selftest(ctx: &Ctx) -> Result<Outcome> {
    let results = acceptance::run_all(ctx.seed);
    let mut out = Outcome::new();
    for r in &results {
        println!("{r}");
        out.checks.push(Check::new(&format!("{}. {}", r.id, r.title), r.pass, r.detail.clone()));
    }
    Ok(out)
}

fn read_config(path: &Path) -> Result<Vec<u8>> {
    match fs::read(path) {
        Ok(b) => Ok(b),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingFile(path.to_path_buf())),
        Err(e) => Err(Error::io(format!("reading {}", path.display()), e)),
    }
}

fn execute(cmd: &Command) -> Result<bool> {
    let flags = cmd.flags();
    let sub = cmd.name();
    let bytes = read_config(&flags.config)?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Error::Config("config is not UTF-8".into()))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(s) = &cfg.subcommand {
        if s != sub {
            return Err(Error::Config(format!("config is for `{s}`, not `{sub}`")));
        }
    }
    cfg.solver.validate()?;
    let seed = flags.seed.or(cfg.seed).unwrap_or(0);
    cfg.seed = Some(seed);
    cfg.solver.rng_seed = seed;
    let out_dir = flags
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("qfreq-out"));
    let base = flags.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let ctx = Ctx { base, seed, cfg };

    let outcome = match cmd {
        Command::Classify1d(_) => cmd_classify1d(&ctx),
        Command::Homogeneous(_) => cmd_homogeneous(&ctx),
        Command::Frequency(_) => cmd_frequency(&ctx),
        Command::Weiss(_) => cmd_weiss(&ctx),
        Command::Epi(_) => cmd_epi(&ctx),
        Command::Solve(_) => cmd_solve(&ctx),
        Command::Whitney(_) => cmd_whitney(&ctx),
        Command::Selftest(_) => cmd_selftest(&ctx),
    }?;

    let digest = digest_hex(&bytes);
    let pass = outcome.checks.iter().all(|c| c.pass);
    let report = Report {
        tool: "qfreq",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: sub,
        config_digest: &digest,
        seed,
        params: ctx.cfg.echo(sub),
        pass,
        checks: &outcome.checks,
        results: outcome.results,
    };
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    write_file(&out_dir.join("report.json"), &json)?;
    for (name, body) in &outcome.files {
        write_file(&out_dir.join(name), body)?;
    }
    for c in &outcome.checks {
        if sub != "selftest" {
            println!("[{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
    }
    println!(
        "{sub}: {} of {} checks passed; report in {}",
        outcome.checks.iter().filter(|c| c.pass).count(),
        outcome.checks.len(),
        out_dir.join("report.json").display()
    );
    Ok(pass)
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            let _ = writeln!(std::io::stderr(), "qfreq: error: {msg}");
            EXIT_USAGE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let c = ExperimentConfig::parse("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn unknown_key_is_rejected_on_one_line() {
        let e = ExperimentConfig::parse("[frequency]\nradiii = [0.5]\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("radiii") && !msg.contains('\n'), "{msg}");
    }

    #[test]
    fn source_variants() {
        let c = ExperimentConfig::parse("[source]\nkind = \"model\"\nepsilon = 0.2\n").unwrap();
        assert_eq!(c.source, Some(SourceConfig::Model { epsilon: 0.2, nodes: 129 }));
        let c = ExperimentConfig::parse("[source]\nkind = \"homogeneous\"\ndegree = 2\na = [1.0, -1.0]\n").unwrap();
        assert!(matches!(c.source, Some(SourceConfig::Homogeneous { degree: 2, nodes: 257, .. })));
    }

    #[test]
    fn sha256_of_abc() {
        assert_eq!(
            digest_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
