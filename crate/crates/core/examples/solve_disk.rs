//! Minimize on the unit disk with a two-sheet trace and write the field.
//!
//! `cargo run --release --example solve_disk [out.txt]`

use std::sync::Arc;

use qfreq::epiperimetric::model_trace_point;
use qfreq::fields::{self, decompose, Label, Mesh};
use qfreq::minimize::{history_csv, solve, AngularFn, BoundaryTrace, SolveParams};

fn main() -> qfreq::Result<()> {
    let mesh = Mesh::disk(1.0, 65)?;
    let f: AngularFn = Arc::new(|phi| model_trace_point(0.1, phi));
    let trace = BoundaryTrace::from_angular(&mesh, f)?;
    let params = SolveParams {
        omega: 1.5,
        ..SolveParams::default()
    };
    let (field, rep) = solve(&trace, &mesh, &params)?;
    println!("energy {:.6}, {} sweeps, converged {}", rep.energy, rep.sweeps, rep.converged);
    let labels = decompose(&field);
    println!(
        "nodes: {} positive, {} negative, {} collapsed",
        labels.count(Label::Plus),
        labels.count(Label::Minus),
        labels.count(Label::Zero)
    );
    println!("Lipschitz estimate {:.4}", fields::lipschitz_estimate(&field));
    let csv = history_csv(&rep);
    let tail: Vec<&str> = csv.lines().rev().take(3).collect();
    println!("last history rows: {tail:?}");
    if let Some(path) = std::env::args().nth(1) {
        fields::write_field(&field, path.as_ref())?;
        println!("wrote {path}");
    }
    Ok(())
}
