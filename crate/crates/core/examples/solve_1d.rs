//! Minimize on [-1, 1] with data of opposite signs and classify the result.
//!
//! `cargo run --release --example solve_1d`

use qfreq::fields::Mesh;
use qfreq::homogeneous::classify_1d;
use qfreq::minimize::{solve, BoundaryTrace, SolveParams};
use qfreq::qspace::{QPoint, Sign};

fn main() -> qfreq::Result<()> {
    let mesh = Mesh::line(-1.0, 1.0, 201)?;
    let left = QPoint::new(vec![-2.0, 2.0], Sign::Minus)?;
    let right = QPoint::new(vec![-1.0, 1.0], Sign::Plus)?;
    let trace = BoundaryTrace::line(&mesh, left, right)?;
    let (field, rep) = solve(&trace, &mesh, &SolveParams::default())?;
    println!("energy {:.6} after {} sweeps (converged: {})", rep.energy, rep.sweeps, rep.converged);

    let c = classify_1d(&field, 0.02)?;
    println!("singular point {:?}", c.singular_point);
    println!("slopes left {:?}, right {:?}", c.a, c.b);
    println!("||a| - |b|| = {:.2e}, invariants ok: {}", c.norm_gap, c.invariants_ok);
    // the continuum minimizer puts the sign change at x = 1/3 with energy 9
    println!("expected x0 = 1/3, energy 9");
    Ok(())
}
