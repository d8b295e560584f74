//! The Weiss functional of a solved field and its monotonicity.
//!
//! `cargo run --release --example weiss_functional`

use qfreq::acceptance::solve_model_disk;
use qfreq::frequency::{check_weiss_monotone, default_monotonicity_tolerance, profile};

fn main() -> qfreq::Result<()> {
    let (field, _) = solve_model_disk(0.1, 65)?;
    let radii: Vec<f64> = (0..9).map(|k| 0.2 + 0.075 * k as f64).collect();
    let p = profile(&field, [0.0, 0.0], &radii)?.with_weiss(1.0)?;
    let w = p.w.as_ref().expect("weiss requested");
    for (r, w) in radii.iter().zip(w) {
        println!("r = {r:.3}  W = {w:+.6}");
    }
    let tol = default_monotonicity_tolerance(&field);
    let m = check_weiss_monotone(&radii, w, tol)?;
    println!("monotone within {:.3e}: {} (largest decrease {:.3e})", tol, m.pass, m.max_violation);
    Ok(())
}
