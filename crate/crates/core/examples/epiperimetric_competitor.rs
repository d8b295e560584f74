//! Build the competitor for the model trace and report the energy gap.
//!
//! `cargo run --release --example epiperimetric_competitor`

use qfreq::epiperimetric::{arc_eigen, model_partition, verify_epiperimetric, EpiParams};

fn main() -> qfreq::Result<()> {
    let spec = arc_eigen(std::f64::consts::FRAC_PI_2, 3)?;
    println!("arc of length π/2: λ = {:?}, μ = {:?}", spec.lambda, spec.mu);

    for eps in [0.0, 0.05, 0.1, 0.2] {
        let part = model_partition(eps, 2049)?;
        let rep = verify_epiperimetric(&part, &EpiParams::default())?;
        println!(
            "eps {eps:.2}: W1 = {:.6}, gap = {:.6}, delta = {:?}, pass {}",
            rep.w1, rep.gap, rep.delta_measured, rep.pass
        );
        for a in &rep.arcs {
            println!(
                "    arc at {:+.3} of length {:.3}, main {}, energy {:.5} vs {:.5}",
                a.start, a.theta, a.main, a.energy_w, a.energy_u_i
            );
        }
    }
    Ok(())
}
