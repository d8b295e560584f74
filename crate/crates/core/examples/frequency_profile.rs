//! Frequency profiles of homogeneous fields, plain and smoothed.
//!
//! `cargo run --release --example frequency_profile`

use qfreq::fields::Mesh;
use qfreq::frequency::{profile, smoothed_frequency};
use qfreq::homogeneous::{build_homogeneous, HarmonicPolynomial2D, HomogeneousSpec};

fn main() -> qfreq::Result<()> {
    let radii = [0.2, 0.35, 0.5, 0.65, 0.8];
    let s = 0.5f64.sqrt();
    for degree in 1..=3 {
        let spec = HomogeneousSpec::uniform(HarmonicPolynomial2D::new(degree, 1.0, 0.0)?, &[s, -s]);
        let field = build_homogeneous(&spec, &Mesh::disk(1.0, 129)?)?;
        let p = profile(&field, [0.0, 0.0], &radii)?;
        let i: Vec<String> = p.i.iter().map(|v| v.map_or("-".into(), |x| format!("{x:.4}"))).collect();
        println!("degree {degree}: I(r) = [{}]", i.join(", "));
        let sm = smoothed_frequency(&field, [0.0, 0.0], 0.5)?;
        println!("          smoothed I at r = 0.5: {:?}", sm.i_phi);
    }
    Ok(())
}
