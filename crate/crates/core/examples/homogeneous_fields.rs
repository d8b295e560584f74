//! Homogeneous fields: construction, stationarity and nodal structure.
//!
//! `cargo run --release --example homogeneous_fields`

use qfreq::fields::Mesh;
use qfreq::homogeneous::{
    build_homogeneous, check_stationarity, components_of_nodal_partition, measured_frequency_is_integer,
    HarmonicPolynomial2D, HomogeneousSpec,
};

fn main() -> qfreq::Result<()> {
    let mesh = Mesh::disk(1.0, 129)?;
    let p = HarmonicPolynomial2D::new(3, 0.8, 0.6)?;
    let spec = HomogeneousSpec::uniform(p, &[0.6, 0.0, -0.6]);
    let field = build_homogeneous(&spec, &mesh)?;

    let st = check_stationarity(&field);
    println!("transmission residual {:.3e} over {} samples", st.transmission_max, st.transmission_samples);
    let f = measured_frequency_is_integer(&field, [0.0, 0.0])?;
    println!("frequency {:.4}, nearest integer {}, pass {}", f.i_bar, f.nearest, f.pass);
    let nodal = components_of_nodal_partition(&p, &mesh)?;
    println!("nodal components: {} positive, {} negative", nodal.plus, nodal.minus);

    // unequal norms on the two sides break the transmission condition
    let mut bad = spec.clone();
    bad.minus[0] = vec![1.0, 0.0, -1.0];
    println!("unbalanced spec: {}", build_homogeneous(&bad, &mesh).unwrap_err());
    Ok(())
}
