//! Distances between special Q-points.
//!
//! `cargo run --example qspace_metrics`

use qfreq::oracle::brute_force_g2;
use qfreq::qspace::{g_metric, gs_metric, intrinsic_distance, QPoint, Sign};

fn main() -> qfreq::Result<()> {
    let a = QPoint::new(vec![1.0, -1.0, 0.5], Sign::Plus)?;
    let b = QPoint::new(vec![0.2, 2.0, -0.4], Sign::Minus)?;
    println!("a = {a:?}");
    println!("b = {b:?}");
    println!("eta(a) = {:.4}, eta(b) = {:.4}", a.eta(), b.eta());
    println!("G_s(a, b)      = {:.6}", gs_metric(&a, &b)?);
    println!("intrinsic(a,b) = {:.6}", intrinsic_distance(&a, &b)?);

    // sorted matching on the positive parts against all 3! permutations
    let (pa, pb) = (a.pos_part(), b.pos_part());
    let g = g_metric(&pa, &pb)?;
    let brute = brute_force_g2(pa.values(), pb.values()).sqrt();
    println!("G(a+, b+) = {g:.6}, brute force {brute:.6}");

    // collapsed points forget their sign
    let c1 = QPoint::collapsed(3, 0.7);
    let c2 = QPoint::collapsed(3, 0.7).flip_sign();
    println!("Q[[0.7]] with either sign: distance {}", gs_metric(&c1, &c2)?);
    Ok(())
}
