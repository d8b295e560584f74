//! Whitney refinement of a flat and a bumped two-sheet current.
//!
//! `cargo run --release --example whitney_forest [out_dir]`

use qfreq::whitney::{self, Bump, CubeClass, GraphCurrent, WhitneyParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = WhitneyParams {
        ce: 1e5,
        ..WhitneyParams::default()
    };
    let j_max = params.n0 + 3;
    let flat = GraphCurrent::flat(2, 129, 0.0)?;
    let bump = GraphCurrent::bumps(
        2,
        129,
        &[Bump {
            center: [1.0, -0.5],
            radius: 0.3,
            amplitude: 0.5,
        }],
    )?;
    for (name, cur) in [("flat", &flat), ("bump", &bump)] {
        let forest = whitney::refine(cur, &params, j_max)?;
        let count = |c: CubeClass| forest.w_cubes().filter(|w| w.class == c).count();
        println!(
            "{name}: m0 = {:.3e}, stopped {} (EX {}, HT {}, NN {}), father rule violations {}, area {}",
            forest.m0,
            forest.w_count(),
            count(CubeClass::We),
            count(CubeClass::Wh),
            count(CubeClass::Wn),
            forest.father_rule_violations,
            forest.covered_area()
        );
        let cm = whitney::check_fine_cm(&forest, &[[-3.0, 3.0]]);
        println!("      contact criterion at (-3, 3): {}", cm.pass);
        if let Some(dir) = std::env::args().nth(1) {
            std::fs::create_dir_all(&dir)?;
            let path = std::path::Path::new(&dir).join(format!("{name}_forest.csv"));
            std::fs::write(&path, whitney::forest_csv(&forest))?;
            println!("      wrote {}", path.display());
        }
    }
    Ok(())
}
