use qfreq::acceptance::{bump_current, bump_params};
use qfreq::cli::digest_hex;
use qfreq::whitney::{self, CubeClass};

// Frozen from a reference run; the evaluation is a pure order-preserving
// map, so the digest does not depend on the thread count.
const COUNTS: (usize, usize, usize) = (318_344, 59_196, 171_556);
const CSV_SHA256: &str = "1d682b2916f4855a4b5d9bef1f6c0e8279f338513c4226231bab5b27e49464cb";

#[test]
fn bump_forest_is_frozen() {
    let params = bump_params();
    let forest = whitney::refine(&bump_current().unwrap(), &params, params.n0 + 5).unwrap();
    let count = |c: CubeClass| forest.w_cubes().filter(|w| w.class == c).count();
    assert_eq!((count(CubeClass::We), count(CubeClass::Wh), count(CubeClass::Wn)), COUNTS);
    assert_eq!(digest_hex(whitney::forest_csv(&forest).as_bytes()), CSV_SHA256);
    assert_eq!(forest.father_rule_violations, 0);
}
