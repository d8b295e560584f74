//! Prints one PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

fn main() {
    let results = qfreq::acceptance::run_all(0);
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
