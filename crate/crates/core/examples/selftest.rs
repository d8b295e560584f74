//! Run the acceptance suite in-process.
//!
//! `cargo run --release --example selftest`

fn main() {
    let results = qfreq::acceptance::run_all(0);
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    std::process::exit(if failed == 0 { 0 } else { 1 });
}
