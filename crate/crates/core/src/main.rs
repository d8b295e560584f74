fn main() {
    std::process::exit(qfreq::cli::run(std::env::args_os()));
}
