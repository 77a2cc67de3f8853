fn main() {
    std::process::exit(turing_hopf::cli::run(std::env::args_os()));
}
