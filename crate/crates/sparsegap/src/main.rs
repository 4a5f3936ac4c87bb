fn main() {
    std::process::exit(sparsegap::cli::run(std::env::args_os()));
}
