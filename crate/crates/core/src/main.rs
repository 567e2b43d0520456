fn main() {
    std::process::exit(neuroenergy::cli::run(std::env::args_os()));
}
