fn main() {
    std::process::exit(idconc::cli::run(std::env::args_os()));
}
