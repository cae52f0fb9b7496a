fn main() {
    std::process::exit(optsub::cli::run(std::env::args_os()));
}
