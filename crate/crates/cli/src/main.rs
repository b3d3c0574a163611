fn main() {
    std::process::exit(flagdyn_cli::run(std::env::args_os()));
}
