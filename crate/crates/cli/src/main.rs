fn main() {
    std::process::exit(coach_ope_cli::run(std::env::args_os()));
}
