fn main() {
    std::process::exit(algebroid_cli::run_command(std::env::args_os()));
}
