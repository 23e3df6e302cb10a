fn main() {
    std::process::exit(trd_cli::app::run_main(std::env::args_os()));
}
