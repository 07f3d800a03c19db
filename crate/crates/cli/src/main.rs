fn main() {
    std::process::exit(convmon_cli::cli_main(std::env::args_os()));
}
