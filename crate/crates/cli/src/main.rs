fn main() {
    std::process::exit(spincorr_cli::cli_main(std::env::args_os()));
}
