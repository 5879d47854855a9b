fn main() {
    std::process::exit(scgc::cli::cli_main(std::env::args_os()));
}
