fn main() {
    std::process::exit(rboost::cli::cli_dispatch(std::env::args_os()));
}
