fn main() {
    std::process::exit(examini::cli::dispatch(std::env::args_os()));
}
