fn main() {
    std::process::exit(tminimax::cli::dispatch(std::env::args_os()));
}
