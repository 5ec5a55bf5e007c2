fn main() {
    std::process::exit(trpca::cli::dispatch(std::env::args_os()));
}
