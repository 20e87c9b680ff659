fn main() {
    std::process::exit(vlcrange::cli::run(std::env::args_os()));
}
