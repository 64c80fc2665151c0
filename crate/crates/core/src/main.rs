fn main() {
    std::process::exit(waveforge::cli::run(std::env::args_os()));
}
