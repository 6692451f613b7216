fn main() {
    std::process::exit(wave_cascade::cli::run(std::env::args_os()));
}
