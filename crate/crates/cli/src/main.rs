fn main() {
    std::process::exit(nvdephase_cli::run(std::env::args_os()));
}
