fn main() {
    std::process::exit(gmwf_workbench::cli::run(std::env::args_os()));
}
