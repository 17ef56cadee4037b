fn main() {
    std::process::exit(fwdsmile_cli::run(std::env::args_os()));
}
