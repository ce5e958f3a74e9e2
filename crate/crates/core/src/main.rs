fn main() {
    std::process::exit(qmclab::lab::run_cli(std::env::args_os()));
}
