fn main() {
    std::process::exit(hjlab::app::run(std::env::args_os()));
}
