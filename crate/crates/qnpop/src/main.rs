fn main() {
    std::process::exit(qnpop::cli::main_with(std::env::args_os()));
}
