fn main() {
    std::process::exit(twicemix::cli::main_with_args(std::env::args_os()));
}
