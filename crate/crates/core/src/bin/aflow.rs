fn main() {
    let code = aflow::cli::run(std::env::args_os(), std::env::vars());
    std::process::exit(code);
}
