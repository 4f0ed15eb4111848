fn main() {
    let code = onegrab::cli::run(std::env::args_os());
    std::process::exit(code);
}
