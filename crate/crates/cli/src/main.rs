fn main() {
    let code = sgfluid_cli::run_command(std::env::args(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
