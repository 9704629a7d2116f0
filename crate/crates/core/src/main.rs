use std::io;

fn main() {
    adiabatic_audit::cli::configure_threads();
    let stdout = io::stdout();
    let stderr = io::stderr();
    let code = adiabatic_audit::cli::run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    std::process::exit(code);
}
