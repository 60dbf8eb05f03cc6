use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let out = subproduct_cli::main_with_args(std::env::args_os());
    let mut stdout = std::io::stdout();
    if out.code == 2 {
        eprint!("{}", out.stdout);
    } else {
        let _ = stdout.write_all(out.stdout.as_bytes());
    }
    ExitCode::from(out.code as u8)
}
