use std::process::ExitCode;

use hermiflow::cli::{run_args, TOL_ENV};

fn main() -> ExitCode {
    let outcome = run_args(std::env::args_os(), std::env::var(TOL_ENV).ok());
    if outcome.exit_code == 2 {
        eprint!("{}", outcome.report);
    } else {
        print!("{}", outcome.report);
    }
    ExitCode::from(outcome.exit_code as u8)
}
