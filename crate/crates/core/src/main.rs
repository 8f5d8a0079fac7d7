use std::process::ExitCode;

fn main() -> ExitCode {
    noma_mec::cli::main_entry()
}
