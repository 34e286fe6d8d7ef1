use std::process::ExitCode;

fn main() -> ExitCode {
    cccl::cli::main()
}
