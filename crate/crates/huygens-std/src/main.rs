use std::process::ExitCode;

fn main() -> ExitCode {
    match huygens::cli::run(std::env::args_os()) {
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            ExitCode::from(code)
        }
        Ok(Err(e)) => {
            eprintln!("huygens: {e}");
            ExitCode::from(e.exit_code())
        }
        Ok(Ok(outcome)) => {
            print!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
    }
}
