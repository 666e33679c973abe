use std::process::ExitCode;

use ttdl_cli::{parse_config, run_pipeline, ConfigError};

fn main() -> ExitCode {
    let config = match parse_config(std::env::args_os()) {
        Ok(c) => c,
        Err(ConfigError::Usage(e)) => e.exit(),
        Err(ConfigError::Invalid(diags)) => {
            for d in diags.iter() {
                eprintln!("error: {d}");
            }
            return ExitCode::from(2);
        }
    };
    match run_pipeline(&config) {
        Ok(summary) => {
            print!("{}", summary.report);
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            for path in &summary.artifacts {
                eprintln!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
