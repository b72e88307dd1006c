use std::process::ExitCode;

use clap::Parser;
use ovseg3r_cli::{logging, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    logging::init(json, cli.verbose, cli.quiet);
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: cannot start the thread pool: {e}");
        return ExitCode::from(3);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if json {
                eprintln!("{}", e.to_json());
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
