use clap::Parser;
use mann_cli::{run, Cli, CliError};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            eprintln!("{}", CliError::config(first).to_json());
            std::process::exit(2);
        }
    };
    match run(cli) {
        Ok(line) => println!("{line}"),
        Err(e) => {
            eprintln!("{}", e.to_json());
            std::process::exit(e.kind.exit_code());
        }
    }
}
