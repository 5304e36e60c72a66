use clap::error::ErrorKind;
use clap::Parser;
use rfreg_cli::args::Cli;
use rfreg_cli::CliError;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            let err = CliError::Input(first);
            eprintln!("{}", err.diagnostic());
            std::process::exit(err.exit_code());
        }
    };
    if let Err(e) = rfreg_cli::run(&cli) {
        eprintln!("{}", e.diagnostic());
        std::process::exit(e.exit_code());
    }
}
