use clap::Parser;

use z2sync::cli::{error_json, exit_code, run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli, std::env::vars()) {
        Ok(summary) => println!("{summary}"),
        Err(e) => {
            eprintln!("{}", error_json(&e));
            std::process::exit(exit_code(&e));
        }
    }
}
