use clap::Parser;
use zimed_cli::cli::Cli;

fn main() {
    let cli = Cli::parse();
    std::process::exit(zimed_cli::run::run(cli));
}
