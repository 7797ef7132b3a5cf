use clap::Parser;

fn main() {
    std::process::exit(critfield_cli::run(critfield_cli::Cli::parse()));
}
