use clap::Parser;

fn main() {
    let cli = phrasealign_cli::Cli::parse();
    if let Err(e) = phrasealign_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
