use clap::Parser;

fn main() {
    let cli = ris_skg_cli::Cli::parse();
    if let Err(e) = ris_skg_cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
