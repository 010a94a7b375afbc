use clap::Parser;

fn main() {
    let cli = vfog::cli::Cli::parse();
    if let Err(e) = vfog::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
