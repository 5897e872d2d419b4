use clap::Parser;

fn main() {
    let cli = cfkit::cli::Cli::parse();
    if let Err(err) = cfkit::cli::run(cli) {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}
