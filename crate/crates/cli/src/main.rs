use clap::Parser;
use twistwave_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("twistwave: {e}");
        std::process::exit(e.exit_code());
    }
}
