use clap::Parser;

fn main() {
    env_logger::init();
    let cli = pgpe::cli::Cli::parse();
    std::process::exit(pgpe::cli::run(cli));
}
