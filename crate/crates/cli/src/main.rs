use clap::Parser;

fn main() {
    let cli = momentlab_cli::Cli::parse();
    std::process::exit(momentlab_cli::run(cli));
}
