use clap::Parser;

fn main() {
    let cli = contraction_lab_cli::Cli::parse();
    let outcome = contraction_lab_cli::run(&cli);
    contraction_lab_cli::summarize(&outcome);
    std::process::exit(outcome.code);
}
