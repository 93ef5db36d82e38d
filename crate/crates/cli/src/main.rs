use clap::Parser;

fn main() -> std::process::ExitCode {
    ortho_cli::run(ortho_cli::Cli::parse())
}
