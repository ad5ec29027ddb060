use clap::Parser;

fn main() {
    let cli = hbfsim::Cli::parse();
    match hbfsim::run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("hbfsim: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
