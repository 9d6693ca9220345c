use clap::Parser;

fn main() {
    let cli = match exitlab_cli::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { exitlab_cli::EXIT_USAGE } else { exitlab_cli::EXIT_PASS };
            std::process::exit(code);
        }
    };
    std::process::exit(exitlab_cli::run(cli));
}
