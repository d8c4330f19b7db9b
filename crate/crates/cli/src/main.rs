use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = partbias_cli::Cli::parse();
    if let Err(e) = partbias_cli::run(&cli) {
        let code = partbias_cli::exit_code(&e);
        eprintln!("{}", partbias_cli::error_record(&e, code));
        std::process::exit(code);
    }
}
