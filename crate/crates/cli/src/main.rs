use clap::Parser;
use polarlab_cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let (cmd, args) = Cli::parse().command.split();
    match run(cmd, &args) {
        Ok(outcome) => println!("{}", outcome.dir.join("summary.json").display()),
        Err(e) => {
            eprintln!("polarlab {}: {e}", cmd.name());
            std::process::exit(e.exit_code());
        }
    }
}
