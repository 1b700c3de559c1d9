use clap::Parser;
use pareto_market_cli::{cmd_fit, cmd_run, cmd_sweep, Cli, Command};

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args).map(|o| {
            eprintln!(
                "wrote {} files to {}",
                o.manifest.outputs.len() + 1,
                o.out.display()
            );
        }),
        Command::Sweep(args) => cmd_sweep(args).map(|o| {
            match o.beta_star {
                Some(b) => eprintln!("minimum correlation at beta = {b}"),
                None => eprintln!("no correlation minimum could be located"),
            }
            eprintln!("outputs in {}", o.out.display());
        }),
        Command::Fit(args) => cmd_fit(args).map(|json| println!("{json}")),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
