//! Parsing a run configuration and driving a subcommand in-process, the
//! same path the `ergostat` binary takes.
use ergostat::config::parse_config;
use ergostat::runner::{run, Subcommand};

const CONFIG: &str = "\
[map]
name = tent
[observable]
name = sawtooth
[run]
seeds = 1, 2
horizon = 20000
checkpoints = 1000, 20000
[transfer]
resolution = 512
";

fn main() {
    let mut config = match parse_config(CONFIG) {
        Ok(c) => c,
        Err(errors) => {
            for e in errors {
                eprintln!("{e}");
            }
            std::process::exit(2);
        }
    };
    let dir = std::env::temp_dir().join("ergostat-example");
    config.output_dir = dir.display().to_string();
    println!("config hash {}", config.hash());

    for sub in [Subcommand::Density, Subcommand::Sigma2, Subcommand::Asclt] {
        match run(sub, &config) {
            Ok(report) => {
                for (k, v) in &report.summary {
                    println!("{sub}: {k} = {v}");
                }
            }
            Err(e) => eprintln!("{sub}: {e}"),
        }
    }
    println!("outputs in {}", dir.display());
}
