use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use spindetect_cli::cli::{Cli, Command};
use spindetect_cli::{commands, server, Detector};

const THREADS_VAR: &str = "SPINDETECT_THREADS";

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .with_context(|| format!("{THREADS_VAR} must be a positive integer, got {value:?}"))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Ingest(a) => commands::ingest(&a),
        Command::Spin(a) => commands::spin(&a),
        Command::Train(a) => commands::train(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Classify(a) => {
            let result = commands::classify(&a)?;
            println!("{}", serde_json::to_string(&result)?);
            Ok(())
        }
        Command::Serve(a) => {
            let detector = Detector::load(
                &a.model,
                &a.vectors.vectors,
                a.vectors.subwords.as_deref(),
                a.vectors.oov.into(),
            )?;
            tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .context("starting the runtime")?
                .block_on(server::serve(detector, &a.bind))
        }
        Command::Synth(a) => commands::synth(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = format!("{e:#}").replace(['\n', '\r'], " ");
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
