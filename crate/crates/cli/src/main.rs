mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

fn thread_count(flag: Option<usize>) -> anyhow::Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("QUICCI_THREADS") {
        Ok(v) if !v.trim().is_empty() => {
            let n = v.trim().parse().map_err(|_| anyhow::anyhow!("QUICCI_THREADS must be a number, got {v:?}"))?;
            Ok(Some(n))
        }
        _ => Ok(None),
    }
}

fn run() -> anyhow::Result<()> {
    let argv = config::apply_config_file(std::env::args_os().collect())?;
    let cli = Cli::parse_from(argv);
    if let Some(n) = thread_count(cli.threads)? {
        if n == 0 {
            anyhow::bail!("thread count must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let seed = cli.seed.unwrap_or_else(rand::random);
    eprintln!("seed: {seed}");
    eprintln!("threads: {}", rayon::current_num_threads());
    eprintln!("config: {:#?}", cli.command);
    commands::dispatch(cli.command, seed)
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
