// SPDX-License-Identifier: MIT OR Apache-2.0

//! `lancet`: command-line front end. Every operation goes through the HTTP
//! service, either one given with `--server` or one started in-process.

mod args;
mod commands;
mod error;
mod output;

use clap::error::ErrorKind;
use clap::Parser;
use tracing_subscriber::EnvFilter;

use lancet_core::config::{ConfigOverrides, OutputFormat, RunConfig};
use lancet_core::ReadMethod;

use args::{Cli, Command, DictCommand, Format, Method};
use commands::Ctx;
use error::CliResult;

fn overrides(cli: &Cli) -> ConfigOverrides {
    let g = &cli.global;
    let mut o = ConfigOverrides {
        output: g.format.map(|f| match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
            Format::Plain => OutputFormat::Plain,
        }),
        lambda: g.lambda,
        rho: g.rho,
        cache_dir: g.cache_dir.clone(),
        replay_fixture: g.replay.clone(),
        ..ConfigOverrides::default()
    };
    match &cli.command {
        Command::Decompose(a) => o.report_k = a.k,
        Command::Report(a) => o.report_k = a.k,
        Command::Dict(DictCommand::Build(a)) => {
            o.read_method = a.method.map(|m| match m {
                Method::Avg => ReadMethod::Avg,
                Method::Pca => ReadMethod::Pca,
            });
            o.normalize = a.normalize.then_some(true);
        }
        _ => {}
    }
    o
}

async fn run(cli: Cli) -> CliResult<()> {
    let cfg = RunConfig::layered(cli.global.config.as_deref(), &overrides(&cli))?;
    let mut ctx = Ctx::new(cfg, &cli.global);
    match cli.command {
        Command::Concepts(c) => commands::concepts(&mut ctx, c).await,
        Command::Stimuli(c) => commands::stimuli(&mut ctx, c).await,
        Command::Embed(a) => commands::embed(&mut ctx, a).await,
        Command::Dict(c) => commands::dict(&mut ctx, c).await,
        Command::Decompose(a) => commands::decompose(&mut ctx, a).await,
        Command::Edit(a) => commands::edit(&mut ctx, a).await,
        Command::Sweep(a) => commands::sweep(&mut ctx, a).await,
        Command::Report(a) => commands::report(&mut ctx, a).await,
        Command::VecAdd(a) => commands::vec_add(&mut ctx, a).await,
        Command::Serve(a) => commands::serve(&mut ctx, a).await,
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(level));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    init_logging(cli.global.verbose);
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start the async runtime: {e}");
            std::process::exit(3);
        }
    };
    if let Err(e) = runtime.block_on(run(cli)) {
        eprintln!("error[{}]: {e}", e.code());
        std::process::exit(e.exit_code());
    }
}
