mod args;
mod commands;
mod grid;
mod rundir;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use ices::config::IcesConfig;

use args::{Cli, Command};
use grid::GridFailure;
use rundir::Provenance;

fn resolve(cli: &Cli) -> Result<IcesConfig> {
    let file = cli.common.config.clone().or_else(|| match &cli.command {
        Command::Eval(e) => {
            let beside = e.checkpoint.parent()?.join("config.toml");
            beside.is_file().then_some(beside)
        }
        _ => None,
    });
    let mut cfg = match &file {
        Some(p) => IcesConfig::load(p)?,
        None => IcesConfig::default(),
    };
    cli.common.apply(&mut cfg);
    match &cli.command {
        Command::Eval(e) => {
            if let Some(n) = cli.common.episodes {
                cfg.run.eval_episodes = n;
            }
            if cli.common.out.is_none() {
                let parent = e.checkpoint.parent().unwrap_or(std::path::Path::new("."));
                cfg.run.out = parent.join("eval");
            }
        }
        Command::Sweep(s) => {
            if let Some(p) = s.parameter {
                cfg.sweep.parameter = p;
            }
            if let Some(v) = &s.values {
                cfg.sweep.values.clone_from(v);
            }
            if let Some(seeds) = &s.seeds.seeds {
                cfg.run.seeds.clone_from(seeds);
            }
        }
        Command::AblateChp(s) => {
            if let Some(seeds) = &s.seeds {
                cfg.run.seeds.clone_from(seeds);
            }
        }
        Command::Train | Command::Summarize { .. } => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    if let Command::Summarize { dir } = &cli.command {
        print!("{}", grid::summarize(dir)?);
        return Ok(());
    }
    let cfg = resolve(cli)?;
    let config_file = cli.common.config.as_deref();
    let force = cli.common.force;
    let prov = |command| Provenance {
        command,
        config_file,
        extra: None,
    };
    match &cli.command {
        Command::Train => commands::train(&cfg, force, &prov("train")),
        Command::Eval(e) => commands::eval(&cfg, &e.checkpoint, force),
        Command::Sweep(_) => grid::sweep(&cfg, force, &prov("sweep")),
        Command::AblateChp(_) => grid::ablate_chp(&cfg, force, &prov("ablate-chp")),
        Command::Summarize { .. } => unreachable!(),
    }
}

/// 2 for training faults, 1 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    let fault = e.chain().any(|c| {
        c.downcast_ref::<ices::Error>()
            .is_some_and(ices::Error::is_training_fault)
            || c.downcast_ref::<GridFailure>()
                .is_some_and(|g| g.training_fault)
    });
    if fault {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
