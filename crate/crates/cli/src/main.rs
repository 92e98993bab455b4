//! `sharepref`: one binary, one subcommand per pipeline stage.
//!
//! Exit codes: 0 success, 1 invalid input or failed run, 2 usage error.

mod commands;
mod config;

use std::process::ExitCode;

use config::{build_cli, commands, resolve, Resolve, RESOLVED_CONFIG};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    run(std::env::args_os())
}

fn run(argv: impl IntoIterator<Item = std::ffi::OsString>) -> ExitCode {
    let specs = commands();
    let matches = match build_cli(&specs).try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let mut path = Vec::new();
    let mut m = &matches;
    while let Some((name, sub)) = m.subcommand() {
        path.push(name.to_string());
        m = sub;
    }
    let spec = specs.iter().find(|s| s.path == path).expect("clap only accepts declared commands");
    let cfg = match resolve(spec, m) {
        Ok(c) => c,
        Err(Resolve::Usage(u)) => {
            eprintln!("error: {}", u.0);
            return ExitCode::from(2);
        }
        Err(Resolve::Invalid(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let result = (|| {
        if let Some(dir) = &cfg.out {
            std::fs::create_dir_all(dir).map_err(|e| sharepref::Error::Io { path: dir.clone(), source: e })?;
        }
        commands::dispatch(&cfg)?;
        if let Some(dir) = &cfg.out {
            sharepref::io::write_atomic(&dir.join(RESOLVED_CONFIG), |w| {
                w.write_all(cfg.to_text().as_bytes())
                    .map_err(|e| sharepref::Error::Io { path: dir.join(RESOLVED_CONFIG), source: e })
            })?;
        }
        Ok::<_, sharepref::Error>(())
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
