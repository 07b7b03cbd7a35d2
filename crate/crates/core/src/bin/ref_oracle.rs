//! Reference child process for the subprocess oracle protocol. Serves the
//! two-input OR gate; flags inject faults for testing.
//!
//! Flags: `--declare-features N`, `--declare-classes C`, `--bad-shape`,
//! `--crash-after K` (exit on request K + 1), `--sleep-ms T` (per request).

use std::io::{self, BufRead, Write};
use std::process::ExitCode;
use std::thread;
use std::time::Duration;

use serde::Deserialize;

#[derive(Deserialize)]
struct Request {
    instances: Vec<Vec<f64>>,
}

struct Flags {
    features: usize,
    classes: usize,
    bad_shape: bool,
    crash_after: Option<usize>,
    sleep_ms: u64,
}

fn parse_flags() -> Result<Flags, String> {
    let mut flags = Flags {
        features: 2,
        classes: 2,
        bad_shape: false,
        crash_after: None,
        sleep_ms: 0,
    };
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        let mut value = |name: &str| {
            args.next()
                .and_then(|v| v.parse::<u64>().ok())
                .ok_or_else(|| format!("{name} needs a non-negative integer"))
        };
        match a.as_str() {
            "--declare-features" => flags.features = value(&a)? as usize,
            "--declare-classes" => flags.classes = value(&a)? as usize,
            "--bad-shape" => flags.bad_shape = true,
            "--crash-after" => flags.crash_after = Some(value(&a)? as usize),
            "--sleep-ms" => flags.sleep_ms = value(&a)?,
            other => return Err(format!("unknown flag {other}")),
        }
    }
    Ok(flags)
}

fn or_probs(x: &[f64], bad_shape: bool) -> String {
    let on = x.iter().take(2).any(|v| *v > 0.5);
    match (bad_shape, on) {
        (true, _) => "[0.2,0.3,0.5]".to_string(),
        (false, true) => "[0.0,1.0]".to_string(),
        (false, false) => "[1.0,0.0]".to_string(),
    }
}

fn main() -> ExitCode {
    let flags = match parse_flags() {
        Ok(f) => f,
        Err(e) => {
            eprintln!("sve-ref-oracle: {e}");
            return ExitCode::from(2);
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    if writeln!(
        out,
        "{{\"n_features\":{},\"n_classes\":{}}}",
        flags.features, flags.classes
    )
    .and_then(|_| out.flush())
    .is_err()
    {
        return ExitCode::FAILURE;
    }
    let mut served = 0;
    for line in io::stdin().lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        if flags.crash_after == Some(served) {
            return ExitCode::from(70);
        }
        let req: Request = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("sve-ref-oracle: bad request: {e}");
                return ExitCode::from(65);
            }
        };
        if flags.sleep_ms > 0 {
            thread::sleep(Duration::from_millis(flags.sleep_ms));
        }
        let probs: Vec<String> = req
            .instances
            .iter()
            .map(|x| or_probs(x, flags.bad_shape))
            .collect();
        if writeln!(out, "{{\"probs\":[{}]}}", probs.join(","))
            .and_then(|_| out.flush())
            .is_err()
        {
            return ExitCode::FAILURE;
        }
        served += 1;
    }
    ExitCode::SUCCESS
}
