//! Limit-state evaluators: the black-box performance functions whose sign
//! classifies an input as safe (`g > 0`) or failed (`g <= 0`).

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LimitStateError {
    #[error("point has dimension {got}, evaluator expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("evaluator domain error: {0}")]
    Domain(String),
    #[error("external evaluator failure: {0}")]
    External(String),
}

/// A deterministic limit-state function. Evaluators must be pure: the same
/// point always yields the same response.
pub trait LimitState: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<f64, LimitStateError>;
}

/// Adapter for closures.
pub struct FnLimitState<F: Fn(&[f64]) -> Result<f64, LimitStateError> + Sync> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Result<f64, LimitStateError> + Sync> FnLimitState<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> Result<f64, LimitStateError> + Sync> LimitState for FnLimitState<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> Result<f64, LimitStateError> {
        if x.len() != self.dim {
            return Err(LimitStateError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        (self.f)(x)
    }
}

/// Wraps an evaluator and counts calls; the counters back the N1 bookkeeping
/// and the "surrogate levels make zero true-model calls" assertions.
pub struct CountingLimitState<'a> {
    inner: &'a dyn LimitState,
    calls: AtomicU64,
}

impl<'a> CountingLimitState<'a> {
    pub fn new(inner: &'a dyn LimitState) -> Self {
        Self { inner, calls: AtomicU64::new(0) }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl LimitState for CountingLimitState<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, x: &[f64]) -> Result<f64, LimitStateError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.eval(x)
    }
}

/// A limit-state function served by a child process over a line protocol:
/// one whitespace-separated input row per request on stdin, one response
/// value per line on stdout. The child is spawned once and kept alive.
pub struct ExternalLimitState {
    dim: usize,
    command: String,
    io: Mutex<ExternalIo>,
}

struct ExternalIo {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl ExternalLimitState {
    pub fn spawn(command: &str, dim: usize) -> Result<Self, LimitStateError> {
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| LimitStateError::External("empty command".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| LimitStateError::External(format!("spawn `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            dim,
            command: command.to_string(),
            io: Mutex::new(ExternalIo { child, stdin, stdout }),
        })
    }
}

impl LimitState for ExternalLimitState {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> Result<f64, LimitStateError> {
        if x.len() != self.dim {
            return Err(LimitStateError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let mut io = self.io.lock().expect("external evaluator poisoned");
        let line = x
            .iter()
            .map(|v| format!("{v:.17e}"))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(io.stdin, "{line}")
            .and_then(|_| io.stdin.flush())
            .map_err(|e| LimitStateError::External(format!("`{}`: write: {e}", self.command)))?;
        let mut reply = String::new();
        io.stdout
            .read_line(&mut reply)
            .map_err(|e| LimitStateError::External(format!("`{}`: read: {e}", self.command)))?;
        reply
            .trim()
            .parse::<f64>()
            .map_err(|e| LimitStateError::External(format!("`{}`: bad response {reply:?}: {e}", self.command)))
    }
}

impl Drop for ExternalLimitState {
    fn drop(&mut self) {
        if let Ok(mut io) = self.io.lock() {
            let _ = io.child.kill();
            let _ = io.child.wait();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting_wrapper_counts() {
        let g = FnLimitState::new(1, |x| Ok(x[0] - 1.0));
        let counted = CountingLimitState::new(&g);
        assert_eq!(counted.calls(), 0);
        counted.eval(&[2.0]).unwrap();
        counted.eval(&[3.0]).unwrap();
        assert_eq!(counted.calls(), 2);
    }

    #[test]
    fn dimension_checked() {
        let g = FnLimitState::new(2, |x| Ok(x[0] + x[1]));
        assert!(matches!(
            g.eval(&[1.0]),
            Err(LimitStateError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn external_process_round_trip() {
        // a shell loop evaluating x1 - x2^2 per input line; one awk process
        // per line so output is flushed regardless of the awk flavor
        let script = std::env::temp_dir().join("isra_external_eval_test.sh");
        std::fs::write(
            &script,
            "#!/bin/sh\nwhile read a b; do awk -v x=\"$a\" -v y=\"$b\" 'BEGIN{print x - y*y}'; done\n",
        )
        .unwrap();
        let cmd = format!("sh {}", script.display());
        let ext = ExternalLimitState::spawn(&cmd, 2).unwrap();
        let y = ext.eval(&[4.0, 2.0]).unwrap();
        assert!(y.abs() < 1e-9);
        let y = ext.eval(&[1.0, 0.0]).unwrap();
        assert!((y - 1.0).abs() < 1e-9);
        drop(ext);
        let _ = std::fs::remove_file(script);
    }
}
