//! Runner for the acceptance criteria: each criterion is a closure that
//! returns a one-line detail on success or the reason it failed.

use std::time::{Duration, Instant};

#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "{} {:<8} {:>8.2} s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

/// Run one criterion; it fails if the closure errs or `limit` is exceeded.
pub fn criterion(id: &str, limit: Option<Duration>, f: impl FnOnce() -> Result<String, String>) -> Outcome {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    let (mut passed, mut detail) = match result {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if let Some(limit) = limit {
        if elapsed > limit {
            passed = false;
            detail = format!("{detail}; runtime over the {} s limit", limit.as_secs());
        }
    }
    let out = Outcome { id: id.to_string(), passed, detail, elapsed };
    println!("{}", out.line());
    out
}

/// `Err(msg)` unless `cond`.
pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Largest value of an iterator, or 0 when empty.
pub fn worst(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}
