//! Scenario orchestration: configuration, acceptance checks, interaction runs, sweeps and outputs.

pub mod checks;
pub mod config;
pub mod interaction;
pub mod output;
pub mod scaling;
pub mod scenario;

pub use config::{ScenarioConfig, ScenarioKind};
pub use scaling::{fit_scaling, SweepReport};
pub use scenario::{run_scenario, ScenarioOutcome};

use crate::error::{Result, WaveError};

/// One pass/fail line of a machine-readable summary.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    /// Criterion label such as `"9b"`.
    pub id: String,
    pub name: String,
    pub value: f64,
    pub threshold: String,
    pub pass: bool,
}

impl Check {
    pub fn new(id: &str, name: &str, value: f64, threshold: impl Into<String>, pass: bool) -> Self {
        Self { id: id.into(), name: name.into(), value, threshold: threshold.into(), pass }
    }

    /// Passes when `value < bound`.
    pub fn below(id: &str, name: &str, value: f64, bound: f64) -> Self {
        Self::new(id, name, value, format!("< {bound:e}"), value < bound)
    }

    pub const HEADER: &'static str = "id\tcheck\tvalue\tthreshold\tstatus";

    pub fn line(&self) -> String {
        format!("{}\t{}\t{:.10e}\t{}\t{}", self.id, self.name, self.value, self.threshold, self.status())
    }

    pub fn status(&self) -> &'static str {
        if self.pass {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

/// Worker pool sized by `WAVELAB_THREADS` (all cores when unset).
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("WAVELAB_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| WaveError::Config(format!("WAVELAB_THREADS = '{v}' is not a positive integer")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| WaveError::Config(format!("thread pool: {e}")))
}
