use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// The five instrumented kernel classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Fact,
    Trsv,
    Spmv,
    Spmm,
    Norm,
}

impl Kernel {
    pub const ALL: [Kernel; 5] = [Kernel::Fact, Kernel::Trsv, Kernel::Spmv, Kernel::Spmm, Kernel::Norm];

    pub fn as_str(self) -> &'static str {
        match self {
            Kernel::Fact => "fact",
            Kernel::Trsv => "trsv",
            Kernel::Spmv => "spmv",
            Kernel::Spmm => "spmm",
            Kernel::Norm => "norm",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Measured flop counters for one solve.
///
/// Every kernel takes the ledger explicitly, so a run can be attributed per
/// variant and per phase without any global state. Counters only grow.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    pub fact_flops: u64,
    pub trsv_flops: u64,
    pub spmv_flops: u64,
    pub spmm_flops: u64,
    pub norm_flops: u64,
    /// Number of numeric factorizations performed, keyed by matrix label.
    pub fact_events: BTreeMap<String, u64>,
    pub n_ipm: usize,
    pub n_kr_per_iter: Vec<usize>,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, kernel: Kernel, flops: u64) {
        match kernel {
            Kernel::Fact => self.fact_flops += flops,
            Kernel::Trsv => self.trsv_flops += flops,
            Kernel::Spmv => self.spmv_flops += flops,
            Kernel::Spmm => self.spmm_flops += flops,
            Kernel::Norm => self.norm_flops += flops,
        }
    }

    pub fn get(&self, kernel: Kernel) -> u64 {
        match kernel {
            Kernel::Fact => self.fact_flops,
            Kernel::Trsv => self.trsv_flops,
            Kernel::Spmv => self.spmv_flops,
            Kernel::Spmm => self.spmm_flops,
            Kernel::Norm => self.norm_flops,
        }
    }

    pub fn record_factorization(&mut self, label: &str) {
        *self.fact_events.entry(label.to_string()).or_insert(0) += 1;
    }

    pub fn factorizations(&self, label: &str) -> u64 {
        self.fact_events.get(label).copied().unwrap_or(0)
    }

    pub fn total_flops(&self) -> u64 {
        Kernel::ALL.iter().map(|&k| self.get(k)).sum()
    }

    pub fn total_krylov_iterations(&self) -> usize {
        self.n_kr_per_iter.iter().sum()
    }

    /// Folds the flop counters and factorization events of `other` into `self`.
    /// Iteration bookkeeping (`n_ipm`, `n_kr_per_iter`) is left untouched.
    pub fn absorb(&mut self, other: &CostLedger) {
        for k in Kernel::ALL {
            self.charge(k, other.get(k));
        }
        for (label, count) in &other.fact_events {
            *self.fact_events.entry(label.clone()).or_insert(0) += count;
        }
    }
}
