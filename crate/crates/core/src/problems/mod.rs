//! Problem sources: the synthetic generator and QPS files.

pub mod qps;
pub mod syqp;

use std::path::Path;

pub use qps::{fit_names, parse_qps, write_qps, QpsFile};
pub use syqp::{gen_syqp, syqp_hessian, SyQpSpec};

use crate::error::Result;
use crate::ipm::QpProblem;

/// Reads and canonicalizes a QPS file.
pub fn read_qps_file(path: &Path) -> Result<QpProblem> {
    parse_qps(&std::fs::read_to_string(path)?)
}

/// Writes `p` as QPS to `path`.
pub fn write_qps_file(p: &QpProblem, path: &Path) -> Result<()> {
    std::fs::write(path, write_qps(p)?)?;
    Ok(())
}

/// Pretty-printed JSON description of a problem's sizes.
pub fn manifest_json(p: &QpProblem) -> String {
    serde_json::to_string_pretty(&p.manifest()).expect("manifest serializes")
}
