//! On-disk container for a built Ulam discretization.
//!
//! The file is one header line `intermittency-ulam v1 sha256=<hex>` followed
//! by a JSON body. The digest covers the body bytes exactly, so any edit or
//! truncation is detected on load.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{build_ulam, CsrMatrix, Grid, GridScheme, UlamMeasure, UlamOperator};
use crate::error::{Error, Result};
use crate::map::MapModel;

const MAGIC: &str = "intermittency-ulam v1";

#[derive(Serialize, Deserialize)]
struct Body {
    alpha: f64,
    scheme: GridScheme,
    boundaries: Vec<f64>,
    masses: Vec<f64>,
    transfer: CsrMatrix,
}

pub fn save_ulam(path: &Path, measure: &UlamMeasure, op: &UlamOperator) -> Result<()> {
    let body = Body {
        alpha: measure.alpha(),
        scheme: measure.scheme(),
        boundaries: measure.grid().boundaries().to_vec(),
        masses: measure.masses().to_vec(),
        transfer: op.transfer().clone(),
    };
    let json = serde_json::to_vec(&body)?;
    let digest = hex::encode(Sha256::digest(&json));
    let mut out = format!("{MAGIC} sha256={digest}\n").into_bytes();
    out.extend_from_slice(&json);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    // write then rename so a crash never leaves a half-written cache entry
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, out)?;
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn load_ulam(path: &Path) -> Result<(UlamMeasure, UlamOperator)> {
    let bytes = fs::read(path)?;
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Corrupt("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..split])
        .map_err(|_| Error::Corrupt("header is not UTF-8".into()))?;
    let expected = header
        .strip_prefix(MAGIC)
        .and_then(|rest| rest.trim().strip_prefix("sha256="))
        .ok_or_else(|| Error::Corrupt(format!("unrecognized header '{header}'")))?;
    let body = &bytes[split + 1..];
    let actual = hex::encode(Sha256::digest(body));
    if actual != expected {
        return Err(Error::Corrupt(format!(
            "checksum mismatch: header {expected}, body {actual}"
        )));
    }
    let body: Body = serde_json::from_slice(body)?;
    let grid = Grid::from_boundaries(body.boundaries)?;
    if body.transfer.size() != grid.cells() {
        return Err(Error::Corrupt("matrix size does not match grid".into()));
    }
    let op = UlamOperator::from_transfer(body.transfer, &body.masses);
    let measure = UlamMeasure::from_masses(body.alpha, body.scheme, grid, body.masses)?;
    Ok((measure, op))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Miss,
    /// A cached file existed but failed verification and was rebuilt.
    Rebuilt(String),
}

/// Directory of cached discretizations keyed by `(alpha, N, scheme)`.
#[derive(Debug, Clone)]
pub struct UlamCache {
    dir: PathBuf,
}

impl UlamCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, alpha: f64, cells: usize, scheme: GridScheme) -> PathBuf {
        self.dir
            .join(format!("ulam_alpha{alpha:?}_n{cells}_{scheme}.ulam"))
    }

    pub fn load_or_build(
        &self,
        model: &MapModel,
        cells: usize,
        scheme: GridScheme,
    ) -> Result<(UlamMeasure, UlamOperator, CacheStatus)> {
        let path = self.path_for(model.alpha(), cells, scheme);
        let mut status = CacheStatus::Miss;
        if path.exists() {
            match load_ulam(&path) {
                Ok((m, op))
                    if m.alpha() == model.alpha() && m.cells() == cells && m.scheme() == scheme =>
                {
                    return Ok((m, op, CacheStatus::Hit));
                }
                Ok(_) => status = CacheStatus::Rebuilt("cache key mismatch".into()),
                Err(e) => {
                    log::warn!("discarding cache entry {}: {e}", path.display());
                    status = CacheStatus::Rebuilt(e.to_string());
                }
            }
        }
        let (m, op) = build_ulam(model, cells, scheme)?;
        save_ulam(&path, &m, &op)?;
        Ok((m, op, status))
    }
}
