use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use mtp_core::space::{read_mask_binary, CubeRecord, MASK_MAGIC};
use mtp_core::{CubeMask, DimensionFunction, MtpError, Result};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| MtpError::Invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| MtpError::Invalid(format!("{}: {e}", path.display())))
}

/// `{"alpha": .., "beta": .., "valid_radius_max": ..}` with `beta` and the
/// radius bound optional.
pub fn parse_f(text: &str) -> Result<DimensionFunction> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Repr {
        alpha: f64,
        #[serde(default)]
        beta: f64,
        valid_radius_max: Option<f64>,
    }
    let r: Repr = serde_json::from_str(text).map_err(|e| MtpError::Invalid(format!("dimension function {text:?}: {e}")))?;
    DimensionFunction::with_max(r.alpha, r.beta, r.valid_radius_max.unwrap_or(1.0))
}

pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| MtpError::Invalid(format!("not a number: {s:?}"))))
        .collect()
}

pub fn parse_levels(text: &str) -> Result<Vec<u32>> {
    text.split(',')
        .map(|s| s.trim().parse::<u32>().map_err(|_| MtpError::Invalid(format!("not a level: {s:?}"))))
        .collect()
}

/// `lo:hi:step` or a comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return parse_list(text);
    }
    let v = parse_list(&parts.join(","))?;
    let (lo, hi, step) = (v[0], v[1], v[2]);
    if !(step > 0.0 && hi >= lo) {
        return Err(MtpError::Invalid(format!("bad grid {text:?}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}

/// A mask file: binary `MTPM1`, a `{dim, resolution, cubes}` object, or a bare
/// list of `{level, index}` records refined to at least `depth`.
pub fn read_mask(path: &Path, depth: u32) -> Result<CubeMask> {
    let bytes = fs::read(path).map_err(|e| MtpError::Invalid(format!("{}: {e}", path.display())))?;
    if bytes.starts_with(MASK_MAGIC) {
        return read_mask_binary(&bytes[..]);
    }
    let value: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| MtpError::Invalid(format!("{}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| MtpError::Invalid(format!("{}: {e}", path.display()));
    match value {
        serde_json::Value::Array(_) => {
            let recs: Vec<CubeRecord> = serde_json::from_value(value).map_err(bad)?;
            let dim = recs.first().map(|r| r.index.len()).ok_or_else(|| MtpError::Invalid("empty cube list".into()))?;
            let top = recs.iter().map(|r| r.level).max().unwrap_or(0);
            CubeMask::from_records(dim, Some(top.max(depth)), &recs)
        }
        _ => {
            let m: CubeMask = serde_json::from_value(value).map_err(bad)?;
            if m.resolution() < depth {
                m.refine_to(depth)
            } else {
                Ok(m)
            }
        }
    }
}
