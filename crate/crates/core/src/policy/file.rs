//! Binary policy files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic     4 bytes  "HRLP"
//! version   u32      POLICY_FORMAT_VERSION
//! actions   u32      K
//! input     u32      feature length
//! hidden    u32      number of hidden layers H
//! sizes     H x u32  hidden layer widths
//! count     u64      number of parameters
//! params    count x f64 (IEEE-754 little-endian)
//! ```

use std::path::Path;

use super::network::{GaussianPolicy, NetworkShape};
use super::PolicyError;

pub const POLICY_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"HRLP";

pub fn save_policy(policy: &GaussianPolicy) -> Vec<u8> {
    let shape = policy.shape();
    let mut out = Vec::with_capacity(32 + 8 * policy.params().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&POLICY_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(shape.actions as u32).to_le_bytes());
    out.extend_from_slice(&(shape.input as u32).to_le_bytes());
    out.extend_from_slice(&(shape.hidden.len() as u32).to_le_bytes());
    for &h in &shape.hidden {
        out.extend_from_slice(&(h as u32).to_le_bytes());
    }
    out.extend_from_slice(&(policy.params().len() as u64).to_le_bytes());
    for p in policy.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PolicyError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            PolicyError::Format(format!("truncated at byte {} (need {n} more)", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, PolicyError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, PolicyError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn load_policy(bytes: &[u8]) -> Result<GaussianPolicy, PolicyError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(PolicyError::Format("bad magic".into()));
    }
    let version = r.u32()?;
    if version != POLICY_FORMAT_VERSION {
        return Err(PolicyError::Format(format!(
            "unsupported version {version}, expected {POLICY_FORMAT_VERSION}"
        )));
    }
    let actions = r.u32()? as usize;
    let input = r.u32()? as usize;
    let n_hidden = r.u32()? as usize;
    if n_hidden > 64 {
        return Err(PolicyError::Format(format!("implausible hidden layer count {n_hidden}")));
    }
    let hidden = (0..n_hidden)
        .map(|_| r.u32().map(|h| h as usize))
        .collect::<Result<Vec<_>, _>>()?;
    if actions == 0 || input == 0 || hidden.contains(&0) {
        return Err(PolicyError::Format("zero-sized layer".into()));
    }
    let shape = NetworkShape::new(input, hidden, actions);
    let count = r.u64()? as usize;
    if count != shape.param_count() {
        return Err(PolicyError::Format(format!(
            "parameter count {count} does not match shape ({})",
            shape.param_count()
        )));
    }
    let raw = r.take(count.checked_mul(8).ok_or_else(|| PolicyError::Format("overflow".into()))?)?;
    if r.pos != bytes.len() {
        return Err(PolicyError::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let params = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    GaussianPolicy::from_params(shape, params)
}

pub fn write_policy_file(path: &Path, policy: &GaussianPolicy) -> std::io::Result<()> {
    std::fs::write(path, save_policy(policy))
}

pub fn read_policy_file(path: &Path) -> Result<GaussianPolicy, PolicyError> {
    let bytes = std::fs::read(path).map_err(|e| PolicyError::Format(format!("{}: {e}", path.display())))?;
    load_policy(&bytes)
}
