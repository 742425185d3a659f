//! Binary checkpoints: `NRRD`, u32 version, u32 dim, u32 n per axis,
//! f64 lo/hi per axis, f64 time, then u1 and u2 as f64 arrays (x fastest).
//! Everything little-endian.

use std::path::Path;
use std::sync::Arc;

use nrrd_core::grid::Axis;
use nrrd_core::{Field, Grid, StatePair};

use crate::error::{CliError, Result};

pub const MAGIC: [u8; 4] = *b"NRRD";
pub const VERSION: u32 = 1;

pub fn encode_checkpoint(state: &StatePair) -> Vec<u8> {
    let grid = state.grid();
    let mut out = Vec::with_capacity(header_len(grid.dim()) + 16 * grid.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    for a in grid.axes() {
        out.extend_from_slice(&(a.n as u32).to_le_bytes());
    }
    for a in grid.axes() {
        out.extend_from_slice(&a.lo.to_le_bytes());
        out.extend_from_slice(&a.hi.to_le_bytes());
    }
    out.extend_from_slice(&state.t.to_le_bytes());
    for v in state.u1.values().iter().chain(state.u2.values()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn header_len(dim: usize) -> usize {
    12 + 4 * dim + 16 * dim + 8
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    /// Byte count the file must have, as far as the header has been read.
    expected: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let slice = self.bytes.get(self.pos..end).ok_or_else(|| {
            CliError::Format(format!("truncated: expected {} bytes, got {}", self.expected.max(end), self.bytes.len()))
        })?;
        self.pos = end;
        Ok(slice.try_into().expect("slice has length N"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<StatePair> {
    let mut r = Reader { bytes, pos: 0, expected: 12 };
    if r.take::<4>()? != MAGIC {
        return Err(CliError::Format("bad magic bytes, not a checkpoint".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CliError::Format(format!("unsupported version {version}, this build reads version {VERSION}")));
    }
    let dim = r.u32()? as usize;
    if !(1..=2).contains(&dim) {
        return Err(CliError::Format(format!("dimension must be 1 or 2, got {dim}")));
    }
    r.expected = header_len(dim);
    let mut ns = [0usize; 2];
    for n in ns.iter_mut().take(dim) {
        *n = r.u32()? as usize;
    }
    let nodes = ns[..dim].iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
    let total = nodes
        .and_then(|k| k.checked_mul(16))
        .and_then(|k| k.checked_add(header_len(dim)))
        .ok_or_else(|| CliError::Format("node count overflows".into()))?;
    r.expected = total;
    let mut axes = Vec::with_capacity(dim);
    for &n in &ns[..dim] {
        let (lo, hi) = (r.f64()?, r.f64()?);
        axes.push((lo, hi, n));
    }
    let t = r.f64()?;
    if bytes.len() != total {
        return Err(CliError::Format(format!("expected {total} bytes, got {}", bytes.len())));
    }
    let axes = axes
        .into_iter()
        .map(|(lo, hi, n)| Axis::new(lo, hi, n))
        .collect::<nrrd_core::Result<Vec<_>>>()
        .map_err(|e| CliError::Format(format!("grid: {e}")))?;
    let grid = Grid::new(&axes).map_err(|e| CliError::Format(format!("grid: {e}")))?;
    let len = grid.len();
    let mut values = Vec::with_capacity(2 * len);
    for _ in 0..2 * len {
        values.push(r.f64()?);
    }
    let u2 = values.split_off(len);
    let field = |v: Vec<f64>| Field::new(grid.clone(), v).map_err(|e| CliError::Format(e.to_string()));
    StatePair::new(field(values)?, field(u2)?, t).map_err(|e| CliError::Format(e.to_string()))
}

pub fn save_checkpoint(state: &StatePair, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(state)).map_err(|e| CliError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<StatePair> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// Loads a checkpoint that must live on `grid`.
pub fn load_checkpoint_on(path: &Path, grid: &Arc<Grid>) -> Result<StatePair> {
    let state = load_checkpoint(path)?;
    if **state.grid() != **grid {
        return Err(nrrd_core::Error::GridMismatch(format!(
            "checkpoint {} has {} nodes on {:?}, run grid has {} nodes on {:?}",
            path.display(),
            state.grid().len(),
            state.grid().axes(),
            grid.len(),
            grid.axes()
        ))
        .into());
    }
    // rebind to the run's grid so fields compare as same-grid
    let u1 = Field::new(grid.clone(), state.u1.values().to_vec())?;
    let u2 = Field::new(grid.clone(), state.u2.values().to_vec())?;
    Ok(StatePair::new(u1, u2, state.t)?)
}
