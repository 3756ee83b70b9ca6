//! CSV writers for sampled paths. Numbers use the shortest representation
//! that round-trips, so output is bit-stable for fixed inputs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::SampledPath;
use crate::hurst::HurstPath;

/// One simulated path with the Hurst path it was driven by.
pub struct PathRecord<'a> {
    pub path: &'a SampledPath,
    pub hurst: &'a HurstPath,
}

/// Writes `t,value,H`, or `t,value,H,path_id` when there is more than one
/// record. `H` is read at each output node.
pub fn write_paths<W: Write>(mut out: W, records: &[PathRecord<'_>]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Empty("no paths to write".into()));
    }
    let multi = records.len() > 1;
    writeln!(out, "{}", if multi { "t,value,H,path_id" } else { "t,value,H" })?;
    for (id, rec) in records.iter().enumerate() {
        let g = rec.path.grid();
        for (k, v) in rec.path.values().iter().enumerate() {
            let t = g.node(k);
            let h = rec.hurst.at(t);
            if multi {
                writeln!(out, "{t},{v},{h},{id}")?;
            } else {
                writeln!(out, "{t},{v},{h}")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes a Hurst path as `t,H` on its own grid.
pub fn write_hurst<W: Write>(mut out: W, hurst: &HurstPath) -> Result<()> {
    writeln!(out, "t,H")?;
    let g = hurst.grid();
    for (k, h) in hurst.values().iter().enumerate() {
        writeln!(out, "{},{h}", g.node(k))?;
    }
    out.flush()?;
    Ok(())
}

/// Writes a path as `t,value`.
pub fn write_path<W: Write>(mut out: W, path: &SampledPath) -> Result<()> {
    writeln!(out, "t,value")?;
    let g = path.grid();
    for (k, v) in path.values().iter().enumerate() {
        writeln!(out, "{},{v}", g.node(k))?;
    }
    out.flush()?;
    Ok(())
}

/// Buffered file writer that reports the path on failure.
pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}
