//! Raw IQ capture files: interleaved little-endian `f32` pairs `(I, Q)`,
//! with a one-line text sidecar describing the capture.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::C64;

/// Sidecar path for an IQ file: the same path with `.txt` appended.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".txt");
    PathBuf::from(s)
}

/// Writes `samples` to `path` and the header line to its sidecar.
pub fn write_iq(path: &Path, samples: &[C64], sample_rate_hz: f64, note: &str) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in samples {
        w.write_all(&(s.re as f32).to_le_bytes())?;
        w.write_all(&(s.im as f32).to_le_bytes())?;
    }
    w.flush()?;
    let mut side = File::create(sidecar_path(path))?;
    writeln!(
        side,
        "format=cf32_le sample_rate_hz={sample_rate_hz} samples={} {note}",
        samples.len()
    )
}

/// Reads a file written by [`write_iq`].
pub fn read_iq(path: &Path) -> std::io::Result<Vec<C64>> {
    let bytes = std::fs::read(path)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            C64::new(f64::from(re), f64::from(im))
        })
        .collect())
}
