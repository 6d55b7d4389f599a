//! Bit-exact artifact formats: CSV energy traces, binary field snapshots,
//! and grayscale slice images.
//!
//! Every format written here can be read back by this module, and identical
//! inputs produce byte-identical files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::diagnostics::EnergyRecord;
use crate::error::{Error, Result};
use crate::grid::{make_grid, ScalarField};

pub const ENERGY_CSV_HEADER: &str =
    "time,discrete_modified,continuous_modified,original,mass,dissipation";

const SNAPSHOT_MAGIC: &[u8; 8] = b"SAVFLD01";

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Format a float with 17 significant decimal digits, enough to reproduce
/// the exact bit pattern on re-parse.
fn full_precision(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write an energy trace as CSV with a fixed header and full-precision
/// decimal floats. An empty record list produces a header-only file.
pub fn write_energy_csv(records: &[EnergyRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let body = (|| -> std::io::Result<()> {
        writeln!(w, "{ENERGY_CSV_HEADER}")?;
        for r in records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                full_precision(r.time),
                full_precision(r.discrete_modified),
                full_precision(r.continuous_modified),
                full_precision(r.original),
                full_precision(r.mass),
                full_precision(r.dissipation),
            )?;
        }
        w.flush()
    })();
    body.map_err(|e| io_err(path, e))
}

/// Read a trace previously written by [`write_energy_csv`].
pub fn read_energy_csv(path: &Path) -> Result<Vec<EnergyRecord>> {
    let trace_err = |reason: String| Error::Trace {
        path: path.to_path_buf(),
        reason,
    };
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        Some(Ok(h)) if h == ENERGY_CSV_HEADER => {}
        Some(Ok(h)) => return Err(trace_err(format!("unexpected header `{h}`"))),
        Some(Err(e)) => return Err(io_err(path, e)),
        None => return Err(trace_err("empty file".into())),
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.is_empty() {
            continue;
        }
        let mut vals = [0.0; 6];
        let mut fields = line.split(',');
        for v in &mut vals {
            let raw = fields
                .next()
                .ok_or_else(|| trace_err(format!("row {}: expected 6 fields", i + 1)))?;
            *v = raw
                .parse()
                .map_err(|_| trace_err(format!("row {}: bad float `{raw}`", i + 1)))?;
        }
        if fields.next().is_some() {
            return Err(trace_err(format!("row {}: expected 6 fields", i + 1)));
        }
        records.push(EnergyRecord {
            time: vals[0],
            discrete_modified: vals[1],
            continuous_modified: vals[2],
            original: vals[3],
            mass: vals[4],
            dissipation: vals[5],
        });
    }
    Ok(records)
}

/// Write a field snapshot: 8-byte magic `SAVFLD01`, a length-prefixed
/// (little-endian `u32`) UTF-8 metadata line `dim,n1,n2[,n3],time`, then the
/// values as little-endian 64-bit floats in row-major order.
pub fn write_snapshot(field: &ScalarField, time: f64, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let body = (|| -> std::io::Result<()> {
        w.write_all(SNAPSHOT_MAGIC)?;
        let dims: Vec<String> = field.grid().points().iter().map(|n| n.to_string()).collect();
        let meta = format!("{},{},{}", field.grid().dim(), dims.join(","), time);
        w.write_all(&(meta.len() as u32).to_le_bytes())?;
        w.write_all(meta.as_bytes())?;
        for v in field.values() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    })();
    body.map_err(|e| io_err(path, e))
}

/// Read a snapshot written by [`write_snapshot`]; returns the field and the
/// stored time.
pub fn read_snapshot(path: &Path) -> Result<(ScalarField, f64)> {
    let snap_err = |reason: &str| Error::Snapshot {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| snap_err("file too short for magic"))?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(snap_err("magic mismatch"));
    }

    let mut len_bytes = [0u8; 4];
    r.read_exact(&mut len_bytes)
        .map_err(|_| snap_err("file too short for metadata length"))?;
    let meta_len = u32::from_le_bytes(len_bytes) as usize;
    if meta_len > 1 << 16 {
        return Err(snap_err("implausible metadata length"));
    }
    let mut meta_bytes = vec![0u8; meta_len];
    r.read_exact(&mut meta_bytes)
        .map_err(|_| snap_err("file too short for metadata"))?;
    let meta = String::from_utf8(meta_bytes).map_err(|_| snap_err("metadata is not UTF-8"))?;

    let parts: Vec<&str> = meta.split(',').collect();
    if parts.len() < 4 {
        return Err(snap_err("metadata needs at least dim,n1,n2,time"));
    }
    let dim: usize = parts[0].parse().map_err(|_| snap_err("bad dimension"))?;
    if parts.len() != dim + 2 {
        return Err(snap_err("metadata field count does not match dimension"));
    }
    let mut points = Vec::with_capacity(dim);
    for p in &parts[1..=dim] {
        points.push(p.parse::<usize>().map_err(|_| snap_err("bad extent"))?);
    }
    let time: f64 = parts[dim + 1].parse().map_err(|_| snap_err("bad time"))?;
    let grid = make_grid(dim, &points)?;

    let mut values = vec![0.0f64; grid.len()];
    let mut buf = [0u8; 8];
    for v in &mut values {
        r.read_exact(&mut buf)
            .map_err(|_| snap_err("payload shorter than the declared grid"))?;
        *v = f64::from_le_bytes(buf);
    }
    let mut extra = [0u8; 1];
    match r.read(&mut extra) {
        Ok(0) => {}
        Ok(_) => return Err(snap_err("payload longer than the declared grid")),
        Err(e) => return Err(io_err(path, e)),
    }
    Ok((ScalarField::new(grid, values)?, time))
}

/// Map a field value to an 8-bit gray level: affine from [−1.05, 1.05] to
/// [0, 255], clamped, rounding half away from zero.
fn gray_level(v: f64) -> u8 {
    let t = (v + 1.05) / 2.1 * 255.0;
    t.round().clamp(0.0, 255.0) as u8
}

/// Export a field (2-D) or an axis-orthogonal plane of it (3-D) as a binary
/// 8-bit PGM image.
///
/// For 2-D fields the whole field is the image and `axis`/`index` are only
/// validated (pass 0, 0). For 3-D fields the plane `x_axis = index` is
/// written; the remaining axes map to image rows and columns in axis order.
pub fn export_slice_image(
    field: &ScalarField,
    axis: usize,
    index: usize,
    path: &Path,
) -> Result<()> {
    let grid = field.grid();
    grid.check_axis(axis)?;
    let points = grid.points();
    if index >= points[axis] {
        return Err(Error::SliceIndexOutOfRange {
            axis,
            index,
            points: points[axis],
        });
    }

    let (rows, cols, pixel): (usize, usize, Box<dyn Fn(usize, usize) -> f64>) = match grid.dim() {
        2 => (
            points[0],
            points[1],
            Box::new(move |r, c| field.values()[r * points[1] + c]),
        ),
        _ => {
            let other: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
            let strides = [points[1] * points[2], points[2], 1];
            let base = index * strides[axis];
            let (sr, sc) = (strides[other[0]], strides[other[1]]);
            (
                points[other[0]],
                points[other[1]],
                Box::new(move |r, c| field.values()[base + r * sr + c * sc]),
            )
        }
    };

    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let body = (|| -> std::io::Result<()> {
        write!(w, "P5\n{cols} {rows}\n255\n")?;
        let mut scanline = Vec::with_capacity(cols);
        for r in 0..rows {
            scanline.clear();
            for c in 0..cols {
                scanline.push(gray_level(pixel(r, c)));
            }
            w.write_all(&scanline)?;
        }
        w.flush()
    })();
    body.map_err(|e| io_err(path, e))
}
