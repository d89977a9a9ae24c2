//! File formats: field samples (CSV and the binary `PFLD` dump), point-cloud
//! CSV input and eigenvalue-path CSV.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrixproc::EigenPath;
use crate::sampler::FieldSample;

pub const FIELD_MAGIC: &[u8; 4] = b"PFLD";
pub const FIELD_VERSION: u32 = 1;
/// Largest parameter dimension the 32-byte header can describe.
pub const FIELD_MAX_AXES: usize = 4;

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

/// One row per grid point: `t1..tN, x1..xd`.
pub fn write_field_csv<W: Write>(sample: &FieldSample, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n_axes = sample.grid.dim();
    let header: Vec<String> = (1..=n_axes)
        .map(|j| format!("t{j}"))
        .chain((1..=sample.components).map(|c| format!("x{c}")))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..sample.grid.len() {
        let row: Vec<String> = sample
            .grid
            .point(i)
            .into_iter()
            .chain((0..sample.components).map(|c| sample.value(c, i)))
            .map(|v| format!("{v:e}"))
            .collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Contents of a binary field dump.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub components: usize,
    pub counts: Vec<usize>,
    /// `[component][grid index]`.
    pub values: Vec<f64>,
}

/// Header `PFLD | version | d | N | counts[4]` (u32 little-endian, unused
/// counts zero), then `[component][grid index]` f64 little-endian.
pub fn write_field_binary<W: Write>(sample: &FieldSample, mut out: W) -> Result<()> {
    let counts = sample.grid.counts();
    if counts.len() > FIELD_MAX_AXES {
        return Err(Error::invalid(
            "output.binary",
            format!("binary dumps support at most {FIELD_MAX_AXES} axes"),
        ));
    }
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v)
            .map_err(|_| Error::invalid("output.binary", format!("{what} {v} overflows u32")))
    };
    let mut header = Vec::with_capacity(32);
    header.extend_from_slice(FIELD_MAGIC);
    header.extend_from_slice(&FIELD_VERSION.to_le_bytes());
    header.extend_from_slice(&to_u32(sample.components, "component count")?.to_le_bytes());
    header.extend_from_slice(&to_u32(counts.len(), "axis count")?.to_le_bytes());
    for j in 0..FIELD_MAX_AXES {
        let c = counts.get(j).copied().unwrap_or(0);
        header.extend_from_slice(&to_u32(c, "grid count")?.to_le_bytes());
    }
    out.write_all(&header)?;
    let mut buf = Vec::with_capacity(sample.values.len() * 8);
    for v in &sample.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

pub fn read_field_binary<R: Read>(mut input: R) -> Result<FieldDump> {
    let mut header = [0u8; 32];
    input.read_exact(&mut header)?;
    if &header[..4] != FIELD_MAGIC {
        return Err(Error::Format("missing PFLD magic".into()));
    }
    let word = |k: usize| u32::from_le_bytes(header[4 * k..4 * k + 4].try_into().unwrap()) as usize;
    if word(1) as u32 != FIELD_VERSION {
        return Err(Error::Format(format!(
            "unsupported field dump version {}",
            word(1)
        )));
    }
    let components = word(2);
    let n_axes = word(3);
    if n_axes == 0 || n_axes > FIELD_MAX_AXES {
        return Err(Error::Format(format!("bad axis count {n_axes}")));
    }
    let counts: Vec<usize> = (0..n_axes).map(|j| word(4 + j)).collect();
    let expected = counts.iter().product::<usize>() * components;
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() != expected * 8 {
        return Err(Error::Format(format!(
            "expected {expected} values, found {} bytes",
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok(FieldDump {
        components,
        counts,
        values,
    })
}

/// Reads one point per row. Lines starting with `#` are skipped and a
/// non-numeric first row is taken as a header.
pub fn read_point_cloud_csv<R: Read>(input: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let mut points: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(p) => {
                if let Some(first) = points.first() {
                    if first.len() != p.len() {
                        return Err(Error::Format(format!(
                            "row {}: {} coordinates, expected {}",
                            line + 1,
                            p.len(),
                            first.len()
                        )));
                    }
                }
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Format(format!(
                        "row {}: non-finite coordinate",
                        line + 1
                    )));
                }
                points.push(p);
            }
            Err(_) if line == 0 => continue,
            Err(e) => return Err(Error::Format(format!("row {}: {e}", line + 1))),
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyTarget);
    }
    Ok(points)
}

pub fn load_point_cloud(path: &Path) -> Result<Vec<Vec<f64>>> {
    read_point_cloud_csv(std::fs::File::open(path)?)
}

/// Columns `t1..tN, lambda1..lambdad`.
pub fn write_eigen_path_csv<W: Write>(eig: &EigenPath, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = (1..=eig.grid.dim())
        .map(|j| format!("t{j}"))
        .chain((1..=eig.dim).map(|i| format!("lambda{i}")))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for p in 0..eig.grid.len() {
        let row: Vec<String> = eig
            .grid
            .point(p)
            .into_iter()
            .chain(eig.at(p).iter().copied())
            .map(|v| format!("{v:e}"))
            .collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Generic table writer used for estimate tables.
pub fn write_table_csv<W: Write, S: AsRef<str>>(
    header: &[S],
    rows: &[Vec<String>],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header.iter().map(AsRef::as_ref))
        .map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
