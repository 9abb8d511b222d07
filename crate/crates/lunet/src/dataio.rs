//! Dataset and vector files.
//!
//! A dataset file is a single JSON header line describing how the data was
//! generated, followed by raw little-endian f64 rows: for each record, the
//! input coordinates then the target coordinates, training records first,
//! then evaluation records. The binary body keeps large datasets compact
//! and bit-exact. Small vector files (inversion targets and results) are
//! plain JSON; serde_json prints floats with the shortest representation
//! that parses back to the same bits, so they round-trip exactly too.

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::checkpoint::FORMAT_VERSION;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::tasks::{DataSplit, Dataset, DatasetDescriptor};

#[derive(Clone, Debug, Serialize, Deserialize)]
struct DatasetHeader {
    v: u32,
    dim: usize,
    train_count: usize,
    eval_count: usize,
    descriptor: DatasetDescriptor,
}

fn write_rows<W: Write>(out: &mut W, split: &DataSplit) -> Result<()> {
    for (x, y) in split.inputs().iter().zip(split.targets()) {
        for v in x.iter().chain(y.iter()) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Write a dataset file: JSON header line, then binary rows.
pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    let header = DatasetHeader {
        v: FORMAT_VERSION,
        dim: ds.dim(),
        train_count: ds.train.len(),
        eval_count: ds.eval.len(),
        descriptor: ds.descriptor.clone(),
    };
    let file = std::fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer(&mut out, &header)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    out.write_all(b"\n")?;
    write_rows(&mut out, &ds.train)?;
    write_rows(&mut out, &ds.eval)?;
    out.flush()?;
    Ok(())
}

fn read_rows(body: &[u8], count: usize, dim: usize, offset: &mut usize) -> Result<DataSplit> {
    let mut inputs = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    let row_bytes = dim * 8;
    for rec in 0..count {
        let mut read_vec = |what: &str| -> Result<Vector> {
            let end = *offset + row_bytes;
            let slice = body.get(*offset..end).ok_or_else(|| {
                Error::CorruptDataset(format!(
                    "record {rec}: body ends inside {what} (need {row_bytes} bytes at offset {offset})",
                    offset = *offset
                ))
            })?;
            *offset = end;
            Ok(Vector::new(
                slice
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                    .collect(),
            ))
        };
        inputs.push(read_vec("input")?);
        targets.push(read_vec("target")?);
    }
    DataSplit::new(inputs, targets)
}

/// Read a dataset file written by `write_dataset`.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut file = std::fs::File::open(path)?;
    let mut raw = Vec::new();
    file.read_to_end(&mut raw)?;

    let newline = raw
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::CorruptDataset("missing header line".into()))?;
    let header: DatasetHeader = serde_json::from_slice(&raw[..newline])
        .map_err(|e| Error::CorruptDataset(format!("bad header: {e}")))?;
    if header.v != FORMAT_VERSION {
        return Err(Error::CorruptDataset(format!(
            "unsupported version {} (expected {FORMAT_VERSION})",
            header.v
        )));
    }
    if header.dim == 0 {
        return Err(Error::CorruptDataset("dim must be positive".into()));
    }
    if header.dim != header.descriptor.dim() {
        return Err(Error::CorruptDataset(format!(
            "header dim {} disagrees with descriptor dim {}",
            header.dim,
            header.descriptor.dim()
        )));
    }

    let body = &raw[newline + 1..];
    let expected = (header.train_count + header.eval_count) * header.dim * 16;
    if body.len() != expected {
        return Err(Error::CorruptDataset(format!(
            "body holds {} bytes, expected {expected} for {} records of dim {}",
            body.len(),
            header.train_count + header.eval_count,
            header.dim
        )));
    }

    let mut offset = 0;
    let train = read_rows(body, header.train_count, header.dim, &mut offset)?;
    let eval = read_rows(body, header.eval_count, header.dim, &mut offset)?;
    Ok(Dataset {
        descriptor: header.descriptor,
        train,
        eval,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct VectorFile {
    v: u32,
    dim: usize,
    values: Vec<f64>,
}

/// Write one vector as a JSON file.
pub fn write_vector(path: &Path, vec: &Vector) -> Result<()> {
    let record = VectorFile {
        v: FORMAT_VERSION,
        dim: vec.dim(),
        values: vec.as_slice().to_vec(),
    };
    let json = serde_json::to_string(&record)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

/// Read a vector file written by `write_vector`.
pub fn read_vector(path: &Path) -> Result<Vector> {
    let text = std::fs::read_to_string(path)?;
    let record: VectorFile = serde_json::from_str(&text)
        .map_err(|e| Error::CorruptDataset(format!("bad vector file: {e}")))?;
    if record.v != FORMAT_VERSION {
        return Err(Error::CorruptDataset(format!(
            "unsupported vector file version {}",
            record.v
        )));
    }
    if record.values.len() != record.dim {
        return Err(Error::CorruptDataset(format!(
            "vector file claims dim {} but holds {} values",
            record.dim,
            record.values.len()
        )));
    }
    Vector::finite(record.values, "vector file")
        .map_err(|_| Error::CorruptDataset("vector file holds non-finite values".into()))
}
