//! File formats: the `.rfc` channel-data container, 8-bit PGM images, CSV
//! tables and the network model blob.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::BmodeImage;
use crate::neural::WeightNetwork;
use crate::simulator::RfDataCube;

const RFC_MAGIC: &str = "RFC1";
const MODEL_MAGIC: &str = "BFNET1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RfcHeader {
    shape: [usize; 3],
    sampling_rate: f64,
    t0: f64,
    dtype: String,
    #[serde(default)]
    setup: serde_json::Value,
}

fn read_line<R: BufRead>(r: &mut R, what: &str) -> Result<String> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Err(Error::Format(format!("truncated {what}")));
    }
    Ok(line.trim_end_matches('\n').to_string())
}

/// Magic line, one-line JSON header, then `E*C*Nt` little-endian `f32`
/// samples in `(e, c, t)` order. Samples are rounded to `f32` on write.
pub fn write_rfc<W: Write>(mut w: W, cube: &RfDataCube, setup: &serde_json::Value) -> Result<()> {
    let (e, c, nt) = cube.samples.dim();
    let header = RfcHeader {
        shape: [e, c, nt],
        sampling_rate: cube.sampling_rate,
        t0: cube.t0,
        dtype: "f32le".into(),
        setup: setup.clone(),
    };
    writeln!(w, "{RFC_MAGIC}")?;
    writeln!(w, "{}", serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?)?;
    let mut buf = Vec::with_capacity(4 * e * c * nt);
    for &v in cube.samples.iter() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

/// Reads a container, returning the cube and the setup echoed in its header.
pub fn read_rfc<R: Read>(r: R) -> Result<(RfDataCube, serde_json::Value)> {
    let mut r = BufReader::new(r);
    let magic = read_line(&mut r, "container header")?;
    if magic != RFC_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected {RFC_MAGIC:?}")));
    }
    let header: RfcHeader = serde_json::from_str(&read_line(&mut r, "container header")?)
        .map_err(|e| Error::Format(format!("container header: {e}")))?;
    if header.dtype != "f32le" {
        return Err(Error::Format(format!("unsupported sample type {:?}", header.dtype)));
    }
    let [e, c, nt] = header.shape;
    let count = e
        .checked_mul(c)
        .and_then(|v| v.checked_mul(nt))
        .ok_or_else(|| Error::Format("container shape overflows".into()))?;
    let mut bytes = vec![0u8; 4 * count];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Format(format!("container holds fewer than {count} samples")))?;
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(Error::Format("trailing bytes after samples".into()));
    }
    let samples: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    let samples = Array3::from_shape_vec((e, c, nt), samples).expect("count checked");
    let cube = RfDataCube::new(samples, header.sampling_rate, header.t0)
        .map_err(|err| Error::Format(err.to_string()))?;
    Ok((cube, header.setup))
}

pub fn save_rfc(path: &Path, cube: &RfDataCube, setup: &serde_json::Value) -> Result<()> {
    write_rfc(BufWriter::new(File::create(path)?), cube, setup)
}

pub fn load_rfc(path: &Path) -> Result<(RfDataCube, serde_json::Value)> {
    read_rfc(File::open(path)?)
}

/// Gray level of a dB value on `[-dynamic_range, 0]`.
pub fn db_to_gray(db: f64, dynamic_range: f64) -> u8 {
    let u = ((db + dynamic_range) / dynamic_range).clamp(0.0, 1.0);
    (u * 255.0).round() as u8
}

/// Binary PGM with depth along rows.
pub fn write_pgm<W: Write>(mut w: W, img: &BmodeImage) -> Result<()> {
    let (nx, ny) = img.db.dim();
    write!(w, "P5\n{ny} {nx}\n255\n")?;
    let bytes: Vec<u8> = img.db.iter().map(|&v| db_to_gray(v, img.dynamic_range)).collect();
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub fn save_pgm(path: &Path, img: &BmodeImage) -> Result<()> {
    write_pgm(BufWriter::new(File::create(path)?), img)
}

/// Width, height and gray levels of a binary PGM.
pub fn read_pgm<R: Read>(r: R) -> Result<(usize, usize, Vec<u8>)> {
    let mut data = Vec::new();
    BufReader::new(r).read_to_end(&mut data)?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        fields.push(String::from_utf8_lossy(&data[start..pos]).to_string());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(Error::Format("only 8-bit binary PGM is supported".into()));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PGM size {s:?}")));
    let (w, h) = (parse(&fields[1])?, parse(&fields[2])?);
    let pixels = data.get(pos..pos + w * h).ok_or_else(|| Error::Format("truncated PGM pixels".into()))?;
    Ok((w, h, pixels.to_vec()))
}

/// Serializes rows under a header derived from the field names.
pub fn write_csv<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row).map_err(|e| Error::Format(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_csv(File::create(path)?, rows)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelHeader {
    layer_dims: Vec<usize>,
    activation: String,
    input_normalization: String,
    seed: u64,
    num_params: usize,
}

/// Magic line, JSON header, then the parameters as little-endian `f64`.
pub fn write_model<W: Write>(mut w: W, net: &WeightNetwork) -> Result<()> {
    let header = ModelHeader {
        layer_dims: net.layer_dims().to_vec(),
        activation: "antirectifier".into(),
        input_normalization: "l2".into(),
        seed: net.seed(),
        num_params: net.num_params(),
    };
    writeln!(w, "{MODEL_MAGIC}")?;
    writeln!(w, "{}", serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?)?;
    for p in net.params() {
        w.write_all(&p.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_model<R: Read>(r: R) -> Result<WeightNetwork> {
    let mut r = BufReader::new(r);
    let magic = read_line(&mut r, "model header")?;
    if magic != MODEL_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected {MODEL_MAGIC:?}")));
    }
    let header: ModelHeader = serde_json::from_str(&read_line(&mut r, "model header")?)
        .map_err(|e| Error::Format(format!("model header: {e}")))?;
    if header.activation != "antirectifier" || header.input_normalization != "l2" {
        return Err(Error::Format("unsupported network variant".into()));
    }
    let mut bytes = vec![0u8; 8 * header.num_params];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Format("model blob is truncated".into()))?;
    let params = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    WeightNetwork::from_parts(header.layer_dims, params, header.seed).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_model(path: &Path, net: &WeightNetwork) -> Result<()> {
    write_model(BufWriter::new(File::create(path)?), net)
}

pub fn load_model(path: &Path) -> Result<WeightNetwork> {
    read_model(File::open(path)?)
}
