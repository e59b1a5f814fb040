//! Field container and CSV export.
//!
//! Container layout: the 8-byte magic `EINFLD01`, a little-endian `u64` header length, a UTF-8
//! JSON header (kind, chart, component count), then every component as `node_count`
//! little-endian `f64` values in row-major node order (last axis fastest). Values round-trip
//! bit-exactly, NaN payloads included.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{sym_len, MetricField, OneFormField, ScalarField, SymTensorField};
use crate::flow::Diagnostics;
use crate::grid::{FdOrder, GridChart};

const MAGIC: &[u8; 8] = b"EINFLD01";
pub const CONTAINER_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Scalar,
    OneForm,
    SymTensor,
    Metric,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    Scalar(ScalarField),
    OneForm(OneFormField),
    SymTensor(SymTensorField),
    Metric(MetricField),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    kind: FieldKind,
    resolution: Vec<usize>,
    lengths: Vec<f64>,
    stencil: FdOrder,
    components: usize,
}

impl FieldData {
    pub fn kind(&self) -> FieldKind {
        match self {
            FieldData::Scalar(_) => FieldKind::Scalar,
            FieldData::OneForm(_) => FieldKind::OneForm,
            FieldData::SymTensor(_) => FieldKind::SymTensor,
            FieldData::Metric(_) => FieldKind::Metric,
        }
    }

    pub fn chart(&self) -> &GridChart {
        match self {
            FieldData::Scalar(f) => &f.chart,
            FieldData::OneForm(f) => &f.chart,
            FieldData::SymTensor(f) => &f.chart,
            FieldData::Metric(g) => g.chart(),
        }
    }

    fn components(&self) -> Vec<&[f64]> {
        match self {
            FieldData::Scalar(f) => vec![&f.values],
            FieldData::OneForm(f) => f.comps.iter().map(|c| c.as_slice()).collect(),
            FieldData::SymTensor(f) => f.comps.iter().map(|c| c.as_slice()).collect(),
            FieldData::Metric(g) => g.tensor().comps.iter().map(|c| c.as_slice()).collect(),
        }
    }
}

pub fn encode(field: &FieldData) -> Result<Vec<u8>> {
    let chart = field.chart();
    let comps = field.components();
    let header = Header {
        format: "einflow-field".into(),
        version: CONTAINER_VERSION,
        kind: field.kind(),
        resolution: chart.resolution().to_vec(),
        lengths: chart.lengths().to_vec(),
        stencil: chart.stencil(),
        components: comps.len(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Io(e.to_string()))?;
    let mut out = Vec::with_capacity(16 + json.len() + 8 * comps.len() * chart.node_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for c in comps {
        for v in c {
            out.extend_from_slice(&v.to_bits().to_le_bytes());
        }
    }
    Ok(out)
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Io(format!("malformed field container: {}", msg.into()))
}

pub fn decode(bytes: &[u8]) -> Result<FieldData> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing magic"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body_start = 16usize.checked_add(hlen).filter(|&e| e <= bytes.len()).ok_or_else(|| bad("header length"))?;
    let header: Header = serde_json::from_slice(&bytes[16..body_start]).map_err(|e| bad(e.to_string()))?;
    if header.format != "einflow-field" || header.version != CONTAINER_VERSION {
        return Err(bad(format!("format {} version {}", header.format, header.version)));
    }
    let chart = GridChart::new(header.resolution, header.lengths, header.stencil)?;
    let n = chart.dim();
    let expected = match header.kind {
        FieldKind::Scalar => 1,
        FieldKind::OneForm => n,
        FieldKind::SymTensor | FieldKind::Metric => sym_len(n),
    };
    if header.components != expected {
        return Err(bad(format!("{} components, expected {expected}", header.components)));
    }
    let nodes = chart.node_count();
    let body = &bytes[body_start..];
    if body.len() != 8 * nodes * expected {
        return Err(bad(format!("payload of {} bytes, expected {}", body.len(), 8 * nodes * expected)));
    }
    let mut comps: Vec<Vec<f64>> = body
        .chunks_exact(8 * nodes)
        .map(|c| c.chunks_exact(8).map(|b| f64::from_bits(u64::from_le_bytes(b.try_into().expect("8 bytes")))).collect())
        .collect();
    Ok(match header.kind {
        FieldKind::Scalar => FieldData::Scalar(ScalarField::new(chart, comps.pop().expect("one component"))?),
        FieldKind::OneForm => FieldData::OneForm(OneFormField::new(chart, comps)?),
        FieldKind::SymTensor => FieldData::SymTensor(SymTensorField::new(chart, comps)?),
        FieldKind::Metric => FieldData::Metric(MetricField::new(SymTensorField::new(chart, comps)?)?),
    })
}

pub fn write_field(path: &Path, field: &FieldData) -> Result<()> {
    std::fs::File::create(path)?.write_all(&encode(field)?)?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<FieldData> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Columns `x0, .., x{n-1}, value`, one row per node.
pub fn write_scalar_csv<W: Write>(out: W, field: &ScalarField) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = field.chart.dim();
    let mut header: Vec<String> = (0..n).map(|a| format!("x{a}")).collect();
    header.push("value".into());
    w.write_record(&header).map_err(csv_err)?;
    for (node, v) in field.values.iter().enumerate() {
        let mut row: Vec<String> = field.chart.coords(node).iter().map(|x| x.to_string()).collect();
        row.push(v.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per monitor point; columns are the `Diagnostics` field names, absent monitors empty.
pub fn write_diagnostics_csv<W: Write>(out: W, rows: &[Diagnostics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_diagnostics_csv<R: Read>(input: R) -> Result<Vec<Diagnostics>> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(csv_err)).collect()
}
