//! Minimal PLY reader/writer for point clouds.
//!
//! Only the `vertex` element is kept; other elements (faces, edges) are parsed
//! and dropped. ASCII and binary little-endian bodies are supported.

use super::{LabelStore, OpacityEncoding, Payload, PointSet};
use crate::Vec3;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlyError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported PLY format `{0}`")]
    UnsupportedFormat(String),
    #[error("truncated file: element `{element}` declares {expected} records but only {found} were read")]
    Truncated { element: String, expected: usize, found: usize },
    #[error("missing required property `{0}`")]
    MissingProperty(&'static str),
    #[error("file contains no points")]
    EmptyInput,
    #[error("column `{name}` has {found} values, expected {expected}")]
    ColumnLength { name: String, expected: usize, found: usize },
}

impl PlyError {
    fn io(path: &Path, source: io::Error) -> Self {
        PlyError::Io { path: path.display().to_string(), source }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        PlyError::Parse { line, message: message.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalarType::I8 => "char",
            ScalarType::U8 => "uchar",
            ScalarType::I16 => "short",
            ScalarType::U16 => "ushort",
            ScalarType::I32 => "int",
            ScalarType::U32 => "uint",
            ScalarType::F32 => "float",
            ScalarType::F64 => "double",
        }
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn decode_le(self, b: &[u8]) -> f64 {
        match self {
            ScalarType::I8 => b[0] as i8 as f64,
            ScalarType::U8 => b[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::F64 => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
        }
    }

    fn encode_le(self, v: f64, out: &mut Vec<u8>) {
        match self {
            ScalarType::I8 => out.push(v as i8 as u8),
            ScalarType::U8 => out.push(v as u8),
            ScalarType::I16 => out.extend_from_slice(&(v as i16).to_le_bytes()),
            ScalarType::U16 => out.extend_from_slice(&(v as u16).to_le_bytes()),
            ScalarType::I32 => out.extend_from_slice(&(v as i32).to_le_bytes()),
            ScalarType::U32 => out.extend_from_slice(&(v as u32).to_le_bytes()),
            ScalarType::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            ScalarType::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }

    fn parse_ascii(self, tok: &str) -> Option<f64> {
        match self {
            ScalarType::F32 => tok.parse::<f32>().ok().map(f64::from),
            ScalarType::F64 => tok.parse::<f64>().ok(),
            _ => tok.parse::<i64>().ok().map(|v| v as f64),
        }
    }

    fn format_ascii(self, v: f64, out: &mut String) {
        let _ = match self {
            ScalarType::F32 => write!(out, "{}", v as f32),
            ScalarType::F64 => write!(out, "{}", v),
            _ => write!(out, "{}", v as i64),
        };
    }
}

/// One scalar property of the vertex element. Values are widened to `f64`,
/// which is lossless for every PLY scalar type.
#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub ty: ScalarType,
    pub data: Vec<f64>,
}

impl Column {
    pub fn new(name: impl Into<String>, ty: ScalarType, data: Vec<f64>) -> Self {
        Self { name: name.into(), ty, data }
    }
}

/// The vertex element of a PLY file as named typed columns.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlyTable {
    pub columns: Vec<Column>,
    pub comments: Vec<String>,
}

impl PlyTable {
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, |c| c.data.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    fn take_column(&mut self, name: &str) -> Option<Column> {
        let idx = self.columns.iter().position(|c| c.name == name)?;
        Some(self.columns.remove(idx))
    }
}

#[derive(Debug)]
enum PropertyKind {
    Scalar(ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Debug)]
struct Property {
    name: String,
    kind: PropertyKind,
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
    comments: Vec<String>,
    /// Byte offset of the body.
    body_start: usize,
    /// 1-based line number of the first body line (ASCII).
    body_line: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, PlyError> {
    let mut pos = 0usize;
    let mut line_no = 0usize;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut comments = Vec::new();
    loop {
        line_no += 1;
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| PlyError::parse(line_no, "unexpected end of file inside header"))?;
        let raw = &bytes[pos..pos + end];
        pos += end + 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| PlyError::parse(line_no, "header is not valid text"))?
            .trim_end_matches('\r')
            .trim();
        if line_no == 1 {
            if line != "ply" {
                return Err(PlyError::parse(1, format!("expected magic `ply`, found `{line}`")));
            }
            continue;
        }
        let mut tokens = line.split_whitespace();
        let Some(keyword) = tokens.next() else { continue };
        match keyword {
            "format" => {
                let kind = tokens.next().unwrap_or("");
                format = Some(match kind {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    "binary_big_endian" => return Err(PlyError::UnsupportedFormat(kind.to_string())),
                    other => return Err(PlyError::parse(line_no, format!("unknown format `{other}`"))),
                });
            }
            "comment" | "obj_info" => {
                comments.push(line[keyword.len()..].trim().to_string());
            }
            "element" => {
                let name = tokens.next().ok_or_else(|| PlyError::parse(line_no, "element without name"))?;
                let count = tokens
                    .next()
                    .and_then(|t| t.parse::<usize>().ok())
                    .ok_or_else(|| PlyError::parse(line_no, "element count is not a non-negative integer"))?;
                elements.push(Element { name: name.to_string(), count, properties: Vec::new() });
            }
            "property" => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| PlyError::parse(line_no, "property declared before any element"))?;
                let first = tokens.next().ok_or_else(|| PlyError::parse(line_no, "property without type"))?;
                let kind = if first == "list" {
                    let count = tokens.next().and_then(ScalarType::parse);
                    let item = tokens.next().and_then(ScalarType::parse);
                    match (count, item) {
                        (Some(count), Some(item)) => PropertyKind::List { count, item },
                        _ => return Err(PlyError::parse(line_no, "malformed list property")),
                    }
                } else {
                    PropertyKind::Scalar(
                        ScalarType::parse(first)
                            .ok_or_else(|| PlyError::parse(line_no, format!("unknown property type `{first}`")))?,
                    )
                };
                let name = tokens.next().ok_or_else(|| PlyError::parse(line_no, "property without name"))?;
                element.properties.push(Property { name: name.to_string(), kind });
            }
            "end_header" => break,
            other => return Err(PlyError::parse(line_no, format!("unexpected header keyword `{other}`"))),
        }
    }
    let format = format.ok_or_else(|| PlyError::parse(line_no, "header has no format line"))?;
    Ok(Header { format, elements, comments, body_start: pos, body_line: line_no + 1 })
}

/// Reads the vertex element of a PLY file.
pub fn read_ply_table(path: &Path) -> Result<PlyTable, PlyError> {
    let bytes = fs::read(path).map_err(|e| PlyError::io(path, e))?;
    parse_ply_bytes(&bytes)
}

fn parse_ply_bytes(bytes: &[u8]) -> Result<PlyTable, PlyError> {
    let header = parse_header(bytes)?;
    let mut table = PlyTable { columns: Vec::new(), comments: header.comments.clone() };
    let vertex_idx = header.elements.iter().position(|e| e.name == "vertex");
    if let Some(vi) = vertex_idx {
        for p in &header.elements[vi].properties {
            if let PropertyKind::Scalar(ty) = p.kind {
                table.columns.push(Column::new(p.name.clone(), ty, Vec::with_capacity(header.elements[vi].count)));
            } else {
                log::warn!("dropping list property `{}` of the vertex element", p.name);
            }
        }
    }
    let body = &bytes[header.body_start..];
    match header.format {
        PlyFormat::Ascii => read_ascii_body(body, &header, vertex_idx, &mut table)?,
        PlyFormat::BinaryLittleEndian => read_binary_body(body, &header, vertex_idx, &mut table)?,
    }
    Ok(table)
}

fn read_ascii_body(
    body: &[u8],
    header: &Header,
    vertex_idx: Option<usize>,
    table: &mut PlyTable,
) -> Result<(), PlyError> {
    let text =
        std::str::from_utf8(body).map_err(|_| PlyError::parse(header.body_line, "ASCII body is not valid text"))?;
    let mut lines =
        text.lines().enumerate().map(|(i, l)| (i + header.body_line, l)).filter(|(_, l)| !l.trim().is_empty());
    for (ei, element) in header.elements.iter().enumerate() {
        let keep = Some(ei) == vertex_idx;
        for record in 0..element.count {
            let Some((line_no, line)) = lines.next() else {
                return Err(PlyError::Truncated {
                    element: element.name.clone(),
                    expected: element.count,
                    found: record,
                });
            };
            let mut tokens = line.split_whitespace();
            let mut col = 0usize;
            for prop in &element.properties {
                match prop.kind {
                    PropertyKind::Scalar(ty) => {
                        let tok = tokens
                            .next()
                            .ok_or_else(|| PlyError::parse(line_no, format!("missing value for `{}`", prop.name)))?;
                        let v = ty.parse_ascii(tok).ok_or_else(|| {
                            PlyError::parse(line_no, format!("bad value `{tok}` for `{}`", prop.name))
                        })?;
                        if keep {
                            table.columns[col].data.push(v);
                            col += 1;
                        }
                    }
                    PropertyKind::List { count, item } => {
                        let n = tokens
                            .next()
                            .and_then(|t| count.parse_ascii(t))
                            .ok_or_else(|| PlyError::parse(line_no, format!("bad list count for `{}`", prop.name)))?;
                        for _ in 0..n as usize {
                            tokens.next().and_then(|t| item.parse_ascii(t)).ok_or_else(|| {
                                PlyError::parse(line_no, format!("bad list item for `{}`", prop.name))
                            })?;
                        }
                    }
                }
            }
            if tokens.next().is_some() {
                return Err(PlyError::parse(line_no, "too many values in record"));
            }
        }
    }
    Ok(())
}

fn read_binary_body(
    body: &[u8],
    header: &Header,
    vertex_idx: Option<usize>,
    table: &mut PlyTable,
) -> Result<(), PlyError> {
    let mut pos = 0usize;
    for (ei, element) in header.elements.iter().enumerate() {
        let keep = Some(ei) == vertex_idx;
        let truncated = |found| PlyError::Truncated { element: element.name.clone(), expected: element.count, found };
        for record in 0..element.count {
            let mut col = 0usize;
            for prop in &element.properties {
                match prop.kind {
                    PropertyKind::Scalar(ty) => {
                        let bytes = body.get(pos..pos + ty.size()).ok_or_else(|| truncated(record))?;
                        pos += ty.size();
                        if keep {
                            table.columns[col].data.push(ty.decode_le(bytes));
                            col += 1;
                        }
                    }
                    PropertyKind::List { count, item } => {
                        let bytes = body.get(pos..pos + count.size()).ok_or_else(|| truncated(record))?;
                        pos += count.size();
                        let n = count.decode_le(bytes) as usize;
                        pos += n * item.size();
                        if pos > body.len() {
                            return Err(truncated(record));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Writes `table` as a single `vertex` element. The file is written to a
/// temporary sibling first and renamed into place.
pub fn write_ply_table(path: &Path, table: &PlyTable, format: PlyFormat) -> Result<(), PlyError> {
    let n = table.len();
    for c in &table.columns {
        if c.data.len() != n {
            return Err(PlyError::ColumnLength { name: c.name.clone(), expected: n, found: c.data.len() });
        }
    }
    let mut header = String::from("ply\n");
    header.push_str(match format {
        PlyFormat::Ascii => "format ascii 1.0\n",
        PlyFormat::BinaryLittleEndian => "format binary_little_endian 1.0\n",
    });
    for c in &table.comments {
        let _ = writeln!(header, "comment {c}");
    }
    let _ = writeln!(header, "element vertex {n}");
    for c in &table.columns {
        let _ = writeln!(header, "property {} {}", c.ty.name(), c.name);
    }
    header.push_str("end_header\n");

    let tmp = tmp_path(path);
    let write = || -> io::Result<()> {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        w.write_all(header.as_bytes())?;
        match format {
            PlyFormat::Ascii => {
                let mut line = String::new();
                for i in 0..n {
                    line.clear();
                    for (k, c) in table.columns.iter().enumerate() {
                        if k > 0 {
                            line.push(' ');
                        }
                        c.ty.format_ascii(c.data[i], &mut line);
                    }
                    line.push('\n');
                    w.write_all(line.as_bytes())?;
                }
            }
            PlyFormat::BinaryLittleEndian => {
                let mut buf = Vec::with_capacity(table.columns.iter().map(|c| c.ty.size()).sum());
                for i in 0..n {
                    buf.clear();
                    for c in &table.columns {
                        c.ty.encode_le(c.data[i], &mut buf);
                    }
                    w.write_all(&buf)?;
                }
            }
        }
        w.flush()
    };
    if let Err(e) = write() {
        let _ = fs::remove_file(&tmp);
        return Err(PlyError::io(path, e));
    }
    fs::rename(&tmp, path).map_err(|e| PlyError::io(path, e))
}

fn tmp_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Loads a splat point cloud. Returns the points and, when the file carries a
/// `label` column, the labels.
pub fn load_ply(path: &Path) -> Result<(PointSet, Option<LabelStore>), PlyError> {
    let table = read_ply_table(path)?;
    table_to_points(table)
}

pub(crate) fn table_to_points(mut table: PlyTable) -> Result<(PointSet, Option<LabelStore>), PlyError> {
    let x = table.take_column("x").ok_or(PlyError::MissingProperty("x"))?;
    let y = table.take_column("y").ok_or(PlyError::MissingProperty("y"))?;
    let z = table.take_column("z").ok_or(PlyError::MissingProperty("z"))?;
    let n = x.data.len();
    if n == 0 {
        return Err(PlyError::EmptyInput);
    }
    let positions: Vec<Vec3> = (0..n).map(|i| Vec3::new(x.data[i], y.data[i], z.data[i])).collect();
    let is_filled: Vec<bool> = match table.take_column("is_filled") {
        Some(c) => c.data.iter().map(|&v| v != 0.0).collect(),
        None => vec![false; n],
    };
    let (mut opacity, encoding) = match table.take_column("opacity") {
        Some(c) => {
            if c.data.iter().all(|v| (0.0..=1.0).contains(v)) {
                (c.data, OpacityEncoding::Linear)
            } else {
                log::info!("opacity column is outside [0, 1]; treating it as logits");
                (c.data.iter().map(|&v| sigmoid(v)).collect(), OpacityEncoding::Logit)
            }
        }
        None => (vec![1.0; n], OpacityEncoding::Linear),
    };
    for (o, &f) in opacity.iter_mut().zip(&is_filled) {
        if f {
            *o = 0.0;
        }
    }
    let labels = match table.take_column("label") {
        Some(c) => {
            let labels: Vec<i32> = c.data.iter().map(|&v| v as i32).collect();
            Some(LabelStore::from_labels(labels).map_err(|e| PlyError::parse(0, e.to_string()))?)
        }
        None => None,
    };
    let payload = Payload { columns: table.columns };
    Ok((PointSet::from_parts(positions, opacity, is_filled, payload, encoding), labels))
}

pub(crate) fn points_to_table(points: &PointSet, labels: Option<&[i32]>, position_type: ScalarType) -> PlyTable {
    let pos = points.positions();
    let mut columns = vec![
        Column::new("x", position_type, pos.iter().map(|p| p.x).collect()),
        Column::new("y", position_type, pos.iter().map(|p| p.y).collect()),
        Column::new("z", position_type, pos.iter().map(|p| p.z).collect()),
    ];
    let opacity = match points.opacity_encoding() {
        OpacityEncoding::Linear => points.opacity().to_vec(),
        OpacityEncoding::Logit => points.opacity().iter().map(|&p| logit(p)).collect(),
    };
    columns.push(Column::new("opacity", ScalarType::F32, opacity));
    if let Some(labels) = labels {
        columns.push(Column::new("label", ScalarType::I32, labels.iter().map(|&l| l as f64).collect()));
    }
    columns.push(Column::new(
        "is_filled",
        ScalarType::U8,
        points.is_filled().iter().map(|&f| if f { 1.0 } else { 0.0 }).collect(),
    ));
    columns.extend(points.payload().columns.iter().cloned());
    PlyTable { columns, comments: Vec::new() }
}

/// Writes positions, opacity, optional labels and the `is_filled` flag,
/// followed by any passthrough payload columns. Positions are stored as
/// float32 when that is lossless and as float64 otherwise.
pub fn save_ply(path: &Path, points: &PointSet, labels: Option<&[i32]>, format: PlyFormat) -> Result<(), PlyError> {
    let fits_f32 = points.positions().iter().flat_map(|p| p.iter()).all(|&v| v as f32 as f64 == v);
    let ty = if fits_f32 { ScalarType::F32 } else { ScalarType::F64 };
    write_ply_table(path, &points_to_table(points, labels, ty), format)
}
