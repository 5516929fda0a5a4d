//! PLY reading and writing.
//!
//! Written files expose exactly the cloud's channels: `x y z` as doubles,
//! `nx ny nz` when normals are present, an integer `face_label` when labels
//! are, and optionally a per-point `distance` scalar for colour-mapped
//! inspection. The reader is deliberately tolerant: it accepts ASCII and
//! binary little-endian files from other tools, takes coordinates in either
//! float width, and skips properties and elements it does not understand.

use std::io::Write as _;
use std::path::Path;

use nalgebra::Unit;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, UnitVector3, Vector3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

/// Writes a cloud with whatever channels it carries.
pub fn write_ply(cloud: &PointCloud, path: &Path, format: PlyFormat) -> Result<()> {
    write_impl(cloud, None, path, format)
}

/// Like [`write_ply`] but adds a per-point `distance` property, one value
/// per point, for colour-mapped viewing of evaluation output.
pub fn write_ply_with_distances(
    cloud: &PointCloud,
    distances: &[f64],
    path: &Path,
    format: PlyFormat,
) -> Result<()> {
    if distances.len() != cloud.len() {
        return Err(Error::LengthMismatch {
            left: cloud.len(),
            right: distances.len(),
        });
    }
    write_impl(cloud, Some(distances), path, format)
}

fn write_impl(
    cloud: &PointCloud,
    distances: Option<&[f64]>,
    path: &Path,
    format: PlyFormat,
) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io_err = |e| Error::io(path, e);

    let format_line = match format {
        PlyFormat::Ascii => "format ascii 1.0",
        PlyFormat::BinaryLittleEndian => "format binary_little_endian 1.0",
    };
    let mut header = format!("ply\n{format_line}\nelement vertex {}\n", cloud.len());
    header.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.normals.is_some() {
        header.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    if cloud.labels.is_some() {
        header.push_str("property int face_label\n");
    }
    if distances.is_some() {
        header.push_str("property double distance\n");
    }
    header.push_str("end_header\n");
    out.write_all(header.as_bytes()).map_err(io_err)?;

    for i in 0..cloud.len() {
        let p = cloud.points[i];
        let mut floats = vec![p.x, p.y, p.z];
        if let Some(normals) = &cloud.normals {
            floats.extend([normals[i].x, normals[i].y, normals[i].z]);
        }
        let label = cloud.labels.as_ref().map(|l| l[i]);
        let distance = distances.map(|d| d[i]);
        match format {
            PlyFormat::Ascii => {
                let mut row: Vec<String> = floats.iter().map(f64::to_string).collect();
                if let Some(l) = label {
                    row.push(l.to_string());
                }
                if let Some(d) = distance {
                    row.push(d.to_string());
                }
                out.write_all(row.join(" ").as_bytes()).map_err(io_err)?;
                out.write_all(b"\n").map_err(io_err)?;
            }
            PlyFormat::BinaryLittleEndian => {
                for &v in &floats {
                    out.write_all(&v.to_le_bytes()).map_err(io_err)?;
                }
                if let Some(l) = label {
                    out.write_all(&l.to_le_bytes()).map_err(io_err)?;
                }
                if let Some(d) = distance {
                    out.write_all(&d.to_le_bytes()).map_err(io_err)?;
                }
            }
        }
    }
    out.flush().map_err(io_err)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, bytes: &[u8]) -> f64 {
        match self {
            Scalar::I8 => bytes[0] as i8 as f64,
            Scalar::U8 => bytes[0] as f64,
            Scalar::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum PropKind {
    Single(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct PropDecl {
    name: String,
    kind: PropKind,
}

#[derive(Debug, Clone)]
struct ElementDecl {
    name: String,
    count: usize,
    properties: Vec<PropDecl>,
}

/// Reads a PLY file into a cloud. Coordinates are required; normals are
/// taken when all of `nx ny nz` are present, labels from any integer
/// `face_label`. Everything else — extra properties, extra elements, list
/// data — is skipped.
pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let fail = |message: String| Error::PlyParse {
        path: path.to_path_buf(),
        message,
    };

    // The header is newline-terminated ASCII; the payload starts right
    // after the end_header line.
    let mut lines = Vec::new();
    let mut offset = 0;
    let mut payload_start = None;
    while offset < bytes.len() {
        let end = bytes[offset..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|i| offset + i)
            .unwrap_or(bytes.len());
        let line = std::str::from_utf8(&bytes[offset..end])
            .map_err(|_| fail("header is not valid UTF-8".into()))?
            .trim_end_matches('\r')
            .to_string();
        offset = (end + 1).min(bytes.len());
        let done = line.trim() == "end_header";
        lines.push(line);
        if done {
            payload_start = Some(offset);
            break;
        }
    }
    let payload_start =
        payload_start.ok_or_else(|| fail("missing end_header".into()))?;

    if lines.first().map(String::as_str) != Some("ply") {
        return Err(fail("missing ply magic".into()));
    }
    let mut format = None;
    let mut elements: Vec<ElementDecl> = Vec::new();
    for line in &lines[1..lines.len() - 1] {
        let mut words = line.split_whitespace();
        match words.next() {
            Some("comment") | Some("obj_info") | None => {}
            Some("format") => {
                let kind = words.next().unwrap_or_default();
                let version = words.next().unwrap_or_default();
                if version != "1.0" {
                    return Err(fail(format!("unsupported version {version:?}")));
                }
                format = Some(match kind {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => return Err(fail(format!("unsupported format {other:?}"))),
                });
            }
            Some("element") => {
                let name = words.next().unwrap_or_default().to_string();
                let count = words
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| fail(format!("bad element line {line:?}")))?;
                elements.push(ElementDecl {
                    name,
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| fail("property before any element".into()))?;
                let rest: Vec<&str> = words.collect();
                let (kind, name) = match rest.as_slice() {
                    ["list", count, item, name] => {
                        let count = Scalar::parse(count)
                            .ok_or_else(|| fail(format!("unknown type {count:?}")))?;
                        let item = Scalar::parse(item)
                            .ok_or_else(|| fail(format!("unknown type {item:?}")))?;
                        (PropKind::List { count, item }, *name)
                    }
                    [ty, name] => {
                        let ty = Scalar::parse(ty)
                            .ok_or_else(|| fail(format!("unknown type {ty:?}")))?;
                        (PropKind::Single(ty), *name)
                    }
                    _ => return Err(fail(format!("bad property line {line:?}"))),
                };
                element.properties.push(PropDecl {
                    name: name.to_string(),
                    kind,
                });
            }
            Some(other) => return Err(fail(format!("unknown header keyword {other:?}"))),
        }
    }
    let format = format.ok_or_else(|| fail("missing format line".into()))?;

    let vertex = elements
        .iter()
        .find(|e| e.name == "vertex")
        .ok_or_else(|| fail("no vertex element".into()))?;
    let prop_index = |name: &str| vertex.properties.iter().position(|p| p.name == name);
    let x = prop_index("x").ok_or_else(|| fail("vertex has no x".into()))?;
    let y = prop_index("y").ok_or_else(|| fail("vertex has no y".into()))?;
    let z = prop_index("z").ok_or_else(|| fail("vertex has no z".into()))?;
    let normal_cols = match (prop_index("nx"), prop_index("ny"), prop_index("nz")) {
        (Some(a), Some(b), Some(c)) => Some([a, b, c]),
        _ => None,
    };
    let label_col = prop_index("face_label").filter(|&i| {
        matches!(
            vertex.properties[i].kind,
            PropKind::Single(
                Scalar::I8 | Scalar::U8 | Scalar::I16 | Scalar::U16 | Scalar::I32 | Scalar::U32
            )
        )
    });

    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut labels = Vec::new();
    let mut row = Vec::new();

    let mut take_vertex_row = |row: &[f64], points: &mut Vec<Point3>| -> Result<()> {
        points.push(Point3::new(row[x], row[y], row[z]));
        if let Some([a, b, c]) = normal_cols {
            normals.push(unit_normal(Vector3::new(row[a], row[b], row[c])).ok_or_else(
                || fail(format!("degenerate normal at vertex {}", points.len() - 1)),
            )?);
        }
        if let Some(i) = label_col {
            labels.push(row[i] as i32);
        }
        Ok(())
    };

    match format {
        PlyFormat::Ascii => {
            let text = std::str::from_utf8(&bytes[payload_start..])
                .map_err(|_| fail("ascii payload is not valid UTF-8".into()))?;
            let mut tokens = text.split_whitespace();
            let mut next_value = |what: &str| -> Result<f64> {
                tokens
                    .next()
                    .ok_or_else(|| fail(format!("file ends inside {what}")))?
                    .parse::<f64>()
                    .map_err(|_| fail(format!("non-numeric value in {what}")))
            };
            for element in &elements {
                let is_vertex = element.name == "vertex";
                for _ in 0..element.count {
                    row.clear();
                    for prop in &element.properties {
                        match prop.kind {
                            PropKind::Single(_) => row.push(next_value(&element.name)?),
                            PropKind::List { .. } => {
                                let n = next_value(&element.name)? as usize;
                                for _ in 0..n {
                                    next_value(&element.name)?;
                                }
                                row.push(f64::NAN);
                            }
                        }
                    }
                    if is_vertex {
                        take_vertex_row(&row, &mut points)?;
                    }
                }
            }
        }
        PlyFormat::BinaryLittleEndian => {
            let mut cursor = payload_start;
            let read_scalar = |cursor: &mut usize, ty: Scalar| -> Result<f64> {
                let end = *cursor + ty.size();
                if end > bytes.len() {
                    return Err(fail("file ends inside binary payload".into()));
                }
                let v = ty.read_le(&bytes[*cursor..end]);
                *cursor = end;
                Ok(v)
            };
            for element in &elements {
                let is_vertex = element.name == "vertex";
                for _ in 0..element.count {
                    row.clear();
                    for prop in &element.properties {
                        match prop.kind {
                            PropKind::Single(ty) => {
                                row.push(read_scalar(&mut cursor, ty)?);
                            }
                            PropKind::List { count, item } => {
                                let n = read_scalar(&mut cursor, count)? as usize;
                                let end = cursor + n * item.size();
                                if end > bytes.len() {
                                    return Err(fail(
                                        "file ends inside binary payload".into(),
                                    ));
                                }
                                cursor = end;
                                row.push(f64::NAN);
                            }
                        }
                    }
                    if is_vertex {
                        take_vertex_row(&row, &mut points)?;
                    }
                }
            }
        }
    }

    let mut cloud = PointCloud::from_points(points);
    if normal_cols.is_some() {
        cloud = cloud.with_normals(normals)?;
    }
    if label_col.is_some() {
        cloud = cloud.with_labels(labels)?;
    }
    Ok(cloud)
}

/// Unitises a stored normal. Bit-preserving when it is already unit length,
/// renormalising when a foreign writer stored it unnormalised; `None` for
/// zero or non-finite vectors.
fn unit_normal(v: Vector3) -> Option<UnitVector3> {
    let norm = v.norm();
    if !norm.is_finite() || norm < 1e-12 {
        return None;
    }
    if (norm - 1.0).abs() < 1e-9 {
        Some(Unit::new_unchecked(v))
    } else {
        Some(Unit::new_normalize(v))
    }
}
