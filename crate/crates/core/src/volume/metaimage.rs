//! Minimal MetaImage (`.mhd` + `.raw`) reader and writer.

use std::fs;
use std::path::{Path, PathBuf};

use super::{BinaryMask, Grid, ScalarVolume};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementType {
    Short,
    Float,
    UChar,
}

impl ElementType {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "MET_SHORT" => Ok(Self::Short),
            "MET_FLOAT" => Ok(Self::Float),
            "MET_UCHAR" => Ok(Self::UChar),
            other => Err(Error::UnsupportedElementType(other.to_string())),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::Short => "MET_SHORT",
            Self::Float => "MET_FLOAT",
            Self::UChar => "MET_UCHAR",
        }
    }

    fn size(self) -> usize {
        match self {
            Self::Short => 2,
            Self::Float => 4,
            Self::UChar => 1,
        }
    }
}

struct Header {
    grid: Grid,
    element: ElementType,
    msb: bool,
    data_file: String,
    /// Byte offset of the payload when `ElementDataFile = LOCAL`.
    local_offset: Option<usize>,
}

fn parse_floats(key: &str, v: &str) -> Result<[f64; 3]> {
    let vals: Vec<f64> = v
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Header(format!("{key}: cannot parse `{v}`")))?;
    <[f64; 3]>::try_from(vals).map_err(|_| Error::Header(format!("{key}: expected 3 values")))
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut dims = None;
    let mut spacing = [1.0; 3];
    let mut origin = [0.0; 3];
    let mut element = None;
    let mut msb = false;
    let mut data_file = None;
    let mut local_offset = None;
    let mut pos = 0usize;
    while pos < bytes.len() {
        let end = bytes[pos..].iter().position(|&b| b == b'\n').map(|e| pos + e + 1).unwrap_or(bytes.len());
        let line = std::str::from_utf8(&bytes[pos..end])
            .map_err(|_| Error::Header("non-UTF-8 header line".into()))?
            .trim();
        pos = end;
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| Error::Header(format!("expected `key = value`, got `{line}`")))?;
        match key {
            "ObjectType" if value != "Image" => {
                return Err(Error::Header(format!("ObjectType must be Image, got {value}")))
            }
            "NDims" if value != "3" => {
                return Err(Error::Header(format!("NDims must be 3, got {value}")))
            }
            "DimSize" => {
                let d = parse_floats(key, value)?;
                if d.iter().any(|&v| v < 1.0 || v.fract() != 0.0) {
                    return Err(Error::Header(format!("DimSize: invalid `{value}`")));
                }
                dims = Some(d.map(|v| v as usize));
            }
            "ElementSpacing" => spacing = parse_floats(key, value)?,
            "Offset" => origin = parse_floats(key, value)?,
            "ElementType" => element = Some(ElementType::parse(value)?),
            "ElementByteOrderMSB" => {
                msb = match value {
                    "True" | "true" => true,
                    "False" | "false" => false,
                    _ => return Err(Error::Header(format!("ElementByteOrderMSB: `{value}`"))),
                }
            }
            "ElementDataFile" => {
                data_file = Some(value.to_string());
                if value == "LOCAL" {
                    local_offset = Some(pos);
                }
                break;
            }
            _ => {}
        }
    }
    let dims = dims.ok_or_else(|| Error::Header("missing DimSize".into()))?;
    let element = element.ok_or_else(|| Error::Header("missing ElementType".into()))?;
    let data_file = data_file.ok_or_else(|| Error::Header("missing ElementDataFile".into()))?;
    let grid = Grid::new(dims, spacing, origin).map_err(|e| Error::Header(e.to_string()))?;
    Ok(Header { grid, element, msb, data_file, local_offset })
}

fn read_payload(path: &Path) -> Result<(Header, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = parse_header(&bytes)?;
    let payload = match header.local_offset {
        Some(off) => bytes[off..].to_vec(),
        None => {
            let raw = path.parent().unwrap_or(Path::new(".")).join(&header.data_file);
            fs::read(&raw).map_err(|e| Error::io(raw, e))?
        }
    };
    let expected = header.grid.len() * header.element.size();
    if payload.len() != expected {
        return Err(Error::PayloadSize { expected, actual: payload.len() });
    }
    Ok((header, payload))
}

fn decode(header: &Header, payload: &[u8]) -> Vec<f32> {
    match header.element {
        ElementType::UChar => payload.iter().map(|&b| b as f32).collect(),
        ElementType::Short => payload
            .chunks_exact(2)
            .map(|c| {
                let b = [c[0], c[1]];
                (if header.msb { i16::from_be_bytes(b) } else { i16::from_le_bytes(b) }) as f32
            })
            .collect(),
        ElementType::Float => payload
            .chunks_exact(4)
            .map(|c| {
                let b = [c[0], c[1], c[2], c[3]];
                if header.msb {
                    f32::from_be_bytes(b)
                } else {
                    f32::from_le_bytes(b)
                }
            })
            .collect(),
    }
}

/// Load a scalar volume from a MetaImage header.
pub fn load_volume(path: impl AsRef<Path>) -> Result<ScalarVolume> {
    let (header, payload) = read_payload(path.as_ref())?;
    let data = decode(&header, &payload);
    ScalarVolume::new(header.grid, data)
}

/// Load a mask; any nonzero voxel is a member.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let (header, payload) = read_payload(path.as_ref())?;
    let data = decode(&header, &payload).into_iter().map(|v| v != 0.0).collect();
    Ok(BinaryMask { grid: header.grid, data })
}

fn raw_path(path: &Path) -> PathBuf {
    path.with_extension("raw")
}

fn fmt3(v: [f64; 3]) -> String {
    format!("{} {} {}", v[0], v[1], v[2])
}

fn write(path: &Path, grid: &Grid, element: ElementType, payload: &[u8]) -> Result<()> {
    let raw = raw_path(path);
    let raw_name = raw
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::InvalidParameter(format!("bad output path {}", path.display())))?;
    let header = format!(
        "ObjectType = Image\nNDims = 3\nDimSize = {} {} {}\nElementSpacing = {}\nOffset = {}\nElementType = {}\nElementByteOrderMSB = False\nElementDataFile = {}\n",
        grid.dims[0],
        grid.dims[1],
        grid.dims[2],
        fmt3(grid.spacing),
        fmt3(grid.origin),
        element.name(),
        raw_name
    );
    fs::write(&raw, payload).map_err(|e| Error::io(&raw, e))?;
    fs::write(path, header).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Write a volume. Integral data within the int16 range is stored as
/// `MET_SHORT`, anything else as `MET_FLOAT`; both are lossless for `f32`.
pub fn save_volume(v: &ScalarVolume, path: impl AsRef<Path>) -> Result<()> {
    let integral = v
        .data
        .iter()
        .all(|&x| x.fract() == 0.0 && x >= i16::MIN as f32 && x <= i16::MAX as f32);
    // negative zero would not survive the int16 round trip
    let integral = integral && !v.data.iter().any(|x| *x == 0.0 && x.is_sign_negative());
    let (element, payload): (ElementType, Vec<u8>) = if integral {
        (ElementType::Short, v.data.iter().flat_map(|&x| (x as i16).to_le_bytes()).collect())
    } else {
        (ElementType::Float, v.data.iter().flat_map(|&x| x.to_le_bytes()).collect())
    };
    write(path.as_ref(), &v.grid, element, &payload)
}

/// Write a mask as `MET_UCHAR` {0, 1}.
pub fn save_mask(m: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let payload: Vec<u8> = m.data.iter().map(|&b| b as u8).collect();
    write(path.as_ref(), &m.grid, ElementType::UChar, &payload)
}
