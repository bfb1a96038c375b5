//! Field files.
//!
//! * CSV: one value per line, row-major with x fastest, shortest round-trip
//!   decimal formatting. Blank lines and `#` comments are ignored.
//! * Binary: 16-byte header (`b"MRCMPERM"`, `nx: u32 LE`, `ny: u32 LE`)
//!   followed by `nx * ny` little-endian `f64` values.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::PermeabilityField;
use crate::error::{Error, Result};
use crate::grid::FineGrid;

const MAGIC: &[u8; 8] = b"MRCMPERM";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldFormat {
    Csv,
    Binary,
}

impl FieldFormat {
    /// `.bin` / `.perm` select the binary layout, anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("perm") => FieldFormat::Binary,
            _ => FieldFormat::Csv,
        }
    }
}

/// Field file contents in `format`.
pub fn encode_field(field: &PermeabilityField, format: FieldFormat) -> Vec<u8> {
    match format {
        FieldFormat::Csv => {
            let mut s = String::with_capacity(field.values().len() * 8);
            for v in field.values() {
                s.push_str(&v.to_string());
                s.push('\n');
            }
            s.into_bytes()
        }
        FieldFormat::Binary => {
            let mut b = Vec::with_capacity(16 + 8 * field.values().len());
            b.extend_from_slice(MAGIC);
            b.extend_from_slice(&(field.nx() as u32).to_le_bytes());
            b.extend_from_slice(&(field.ny() as u32).to_le_bytes());
            for v in field.values() {
                b.extend_from_slice(&v.to_le_bytes());
            }
            b
        }
    }
}

pub fn save_field(field: &PermeabilityField, path: &Path, format: FieldFormat) -> Result<()> {
    let bytes = encode_field(field, format);
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Load a field for `grid`; the format is sniffed from the header.
pub fn load_field(path: &Path, grid: &FineGrid) -> Result<PermeabilityField> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let values = if bytes.starts_with(MAGIC) {
        parse_binary(&bytes, grid)?
    } else {
        parse_csv(&bytes)?
    };
    PermeabilityField::new(grid, values)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn parse_binary(bytes: &[u8], grid: &FineGrid) -> Result<Vec<f64>> {
    if bytes.len() < 16 {
        return Err(Error::Data("truncated binary field header".into()));
    }
    let nx = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let ny = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if (nx, ny) != (grid.nx(), grid.ny()) {
        return Err(Error::Data(format!(
            "binary field is {nx}x{ny}, grid is {}x{}",
            grid.nx(),
            grid.ny()
        )));
    }
    let body = &bytes[16..];
    if body.len() != 8 * nx * ny {
        return Err(Error::Data(format!(
            "binary field body has {} bytes, expected {}",
            body.len(),
            8 * nx * ny
        )));
    }
    Ok(body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn parse_csv(bytes: &[u8]) -> Result<Vec<f64>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| Error::Data("field file is neither binary nor UTF-8 text".into()))?;
    let mut values = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| Error::Data(format!("line {}: cannot parse {line:?}", n + 1)))?;
        values.push(v);
    }
    Ok(values)
}
