//! Legacy VTK ASCII writer and a minimal reader for its own output.

use std::fmt::Write;

use crate::error::{Error, Result};

/// Header, points (`z` mapped to the second coordinate) and triangle cells.
pub fn write_header(s: &mut String, title: &str, points: &[[f64; 2]], triangles: &[[usize; 3]]) {
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{title}");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", points.len());
    for p in points {
        let _ = writeln!(s, "{:.17e} {:.17e} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {} {}", triangles.len(), 4 * triangles.len());
    for t in triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", triangles.len());
    for _ in triangles {
        let _ = writeln!(s, "5");
    }
}

/// Appends named point scalars.
pub fn write_point_scalars(s: &mut String, fields: &[(&str, &[f64])]) {
    if let Some((_, first)) = fields.first() {
        let _ = writeln!(s, "POINT_DATA {}", first.len());
    }
    for (name, values) in fields {
        let _ = writeln!(s, "SCALARS {name} double 1");
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for v in *values {
            let _ = writeln!(s, "{v:.17e}");
        }
    }
}

/// Point count, cell count and named point-data arrays of a legacy file.
#[derive(Debug, Clone, Default)]
pub struct VtkSummary {
    pub points: usize,
    pub cells: usize,
    pub point_data: Vec<(String, Vec<f64>)>,
}

pub fn parse_summary(text: &str) -> Result<VtkSummary> {
    let mut out = VtkSummary::default();
    let mut tokens = text.split_whitespace().peekable();
    let count = |t: Option<&str>| -> Result<usize> {
        t.and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::InvalidInput("malformed VTK count".into()))
    };
    let mut n_point_data = 0;
    while let Some(tok) = tokens.next() {
        match tok {
            "POINTS" => out.points = count(tokens.next())?,
            "CELLS" => out.cells = count(tokens.next())?,
            "POINT_DATA" => n_point_data = count(tokens.next())?,
            "SCALARS" => {
                let name = tokens.next().unwrap_or_default().to_string();
                while let Some(t) = tokens.next() {
                    if t == "LOOKUP_TABLE" {
                        tokens.next();
                        break;
                    }
                }
                let mut vals = Vec::with_capacity(n_point_data);
                for _ in 0..n_point_data {
                    let v: f64 = tokens
                        .next()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| Error::InvalidInput("malformed VTK scalar".into()))?;
                    vals.push(v);
                }
                out.point_data.push((name, vals));
            }
            _ => {}
        }
    }
    Ok(out)
}
