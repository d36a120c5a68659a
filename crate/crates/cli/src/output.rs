//! CSV and JSON emission. Files are written to a temporary sibling and
//! renamed into place, so a failed run never leaves partial output.

use std::io::{self, Write};
use std::path::Path;

use omega_map::model::MatrixGrid;
use omega_map::Mat;

/// One block of columns: every entry of a matrix grid, row-major, with the
/// column names prefixed.
pub struct Columns<'a> {
    pub prefix: &'a str,
    pub grid: &'a MatrixGrid<f64>,
}

/// 17 significant digits, enough for an exact `f64` round trip.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with header `x,m_1_1,…,m_N_N` followed by one line per node. Extra
/// blocks must share the first block's nodes.
pub fn matrix_grid_csv(x_name: &str, blocks: &[Columns<'_>]) -> String {
    matrix_grid_csv_with(x_name, blocks, &[])
}

/// [`matrix_grid_csv`] with scalar columns appended, one value per node.
pub fn matrix_grid_csv_with(x_name: &str, blocks: &[Columns<'_>], extra: &[(String, Vec<f64>)]) -> String {
    let first = blocks[0].grid;
    let mut out = String::from(x_name);
    for b in blocks {
        let n = b.grid.dim();
        for i in 1..=n {
            for j in 1..=n {
                out.push_str(&format!(",{}m_{i}_{j}", b.prefix));
            }
        }
    }
    for (name, _) in extra {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for k in 0..first.len() {
        out.push_str(&num(first.x_at(k)));
        for b in blocks {
            for v in b.grid.at(k).as_slice() {
                out.push(',');
                out.push_str(&num(*v));
            }
        }
        for (_, col) in extra {
            out.push(',');
            out.push_str(&num(col[k]));
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`matrix_grid_csv`] for a single block.
#[cfg(test)]
pub fn parse_matrix_grid(text: &str) -> Result<(Vec<f64>, Vec<Mat<f64>>), String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty CSV")?;
    let cols = header.split(',').count() - 1;
    let n = (cols as f64).sqrt().round() as usize;
    if n * n != cols {
        return Err(format!("{cols} value columns is not a square matrix"));
    }
    let mut xs = Vec::new();
    let mut ms = Vec::new();
    for line in lines {
        let vals: Vec<f64> = line.split(',').map(|s| s.parse::<f64>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
        if vals.len() != cols + 1 {
            return Err(format!("line has {} fields, expected {}", vals.len(), cols + 1));
        }
        xs.push(vals[0]);
        ms.push(Mat::from_vec(n, n, vals[1..].to_vec()));
    }
    Ok((xs, ms))
}

pub fn mat_json(m: &Mat<f64>) -> serde_json::Value {
    serde_json::json!(m.to_rows())
}

/// Writes to `path` atomically, or to stdout without a path.
pub fn write_out(path: Option<&Path>, text: &str) -> io::Result<()> {
    let Some(path) = path else {
        let mut so = io::stdout().lock();
        so.write_all(text.as_bytes())?;
        return so.flush();
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grid_has_header_and_two_rows() {
        let g = MatrixGrid::new(0.0, 0.5, vec![Mat::zeros(1, 1); 2]).unwrap();
        let text = matrix_grid_csv("x", &[Columns { prefix: "", grid: &g }]);
        assert_eq!(text.lines().count(), 3);
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().next(), Some("x,m_1_1"));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let vals: Vec<Mat<f64>> = (0..7)
            .map(|k| {
                let t = k as f64;
                Mat::from_rows(&[vec![t.sin() / 3.0, 1e-300 * t], vec![-t.exp(), std::f64::consts::PI * t]])
            })
            .collect();
        let g = MatrixGrid::new(-0.3, 0.1, vals).unwrap();
        let (xs, ms) = parse_matrix_grid(&matrix_grid_csv("x", &[Columns { prefix: "", grid: &g }])).unwrap();
        for k in 0..g.len() {
            assert_eq!(xs[k].to_bits(), g.x_at(k).to_bits());
            let a: Vec<u64> = ms[k].as_slice().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = g.at(k).as_slice().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn header_is_row_major_with_prefixes() {
        let g = MatrixGrid::new(0.0, 1.0, vec![Mat::identity(2)]).unwrap();
        let text = matrix_grid_csv("y", &[Columns { prefix: "", grid: &g }, Columns { prefix: "lo_", grid: &g }]);
        assert_eq!(text.lines().next(), Some("y,m_1_1,m_1_2,m_2_1,m_2_2,lo_m_1_1,lo_m_1_2,lo_m_2_1,lo_m_2_2"));
    }

    #[test]
    fn failed_write_leaves_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("missing").join("out.csv");
        assert!(write_out(Some(&target), "x\n").is_err());
        assert!(!target.exists());
    }
}
