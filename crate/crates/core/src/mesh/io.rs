//! Plain-text node/element mesh files.
//!
//! ```text
//! # comment
//! nv nc
//! x y boundary_flag     (nv lines, flag is 0 or 1)
//! i j k                 (nc lines, 0-based vertex indices)
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{BoundaryFlags, Triangulation, Vertex};
use crate::error::{FemError, Result};

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Triangulation> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    read_mesh(&text, path)
}

pub fn save_mesh(mesh: &Triangulation, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    write_mesh(mesh, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn write_mesh(mesh: &Triangulation, out: &mut impl Write) -> Result<()> {
    writeln!(out, "# fracfem mesh: nv nc / x y boundary / i j k")?;
    writeln!(out, "{} {}", mesh.num_vertices(), mesh.num_cells())?;
    // `{}` on f64 prints the shortest string that parses back to the same value.
    for p in mesh.vertices() {
        writeln!(out, "{} {} {}", p.x, p.y, u8::from(p.on_boundary))?;
    }
    for t in mesh.cells() {
        writeln!(out, "{} {} {}", t.v[0], t.v[1], t.v[2])?;
    }
    Ok(())
}

/// Parses mesh text; `origin` only labels error messages.
pub fn read_mesh(text: &str, origin: &Path) -> Result<Triangulation> {
    let err = |line: usize, msg: String| FemError::Parse {
        path: PathBuf::from(origin),
        line,
        msg,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines
        .next()
        .ok_or_else(|| err(1, "empty mesh file".into()))?;
    let counts = parse_fields::<usize>(header, 2).map_err(|m| err(hline, m))?;
    let (nv, nc) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for k in 0..nv {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| err(hline, format!("expected {nv} vertices, found {k}")))?;
        let f = parse_fields::<f64>(l, 3).map_err(|m| err(ln, m))?;
        let on_boundary = match f[2] {
            0.0 => false,
            1.0 => true,
            other => return Err(err(ln, format!("boundary flag must be 0 or 1, got {other}"))),
        };
        vertices.push(Vertex {
            x: f[0],
            y: f[1],
            on_boundary,
        });
    }
    let mut conn = Vec::with_capacity(nc);
    for k in 0..nc {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| err(hline, format!("expected {nc} cells, found {k}")))?;
        let f = parse_fields::<usize>(l, 3).map_err(|m| err(ln, m))?;
        conn.push([f[0], f[1], f[2]]);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(err(ln, "trailing data after last cell".into()));
    }
    Triangulation::new(vertices, conn, BoundaryFlags::Given)
}

fn parse_fields<T: std::str::FromStr>(line: &str, n: usize) -> std::result::Result<Vec<T>, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != n {
        return Err(format!("expected {n} fields, found {}", fields.len()));
    }
    fields
        .iter()
        .map(|s| s.parse::<T>().map_err(|_| format!("cannot parse '{s}'")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_square_mesh;

    #[test]
    fn round_trip_square() {
        let m = generate_square_mesh(4).unwrap();
        let mut buf = Vec::new();
        write_mesh(&m, &mut buf).unwrap();
        let back = read_mesh(std::str::from_utf8(&buf).unwrap(), Path::new("mem")).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn empty_file_is_parse_error() {
        let e = read_mesh("", Path::new("empty.mesh")).unwrap_err();
        assert!(matches!(e, FemError::Parse { .. }));
        let e = read_mesh("# only a comment\n\n", Path::new("c.mesh")).unwrap_err();
        assert!(matches!(e, FemError::Parse { .. }));
    }

    #[test]
    fn duplicate_cell_is_nonconforming() {
        let text = "3 2\n0 0 1\n1 0 1\n0 1 1\n0 1 2\n0 1 2\n";
        let e = read_mesh(text, Path::new("dup.mesh")).unwrap_err();
        assert!(matches!(e, FemError::NonconformingMesh(_)));
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "# header\n3 1\n0 0 1\n1 zero 1\n0 1 1\n0 1 2\n";
        match read_mesh(text, Path::new("bad.mesh")).unwrap_err() {
            FemError::Parse { line, .. } => assert_eq!(line, 4),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# tri\n3 1 # counts\n\n0 0 1\n1 0 1 # v1\n0 1 1\n2 1 0\n";
        let m = read_mesh(text, Path::new("ok.mesh")).unwrap();
        assert_eq!(m.num_cells(), 1);
        assert_eq!(m.cells()[0].v, [2, 0, 1]);
    }
}
