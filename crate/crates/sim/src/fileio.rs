//! Canonical mesh file formats.
//!
//! Both formats are plain text, one record per line, `#` comments allowed:
//!
//! Surface (`.surf`):
//! ```text
//! <vertex count>
//! x y z            (that many lines)
//! <triangle count>
//! i j k            (that many lines, 0-based indices)
//! ```
//!
//! Volume (`.tet`): same layout with 4-index tetrahedron lines.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! save/load cycle reproduces vertices bit-exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use tetsim_core::mesh::{MeshError, SurfaceMesh, TetMesh};
use tetsim_core::{Point3, Real};

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    InvalidMesh {
        path: String,
        #[source]
        source: MeshError,
    },
}

struct Lines<'a> {
    path: &'a str,
    // (1-based line number, content) with comments and blanks stripped.
    items: Vec<(usize, &'a str)>,
    cursor: usize,
}

impl<'a> Lines<'a> {
    fn new(path: &'a str, text: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .filter_map(|(i, raw)| {
                let content = raw.split('#').next().unwrap_or("").trim();
                (!content.is_empty()).then_some((i + 1, content))
            })
            .collect();
        Self {
            path,
            items,
            cursor: 0,
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str), FileError> {
        let item = self.items.get(self.cursor).copied();
        self.cursor += 1;
        item.ok_or_else(|| FileError::Parse {
            path: self.path.to_string(),
            line: self.items.last().map(|(n, _)| *n).unwrap_or(0) + 1,
            message: format!("unexpected end of file, expected {what}"),
        })
    }

    fn next_count(&mut self, what: &str) -> Result<usize, FileError> {
        let (line, text) = self.next(what)?;
        text.parse().map_err(|_| FileError::Parse {
            path: self.path.to_string(),
            line,
            message: format!("expected {what}, got '{text}'"),
        })
    }

    fn expect_end(&self) -> Result<(), FileError> {
        if let Some(&(line, text)) = self.items.get(self.cursor) {
            return Err(FileError::Parse {
                path: self.path.to_string(),
                line,
                message: format!("trailing content '{text}'"),
            });
        }
        Ok(())
    }
}

fn parse_fields<const N: usize, T: std::str::FromStr>(
    path: &str,
    line: usize,
    text: &str,
    what: &str,
) -> Result<[T; N], FileError> {
    let mut out: Vec<T> = Vec::with_capacity(N);
    for field in text.split_whitespace() {
        let v = field.parse().map_err(|_| FileError::Parse {
            path: path.to_string(),
            line,
            message: format!("bad {what} component '{field}'"),
        })?;
        out.push(v);
    }
    out.try_into().map_err(|_| FileError::Parse {
        path: path.to_string(),
        line,
        message: format!("expected {N} {what} components"),
    })
}

fn read_vertices(lines: &mut Lines<'_>) -> Result<Vec<Point3>, FileError> {
    let nv = lines.next_count("vertex count")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line_no, text) = lines.next("a vertex line")?;
        let [x, y, z]: [Real; 3] = parse_fields(lines.path, line_no, text, "vertex")?;
        vertices.push(Point3::new(x, y, z));
    }
    Ok(vertices)
}

/// Loads a surface mesh from the canonical text format.
pub fn load_surface_mesh(path: impl AsRef<Path>) -> Result<SurfaceMesh, FileError> {
    let path_str = path.as_ref().display().to_string();
    let text = fs::read_to_string(path.as_ref()).map_err(|source| FileError::Io {
        path: path_str.clone(),
        source,
    })?;
    let mut lines = Lines::new(&path_str, &text);
    let vertices = read_vertices(&mut lines)?;
    let nt = lines.next_count("triangle count")?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line_no, text) = lines.next("a triangle line")?;
        let idx: [usize; 3] = parse_fields(&path_str, line_no, text, "triangle")?;
        triangles.push(idx);
    }
    lines.expect_end()?;
    SurfaceMesh::new(vertices, triangles).map_err(|source| FileError::InvalidMesh {
        path: path_str,
        source,
    })
}

/// Loads a tetrahedral mesh from the canonical text format. Rest volumes are
/// computed and negatively oriented elements repaired on load.
pub fn load_tet_mesh(path: impl AsRef<Path>) -> Result<TetMesh, FileError> {
    let path_str = path.as_ref().display().to_string();
    let text = fs::read_to_string(path.as_ref()).map_err(|source| FileError::Io {
        path: path_str.clone(),
        source,
    })?;
    let mut lines = Lines::new(&path_str, &text);
    let vertices = read_vertices(&mut lines)?;
    let ne = lines.next_count("tetrahedron count")?;
    let mut tets = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (line_no, text) = lines.next("a tetrahedron line")?;
        let idx: [usize; 4] = parse_fields(&path_str, line_no, text, "tetrahedron")?;
        tets.push(idx);
    }
    lines.expect_end()?;
    TetMesh::new(vertices, tets).map_err(|source| FileError::InvalidMesh {
        path: path_str,
        source,
    })
}

fn write_vertices(out: &mut impl Write, vertices: &[Point3]) -> std::io::Result<()> {
    writeln!(out, "{}", vertices.len())?;
    for v in vertices {
        writeln!(out, "{} {} {}", v.x, v.y, v.z)?;
    }
    Ok(())
}

/// Saves a surface mesh in the canonical text format.
pub fn save_surface_mesh(mesh: &SurfaceMesh, path: impl AsRef<Path>) -> Result<(), FileError> {
    let path_str = path.as_ref().display().to_string();
    let mut buf = Vec::new();
    write_vertices(&mut buf, &mesh.vertices).expect("write to vec");
    writeln!(buf, "{}", mesh.triangles.len()).expect("write to vec");
    for t in &mesh.triangles {
        writeln!(buf, "{} {} {}", t[0], t[1], t[2]).expect("write to vec");
    }
    fs::write(path.as_ref(), buf).map_err(|source| FileError::Io {
        path: path_str,
        source,
    })
}

/// Saves a tetrahedral mesh in the canonical text format.
pub fn save_tet_mesh(mesh: &TetMesh, path: impl AsRef<Path>) -> Result<(), FileError> {
    let path_str = path.as_ref().display().to_string();
    let mut buf = Vec::new();
    write_vertices(&mut buf, &mesh.vertices).expect("write to vec");
    writeln!(buf, "{}", mesh.tetrahedra.len()).expect("write to vec");
    for t in &mesh.tetrahedra {
        writeln!(buf, "{} {} {} {}", t[0], t[1], t[2], t[3]).expect("write to vec");
    }
    fs::write(path.as_ref(), buf).map_err(|source| FileError::Io {
        path: path_str,
        source,
    })
}
