//! `tetmesh v1` ASCII reader and writer.
//!
//! ```text
//! tetmesh v1
//! nodes <N>
//! <x> <y> <z>
//! tets <M>
//! <n0> <n1> <n2> <n3>
//! boundary <F>
//! <n0> <n1> <n2> <tag>
//! ```
//!
//! Ids are 0-based. Lines whose first non-blank character is `#` and blank
//! lines are ignored. Coordinates are written with 17 significant digits.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::Point3;

use super::{BoundaryFace, MeshError, TetMesh};

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    fn next_tokens(&mut self, expecting: &str) -> Result<(usize, Vec<&'a str>), MeshError> {
        for (i, raw) in self.inner.by_ref() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            self.last = i + 1;
            return Ok((i + 1, line.split_whitespace().collect()));
        }
        Err(MeshError::Parse {
            line: self.last + 1,
            message: format!("unexpected end of file, expected {expecting}"),
        })
    }

    fn header(&mut self, keyword: &str) -> Result<usize, MeshError> {
        let (line, toks) = self.next_tokens(keyword)?;
        match toks.as_slice() {
            [k, n] if *k == keyword => parse_tok(n, line),
            _ => Err(MeshError::Parse {
                line,
                message: format!("expected `{keyword} <count>`"),
            }),
        }
    }
}

fn parse_tok<T: FromStr>(tok: &str, line: usize) -> Result<T, MeshError> {
    tok.parse().map_err(|_| MeshError::Parse {
        line,
        message: format!("cannot parse `{tok}`"),
    })
}

fn expect_len(toks: &[&str], n: usize, line: usize, what: &str) -> Result<(), MeshError> {
    if toks.len() == n {
        Ok(())
    } else {
        Err(MeshError::Parse {
            line,
            message: format!("{what} line needs {n} fields, found {}", toks.len()),
        })
    }
}

/// Parses a mesh file. Returns the mesh and the number of tets whose
/// orientation had to be flipped.
pub fn load_mesh(text: &str) -> Result<(TetMesh, usize), MeshError> {
    let mut lines = Lines::new(text);
    let (line, toks) = lines.next_tokens("header")?;
    if toks != ["tetmesh", "v1"] {
        return Err(MeshError::Parse {
            line,
            message: "expected header `tetmesh v1`".into(),
        });
    }

    let n_nodes = lines.header("nodes")?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (line, toks) = lines.next_tokens("node coordinates")?;
        expect_len(&toks, 3, line, "node")?;
        nodes.push(Point3::new(
            parse_tok(toks[0], line)?,
            parse_tok(toks[1], line)?,
            parse_tok(toks[2], line)?,
        ));
    }

    let n_tets = lines.header("tets")?;
    let mut tets = Vec::with_capacity(n_tets);
    for _ in 0..n_tets {
        let (line, toks) = lines.next_tokens("tet connectivity")?;
        expect_len(&toks, 4, line, "tet")?;
        tets.push([
            parse_tok(toks[0], line)?,
            parse_tok(toks[1], line)?,
            parse_tok(toks[2], line)?,
            parse_tok(toks[3], line)?,
        ]);
    }

    let n_faces = lines.header("boundary")?;
    let mut boundary = Vec::with_capacity(n_faces);
    for _ in 0..n_faces {
        let (line, toks) = lines.next_tokens("boundary face")?;
        expect_len(&toks, 4, line, "boundary")?;
        boundary.push(BoundaryFace {
            nodes: [
                parse_tok(toks[0], line)?,
                parse_tok(toks[1], line)?,
                parse_tok(toks[2], line)?,
            ],
            tag: toks[3].to_string(),
        });
    }

    if let Ok((line, _)) = lines.next_tokens("") {
        return Err(MeshError::Parse {
            line,
            message: "trailing content after boundary section".into(),
        });
    }
    TetMesh::new(nodes, tets, boundary)
}

pub fn write_mesh(mesh: &TetMesh) -> String {
    let mut out = String::new();
    out.push_str("tetmesh v1\n");
    let _ = writeln!(out, "nodes {}", mesh.num_nodes());
    for p in mesh.nodes() {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", p.x, p.y, p.z);
    }
    let _ = writeln!(out, "tets {}", mesh.num_tets());
    for t in mesh.tets() {
        let _ = writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(out, "boundary {}", mesh.boundary().len());
    for f in mesh.boundary() {
        let _ = writeln!(
            out,
            "{} {} {} {}",
            f.nodes[0], f.nodes[1], f.nodes[2], f.tag
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: &str = "tetmesh v1
# a single tet
nodes 4
0 0 0
1 0 0
0 1 0
0 0 1
tets 1
0 1 2 3
boundary 1
0 1 2 bottom
";

    #[test]
    fn unit_file_loads() {
        let (m, repaired) = load_mesh(UNIT).unwrap();
        assert_eq!(repaired, 0);
        assert_eq!(m.num_tets(), 1);
        assert!((m.volume(0) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(m.boundary()[0].tag, "bottom");
    }

    #[test]
    fn swapped_vertices_are_repaired() {
        let text = UNIT.replace("0 1 2 3\n", "1 0 2 3\n");
        let (m, repaired) = load_mesh(&text).unwrap();
        assert_eq!(repaired, 1);
        assert!((m.volume(0) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn bad_node_id_is_an_index_error() {
        let text = UNIT.replace("0 1 2 3\n", "0 1 2 99\n");
        assert!(matches!(
            load_mesh(&text),
            Err(MeshError::Index { node: 99, .. })
        ));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = UNIT.replace("1 0 0\n", "1 zero 0\n");
        match load_mesh(&text) {
            Err(MeshError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            load_mesh("tetmesh v2\n"),
            Err(MeshError::Parse { line: 1, .. })
        ));
        let truncated = "tetmesh v1\nnodes 2\n0 0 0\n";
        assert!(matches!(load_mesh(truncated), Err(MeshError::Parse { .. })));
    }

    #[test]
    fn write_then_load_is_exact() {
        let (m, _) = load_mesh(UNIT).unwrap();
        let m =
            m.map_nodes(|p| Point3::new(p.x * 0.1 + 1.0 / 3.0, p.y * std::f64::consts::PI, p.z));
        let (back, _) = load_mesh(&write_mesh(&m)).unwrap();
        assert_eq!(back, m);
    }
}
