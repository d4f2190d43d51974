use nalgebra::Point3;

use super::{BoundaryFace, TetMesh, TET_FACES};

// Kuhn split: one tet per axis permutation, each walking the hex from one
// corner to the opposite one along the main diagonal.
const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// How each hex is cut into six tets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HexSplit {
    /// Every hex uses the diagonal from its lowest to its highest corner.
    Uniform,
    /// The split is reflected along each axis in odd hexes, so the pattern
    /// is mirror symmetric about every interior grid plane. Neighbors still
    /// agree on the shared face diagonal. Two-point fluxes on this pattern
    /// keep steady linear pressure fields nearly linear, unlike `Uniform`.
    #[default]
    Mirrored,
}

/// Structured `nx × ny × nz` hex grid on `[0,lx]×[0,ly]×[0,lz]`, six tets
/// per hex with the [`HexSplit::Mirrored`] pattern, boundary faces tagged
/// `xmin xmax ymin ymax zmin zmax`.
///
/// # Panics
/// If a count is zero or a length is not positive.
pub fn box_tet_mesh(nx: usize, ny: usize, nz: usize, lx: f64, ly: f64, lz: f64) -> TetMesh {
    box_tet_mesh_with([nx, ny, nz], [lx, ly, lz], HexSplit::default())
}

/// [`box_tet_mesh`] with an explicit split pattern.
pub fn box_tet_mesh_with(cells: [usize; 3], lengths: [f64; 3], split: HexSplit) -> TetMesh {
    let [nx, ny, nz] = cells;
    let [lx, ly, lz] = lengths;
    let mirrored = split == HexSplit::Mirrored;
    assert!(
        nx >= 1 && ny >= 1 && nz >= 1,
        "cell counts must be at least 1"
    );
    assert!(
        lx > 0.0 && ly > 0.0 && lz > 0.0,
        "box lengths must be positive"
    );

    let id = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push(Point3::new(
                    lx * i as f64 / nx as f64,
                    ly * j as f64 / ny as f64,
                    lz * k as f64 / nz as f64,
                ));
            }
        }
    }

    let mut tets = Vec::with_capacity(6 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let cell = [i, j, k];
                for perm in PERMUTATIONS {
                    let mut c = cell.map(|x| x + if mirrored { x % 2 } else { 0 });
                    let mut t = [id(c[0], c[1], c[2]), 0, 0, 0];
                    for (step, &axis) in perm.iter().enumerate() {
                        if mirrored && cell[axis] % 2 == 1 {
                            c[axis] -= 1;
                        } else {
                            c[axis] += 1;
                        }
                        t[step + 1] = id(c[0], c[1], c[2]);
                    }
                    let [a, b, cc, d] = t.map(|n| nodes[n]);
                    if (b - a).cross(&(cc - a)).dot(&(d - a)) < 0.0 {
                        t.swap(2, 3);
                    }
                    tets.push(t);
                }
            }
        }
    }

    let ijk = |n: usize| {
        let i = n % (nx + 1);
        let j = (n / (nx + 1)) % (ny + 1);
        let k = n / ((nx + 1) * (ny + 1));
        [i, j, k]
    };
    let provisional = TetMesh {
        nodes,
        tets,
        boundary: Vec::new(),
    };
    let limits = [nx, ny, nz];
    let names = [["xmin", "xmax"], ["ymin", "ymax"], ["zmin", "zmax"]];
    let mut boundary = Vec::new();
    for (_, (e, lf)) in provisional.exterior_faces() {
        let t = provisional.tets[e];
        let face = TET_FACES[lf].map(|k| t[k]);
        let idx = face.map(ijk);
        let tag = (0..3).find_map(|axis| {
            if idx.iter().all(|c| c[axis] == 0) {
                Some(names[axis][0])
            } else if idx.iter().all(|c| c[axis] == limits[axis]) {
                Some(names[axis][1])
            } else {
                None
            }
        });
        boundary.push(BoundaryFace {
            nodes: face,
            tag: tag
                .expect("exterior face of a box lies on a box side")
                .to_string(),
        });
    }
    TetMesh {
        boundary,
        ..provisional
    }
}
