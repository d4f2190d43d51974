//! Fixtures shared by the benchmarks.

use twogrid::mandel::MandelConfig;
use twogrid::{FineGrid, TetMesh};

/// Fine and coarse meshes of the default Mandel benchmark.
pub fn mandel_meshes() -> (TetMesh, TetMesh) {
    MandelConfig::default().meshes(FineGrid::Flow)
}
