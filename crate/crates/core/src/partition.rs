//! Partitioning of the assembled weight matrix onto cores.
//!
//! Neurons are assigned to cores in contiguous blocks. A matrix over `n`
//! neurons on `c` cores becomes a `c × c` grid of chunks, where
//! `chunk[a][b]` holds the connections from core `b`'s neurons into core
//! `a`'s neurons, locally reindexed. The grid always stores all `c²`
//! chunks, including empty ones.

use alloc::vec::Vec;
use thiserror::Error;

use crate::sparse::SparseMatrix;

/// Hardware limit on time-multiplexed compartments per core.
pub const MAX_NEURONS_PER_CORE: usize = 1024;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PartitionError {
    #[error("neurons per core must be in 1..={MAX_NEURONS_PER_CORE}, got {0}")]
    PerCoreOutOfRange(usize),
    #[error("layout needs at least one neuron")]
    EmptyNetwork,
    #[error("matrix shape {rows}x{cols} does not match layout over {expected} neurons")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        expected: usize,
    },
    #[error("chunk [{a}][{b}] has shape {rows}x{cols}, layout expects {expected_rows}x{expected_cols}")]
    InconsistentChunkShapes {
        a: usize,
        b: usize,
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
}

/// Contiguous assignment of neurons to cores.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreLayout {
    neurons_per_core: usize,
    ranges: Vec<(usize, usize)>,
}

impl CoreLayout {
    pub fn core_count(&self) -> usize {
        self.ranges.len()
    }

    pub fn total_neurons(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.1)
    }

    /// Half-open neuron interval of one core.
    pub fn range(&self, core: usize) -> (usize, usize) {
        self.ranges[core]
    }

    pub fn ranges(&self) -> &[(usize, usize)] {
        &self.ranges
    }

    pub fn core_size(&self, core: usize) -> usize {
        let (start, end) = self.ranges[core];
        end - start
    }

    pub fn core_of(&self, neuron: usize) -> usize {
        debug_assert!(neuron < self.total_neurons());
        neuron / self.neurons_per_core
    }
}

/// Assign `n_neurons` to cores holding `neurons_per_core` each; the last
/// core may hold fewer.
pub fn compute_layout(n_neurons: usize, neurons_per_core: usize) -> Result<CoreLayout, PartitionError> {
    if neurons_per_core == 0 || neurons_per_core > MAX_NEURONS_PER_CORE {
        return Err(PartitionError::PerCoreOutOfRange(neurons_per_core));
    }
    if n_neurons == 0 {
        return Err(PartitionError::EmptyNetwork);
    }
    let core_count = n_neurons.div_ceil(neurons_per_core);
    let ranges = (0..core_count)
        .map(|a| {
            let start = a * neurons_per_core;
            let end = usize::min(start + neurons_per_core, n_neurons);
            (start, end)
        })
        .collect();
    Ok(CoreLayout {
        neurons_per_core,
        ranges,
    })
}

/// Number of connection matrices required: core_count².
pub fn chunk_count(layout: &CoreLayout) -> usize {
    layout.core_count() * layout.core_count()
}

/// The core_count × core_count grid of chunk matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct ChunkGrid {
    layout: CoreLayout,
    chunks: Vec<SparseMatrix>,
}

impl ChunkGrid {
    pub fn layout(&self) -> &CoreLayout {
        &self.layout
    }

    /// Chunk holding connections from core `b` into core `a`.
    pub fn chunk(&self, a: usize, b: usize) -> &SparseMatrix {
        &self.chunks[a * self.layout.core_count() + b]
    }

    pub fn chunk_mut(&mut self, a: usize, b: usize) -> &mut SparseMatrix {
        &mut self.chunks[a * self.layout.core_count() + b]
    }

    pub fn chunk_total(&self) -> usize {
        self.chunks.len()
    }

    pub fn total_nnz(&self) -> usize {
        self.chunks.iter().map(SparseMatrix::nnz).sum()
    }

    /// Consume the grid into per-core row blocks: element `a` holds the
    /// chunks `[a][0..core_count)`.
    pub fn into_row_blocks(self) -> Vec<Vec<SparseMatrix>> {
        let c = self.layout.core_count();
        let mut chunks = self.chunks;
        let mut blocks = Vec::with_capacity(c);
        for _ in 0..c {
            let rest = chunks.split_off(c);
            blocks.push(chunks);
            chunks = rest;
        }
        blocks
    }

    /// Rebuild a grid from per-core row blocks (inverse of
    /// [`ChunkGrid::into_row_blocks`]).
    pub fn from_row_blocks(layout: CoreLayout, blocks: Vec<Vec<SparseMatrix>>) -> Self {
        debug_assert_eq!(blocks.len(), layout.core_count());
        let chunks = blocks.into_iter().flatten().collect();
        ChunkGrid { layout, chunks }
    }
}

/// Split a square matrix into the per-core chunk grid.
pub fn split(w: &SparseMatrix, layout: &CoreLayout) -> Result<ChunkGrid, PartitionError> {
    let n = layout.total_neurons();
    if !w.is_square() || w.rows() != n {
        return Err(PartitionError::ShapeMismatch {
            rows: w.rows(),
            cols: w.cols(),
            expected: n,
        });
    }
    let c = layout.core_count();
    let mut triplets: Vec<Vec<(usize, usize, f64)>> = Vec::with_capacity(c * c);
    triplets.resize_with(c * c, Vec::new);
    for i in 0..n {
        let a = layout.core_of(i);
        let local_row = i - layout.range(a).0;
        let (cols, vals) = w.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            let b = layout.core_of(j);
            let local_col = j - layout.range(b).0;
            triplets[a * c + b].push((local_row, local_col, v));
        }
    }
    let chunks = triplets
        .into_iter()
        .enumerate()
        .map(|(idx, t)| {
            let (a, b) = (idx / c, idx % c);
            // Triplets arrive sorted (rows then columns ascending) and
            // stored zeros must survive the round trip.
            SparseMatrix::from_sorted_triplets(layout.core_size(a), layout.core_size(b), t)
        })
        .collect();
    Ok(ChunkGrid {
        layout: layout.clone(),
        chunks,
    })
}

/// Reassemble the full matrix from a chunk grid; exact inverse of
/// [`split`] for the same layout.
pub fn merge(grid: &ChunkGrid) -> Result<SparseMatrix, PartitionError> {
    let layout = &grid.layout;
    let c = layout.core_count();
    let n = layout.total_neurons();
    for a in 0..c {
        for b in 0..c {
            let chunk = grid.chunk(a, b);
            let (er, ec) = (layout.core_size(a), layout.core_size(b));
            if chunk.rows() != er || chunk.cols() != ec {
                return Err(PartitionError::InconsistentChunkShapes {
                    a,
                    b,
                    rows: chunk.rows(),
                    cols: chunk.cols(),
                    expected_rows: er,
                    expected_cols: ec,
                });
            }
        }
    }
    let mut triplets = Vec::with_capacity(grid.total_nnz());
    for a in 0..c {
        let (row_start, _) = layout.range(a);
        for local_row in 0..layout.core_size(a) {
            for b in 0..c {
                let (col_start, _) = layout.range(b);
                let (cols, vals) = grid.chunk(a, b).row(local_row);
                for (&j, &v) in cols.iter().zip(vals) {
                    triplets.push((row_start + local_row, col_start + j, v));
                }
            }
        }
    }
    Ok(SparseMatrix::from_sorted_triplets(n, n, triplets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn random_square(n: usize, fill_permille: u64, seed: u64) -> SparseMatrix {
        let mut state = seed.wrapping_mul(0x2545F4914F6CDD1D) | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if next() % 1000 < fill_permille {
                    triplets.push((i, j, (next() % 997) as f64 / 31.0 - 15.0));
                }
            }
        }
        SparseMatrix::from_triplets(n, n, triplets)
    }

    #[test]
    fn twelve_neurons_on_three_cores() {
        let layout = compute_layout(12, 4).unwrap();
        assert_eq!(layout.core_count(), 3);
        assert_eq!(layout.ranges(), &[(0, 4), (4, 8), (8, 12)]);
        assert_eq!(chunk_count(&layout), 9);
    }

    #[test]
    fn single_full_core() {
        let layout = compute_layout(1024, 1024).unwrap();
        assert_eq!(layout.core_count(), 1);
        assert_eq!(chunk_count(&layout), 1);
    }

    #[test]
    fn last_core_holds_remainder() {
        let layout = compute_layout(500, 128).unwrap();
        assert_eq!(layout.core_count(), 4);
        let sizes: Vec<usize> = (0..4).map(|a| layout.core_size(a)).collect();
        assert_eq!(sizes, vec![128, 128, 128, 116]);
    }

    #[test]
    fn per_core_bounds_are_enforced() {
        assert_eq!(
            compute_layout(10, 0),
            Err(PartitionError::PerCoreOutOfRange(0))
        );
        assert_eq!(
            compute_layout(10, 2000),
            Err(PartitionError::PerCoreOutOfRange(2000))
        );
        assert_eq!(compute_layout(0, 4), Err(PartitionError::EmptyNetwork));
    }

    #[test]
    fn chunk_count_is_core_count_squared() {
        for per_core in [1, 2, 3, 5, 8, 64, 1024] {
            for n in [1, 2, 7, 12, 64, 100] {
                let layout = compute_layout(n, per_core).unwrap();
                assert_eq!(chunk_count(&layout), layout.core_count().pow(2));
            }
        }
    }

    #[test]
    fn split_single_core_is_identity() {
        let w = random_square(9, 350, 3);
        let layout = compute_layout(9, 64).unwrap();
        let grid = split(&w, &layout).unwrap();
        assert_eq!(grid.chunk_total(), 1);
        assert_eq!(grid.chunk(0, 0), &w);
        assert_eq!(merge(&grid).unwrap(), w);
    }

    #[test]
    fn split_produces_nine_chunks_for_three_cores() {
        let w = random_square(12, 350, 7);
        let layout = compute_layout(12, 4).unwrap();
        let grid = split(&w, &layout).unwrap();
        assert_eq!(grid.chunk_total(), 9);
        assert_eq!(grid.total_nnz(), w.nnz());
        assert_eq!(merge(&grid).unwrap(), w);
    }

    #[test]
    fn split_rejects_shape_mismatch() {
        let w = random_square(10, 300, 1);
        let layout = compute_layout(12, 4).unwrap();
        assert!(matches!(
            split(&w, &layout),
            Err(PartitionError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn merge_rejects_inconsistent_chunk_shapes() {
        let w = random_square(12, 300, 9);
        let layout = compute_layout(12, 4).unwrap();
        let mut grid = split(&w, &layout).unwrap();
        *grid.chunk_mut(1, 2) = SparseMatrix::zeros(3, 4);
        assert!(matches!(
            merge(&grid),
            Err(PartitionError::InconsistentChunkShapes { a: 1, b: 2, .. })
        ));
    }

    #[test]
    fn local_indices_map_back_through_layout_offsets() {
        // Exhaustive check on a small matrix: every chunk entry equals the
        // global entry at the offset position.
        let n = 16;
        let w = random_square(n, 400, 11);
        for per_core in 1..=n {
            let layout = compute_layout(n, per_core).unwrap();
            let grid = split(&w, &layout).unwrap();
            for a in 0..layout.core_count() {
                for b in 0..layout.core_count() {
                    for (i, j, v) in grid.chunk(a, b).iter() {
                        let gi = layout.range(a).0 + i;
                        let gj = layout.range(b).0 + j;
                        assert_eq!(w.get(gi, gj), v);
                    }
                }
            }
            assert_eq!(merge(&grid).unwrap(), w);
        }
    }

    #[test]
    fn row_block_round_trip() {
        let w = random_square(12, 350, 13);
        let layout = compute_layout(12, 5).unwrap();
        let grid = split(&w, &layout).unwrap();
        let blocks = grid.clone().into_row_blocks();
        assert_eq!(blocks.len(), 3);
        let rebuilt = ChunkGrid::from_row_blocks(layout, blocks);
        assert_eq!(rebuilt, grid);
    }
}
