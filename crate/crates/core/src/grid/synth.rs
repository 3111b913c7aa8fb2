//! Synthetic map generators mirroring the layouts of common benchmark
//! families (empty rooms, random obstacles, warehouses).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::GridMap;

pub fn empty(width: usize, height: usize) -> GridMap {
    GridMap::from_passable(width, height, vec![true; width * height])
}

/// Each cell is blocked independently with probability `obstacle_pct / 100`,
/// like the `random-W-H-P` benchmark family.
pub fn random_obstacles(width: usize, height: usize, obstacle_pct: u32, seed: u64) -> GridMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = f64::from(obstacle_pct) / 100.0;
    let passable = (0..width * height).map(|_| !rng.random_bool(p)).collect();
    GridMap::from_passable(width, height, passable)
}

/// Rows of `shelf_len`-wide, one-cell-tall shelves separated by corridors,
/// surrounded by an open border of `margin` cells.
pub fn warehouse(
    shelf_len: usize,
    shelf_cols: usize,
    shelf_rows: usize,
    corridor: usize,
    margin: usize,
) -> GridMap {
    let width = 2 * margin + shelf_cols * shelf_len + shelf_cols.saturating_sub(1) * corridor;
    let height = 2 * margin + shelf_rows + shelf_rows.saturating_sub(1) * corridor;
    let mut passable = vec![true; width * height];
    for r in 0..shelf_rows {
        let y = margin + r * (1 + corridor);
        for c in 0..shelf_cols {
            let x0 = margin + c * (shelf_len + corridor);
            for x in x0..x0 + shelf_len {
                passable[y * width + x] = false;
            }
        }
    }
    GridMap::from_passable(width, height, passable)
}
