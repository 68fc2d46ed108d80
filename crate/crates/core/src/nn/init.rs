use rand::Rng;

use super::ValueGrid;

/// Uniform in ±sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ValueGrid {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let mut g = ValueGrid::zeros(rows, cols);
    for v in g.data_mut() {
        *v = rng.random_range(-limit..=limit);
    }
    g
}
