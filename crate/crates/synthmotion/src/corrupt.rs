use flowcore::FlowField;
use rand::RngExt;

/// Structured corruption model for refiner training inputs: smooth
/// low-frequency error plus a global drift, mimicking accumulated
/// composition drift rather than white noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptParams {
    /// Per-cell component amplitude in pixels; cells are drawn uniform in
    /// `[-amplitude, amplitude]` and bilinearly upsampled to full resolution.
    pub amplitude: f64,
    /// Coarse grid size (cells per axis).
    pub cells: usize,
    /// Per-component drift bounds `[(x_lo, x_hi), (y_lo, y_hi)]` in pixels;
    /// one global vector is drawn per field.
    pub drift: [(f64, f64); 2],
}

impl Default for CorruptParams {
    fn default() -> Self {
        Self {
            amplitude: 4.0,
            cells: 8,
            drift: [(-2.0, 2.0), (-2.0, 2.0)],
        }
    }
}

impl CorruptParams {
    /// Symmetric drift bounds of the given magnitude.
    pub fn with_drift_max(mut self, d: f64) -> Self {
        self.drift = [(-d, d), (-d, d)];
        self
    }
}

/// Add coarse-grid noise and a global drift to a flow field. The validity
/// mask is copied unchanged; deterministic for a fixed rng state.
pub fn corrupt_flow(base: &FlowField, params: &CorruptParams, rng: &mut impl RngExt) -> FlowField {
    assert!(params.amplitude >= 0.0 && params.cells >= 1, "invalid corruption parameters");
    let (w, h) = (base.width(), base.height());
    let n = params.cells;

    let mut grid = vec![[0.0f64; 2]; n * n];
    for cell in grid.iter_mut() {
        cell[0] = rng.random_range(-params.amplitude..=params.amplitude);
        cell[1] = rng.random_range(-params.amplitude..=params.amplitude);
    }
    let drift = [
        rng.random_range(params.drift[0].0..=params.drift[0].1),
        rng.random_range(params.drift[1].0..=params.drift[1].1),
    ];

    let mut out = base.clone();
    for y in 0..h {
        // Cell centers are treated as samples at cell-center coordinates.
        let v = ((y as f64 + 0.5) * n as f64 / h as f64 - 0.5).clamp(0.0, (n - 1) as f64);
        let y0 = (v.floor() as usize).min(n.saturating_sub(2));
        let fy = v - y0 as f64;
        for x in 0..w {
            let u = ((x as f64 + 0.5) * n as f64 / w as f64 - 0.5).clamp(0.0, (n - 1) as f64);
            let x0 = (u.floor() as usize).min(n.saturating_sub(2));
            let fx = u - x0 as f64;
            let mut noise = [0.0f64; 2];
            for c in 0..2 {
                let v00 = grid[y0 * n + x0][c];
                let v10 = grid[y0 * n + x0 + 1][c];
                let v01 = grid[(y0 + 1) * n + x0][c];
                let v11 = grid[(y0 + 1) * n + x0 + 1][c];
                noise[c] = v00 * (1.0 - fx) * (1.0 - fy)
                    + v10 * fx * (1.0 - fy)
                    + v01 * (1.0 - fx) * fy
                    + v11 * fx * fy;
            }
            let cur = out.get(x, y);
            out.set(
                x,
                y,
                [
                    (cur[0] as f64 + noise[0] + drift[0]) as f32,
                    (cur[1] as f64 + noise[1] + drift[1]) as f32,
                ],
            );
        }
    }
    out
}
