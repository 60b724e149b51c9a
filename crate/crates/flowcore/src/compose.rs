use crate::sample::{sample_grid_f32, sample_mask};
use crate::{FlowError, FlowField, Result};

/// Compose two displacement fields: `(F o G)(x) = F(x) + G(x + F(x))`,
/// with `G` bilinearly interpolated at the non-integer lookup point.
///
/// A result pixel is valid when the `F` pixel is valid, the lookup lands
/// inside the grid, and every `G` neighbor contributing to the blend is
/// valid. Chaining left to right turns stepwise flows into a direct flow.
pub fn compose_flows(first: &FlowField, second: &FlowField) -> Result<FlowField> {
    if !first.same_dims(second) {
        return Err(FlowError::DimensionMismatch(format!(
            "compose {}x{} with {}x{}",
            first.width(),
            first.height(),
            second.width(),
            second.height()
        )));
    }
    let (w, h) = (first.width(), first.height());
    let gx: Vec<f32> = second.vectors().iter().map(|v| v[0]).collect();
    let gy: Vec<f32> = second.vectors().iter().map(|v| v[1]).collect();

    let mut out = FlowField::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let f = first.vectors()[i];
            let lx = x as f64 + f[0] as f64;
            let ly = y as f64 + f[1] as f64;
            let in_bounds = lx >= 0.0 && ly >= 0.0 && lx <= (w - 1) as f64 && ly <= (h - 1) as f64;

            // Integer lookups fall out exactly: the blend weights are 0/1,
            // so composing with a zero field reproduces G bit for bit.
            let sx = sample_grid_f32(&gx, w, h, lx, ly);
            let sy = sample_grid_f32(&gy, w, h, lx, ly);
            let g_ok = sample_mask(second.valid_mask(), w, h, lx, ly);

            out.vectors_mut()[i] = [(f[0] as f64 + sx) as f32, (f[1] as f64 + sy) as f32];
            out.valid_mask_mut()[i] = first.valid_mask()[i] && in_bounds && g_ok;
        }
    }
    Ok(out)
}

/// Left-associative fold of a flow chain:
/// `F_{0->1} o F_{1->2} o ... o F_{K-1->K}`.
pub fn compose_chain(flows: &[FlowField]) -> Result<FlowField> {
    let (head, rest) = flows
        .split_first()
        .ok_or_else(|| FlowError::DimensionMismatch("empty flow chain".into()))?;
    let mut acc = head.clone();
    for f in rest {
        acc = compose_flows(&acc, f)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_then_g_returns_g_exactly() {
        let g = FlowField::from_fn(16, 12, |x, y| [(x as f32 * 0.1).sin(), (y as f32 * 0.2).cos()]);
        let zero = FlowField::zeros(16, 12);
        let c = compose_flows(&zero, &g).unwrap();
        assert_eq!(c.vectors(), g.vectors());
        assert!(c.valid_mask().iter().all(|&m| m));
    }

    #[test]
    fn f_then_zero_returns_f_on_in_bounds_pixels() {
        let f = FlowField::constant(10, 10, 1.5, -0.5);
        let zero = FlowField::zeros(10, 10);
        let c = compose_flows(&f, &zero).unwrap();
        for y in 1..10 {
            for x in 0..8 {
                assert_eq!(c.get(x, y), f.get(x, y));
                assert!(c.is_valid(x, y));
            }
        }
        // Lookup from the top row leaves the grid.
        assert!(!c.is_valid(0, 0));
    }

    #[test]
    fn constant_flows_add() {
        let a = FlowField::constant(20, 20, 2.0, 0.0);
        let b = FlowField::constant(20, 20, 0.0, 3.0);
        let c = compose_flows(&a, &b).unwrap();
        for y in 0..17 {
            for x in 0..18 {
                assert_eq!(c.get(x, y), [2.0, 3.0]);
                assert!(c.is_valid(x, y));
            }
        }
    }

    #[test]
    fn invalid_second_field_neighbors_invalidate_result() {
        let f = FlowField::constant(8, 8, 0.5, 0.0);
        let mut g = FlowField::zeros(8, 8);
        g.set_valid(4, 2, false);
        let c = compose_flows(&f, &g).unwrap();
        // Lookup from (3,2) blends neighbors (3,2) and (4,2).
        assert!(!c.is_valid(3, 2));
        assert!(c.is_valid(3, 3));
    }

    #[test]
    fn mismatched_dims_error() {
        let a = FlowField::zeros(4, 4);
        let b = FlowField::zeros(4, 5);
        assert!(compose_flows(&a, &b).is_err());
    }

    #[test]
    fn chain_requires_at_least_one_flow() {
        assert!(compose_chain(&[]).is_err());
    }
}
