use crate::{Result, SynthError};

/// Spherical interpolation between two vectors of equal length:
/// `sin((1-alpha)*phi)/sin(phi) * u + sin(alpha*phi)/sin(phi) * v`,
/// where `phi` is the angle between the endpoints.
///
/// Near-collinear endpoints (phi or pi - phi below 1e-6) fall back to
/// linear interpolation, where the spherical weights degenerate to 0/0.
pub fn slerp(u: &[f64], v: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if u.len() != v.len() {
        return Err(SynthError::LengthMismatch(u.len(), v.len()));
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(SynthError::ZeroNormVector);
    }
    let cos_phi = (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0);
    let phi = cos_phi.acos();
    if phi < 1e-6 || std::f64::consts::PI - phi < 1e-6 {
        return Ok(u
            .iter()
            .zip(v)
            .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
            .collect());
    }
    let sin_phi = phi.sin();
    let wu = ((1.0 - alpha) * phi).sin() / sin_phi;
    let wv = (alpha * phi).sin() / sin_phi;
    Ok(u.iter().zip(v).map(|(a, b)| wu * a + wv * b).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
