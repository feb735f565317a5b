use crate::error::{Error, Result};
use crate::linalg::{solve_spd, Matrix};

/// Minimizes `½ zᵀHz + fᵀz + constant` for symmetric positive definite `H`.
/// Returns the minimizer and the minimum value.
pub fn minimize_quadratic(h: &Matrix, f: &[f64], constant: f64) -> Result<(Vec<f64>, f64)> {
    if h.rows() != f.len() {
        return Err(Error::dims(
            "minimize_quadratic",
            format!("H is {:?}, f has {}", h.shape(), f.len()),
        ));
    }
    let z = solve_spd(h, f)?;
    let value = quadratic_value(h, f, constant, &z);
    Ok((z, value))
}

pub fn quadratic_value(h: &Matrix, f: &[f64], constant: f64, z: &[f64]) -> f64 {
    let hz = h.mul_vec(z).expect("z sized to H");
    let quad: f64 = z.iter().zip(&hz).map(|(a, b)| a * b).sum();
    let lin: f64 = f.iter().zip(z).map(|(a, b)| a * b).sum();
    0.5 * quad + lin + constant
}
