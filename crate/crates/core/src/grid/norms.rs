use super::{gradient, Field, Kind, VectorField};
use crate::error::{Error, Result};

fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Argument(format!("exponent must be in [1, ∞], got {p}")));
    }
    Ok(())
}

/// Discrete `L^p` norm of the pointwise magnitude: `(Σ |f|^p h^d)^(1/p)`, or the
/// maximum for `p = ∞`. Summation runs in node order.
pub fn lp_norm<K: Kind>(f: &Field<K>, p: f64) -> Result<f64> {
    lp_norm_where(f, p, |_| true)
}

/// [`lp_norm`] restricted to nodes selected by `keep`.
pub fn lp_norm_where<K: Kind>(f: &Field<K>, p: f64, keep: impl Fn(usize) -> bool) -> Result<f64> {
    check_exponent(p)?;
    let mags = f.magnitude();
    if p.is_infinite() {
        return Ok(mags
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .fold(0.0, |m, (_, &x)| m.max(x)));
    }
    let w = f.grid().cell_volume();
    let mut sum = 0.0;
    for (i, &x) in mags.iter().enumerate() {
        if keep(i) {
            sum += if p == 2.0 { x * x } else { x.powf(p) };
        }
    }
    Ok((sum * w).powf(1.0 / p))
}

/// `‖v‖_p + ‖∇v‖_p`.
pub fn w1p_norm(v: &VectorField, p: f64) -> Result<f64> {
    w1p_norm_where(v, p, |_| true)
}

pub fn w1p_norm_where(v: &VectorField, p: f64, keep: impl Fn(usize) -> bool) -> Result<f64> {
    Ok(lp_norm_where(v, p, &keep)? + lp_norm_where(&gradient(v), p, &keep)?)
}
