use super::{Graph, Tensor};
use crate::error::{Error, Result};
use crate::real::Real;

/// `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Compares the reverse-mode gradient of a scalar function against central
/// differences `(f(x + eps·e) - f(x - eps·e)) / 2eps`, coordinate by
/// coordinate, and returns the largest relative error.
///
/// `f` builds its computation on the graph it is handed, starting from the
/// leaf holding `x`.
pub fn grad_check<T, F>(f: F, x: &[T], shape: &[usize], eps: f64) -> Result<f64>
where
    T: Real,
    F: Fn(&mut Graph<T>, Tensor) -> Result<Tensor>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step {eps} outside [1e-7, 1e-3]"
        )));
    }
    let eval = |values: Vec<T>| -> Result<f64> {
        let mut g = Graph::new();
        let leaf = g.constant(values, shape);
        let out = f(&mut g, leaf)?;
        if g.value(out).len() != 1 {
            return Err(Error::NonScalarRoot(g.shape(out).to_vec()));
        }
        Ok(g.scalar(out).to_f64_lossy())
    };

    let mut g = Graph::new();
    let leaf = g.param(x.to_vec(), shape);
    let out = f(&mut g, leaf)?;
    let grads = g.backward(out)?;
    let zeros = vec![T::zero(); x.len()];
    let analytic = grads.get(leaf).unwrap_or(&zeros);

    let mut worst = 0.0f64;
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + T::from_f64_lossy(eps);
        let plus = eval(probe.clone())?;
        probe[i] = orig - T::from_f64_lossy(eps);
        let minus = eval(probe.clone())?;
        probe[i] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        worst = worst.max(relative_error(analytic[i].to_f64_lossy(), numeric));
    }
    Ok(worst)
}
