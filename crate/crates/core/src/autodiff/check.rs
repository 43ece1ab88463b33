use super::{AutodiffError, Scalar, Tape};

/// A scalar function of a parameter vector that can be evaluated both on
/// plain `f64` and on a tape.
pub trait ScalarFn {
    fn eval<S: Scalar>(&self, params: &[S]) -> S;
}

impl<F: ScalarFn + ?Sized> ScalarFn for &F {
    fn eval<S: Scalar>(&self, params: &[S]) -> S {
        (**self).eval(params)
    }
}

/// Tape gradient of `f` at `params`.
pub fn tape_gradient<F: ScalarFn>(f: &F, params: &[f64]) -> Result<Vec<f64>, AutodiffError> {
    let tape = Tape::new();
    let vars = tape.params(params);
    let out = f.eval(&vars);
    tape.grad(out)
}

/// Central finite differences of `f` at `params` with step `eps`.
pub fn central_differences<F: ScalarFn>(
    f: &F,
    params: &[f64],
    eps: f64,
) -> Result<Vec<f64>, AutodiffError> {
    let mut p = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + eps;
        let plus = f.eval(&p);
        p[i] = orig - eps;
        let minus = f.eval(&p);
        p[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(AutodiffError::NonFinite { what: "finite-difference evaluation", value: if plus.is_finite() { minus } else { plus } });
        }
        out.push((plus - minus) / (2.0 * eps));
    }
    Ok(out)
}

/// Largest `|fd - g| / (|g| + eps)` over all parameters, where `g` is the
/// tape gradient and `fd` the central difference with step `eps`.
pub fn finite_diff_check<F: ScalarFn>(f: &F, params: &[f64], eps: f64) -> Result<f64, AutodiffError> {
    if !(eps > 0.0) {
        return Err(AutodiffError::InvalidStep(eps));
    }
    let g = tape_gradient(f, params)?;
    let fd = central_differences(f, params, eps)?;
    Ok(g.iter()
        .zip(&fd)
        .map(|(g, fd)| (fd - g).abs() / (g.abs() + eps))
        .fold(0.0, f64::max))
}
