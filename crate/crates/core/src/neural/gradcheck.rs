use super::{Gradients, ParamStore};
use crate::error::Result;

/// Gradients of a scalar-valued function are compared against central
/// differences with this relative-error floor on the denominator, so exact
/// zeros do not divide by zero.
pub const GRADCHECK_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub worst_param: String,
    /// Analytic and numeric derivative at `worst_param`.
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub checked: usize,
}

/// Compares analytic gradients against central differences with step `h`
/// for every scalar weight in `store`.
///
/// `f` evaluates the loss and its gradients for the store's current values.
pub fn check_gradients(
    store: &mut ParamStore,
    h: f64,
    mut f: impl FnMut(&ParamStore) -> Result<(f64, Gradients)>,
) -> Result<GradCheck> {
    let (_, analytic) = f(store)?;
    let mut out = GradCheck {
        max_relative_error: 0.0,
        worst_param: String::new(),
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        checked: 0,
    };
    for pi in 0..store.len() {
        let id = super::ParamId(pi);
        for k in 0..store.get(id).data().len() {
            let orig = store.get(id).data()[k];
            store.get_mut(id).data_mut()[k] = orig + h;
            let (fp, _) = f(store)?;
            store.get_mut(id).data_mut()[k] = orig - h;
            let (fm, _) = f(store)?;
            store.get_mut(id).data_mut()[k] = orig;

            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic.get(id).data()[k];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRADCHECK_FLOOR);
            out.checked += 1;
            if err > out.max_relative_error {
                out.max_relative_error = err;
                out.worst_param = format!("{}[{k}]", store.params()[pi].name);
                out.worst_analytic = a;
                out.worst_numeric = numeric;
            }
        }
    }
    Ok(out)
}
