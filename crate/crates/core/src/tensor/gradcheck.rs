use super::{Graph, NodeId, ParamSet};
use crate::error::{Error, Result};

/// Magnitude below which gradient entries are compared in absolute rather
/// than relative terms. Central differences on an O(1) loss carry roundoff of
/// roughly 1e-16 / eps, so entries smaller than this cannot be resolved.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub entries: usize,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tol
    }
}

/// Compares analytic gradients against central finite differences
/// `(f(θ+ε) − f(θ−ε)) / 2ε` for every entry of every trainable parameter.
///
/// `build` records a scalar loss on the supplied graph and must be
/// deterministic.
pub fn grad_check<F>(build: F, params: &mut ParamSet, eps: f64, tol: f64) -> Result<GradCheckReport>
where
    F: for<'a> Fn(&mut Graph<'a>) -> Result<NodeId>,
{
    if !(1e-6..=1e-4).contains(&eps) {
        return Err(Error::Contract(format!("eps {eps} outside [1e-6, 1e-4]")));
    }
    let analytic: Vec<Option<Vec<f64>>> = {
        let mut g = Graph::with_params(params);
        let loss = build(&mut g)?;
        let grads = g.backward(loss)?;
        params.ids().map(|id| grads.param(params, id)).collect()
    };
    let eval = |params: &ParamSet| -> Result<f64> {
        let mut g = Graph::with_params(params);
        let loss = build(&mut g)?;
        Ok(g.scalar(loss))
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        entries: 0,
        tol,
    };
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        if !params.tensor(id).requires_grad() {
            continue;
        }
        for k in 0..params.tensor(id).len() {
            let original = params.tensor(id).values()[k];
            params.tensor_mut(id).values_mut()[k] = original + eps;
            let plus = eval(params)?;
            params.tensor_mut(id).values_mut()[k] = original - eps;
            let minus = eval(params)?;
            params.tensor_mut(id).values_mut()[k] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let exact = analytic[id.index()].as_ref().map_or(0.0, |g| g[k]);
            let denom = exact.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
            let rel = (exact - numeric).abs() / denom;
            report.entries += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = rel.max(report.max_rel_error);
                report.worst = Some((params.name(id).to_string(), k));
            }
        }
    }
    Ok(report)
}
