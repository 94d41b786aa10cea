//! Central finite-difference verification of analytic gradients.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::forward::{forward_teacher_forced, teacher_forced_loss};
use crate::model::Model;
use crate::nn::Dropout;
use crate::params::ParamStore;
use crate::plan::RecordPlan;
use crate::tape::{Grads, Tape};

/// Denominator floor of the relative error, so entries whose true gradient
/// is zero are judged by absolute error.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub eps: f64,
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares the gradient returned by `f` at `params` with central
/// differences of its value, over every parameter entry.
pub fn check_gradients<F>(params: &ParamStore<f64>, eps: f64, f: F) -> Result<GradCheckReport, ModelError>
where
    F: Fn(&ParamStore<f64>, bool) -> Result<(f64, Option<Grads<f64>>), ModelError>,
{
    let (_, grads) = f(params, true)?;
    let grads = grads.expect("gradient requested");
    let mut work = params.clone();
    let mut report = GradCheckReport {
        eps,
        checked: 0,
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };
    for i in 0..params.tensors().len() {
        for j in 0..params.tensors()[i].len() {
            let x = params.tensors()[i].data[j];
            work.tensors_mut()[i].data[j] = x + eps;
            let (up, _) = f(&work, false)?;
            work.tensors_mut()[i].data[j] = x - eps;
            let (down, _) = f(&work, false)?;
            work.tensors_mut()[i].data[j] = x;
            let numeric = (up - down) / (2.0 * eps);
            let analytic = grads.data[i][j];
            let err = relative_error(analytic, numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst_param.is_empty() {
                report.max_rel_error = err;
                report.worst_param = params.names()[i].clone();
                report.worst_index = j;
                report.worst_analytic = analytic;
                report.worst_numeric = numeric;
            }
        }
    }
    Ok(report)
}

/// Summed teacher-forced loss of `plans` and optionally its gradient.
pub fn model_loss(model: &Model<f64>, params: &ParamStore<f64>, plans: &[RecordPlan<f64>], grad: bool) -> Result<(f64, Option<Grads<f64>>), ModelError> {
    let mut total = 0.0;
    let mut grads = grad.then(|| Grads::zeros_like(params));
    for plan in plans {
        let mut tape = Tape::new(params);
        let heads = forward_teacher_forced(model, &mut tape, plan, &mut Dropout::off())?;
        let terms = teacher_forced_loss(model, &mut tape, plan, &heads);
        total += tape.scalar(terms.total);
        if let Some(g) = grads.as_mut() {
            tape.backward_into(terms.total, g);
        }
    }
    Ok((total, grads))
}

/// Checks the full model's gradient on one record with dropout disabled.
pub fn grad_check(model: &Model<f64>, plan: &RecordPlan<f64>, eps: f64) -> Result<GradCheckReport, ModelError> {
    check_gradients(&model.params, eps, |p, g| model_loss(model, p, std::slice::from_ref(plan), g))
}
