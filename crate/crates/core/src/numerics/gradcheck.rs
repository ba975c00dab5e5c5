use super::{NumericsError, Tape, Tensor, Var};

/// Outcome of comparing analytic gradients against central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    /// `(parameter, flat index)` of the worst entry.
    pub worst: Option<(usize, usize)>,
    pub passed: bool,
}

/// Checks `loss_fn`'s reverse-mode gradients against central finite
/// differences. The error per entry is `|analytic - numeric| / max(1, |analytic|)`.
///
/// `loss_fn` receives the tape and one leaf per parameter and must be
/// deterministic.
pub fn gradient_check<F>(params: &[Tensor], step: f64, tolerance: f64, loss_fn: F) -> Result<GradCheck, NumericsError>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>, NumericsError>,
{
    if step.is_nan() || step <= 0.0 {
        return Err(NumericsError::Config(format!("finite-difference step must be positive, got {step}")));
    }
    let analytic: Vec<Tensor> = {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = params.iter().map(|p| tape.param(p.clone())).collect();
        let loss = loss_fn(&tape, &vars)?;
        check_finite(&tape, loss)?;
        let grads = tape.backward(loss)?;
        vars.iter().map(|&v| grads.wrt(v)).collect()
    };

    let eval = |values: &[Tensor]| -> Result<f64, NumericsError> {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = values.iter().map(|p| tape.param(p.clone())).collect();
        let loss = loss_fn(&tape, &vars)?;
        check_finite(&tape, loss)
    };

    let mut work: Vec<Tensor> = params.to_vec();
    let mut max_err = 0.0f64;
    let mut worst = None;
    for p in 0..params.len() {
        for k in 0..params[p].len() {
            let orig = work[p].values()[k];
            work[p].values_mut()[k] = orig + step;
            let plus = eval(&work)?;
            work[p].values_mut()[k] = orig - step;
            let minus = eval(&work)?;
            work[p].values_mut()[k] = orig;

            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic[p].values()[k];
            let err = (a - numeric).abs() / a.abs().max(1.0);
            if err > max_err || worst.is_none() {
                max_err = max_err.max(err);
                worst = Some((p, k));
            }
        }
    }
    Ok(GradCheck {
        max_relative_error: max_err,
        worst,
        passed: max_err < tolerance,
    })
}

fn check_finite(tape: &Tape, loss: Var<'_>) -> Result<f64, NumericsError> {
    let v = tape.value(loss);
    let value = v.item().ok_or(NumericsError::NonScalarLoss(v.shape()))?;
    if !value.is_finite() {
        return Err(NumericsError::NonFinite(format!("loss evaluated to {value}")));
    }
    Ok(value)
}
