use super::{Graph, NumericsError, Parameters, Var};

/// Compares reverse-mode gradients of a scalar function against central
/// differences, entry by entry over every non-frozen parameter.
///
/// `f` must be deterministic; it receives a fresh evaluation-mode graph (so
/// dropout is off) on every call. Returns the maximum over entries of
/// `|a - n| / max(1e-8, |a| + |n|)`.
pub fn grad_check<F>(f: F, params: &Parameters, eps: f64) -> Result<f64, NumericsError>
where
    F: Fn(&mut Graph, &Parameters) -> Result<Var, NumericsError>,
{
    grad_check_report(f, params, eps).map(|r| r.max_relative_error)
}

/// The entry with the largest disagreement found by [`grad_check_report`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub parameter: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Like [`grad_check`], also naming the worst entry.
pub fn grad_check_report<F>(f: F, params: &Parameters, eps: f64) -> Result<GradCheckReport, NumericsError>
where
    F: Fn(&mut Graph, &Parameters) -> Result<Var, NumericsError>,
{
    grad_check_floor(f, params, eps, 1e-8)
}

/// Central-difference check with a caller-chosen denominator floor:
/// `|a - n| / max(floor, |a| + |n|)`. Losses built from many terms carry
/// roundoff near `1e-10` in each difference quotient, so entries whose true
/// gradient is that small need a larger floor than single primitives.
pub fn grad_check_floor<F>(f: F, params: &Parameters, eps: f64, floor: f64) -> Result<GradCheckReport, NumericsError>
where
    F: Fn(&mut Graph, &Parameters) -> Result<Var, NumericsError>,
{
    let mut graph = Graph::new(0);
    let loss = f(&mut graph, params)?;
    let grads = graph.backward(loss)?;
    let analytic = graph.param_grads(&grads);

    let eval = |p: &Parameters| -> Result<f64, NumericsError> {
        let mut g = Graph::new(0);
        let out = f(&mut g, p)?;
        Ok(g.value(out).item())
    };

    let mut worst = GradCheckReport::default();
    let mut probe = params.clone();
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in names {
        if params.is_frozen(&name) {
            continue;
        }
        let n = params.value(&name)?.len();
        for i in 0..n {
            let orig = params.value(&name)?.data()[i];
            probe.get_mut(&name).expect("present").data_mut()[i] = orig + eps;
            let plus = eval(&probe)?;
            probe.get_mut(&name).expect("present").data_mut()[i] = orig - eps;
            let minus = eval(&probe)?;
            probe.get_mut(&name).expect("present").data_mut()[i] = orig;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.get(&name).map_or(0.0, |t| t.data()[i]);
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(floor);
            if rel > worst.max_relative_error {
                worst = GradCheckReport {
                    max_relative_error: rel,
                    parameter: name.clone(),
                    index: i,
                    analytic: a,
                    numeric,
                };
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    #[test]
    fn quadratic_is_exact() {
        let mut p = Parameters::new();
        p.insert("theta", Tensor::scalar(1.0));
        let err = grad_check(
            |g, p| {
                let t = g.param("theta", p.value("theta")?)?;
                let sq = g.mul(t, t)?;
                g.sum(sq)
            },
            &p,
            1e-4,
        )
        .unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn constant_function_has_zero_gradients() {
        let mut p = Parameters::new();
        p.insert("theta", Tensor::row(&[1.0, 2.0]));
        let err = grad_check(
            |g, _| {
                let c = g.constant(Tensor::scalar(3.0))?;
                g.sum(c)
            },
            &p,
            1e-4,
        )
        .unwrap();
        assert_eq!(err, 0.0);
    }
}
