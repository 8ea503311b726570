//! Gradient checking: analytic gradients vs central finite differences.

use crate::error::{Error, Result};

use super::{Graph, Value};

/// A named parameter array handed to the checker.
#[derive(Debug, Clone)]
pub struct ParamSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, data: Vec<f64>) -> Self {
        ParamSpec {
            name: name.into(),
            rows,
            cols,
            data,
        }
    }
}

/// Per-parameter maximum relative error between analytic and numeric
/// gradients.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub tol: f64,
    pub per_param: Vec<(String, f64)>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.per_param.iter().all(|(_, e)| *e < self.tol)
    }

    /// Name and error of the worst parameter array, if any.
    pub fn worst(&self) -> Option<(&str, f64)> {
        self.per_param
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(n, e)| (n.as_str(), *e))
    }

    /// Names of the arrays that exceeded the tolerance.
    pub fn failures(&self) -> Vec<&str> {
        self.per_param
            .iter()
            .filter(|(_, e)| *e >= self.tol)
            .map(|(n, _)| n.as_str())
            .collect()
    }
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (name, err) in &self.per_param {
            let mark = if *err < self.tol { "ok  " } else { "FAIL" };
            writeln!(f, "{} {:<24} max_rel_err = {:.3e}", mark, name, err)?;
        }
        Ok(())
    }
}

// Relative error with a small floor so near-zero gradient entries do not
// amplify finite-difference round-off into spurious failures.
fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Check the analytic gradients produced by `build` against central finite
/// differences of the same builder. `build` must be deterministic (dropout
/// disabled) and return a scalar loss; it is called once per perturbed
/// entry, receiving the current parameter arrays as graph leaves in the
/// order given.
pub fn grad_check<F>(params: &[ParamSpec], mut build: F, eps: f64, tol: f64) -> Result<GradCheckReport>
where
    F: FnMut(&mut Graph, &[Value]) -> Result<Value>,
{
    if eps <= 0.0 {
        return Err(Error::Contract("grad_check requires eps > 0".into()));
    }

    let eval = |ps: &[ParamSpec], build: &mut F| -> Result<f64> {
        let mut g = Graph::new();
        let mut leaves = Vec::with_capacity(ps.len());
        for p in ps {
            leaves.push(g.leaf(p.rows, p.cols, &p.data)?);
        }
        let loss = build(&mut g, &leaves)?;
        if g.data(loss).len() != 1 {
            return Err(Error::Contract("grad_check loss must be scalar".into()));
        }
        Ok(g.data(loss)[0])
    };

    // Analytic pass.
    let mut g = Graph::new();
    let mut leaves = Vec::with_capacity(params.len());
    for p in params {
        leaves.push(g.leaf(p.rows, p.cols, &p.data)?);
    }
    let loss = build(&mut g, &leaves)?;
    if g.data(loss).len() != 1 {
        return Err(Error::Contract("grad_check loss must be scalar".into()));
    }
    g.backward(loss)?;
    let analytic: Vec<Vec<f64>> = leaves.iter().map(|&v| g.grad(v).to_vec()).collect();
    drop(g);

    for (p, a) in params.iter().zip(&analytic) {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                name: p.name.clone(),
                msg: "non-finite analytic gradient".into(),
            });
        }
    }

    // Numeric pass via the lower-level entry point.
    grad_check_with(params, &analytic, |ps| eval(ps, &mut build), eps, tol)
}

/// Lower-level variant taking precomputed analytic gradients and a plain
/// loss evaluator. `grad_check` derives both from one builder; tests can
/// feed deliberately wrong analytic gradients to exercise the harness.
pub fn grad_check_with<E>(
    params: &[ParamSpec],
    analytic: &[Vec<f64>],
    mut eval: E,
    eps: f64,
    tol: f64,
) -> Result<GradCheckReport>
where
    E: FnMut(&[ParamSpec]) -> Result<f64>,
{
    if analytic.len() != params.len() {
        return Err(Error::Contract(
            "grad_check_with: one analytic gradient per parameter array".into(),
        ));
    }
    let mut work: Vec<ParamSpec> = params.to_vec();
    let mut per_param = Vec::with_capacity(params.len());
    for pi in 0..params.len() {
        let mut worst = 0.0f64;
        for ei in 0..params[pi].data.len() {
            let orig = work[pi].data[ei];
            work[pi].data[ei] = orig + eps;
            let hi = eval(&work)?;
            work[pi].data[ei] = orig - eps;
            let lo = eval(&work)?;
            work[pi].data[ei] = orig;
            if !hi.is_finite() || !lo.is_finite() {
                return Err(Error::Numeric {
                    name: params[pi].name.clone(),
                    msg: format!("non-finite loss while perturbing entry {}", ei),
                });
            }
            let numeric = (hi - lo) / (2.0 * eps);
            worst = worst.max(rel_err(analytic[pi][ei], numeric));
        }
        per_param.push((params[pi].name.clone(), worst));
    }
    Ok(GradCheckReport { tol, per_param })
}
