use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Graph, Tensor, Var};
use crate::Result;

/// Knobs of [`finite_diff_check`].
#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub rel_tol: f64,
    /// Relative step: `h = step · max(1, |p|)`.
    pub step: f64,
    /// Denominator floor, so gradients that are numerically zero compare absolutely.
    pub abs_floor: f64,
    /// Probe at most this many elements per parameter (chosen with `seed`); `None` probes all.
    pub max_probes: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-3,
            step: 1e-5,
            abs_floor: 1e-6,
            max_probes: None,
            seed: 0,
        }
    }
}

impl GradCheckOptions {
    pub fn with_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDeviation {
    pub param: usize,
    pub max_rel_dev: f64,
    pub worst_element: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub deviations: Vec<ParamDeviation>,
    pub rel_tol: f64,
    /// Set when the loss itself failed or went non-finite.
    pub failure: Option<String>,
    /// Probes whose ±h interval straddles a kink (one-sided slopes disagree)
    /// and where the analytic value matched one of the one-sided slopes.
    pub kinks: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
            && self
                .deviations
                .iter()
                .all(|d| d.max_rel_dev <= self.rel_tol)
    }

    pub fn max_deviation(&self) -> f64 {
        self.deviations
            .iter()
            .map(|d| d.max_rel_dev)
            .fold(0.0, f64::max)
    }
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some(msg) = &self.failure {
            return write!(f, "gradcheck failed: {msg}");
        }
        write!(
            f,
            "max rel dev {:.3e} (tol {:.1e})",
            self.max_deviation(),
            self.rel_tol
        )?;
        if let Some(worst) = self
            .deviations
            .iter()
            .max_by(|a, b| a.max_rel_dev.total_cmp(&b.max_rel_dev))
        {
            write!(
                f,
                "; worst param {} elem {}: analytic {:.6e} vs numeric {:.6e}",
                worst.param, worst.worst_element, worst.analytic, worst.numeric
            )?;
        }
        Ok(())
    }
}

fn eval_loss<F>(f: &F, params: &[Tensor<f64>]) -> Result<f64>
where
    F: for<'g> Fn(&'g Graph<f64>, &[Var<'g, f64>]) -> Result<Var<'g, f64>>,
{
    let g = Graph::new();
    let vars: Vec<_> = params.iter().map(|p| g.constant(p.clone())).collect();
    Ok(f(&g, &vars)?.to_f64())
}

/// Compare analytic gradients of a scalar function against central differences.
pub fn finite_diff_check<F>(
    f: F,
    params: &[Tensor<f64>],
    opts: &GradCheckOptions,
) -> GradCheckReport
where
    F: for<'g> Fn(&'g Graph<f64>, &[Var<'g, f64>]) -> Result<Var<'g, f64>>,
{
    let mut report = GradCheckReport {
        deviations: Vec::new(),
        rel_tol: opts.rel_tol,
        failure: None,
        kinks: 0,
    };
    let center = match eval_loss(&f, params) {
        Ok(v) => v,
        Err(e) => {
            report.failure = Some(format!("loss evaluation: {e}"));
            return report;
        }
    };

    let analytic: Vec<Tensor<f64>> = {
        let g = Graph::new();
        let vars: Vec<_> = params.iter().map(|p| g.param(p.clone())).collect();
        let loss = match f(&g, &vars) {
            Ok(l) => l,
            Err(e) => {
                report.failure = Some(format!("loss evaluation: {e}"));
                return report;
            }
        };
        if !loss.to_f64().is_finite() {
            report.failure = Some("non-finite loss at the unperturbed point".into());
            return report;
        }
        let grads = match g.backward(loss) {
            Ok(gr) => gr,
            Err(e) => {
                report.failure = Some(format!("backward: {e}"));
                return report;
            }
        };
        vars.iter()
            .zip(params)
            .map(|(v, p)| {
                grads
                    .get(*v)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(p.shape().to_vec()))
            })
            .collect()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut work: Vec<Tensor<f64>> = params.to_vec();
    for (pi, p) in params.iter().enumerate() {
        let n = p.numel();
        let probes: Vec<usize> = match opts.max_probes {
            Some(m) if m < n => {
                let mut idx = sample(&mut rng, n, m).into_vec();
                idx.sort_unstable();
                idx
            }
            _ => (0..n).collect(),
        };
        let mut dev = ParamDeviation {
            param: pi,
            max_rel_dev: 0.0,
            worst_element: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for &i in &probes {
            let orig = p.data()[i];
            let h = opts.step * orig.abs().max(1.0);
            let mut side = |delta: f64, tag: &str| -> Option<f64> {
                work[pi].data_mut()[i] = orig + delta;
                let v = eval_loss(&f, &work);
                work[pi].data_mut()[i] = orig;
                match v {
                    Ok(v) if v.is_finite() => Some(v),
                    Ok(_) => {
                        report.failure = Some(format!(
                            "non-finite loss at param {pi} element {i} ({tag}h)"
                        ));
                        None
                    }
                    Err(e) => {
                        report.failure = Some(format!(
                            "loss failed at param {pi} element {i} ({tag}h): {e}"
                        ));
                        None
                    }
                }
            };
            let (Some(plus), Some(minus)) = (side(h, "+"), side(-h, "-")) else {
                return report;
            };
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[pi].data()[i];
            let rel_dev = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(opts.abs_floor);
            let mut rel = rel_dev(a, numeric);
            if rel > opts.rel_tol {
                let (fwd, bwd) = ((plus - center) / h, (center - minus) / h);
                let one_sided = rel_dev(a, fwd).min(rel_dev(a, bwd));
                if rel_dev(fwd, bwd) > opts.rel_tol && one_sided <= opts.rel_tol {
                    report.kinks += 1;
                    rel = one_sided;
                }
            }
            if rel >= dev.max_rel_dev {
                dev = ParamDeviation {
                    param: pi,
                    max_rel_dev: rel,
                    worst_element: i,
                    analytic: a,
                    numeric,
                };
            }
        }
        report.deviations.push(dev);
    }
    report
}
