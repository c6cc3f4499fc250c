use crate::error::{Error, Result};

use super::graph::{ComputeGraph, NodeId};
use super::tensor::Tensor;

/// Compares analytic gradients against central differences.
///
/// `build` must construct the same scalar objective every time it is called
/// with the given parameter leaves. Returns the worst relative discrepancy
/// max |analytic - numeric| / max(1, |analytic|) over all parameter
/// coordinates; it does not judge the result, callers pick the threshold.
pub fn grad_check<F>(build: F, params: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&mut ComputeGraph, &[NodeId]) -> Result<NodeId>,
{
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(Error::Domain(format!(
            "grad_check eps must lie in (0, 1e-2], got {eps}"
        )));
    }

    let mut graph = ComputeGraph::new();
    let ids: Vec<NodeId> = params.iter().map(|p| graph.leaf(p.clone())).collect();
    let target = build(&mut graph, &ids)?;
    if graph.value(target).len() != 1 {
        return Err(Error::Contract(
            "grad_check objective must be scalar".into(),
        ));
    }
    check_finite(graph.value(target).values()[0])?;
    graph.backward(target)?;
    let analytic: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| graph.grad(id).expect("leaf gradient").to_vec())
        .collect();

    let eval = |current: &[Tensor]| -> Result<f64> {
        let mut graph = ComputeGraph::new();
        let ids: Vec<NodeId> = current.iter().map(|p| graph.constant(p.clone())).collect();
        let target = build(&mut graph, &ids)?;
        let v = graph.value(target).values()[0];
        check_finite(v)?;
        Ok(v)
    };

    let mut work: Vec<Tensor> = params.to_vec();
    let mut worst = 0.0f64;
    for (pi, grads) in analytic.iter().enumerate() {
        for (ci, &a) in grads.iter().enumerate() {
            let orig = work[pi].values()[ci];
            work[pi].values_mut()[ci] = orig + eps;
            let plus = eval(&work)?;
            work[pi].values_mut()[ci] = orig - eps;
            let minus = eval(&work)?;
            work[pi].values_mut()[ci] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let rel = (a - numeric).abs() / a.abs().max(1.0);
            if rel > worst {
                worst = rel;
            }
        }
    }
    Ok(worst)
}

fn check_finite(v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric {
            step: 0,
            message: format!("objective evaluated to {v}"),
        })
    }
}
