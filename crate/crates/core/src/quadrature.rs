//! Composite Simpson quadrature.

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Default node count for divergence integrals.
pub const DEFAULT_NODES: usize = 2001;

/// Nodes and weights of the composite Simpson rule on `[a, b]`.
///
/// `n_nodes` must be odd and at least 3.
pub fn simpson_rule<T: Scalar>(a: T, b: T, n_nodes: usize) -> Result<(Vec<T>, Vec<T>)> {
    check_nodes(n_nodes)?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(invalid("interval", "endpoints must be finite"));
    }
    let intervals = n_nodes - 1;
    let h = (b - a) / T::from_usize_lossy(intervals);
    let third = h / T::lit(3.0);
    let mut nodes = Vec::with_capacity(n_nodes);
    let mut weights = Vec::with_capacity(n_nodes);
    for i in 0..n_nodes {
        // the last node is pinned to b so pieces tile exactly
        let x = if i == intervals {
            b
        } else {
            a + h * T::from_usize_lossy(i)
        };
        let w = if i == 0 || i == intervals {
            T::one()
        } else if i % 2 == 1 {
            T::lit(4.0)
        } else {
            T::lit(2.0)
        };
        nodes.push(x);
        weights.push(w * third);
    }
    Ok((nodes, weights))
}

/// `∫_a^b f(x) dx` by composite Simpson with `n_nodes` nodes.
pub fn simpson<T: Scalar>(f: impl Fn(T) -> T, a: T, b: T, n_nodes: usize) -> Result<T> {
    let (nodes, weights) = simpson_rule(a, b, n_nodes)?;
    Ok(nodes
        .into_iter()
        .zip(weights)
        .fold(T::zero(), |acc, (x, w)| acc + w * f(x)))
}

pub(crate) fn check_nodes(n_nodes: usize) -> Result<()> {
    if n_nodes < 3 || n_nodes.is_multiple_of(2) {
        return Err(invalid(
            "n_nodes",
            format!("Simpson needs an odd node count >= 3, got {n_nodes}"),
        ));
    }
    Ok(())
}
