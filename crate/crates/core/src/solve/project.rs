use crate::dynamics::{Model, ProblemSpec};

/// Euclidean projection of the weights onto `{0 ≤ w ≤ 1, Σ w ≤ budget}`.
pub fn project_weights(w: &[f64], budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = w.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    if clipped.iter().sum::<f64>() <= budget {
        return clipped;
    }
    // Σ clip(w − τ) is non-increasing in τ; bracket the root then bisect.
    let total = |tau: f64| w.iter().map(|v| (v - tau).clamp(0.0, 1.0)).sum::<f64>();
    let mut lo = 0.0;
    let mut hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Solve exactly on the final active set.
    let tau = 0.5 * (lo + hi);
    let (mut free_sum, mut free, mut upper) = (0.0, 0usize, 0usize);
    for &v in w {
        let s = v - tau;
        if s >= 1.0 {
            upper += 1;
        } else if s > 0.0 {
            free += 1;
            free_sum += v;
        }
    }
    let tau = if free > 0 {
        let exact = (free_sum - (budget - upper as f64)) / free as f64;
        if (exact - tau).abs() <= 1e-9 * (1.0 + tau.abs()) {
            exact
        } else {
            tau
        }
    } else {
        tau
    };
    w.iter().map(|v| (v - tau).clamp(0.0, 1.0)).collect()
}

/// Projection of a decision vector `[u | w]` onto the feasible set: `u` is
/// clipped to its box, `w` projected onto the capped budget set.
pub fn project_feasible<M: Model>(z: &[f64], spec: &ProblemSpec<M>) -> Vec<f64> {
    let nu = spec.control_dim();
    let ulen = spec.control_len();
    let mut out: Vec<f64> = z[..ulen]
        .iter()
        .enumerate()
        .map(|(i, v)| v.clamp(spec.u_lower[i % nu], spec.u_upper[i % nu]))
        .collect();
    out.extend(project_weights(&z[ulen..], spec.budget as f64));
    out
}
