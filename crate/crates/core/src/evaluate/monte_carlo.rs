use rayon::prelude::*;

use super::data::simulate_with;
use super::mle::{mle_fit, ParameterDomain};
use super::report::{EvalReport, RunRecord, RunStatus};
use crate::dynamics::{Model, ProblemSpec};
use crate::error::{OedError, Result};
use crate::measure::{ParticleCloud, PriorSpec};
use crate::rng::stream_rng;
use crate::solve::DiscreteDesign;

/// Paired Monte Carlo comparison of designs. Run `r` draws the true
/// parameter from the continuous prior with stream `2r` and the noise with
/// stream `2r + 1`; every design sees both. Runs are independent and may be
/// evaluated in any order.
pub fn mc_evaluate<M: Model>(
    spec: &ProblemSpec<M>,
    designs: &[(String, DiscreteDesign)],
    prior: &PriorSpec,
    cloud: &ParticleCloud,
    runs: usize,
    seed: u64,
) -> Result<EvalReport> {
    if runs == 0 {
        return Err(OedError::Argument("at least one run is required".into()));
    }
    if designs.is_empty() {
        return Err(OedError::Argument("no designs to evaluate".into()));
    }
    for (i, (name, d)) in designs.iter().enumerate() {
        if name.is_empty() || name.contains([',', '\n']) || designs[..i].iter().any(|(n, _)| n == name) {
            return Err(OedError::Argument(format!("invalid or duplicate method name '{name}'")));
        }
        d.validate(spec)?;
        if d.activations.is_empty() {
            return Err(OedError::Argument(format!("design '{name}' has no activations")));
        }
    }
    let domain = ParameterDomain::for_prior(prior);
    let per_run: Vec<Vec<RunRecord>> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let theta_true = prior.sample(&mut stream_rng(seed, 2 * r as u64));
            let noise = stream_rng(seed, 2 * r as u64 + 1);
            designs
                .iter()
                .map(|(name, design)| {
                    let data = simulate_with(spec, design, &theta_true, seed, &mut noise.clone())?;
                    let rec = match mle_fit(spec, design, &data, cloud, &domain) {
                        Ok(fit) if fit.theta.iter().all(|v| v.is_finite()) => {
                            RunRecord::new(name, r, theta_true.clone(), fit.theta, RunStatus::Ok)
                        }
                        Ok(_) | Err(OedError::OptimizationFailure(_)) | Err(OedError::Numeric(_)) => RunRecord::new(
                            name,
                            r,
                            theta_true.clone(),
                            cloud.mean().to_vec(),
                            RunStatus::Failed,
                        ),
                        Err(e) => return Err(e),
                    };
                    Ok(rec)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut records = Vec::with_capacity(runs * designs.len());
    for (name, _) in designs {
        for run in &per_run {
            records.extend(run.iter().filter(|r| &r.method == name).cloned());
        }
    }
    Ok(EvalReport {
        param_dim: spec.param_dim(),
        methods: designs.iter().map(|(n, _)| n.clone()).collect(),
        records,
    })
}
