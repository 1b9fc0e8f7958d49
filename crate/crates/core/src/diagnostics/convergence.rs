//! Grid and time-step refinement studies.

use serde::{Deserialize, Serialize};

use crate::analytic::{eval_field, TransparencySolution};
use crate::solver::{init_from_analytic, run, run_with_reference, Result, SimConfig, SimState, SolverError};

use super::trajectory_error;

/// Least-squares slope of log(error) against log(spacing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub spacings: Vec<f64>,
    pub errors: Vec<f64>,
    /// Fitted order, or None when the errors do not decrease monotonically.
    pub order: Option<f64>,
    /// log2 ratios of successive errors.
    pub pairwise: Vec<f64>,
    pub warning: Option<String>,
}

pub fn fit_order(spacings: &[f64], errors: &[f64]) -> OrderFit {
    let pairwise: Vec<f64> = errors
        .windows(2)
        .zip(spacings.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect();
    let mut fit = OrderFit {
        spacings: spacings.to_vec(),
        errors: errors.to_vec(),
        order: None,
        pairwise,
        warning: None,
    };
    if spacings.len() != errors.len() || spacings.len() < 2 {
        fit.warning = Some("need at least two levels".into());
        return fit;
    }
    if errors.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        fit.warning = Some("non-positive or non-finite error".into());
        return fit;
    }
    if errors.windows(2).any(|e| e[1] >= e[0]) {
        fit.warning = Some(format!("error sequence is not monotone: {errors:?}"));
        return fit;
    }
    let xs: Vec<f64> = spacings.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    fit.order = Some(sxy / sxx);
    fit
}

/// What is compared with the analytic solution in a spatial study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryMetric {
    /// max |x_p(t) - (v_p t + x_init)|
    #[default]
    Position,
    /// max nodal |u - u_exact| at t_end
    Field,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub spatial: OrderFit,
    pub temporal: OrderFit,
}

/// Error against `sol` on `levels` grids, each halving dx (and dt) of the
/// previous one.
pub fn spatial_convergence(
    base: &SimConfig,
    sol: &TransparencySolution,
    levels: usize,
    metric: TrajectoryMetric,
) -> Result<OrderFit> {
    if levels < 2 {
        return Err(SolverError::Config("a convergence study needs at least 2 levels".into()));
    }
    let mut spacings = Vec::with_capacity(levels);
    let mut errors = Vec::with_capacity(levels);
    for i in 0..levels {
        let cfg = base.refined(1 << i);
        let init = init_from_analytic(sol, &cfg)?;
        let out = run_with_reference(&cfg, &init, Some(sol))?;
        if let crate::solver::RunStatus::Aborted { error, .. } = out.status {
            return Err(error);
        }
        let err = match metric {
            TrajectoryMetric::Position => trajectory_error(&out, sol),
            TrajectoryMetric::Field => {
                let st = &out.final_state;
                let grid = &cfg.grid;
                (0..grid.nodes())
                    .map(|j| (st.field.u[j] - eval_field(sol, st.t, grid.x(j))).abs())
                    .fold(0.0, f64::max)
            }
        };
        spacings.push(cfg.grid.dx());
        errors.push(err);
    }
    Ok(fit_order(&spacings, &errors))
}

/// Self-convergence in time on a fixed grid: the final field at dt/2^i is
/// compared with the one at dt/2^(i+1). `levels` runs give `levels - 1`
/// errors.
pub fn temporal_convergence(base: &SimConfig, init: &SimState, levels: usize) -> Result<OrderFit> {
    if levels < 3 {
        return Err(SolverError::Config("a temporal study needs at least 3 levels".into()));
    }
    let mut finals = Vec::with_capacity(levels);
    let mut steps = Vec::with_capacity(levels);
    for i in 0..levels {
        let mut cfg = *base;
        cfg.dt = base.dt / (1u64 << i) as f64;
        cfg.output_stride = usize::MAX / 2;
        let out = run(&cfg, init)?;
        if let crate::solver::RunStatus::Aborted { error, .. } = out.status {
            return Err(error);
        }
        finals.push(out.final_state);
        steps.push(cfg.dt);
    }
    let errors: Vec<f64> = finals
        .windows(2)
        .map(|w| {
            let a = w[0].field.u.iter().chain(&w[0].field.v);
            let b = w[1].field.u.iter().chain(&w[1].field.v);
            a.zip(b).map(|(p, q)| (p - q).abs()).fold((w[0].bead.x_p - w[1].bead.x_p).abs(), f64::max)
        })
        .collect();
    Ok(fit_order(&steps[..levels - 1], &errors))
}

/// Spatial study against `sol` plus a temporal self-convergence study on the
/// base grid.
pub fn convergence_study(base: &SimConfig, sol: &TransparencySolution, levels: usize) -> Result<ConvergenceStudy> {
    let spatial = spatial_convergence(base, sol, levels, TrajectoryMetric::Position)?;
    let init = init_from_analytic(sol, base)?;
    let temporal = temporal_convergence(base, &init, levels.max(3))?;
    Ok(ConvergenceStudy { spatial, temporal })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let h = [0.1, 0.05, 0.025, 0.0125];
        let e: Vec<f64> = h.iter().map(|x| 3.0 * x * x).collect();
        let f = fit_order(&h, &e);
        assert!((f.order.unwrap() - 2.0).abs() < 1e-12);
        assert!(f.pairwise.iter().all(|p| (p - 2.0).abs() < 1e-12));
    }

    #[test]
    fn non_monotone_has_no_order() {
        let f = fit_order(&[0.1, 0.05, 0.025], &[1e-3, 2e-4, 3e-4]);
        assert!(f.order.is_none());
        assert!(f.warning.is_some());
    }
}
