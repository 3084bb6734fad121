use rayon::prelude::*;

use super::rk45::{integrate_rk45, Rk45Config};
use super::Trajectory;
use crate::discover::DiscoveredModel;
use crate::error::{Error, Result};
use crate::features::Column;

/// Right-hand side of the per-node ODE `du/dt = L(u; t, x)`.
pub trait PointwiseRhs: Sync {
    fn rhs(&self, t: f64, x: &[f64], u: f64) -> Result<f64>;
}

impl<F> PointwiseRhs for F
where
    F: Fn(f64, &[f64], f64) -> Result<f64> + Sync,
{
    fn rhs(&self, t: f64, x: &[f64], u: f64) -> Result<f64> {
        self(t, x, u)
    }
}

/// A discovered model whose columns involve no space derivatives.
pub struct PointwiseModel<'a> {
    model: &'a DiscoveredModel,
    columns: &'a [Column],
}

impl<'a> PointwiseModel<'a> {
    pub fn new(model: &'a DiscoveredModel) -> Result<Self> {
        let columns = match model {
            DiscoveredModel::Linear(m) => &m.columns[..],
            DiscoveredModel::Operator(m) => &m.columns[..],
        };
        for c in columns {
            if let Column::Term(t) = c {
                if !t.is_pointwise() || t.factors.iter().any(|(d, _)| d.output != 0) {
                    return Err(Error::Config(
                        "rollout needs a scalar operator without space derivatives (m = 0)".into(),
                    ));
                }
            }
        }
        Ok(PointwiseModel { model, columns })
    }

    fn features(&self, t: f64, x: &[f64], u: f64) -> Result<Vec<f64>> {
        self.columns
            .iter()
            .map(|c| {
                Ok(match c {
                    Column::Bias => 1.0,
                    Column::Coord(0) => t,
                    Column::Coord(i) => *x.get(i - 1).ok_or_else(|| {
                        Error::Config(format!("operator uses space axis {i} but the grid has {}", x.len()))
                    })?,
                    Column::Term(term) => term.factors.iter().map(|(_, e)| u.powi(*e as i32)).product(),
                })
            })
            .collect()
    }
}

impl PointwiseRhs for PointwiseModel<'_> {
    fn rhs(&self, t: f64, x: &[f64], u: f64) -> Result<f64> {
        let f = self.features(t, x, u)?;
        match self.model {
            DiscoveredModel::Linear(m) => Ok(f.iter().zip(&m.coefficients).map(|(a, q)| a * q).sum()),
            DiscoveredModel::Operator(m) => m.eval(&f),
        }
    }
}

/// Integrates `du/dt = L(u; t, x)` independently at every node of a 1-D grid,
/// reporting the field at each of `times` (the first entry is the start time).
pub fn rollout_ode(op: &dyn PointwiseRhs, initial: &[f64], x: &[f64], times: &[f64], cfg: &Rk45Config) -> Result<Trajectory> {
    if initial.len() != x.len() {
        return Err(Error::DimensionMismatch {
            context: "initial field vs grid",
            expected: x.len(),
            got: initial.len(),
        });
    }
    let per_node: Vec<Vec<Vec<f64>>> = initial
        .par_iter()
        .zip(x.par_iter())
        .map(|(&u0, &xi)| {
            integrate_rk45(
                |t, y, dy| {
                    dy[0] = op.rhs(t, std::slice::from_ref(&xi), y[0])?;
                    Ok(())
                },
                &[u0],
                times,
                cfg,
            )
        })
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(times.len() * x.len());
    for k in 0..times.len() {
        values.extend(per_node.iter().map(|node| node[k][0]));
    }
    Trajectory::new(times.to_vec(), x.to_vec(), values)
}

/// Mean-square error per stamp of `traj` against `reference` over shared nodes,
/// interpolating the reference linearly in time. Stamps outside the
/// reference's time range are skipped.
pub fn rollout_mse(traj: &Trajectory, reference: &Trajectory) -> Result<Vec<(f64, f64)>> {
    let shared: Vec<(usize, usize)> = traj
        .x
        .iter()
        .enumerate()
        .filter_map(|(i, &xi)| {
            reference
                .x
                .iter()
                .position(|&xr| (xr - xi).abs() <= 1e-12 * xi.abs().max(1.0))
                .map(|j| (i, j))
        })
        .collect();
    if shared.is_empty() {
        return Err(Error::Config("trajectories share no grid nodes".into()));
    }
    let (r0, r1) = (reference.times[0], *reference.times.last().unwrap());
    let mut out = Vec::new();
    for (k, &t) in traj.times.iter().enumerate() {
        if t < r0 || t > r1 {
            continue;
        }
        let hi = reference.times.partition_point(|&s| s < t).min(reference.times.len() - 1);
        let (lo, w) = if reference.times[hi] == t || hi == 0 {
            (hi, 0.0)
        } else {
            let lo = hi - 1;
            (lo, (t - reference.times[lo]) / (reference.times[hi] - reference.times[lo]))
        };
        let field = traj.field(k);
        let (a, b) = (reference.field(lo), reference.field(hi));
        let mse = shared
            .iter()
            .map(|&(i, j)| {
                let r = if w == 0.0 { a[j] } else { (1.0 - w) * a[j] + w * b[j] };
                (field[i] - r) * (field[i] - r)
            })
            .sum::<f64>()
            / shared.len() as f64;
        out.push((t, mse));
    }
    if out.is_empty() {
        return Err(Error::Config("trajectory and reference cover disjoint time ranges".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_traj(offset: f64) -> Trajectory {
        let times = vec![0.0, 0.5, 1.0];
        let x = vec![0.25, 0.5, 0.75];
        let values = (0..9).map(|i| (i as f64 * 0.3).sin() + offset).collect();
        Trajectory::new(times, x, values).unwrap()
    }

    #[test]
    fn identical_trajectories_have_zero_error() {
        let t = grid_traj(0.0);
        assert!(rollout_mse(&t, &t).unwrap().iter().all(|&(_, e)| e == 0.0));
    }

    #[test]
    fn constant_offset_gives_its_square() {
        let curve = rollout_mse(&grid_traj(0.125), &grid_traj(0.0)).unwrap();
        assert!(curve.iter().all(|&(_, e)| (e - 0.015625).abs() < 1e-15));
    }

    #[test]
    fn disjoint_times_rejected() {
        let a = grid_traj(0.0);
        let mut b = a.clone();
        b.times = vec![5.0, 6.0, 7.0];
        assert!(rollout_mse(&a, &b).is_err());
    }

    #[test]
    fn decay_operator_rollout() {
        let op = |_t: f64, _x: &[f64], u: f64| Ok(-u);
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let traj = rollout_ode(&op, &[1.0, 2.0], &[0.0, 1.0], &times, &Rk45Config::default()).unwrap();
        for (k, t) in times.iter().enumerate() {
            assert!((traj.field(k)[0] - (-t).exp()).abs() < 1e-6);
            assert!((traj.field(k)[1] - 2.0 * (-t).exp()).abs() < 2e-6);
        }
    }
}
