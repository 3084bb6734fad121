use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Viscous Burgers problem `u_t + u u_x = ε u_xx` on `[0, 1]` with
/// `u(0, x) = sin(2πx)` and zero boundary values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BurgersConfig {
    pub epsilon: f64,
    /// Spatial cells; the grid has `nx + 1` nodes.
    pub nx: usize,
    /// Time steps between 0 and `t_end`.
    pub nt: usize,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_iter")]
    pub max_newton: usize,
    /// Initial condition amplitude; 0 gives the trivial solution.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn default_t_end() -> f64 {
    1.0
}
fn default_newton_tol() -> f64 {
    1e-12
}
fn default_newton_iter() -> usize {
    50
}
fn default_amplitude() -> f64 {
    1.0
}

impl Default for BurgersConfig {
    fn default() -> Self {
        BurgersConfig {
            epsilon: 1e-2,
            nx: 256,
            nt: 1000,
            t_end: default_t_end(),
            newton_tol: default_newton_tol(),
            max_newton: default_newton_iter(),
            amplitude: default_amplitude(),
        }
    }
}

impl BurgersConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("viscosity must be positive, got {}", self.epsilon)));
        }
        if self.nx < 2 || self.nt < 2 {
            return Err(Error::Config(format!(
                "need nx, nt >= 2, got nx = {}, nt = {}",
                self.nx, self.nt
            )));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        Ok(())
    }
}

/// Scalar field sampled on a fixed grid at increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    /// times.len() × x.len(), row-major by time.
    pub values: Vec<f64>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, x: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != times.len() * x.len() {
            return Err(Error::DimensionMismatch {
                context: "trajectory values",
                expected: times.len() * x.len(),
                got: values.len(),
            });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("trajectory times must increase strictly".into()));
        }
        Ok(Trajectory { times, x, values })
    }

    pub fn field(&self, step: usize) -> &[f64] {
        let n = self.x.len();
        &self.values[step * n..(step + 1) * n]
    }

    /// Rows `t,x,u` with a header line.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "t,x,u")?;
        for (k, t) in self.times.iter().enumerate() {
            for (x, u) in self.x.iter().zip(self.field(k)) {
                writeln!(w, "{t:.17e},{x:.17e},{u:.17e}")?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Solves the Thomas system `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i` in place of `d`.
fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64]) {
    let n = d.len();
    let mut cp = vec![0.0; n];
    let mut beta = b[0];
    cp[0] = c[0] / beta;
    d[0] /= beta;
    for i in 1..n {
        beta = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / beta;
        d[i] = (d[i] - a[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= cp[i] * d[i + 1];
    }
}

/// Backward Euler in time, Newton on each step, central differences in space
/// with the convection term in conservative form `(u²/2)_x`.
pub fn solve_burgers(cfg: &BurgersConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let nx = cfg.nx;
    let h = 1.0 / nx as f64;
    let dt = cfg.t_end / cfg.nt as f64;
    let x: Vec<f64> = (0..=nx).map(|i| i as f64 * h).collect();
    let times: Vec<f64> = (0..=cfg.nt).map(|k| k as f64 * dt).collect();
    let mut u: Vec<f64> = x
        .iter()
        .map(|&xi| cfg.amplitude * (2.0 * std::f64::consts::PI * xi).sin())
        .collect();
    u[0] = 0.0;
    u[nx] = 0.0;
    let mut values = Vec::with_capacity((cfg.nt + 1) * (nx + 1));
    values.extend_from_slice(&u);

    let m = nx - 1; // interior unknowns
    let diff = cfg.epsilon / (h * h);
    let conv = 1.0 / (4.0 * h);
    let mut a = vec![0.0; m];
    let mut b = vec![0.0; m];
    let mut c = vec![0.0; m];
    let mut r = vec![0.0; m];
    for step in 1..=cfg.nt {
        let prev = u.clone();
        let mut converged = false;
        let mut residual = f64::INFINITY;
        for _ in 0..cfg.max_newton {
            for k in 0..m {
                let i = k + 1;
                let (ul, uc, ur) = (u[i - 1], u[i], u[i + 1]);
                let f = conv * (ur * ur - ul * ul) - diff * (ur - 2.0 * uc + ul);
                r[k] = uc - prev[i] + dt * f;
                a[k] = dt * (-2.0 * conv * ul - diff);
                b[k] = 1.0 + dt * 2.0 * diff;
                c[k] = dt * (2.0 * conv * ur - diff);
            }
            residual = r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if !residual.is_finite() {
                break;
            }
            if residual <= cfg.newton_tol {
                converged = true;
                break;
            }
            thomas(&a, &b, &c, &mut r);
            for k in 0..m {
                u[k + 1] -= r[k];
            }
        }
        if !converged {
            return Err(Error::NewtonDivergence {
                step,
                t: times[step],
                residual,
            });
        }
        values.extend_from_slice(&u);
    }
    Trajectory::new(times, x, values)
}

/// Flattens a trajectory into `(t, x, u)` rows.
pub fn trajectory_to_dataset(traj: &Trajectory, drop_boundaries: bool, drop_t0: bool) -> Result<Dataset> {
    let n = traj.x.len();
    let nodes: Vec<usize> = if drop_boundaries && n >= 2 {
        (1..n - 1).collect()
    } else {
        (0..n).collect()
    };
    let steps = if drop_t0 { 1 } else { 0 }..traj.times.len();
    let mut rows = Vec::with_capacity(steps.len() * nodes.len() * 3);
    for k in steps {
        let field = traj.field(k);
        for &i in &nodes {
            rows.extend([traj.times[k], traj.x[i], field[i]]);
        }
    }
    Dataset::with_default_names(1, 1, rows)
}
