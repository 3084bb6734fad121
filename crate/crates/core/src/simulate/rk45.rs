//! Dormand–Prince 5(4) with step-size control and 4th-order dense output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Rk45Config {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Initial step; chosen automatically when `None`.
    #[serde(default)]
    pub first_step: Option<f64>,
}

impl Default for Rk45Config {
    fn default() -> Self {
        Rk45Config {
            rtol: 1e-6,
            atol: 1e-9,
            max_steps: 1_000_000,
            first_step: None,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth- minus fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Dense-output polynomial coefficients (powers θ¹..θ⁴) per stage.
const P: [[f64; 4]; 7] = [
    [1.0, -8048581381.0 / 2820520608.0, 8663915743.0 / 2820520608.0, -12715105075.0 / 11282082432.0],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200.0 / 32700410799.0, -68118460800.0 / 10900136933.0, 87487479700.0 / 32700410799.0],
    [0.0, -1754552775.0 / 470086768.0, 14199869525.0 / 1410260304.0, -10690763975.0 / 1880347072.0],
    [0.0, 127303824393.0 / 49829197408.0, -318862633887.0 / 49829197408.0, 701980252875.0 / 199316789632.0],
    [0.0, -282668133.0 / 205662961.0, 2019193451.0 / 616988883.0, -1453857185.0 / 822651844.0],
    [0.0, 40617522.0 / 29380423.0, -110615467.0 / 29380423.0, 69997945.0 / 29380423.0],
];

fn rms_norm(v: &[f64], scale: &[f64]) -> f64 {
    (v.iter().zip(scale).map(|(a, s)| (a / s) * (a / s)).sum::<f64>() / v.len().max(1) as f64).sqrt()
}

/// Integrates `y' = f(t, y)` from `t_eval[0]` and returns `y` at every entry
/// of `t_eval` (which must increase).
pub fn integrate_rk45<F>(f: F, y0: &[f64], t_eval: &[f64], cfg: &Rk45Config) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
{
    if t_eval.is_empty() {
        return Ok(Vec::new());
    }
    if t_eval.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("output times must increase strictly".into()));
    }
    if !(cfg.rtol > 0.0 && cfg.atol > 0.0) {
        return Err(Error::Config("tolerances must be positive".into()));
    }
    let n = y0.len();
    let t0 = t_eval[0];
    let t_end = *t_eval.last().unwrap();
    let mut out = Vec::with_capacity(t_eval.len());
    out.push(y0.to_vec());
    if t_eval.len() == 1 {
        return Ok(out);
    }

    let eval = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        f(t, y, dy)?;
        if dy.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration {
                t,
                reason: "right-hand side is not finite".into(),
            });
        }
        Ok(())
    };

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k = vec![vec![0.0; n]; 7];
    eval(t, &y, &mut k[0])?;
    let span = t_end - t0;
    let mut h = match cfg.first_step {
        Some(h) => h,
        None => {
            let scale: Vec<f64> = y.iter().map(|v| cfg.atol + cfg.rtol * v.abs()).collect();
            let d0 = rms_norm(&y, &scale);
            let d1 = rms_norm(&k[0], &scale);
            let guess = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
            guess.min(span)
        }
    };
    let mut next_out = 1;
    let mut ytmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut steps = 0;
    while next_out < t_eval.len() {
        if steps >= cfg.max_steps {
            return Err(Error::Integration {
                t,
                reason: format!("step budget of {} exhausted", cfg.max_steps),
            });
        }
        h = h.min(t_end - t);
        let min_h = 16.0 * f64::EPSILON * t.abs().max(span.abs()).max(1e-300);
        if h < min_h {
            return Err(Error::Integration {
                t,
                reason: format!("step size underflow (h = {h:e})"),
            });
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for j in 0..s {
                    acc += h * A[s][j] * k[j][i];
                }
                ytmp[i] = acc;
            }
            eval(t + C[s] * h, &ytmp, &mut k[s])?;
            if s == 6 {
                y_new.copy_from_slice(&ytmp);
            }
        }
        // the last stage row equals the fifth-order weights, so stage 7 is f(t + h, y_new)
        for i in 0..n {
            err[i] = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
        }
        let scale: Vec<f64> = (0..n)
            .map(|i| cfg.atol + cfg.rtol * y[i].abs().max(y_new[i].abs()))
            .collect();
        let err_norm = rms_norm(&err, &scale);
        steps += 1;
        if err_norm <= 1.0 {
            let t_new = t + h;
            while next_out < t_eval.len() && t_eval[next_out] <= t_new + 4.0 * f64::EPSILON * t_new.abs() {
                let theta = ((t_eval[next_out] - t) / h).clamp(0.0, 1.0);
                let powers = [theta, theta * theta, theta.powi(3), theta.powi(4)];
                let point: Vec<f64> = (0..n)
                    .map(|i| {
                        y[i] + h * (0..7)
                            .map(|j| k[j][i] * (0..4).map(|p| P[j][p] * powers[p]).sum::<f64>())
                            .sum::<f64>()
                    })
                    .collect();
                out.push(point);
                next_out += 1;
            }
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            let last = k[6].clone();
            k[0] = last;
            let factor = if err_norm == 0.0 { 10.0 } else { (0.9 * err_norm.powf(-0.2)).clamp(0.2, 10.0) };
            h *= factor;
        } else {
            h *= (0.9 * err_norm.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
    Ok(out)
}
