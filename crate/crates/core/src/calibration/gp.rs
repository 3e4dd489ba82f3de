//! Noiseless one-dimensional Gaussian-process surrogate with a
//! power-exponential kernel.

use serde::{Deserialize, Serialize};

use super::CalibrationError;

const MAX_JITTER: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpControls {
    pub resolution: usize,
    pub kappa: f64,
    pub pow: f64,
    pub lengthscale: f64,
    pub x_scaled: bool,
    pub narrowing: bool,
}

impl Default for GpControls {
    fn default() -> Self {
        Self {
            resolution: 5000,
            kappa: 0.5,
            pow: 1.95,
            lengthscale: 1.0,
            x_scaled: true,
            narrowing: true,
        }
    }
}

impl GpControls {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        let ok = self.resolution >= 2
            && self.kappa >= 0.0
            && self.pow > 0.0
            && self.pow <= 2.0
            && self.lengthscale > 0.0;
        if ok {
            Ok(())
        } else {
            Err(CalibrationError::Controls(*self))
        }
    }
}

/// A fitted surrogate. Predictions are on the original x and y scales.
#[derive(Debug, Clone)]
pub struct GpModel {
    xs: Vec<f64>,
    chol: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    y_mean: f64,
    y_sd: f64,
    offset: f64,
    scale: f64,
    pow: f64,
    lengthscale: f64,
}

fn kernel(a: f64, b: f64, pow: f64, lengthscale: f64) -> f64 {
    (-((a - b).abs() / lengthscale).powf(pow)).exp()
}

/// Lower Cholesky factor, or `None` if the matrix is not positive definite.
fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 0.0 {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

fn forward(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; b.len()];
    for i in 0..b.len() {
        let s: f64 = (0..i).map(|k| l[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / l[i][i];
    }
    x
}

fn backward(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (b[i] - s) / l[i][i];
    }
    x
}

/// Fits the surrogate to evaluations `(xs, ys)`. With `x_scaled`, x is mapped
/// to [0, 1] over `range`; ys are standardised by their mean and SD.
pub fn gp_fit(
    xs: &[f64],
    ys: &[f64],
    controls: &GpControls,
    range: (f64, f64),
) -> Result<GpModel, CalibrationError> {
    controls.validate()?;
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(CalibrationError::TooFewPoints);
    }
    for i in 0..xs.len() {
        for j in 0..i {
            if xs[i] == xs[j] {
                return Err(CalibrationError::DuplicateX(xs[i]));
            }
        }
    }
    let (offset, scale) = if controls.x_scaled {
        (range.0, range.1 - range.0)
    } else {
        (0.0, 1.0)
    };
    let sx: Vec<f64> = xs.iter().map(|x| (x - offset) / scale).collect();
    let n = ys.len() as f64;
    let y_mean = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / (n - 1.0);
    let y_sd = if var > 0.0 { var.sqrt() } else { 1.0 };
    let sy: Vec<f64> = ys.iter().map(|y| (y - y_mean) / y_sd).collect();

    let k: Vec<Vec<f64>> = sx
        .iter()
        .map(|&a| sx.iter().map(|&b| kernel(a, b, controls.pow, controls.lengthscale)).collect())
        .collect();
    let mut jitter = 1e-12;
    let chol = loop {
        let mut kj = k.clone();
        for (i, row) in kj.iter_mut().enumerate() {
            row[i] += jitter;
        }
        if let Some(l) = cholesky(&kj) {
            break l;
        }
        if jitter >= MAX_JITTER {
            return Err(CalibrationError::IllConditioned);
        }
        jitter = (jitter * 10.0).min(MAX_JITTER);
    };
    let alpha = backward(&chol, &forward(&chol, &sy));
    Ok(GpModel {
        xs: sx,
        chol,
        alpha,
        y_mean,
        y_sd,
        offset,
        scale,
        pow: controls.pow,
        lengthscale: controls.lengthscale,
    })
}

impl GpModel {
    /// Predictive mean and standard deviation at `x`.
    pub fn predict(&self, x: f64) -> (f64, f64) {
        let sx = (x - self.offset) / self.scale;
        let ks: Vec<f64> = self
            .xs
            .iter()
            .map(|&a| kernel(sx, a, self.pow, self.lengthscale))
            .collect();
        let mu: f64 = ks.iter().zip(&self.alpha).map(|(k, a)| k * a).sum();
        let v = forward(&self.chol, &ks);
        let var = (1.0 - v.iter().map(|x| x * x).sum::<f64>()).max(0.0);
        (self.y_mean + self.y_sd * mu, self.y_sd * var.sqrt())
    }
}
