//! Exact Gaussian-process regression over one-dimensional context values.
//!
//! The covariance is the squared-exponential kernel. Posterior moments use a
//! Cholesky factor of `K + noise^2 I` and two triangular solves; no explicit
//! inverse is ever formed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Jitter ladder tried after a plain factorization fails.
const JITTER_LADDER: [f64; 3] = [1e-10, 1e-8, 1e-6];

/// Squared-exponential kernel `variance * exp(-(x - x')^2 / (2 l^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub variance: f64,
    pub length_scale: f64,
}

impl Kernel {
    pub fn new(variance: f64, length_scale: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::Input(format!("kernel variance must be > 0, got {variance}")));
        }
        if !(length_scale > 0.0 && length_scale.is_finite()) {
            return Err(Error::Input(format!("length scale must be > 0, got {length_scale}")));
        }
        Ok(Self {
            variance,
            length_scale,
        })
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let d = (x - y) / self.length_scale;
        self.variance * (-0.5 * d * d).exp()
    }

    /// Gram matrix over `xs`, row-major.
    pub fn gram(&self, xs: &[f64]) -> Vec<f64> {
        let n = xs.len();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            k[i * n + i] = self.variance;
            for j in 0..i {
                let v = self.eval(xs[i], xs[j]);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        k
    }
}

/// Prior mean function of the GP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PriorMean {
    Zero,
    Constant(f64),
    /// Mean of the observed targets.
    #[default]
    EmpiricalMean,
}

/// A kernel together with the observation noise standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub kernel: Kernel,
    pub noise_std: f64,
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
///
/// On failure returns the offending (non-positive) pivot.
pub fn cholesky(a: &[f64], n: usize) -> std::result::Result<Vec<f64>, f64> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(d);
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Ok(l)
}

/// Factor `a`, escalating diagonal jitter on failure. Returns the factor and
/// the jitter that was needed.
pub fn cholesky_with_jitter(a: &[f64], n: usize) -> Result<(Vec<f64>, f64)> {
    let mut last_pivot = match cholesky(a, n) {
        Ok(l) => return Ok((l, 0.0)),
        Err(p) => p,
    };
    let mut work = a.to_vec();
    for &jitter in &JITTER_LADDER {
        for i in 0..n {
            work[i * n + i] = a[i * n + i] + jitter;
        }
        match cholesky(&work, n) {
            Ok(l) => return Ok((l, jitter)),
            Err(p) => last_pivot = p,
        }
    }
    Err(Error::Numerical {
        message: "Cholesky factorization failed".into(),
        size: n,
        jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
        min_pivot: last_pivot,
    })
}

/// Solve `L y = b` in place.
fn forward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solve `L^T x = y` in place.
fn backward_solve(l: &[f64], n: usize, y: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
}

fn log_det_from_factor(l: &[f64], n: usize) -> f64 {
    2.0 * (0..n).map(|i| l[i * n + i].ln()).sum::<f64>()
}

fn check_distinct_if_noiseless(xs: &[f64], noise_std: f64) -> Result<()> {
    if noise_std > 0.0 {
        return Ok(());
    }
    let n = xs.len();
    for i in 0..n {
        if xs[..i].contains(&xs[i]) {
            return Err(Error::Numerical {
                message: format!(
                    "input {} is repeated with zero noise; the Gram matrix is singular",
                    xs[i]
                ),
                size: n,
                jitter: 0.0,
                min_pivot: 0.0,
            });
        }
    }
    Ok(())
}

fn resolve_prior(prior: PriorMean, ys: &[f64]) -> f64 {
    match prior {
        PriorMean::Zero => 0.0,
        PriorMean::Constant(c) => c,
        PriorMean::EmpiricalMean if !ys.is_empty() => ys.iter().sum::<f64>() / ys.len() as f64,
        PriorMean::EmpiricalMean => 0.0,
    }
}

/// A GP conditioned on observations.
#[derive(Debug, Clone)]
pub struct GpModel {
    kernel: Kernel,
    noise_std: f64,
    xs: Vec<f64>,
    ys: Vec<f64>,
    prior_mean: f64,
    factor: Vec<f64>,
    // (K + noise^2 I)^{-1} (y - m)
    alpha: Vec<f64>,
    jitter: f64,
}

impl GpModel {
    /// Fit with the empirical-mean prior.
    pub fn fit(xs: &[f64], ys: &[f64], kernel: Kernel, noise_std: f64) -> Result<Self> {
        Self::fit_with_prior(xs, ys, kernel, noise_std, PriorMean::EmpiricalMean)
    }

    pub fn fit_with_prior(
        xs: &[f64],
        ys: &[f64],
        kernel: Kernel,
        noise_std: f64,
        prior: PriorMean,
    ) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Input(format!(
                "{} inputs but {} targets",
                xs.len(),
                ys.len()
            )));
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::Input(format!("noise std must be >= 0, got {noise_std}")));
        }
        if xs.iter().chain(ys).any(|v| !v.is_finite()) {
            return Err(Error::Input("GP observations must be finite".into()));
        }
        check_distinct_if_noiseless(xs, noise_std)?;
        let prior_mean = resolve_prior(prior, ys);
        Self::from_gram(xs, ys, kernel, noise_std, prior_mean, kernel.gram(xs))
    }

    /// Finish a fit from the noise-free Gram matrix of `xs` under `kernel`.
    fn from_gram(
        xs: &[f64],
        ys: &[f64],
        kernel: Kernel,
        noise_std: f64,
        prior_mean: f64,
        mut gram: Vec<f64>,
    ) -> Result<Self> {
        let n = xs.len();
        let noise_var = noise_std * noise_std;
        for i in 0..n {
            gram[i * n + i] += noise_var;
        }
        let (factor, jitter) = if n == 0 {
            (Vec::new(), 0.0)
        } else {
            cholesky_with_jitter(&gram, n)?
        };
        let mut alpha: Vec<f64> = ys.iter().map(|y| y - prior_mean).collect();
        forward_solve(&factor, n, &mut alpha);
        backward_solve(&factor, n, &mut alpha);
        Ok(Self {
            kernel,
            noise_std,
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            prior_mean,
            factor,
            alpha,
            jitter,
        })
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            kernel: self.kernel,
            noise_std: self.noise_std,
        }
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    /// Diagonal jitter that the factorization needed (0 if none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower Cholesky factor, row-major.
    pub fn factor(&self) -> &[f64] {
        &self.factor
    }

    /// Posterior mean and variance at `x`; the variance is clamped at 0.
    pub fn posterior(&self, x: f64) -> (f64, f64) {
        let n = self.len();
        let mut v: Vec<f64> = self.xs.iter().map(|xi| self.kernel.eval(x, *xi)).collect();
        let mu = self.prior_mean + v.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
        forward_solve(&self.factor, n, &mut v);
        let var = self.kernel.variance - v.iter().map(|a| a * a).sum::<f64>();
        (mu, var.max(0.0))
    }

    /// `log p(y | X)` under the fitted hyperparameters and prior mean.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.len();
        let fit: f64 = self
            .ys
            .iter()
            .zip(&self.alpha)
            .map(|(y, a)| (y - self.prior_mean) * a)
            .sum();
        -0.5 * fit - 0.5 * log_det_from_factor(&self.factor, n) - 0.5 * n as f64 * LN_2PI
    }
}

/// Cartesian grid searched by [`select_hyperparams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub noise_stds: Vec<f64>,
    pub length_scales: Vec<f64>,
    pub variances: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        Self {
            noise_stds: vec![0.001, 0.01, 0.1, 1.0],
            length_scales: log_space(0.01, 100.0, 13),
            variances: vec![0.25, 1.0, 4.0],
        }
    }
}

impl HyperGrid {
    pub fn validate(&self) -> Result<()> {
        let all = self
            .noise_stds
            .iter()
            .chain(&self.length_scales)
            .chain(&self.variances);
        if self.noise_stds.is_empty() || self.length_scales.is_empty() || self.variances.is_empty() {
            return Err(Error::Config("hyperparameter grid axes must be non-empty".into()));
        }
        if self.noise_stds.iter().any(|v| !(*v >= 0.0)) || all.clone().any(|v| !v.is_finite()) {
            return Err(Error::Config("noise levels must be finite and >= 0".into()));
        }
        if self.length_scales.iter().chain(&self.variances).any(|v| !(*v > 0.0)) {
            return Err(Error::Config("length scales and variances must be > 0".into()));
        }
        Ok(())
    }
}

/// `count` points evenly spaced in log10 between `lo` and `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

/// Hyperparameters used before there are two observations.
pub fn default_hyperparams(span: f64) -> Hyperparams {
    Hyperparams {
        kernel: Kernel {
            variance: 1.0,
            length_scale: if span > 0.0 { span / 4.0 } else { 1.0 },
        },
        noise_std: 0.1,
    }
}

/// Maximize the log marginal likelihood over `grid`.
///
/// The grid is scanned noise-major, then length scale, then variance, all
/// ascending; only a strictly larger likelihood replaces the incumbent, so
/// ties go to the smallest noise and then the smallest length scale. Grid
/// points whose factorization fails are skipped. With fewer than two
/// observations the defaults for `span` are returned.
pub fn select_hyperparams(xs: &[f64], ys: &[f64], grid: &HyperGrid, span: f64) -> Hyperparams {
    if xs.len() < 2 {
        return default_hyperparams(span);
    }
    let prior_mean = resolve_prior(PriorMean::EmpiricalMean, ys);
    // unit-variance Gram matrices, one per length scale
    let unit: Vec<Vec<f64>> = grid
        .length_scales
        .iter()
        .map(|&length_scale| {
            Kernel {
                variance: 1.0,
                length_scale,
            }
            .gram(xs)
        })
        .collect();
    let mut best: Option<(f64, Hyperparams)> = None;
    for &noise_std in &grid.noise_stds {
        if check_distinct_if_noiseless(xs, noise_std).is_err() {
            continue;
        }
        for (&length_scale, base) in grid.length_scales.iter().zip(&unit) {
            for &variance in &grid.variances {
                let kernel = Kernel {
                    variance,
                    length_scale,
                };
                let gram = base.iter().map(|k| variance * k).collect();
                let Ok(model) = GpModel::from_gram(xs, ys, kernel, noise_std, prior_mean, gram) else {
                    continue;
                };
                let lml = model.log_marginal_likelihood();
                if !lml.is_finite() {
                    continue;
                }
                if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                    best = Some((lml, Hyperparams { kernel, noise_std }));
                }
            }
        }
    }
    best.map(|(_, h)| h).unwrap_or_else(|| default_hyperparams(span))
}

/// Empirical information gain `1/2 log det(I + noise^-2 K)` of the points
/// `xs` under `kernel`.
pub fn information_gain(kernel: &Kernel, noise_std: f64, xs: &[f64]) -> Result<f64> {
    if !(noise_std > 0.0 && noise_std.is_finite()) {
        return Err(Error::Input(format!(
            "information gain needs a positive noise std, got {noise_std}"
        )));
    }
    let n = xs.len();
    if n == 0 {
        return Ok(0.0);
    }
    let scale = 1.0 / (noise_std * noise_std);
    let mut a = kernel.gram(xs);
    for (idx, v) in a.iter_mut().enumerate() {
        *v *= scale;
        if idx % (n + 1) == 0 {
            *v += 1.0;
        }
    }
    let (l, _) = cholesky_with_jitter(&a, n)?;
    Ok(0.5 * log_det_from_factor(&l, n))
}
