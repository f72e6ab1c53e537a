//! Synthetic transfer matrices with controllable structure.
//!
//! Generated matrices live in `[0, 1]` already (entries are clamped, not
//! renormalized), so `theta_true` stays the literal slope wherever the clamp
//! is inactive. Noise touches off-diagonal entries only; the diagonal is the
//! training-performance profile exactly.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::context::ContextSpace;
use crate::error::{Error, Result};
use crate::gp::{cholesky_with_jitter, Kernel};
use crate::matrix::{Normalization, TransferMatrix};

/// Shape of the training-performance profile `J(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "profile")]
pub enum JProfile {
    Constant { value: f64 },
    Sinusoidal { base: f64, amplitude: f64, period: f64 },
    /// `mean + std * f(x)` with `f` a unit-variance SE-kernel GP path.
    Sampled { mean: f64, std: f64, length_scale: f64 },
}

impl Default for JProfile {
    fn default() -> Self {
        JProfile::Constant { value: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GeneratorKind {
    LinearGap,
    /// Linear gap plus `amplitude * sin(2 pi (x' - x) / period)`.
    Sinusoidal { amplitude: f64, period: f64 },
    /// Linear gap plus a smooth random degradation
    /// `field_scale * |h(x') - h(x)|`, `h` a unit-variance GP path.
    GpSample { length_scale: f64, field_scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    pub n: usize,
    #[serde(default)]
    pub lo: f64,
    #[serde(default = "one")]
    pub hi: f64,
    #[serde(default)]
    pub j_profile: JProfile,
    #[serde(default)]
    pub theta_true: f64,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_label")]
    pub label: String,
}

fn one() -> f64 {
    1.0
}

fn default_label() -> String {
    "context".into()
}

impl GeneratorSpec {
    /// Constant-`J` linear-gap landscape on `[lo, hi]`.
    pub fn linear(n: usize, lo: f64, hi: f64, j: f64, theta_true: f64) -> Self {
        Self {
            kind: GeneratorKind::LinearGap,
            n,
            lo,
            hi,
            j_profile: JProfile::Constant { value: j },
            theta_true,
            noise_std: 0.0,
            seed: 0,
            label: default_label(),
        }
    }

    /// Random smooth landscape on `[0, 1]` used for regret experiments.
    pub fn gp_sample(n: usize, seed: u64) -> Self {
        Self {
            kind: GeneratorKind::GpSample {
                length_scale: 0.2,
                field_scale: 0.3,
            },
            n,
            lo: 0.0,
            hi: 1.0,
            j_profile: JProfile::Sampled {
                mean: 0.8,
                std: 0.1,
                length_scale: 0.2,
            },
            theta_true: 0.5,
            noise_std: 0.0,
            seed,
            label: default_label(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n < 2 {
            problems.push(format!("n must be >= 2, got {}", self.n));
        }
        if !(self.lo.is_finite() && self.hi.is_finite() && self.hi > self.lo) {
            problems.push(format!("need finite lo < hi, got [{}, {}]", self.lo, self.hi));
        }
        if !(self.theta_true >= 0.0 && self.theta_true.is_finite()) {
            problems.push(format!("theta_true must be >= 0, got {}", self.theta_true));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            problems.push(format!("noise_std must be >= 0, got {}", self.noise_std));
        }
        match self.kind {
            GeneratorKind::Sinusoidal { period, amplitude } => {
                if !(period != 0.0 && period.is_finite()) {
                    problems.push("sinusoidal period must be nonzero".into());
                }
                if !amplitude.is_finite() {
                    problems.push("sinusoidal amplitude must be finite".into());
                }
            }
            GeneratorKind::GpSample {
                length_scale,
                field_scale,
            } => {
                if !(length_scale > 0.0) {
                    problems.push("gp_sample length_scale must be > 0".into());
                }
                if !(field_scale >= 0.0) {
                    problems.push("gp_sample field_scale must be >= 0".into());
                }
            }
            GeneratorKind::LinearGap => {}
        }
        match self.j_profile {
            JProfile::Sinusoidal { period, .. } if !(period != 0.0 && period.is_finite()) => {
                problems.push("J profile period must be nonzero".into())
            }
            JProfile::Sampled {
                length_scale, std, ..
            } if !(length_scale > 0.0 && std >= 0.0) => {
                problems.push("sampled J profile needs length_scale > 0 and std >= 0".into())
            }
            _ => {}
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn space(&self) -> Result<ContextSpace> {
        ContextSpace::uniform(self.n, self.lo, self.hi, self.label.clone())
    }
}

/// Build the matrix a spec describes.
pub fn generate(spec: &GeneratorSpec) -> Result<TransferMatrix> {
    match spec.kind {
        GeneratorKind::LinearGap => gen_linear(spec),
        GeneratorKind::Sinusoidal { .. } => gen_sinusoidal(spec),
        GeneratorKind::GpSample { .. } => gen_gp_sample(spec),
    }
}

/// Draws from a zero-mean, unit-variance SE-kernel GP at `xs`.
fn sample_path(xs: &[f64], length_scale: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let n = xs.len();
    let kernel = Kernel::new(1.0, length_scale)?;
    let (l, _) = cholesky_with_jitter(&kernel.gram(xs), n)?;
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    Ok((0..n)
        .map(|i| (0..=i).map(|k| l[i * n + k] * z[k]).sum())
        .collect())
}

fn j_values(spec: &GeneratorSpec, xs: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let raw: Vec<f64> = match spec.j_profile {
        JProfile::Constant { value } => vec![value; xs.len()],
        JProfile::Sinusoidal {
            base,
            amplitude,
            period,
        } => xs
            .iter()
            .map(|x| base + amplitude * (2.0 * PI * (x - spec.lo) / period).sin())
            .collect(),
        JProfile::Sampled {
            mean,
            std,
            length_scale,
        } => sample_path(xs, length_scale, rng)?
            .into_iter()
            .map(|f| mean + std * f)
            .collect(),
    };
    Ok(raw.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

fn build<F>(spec: &GeneratorSpec, mut degradation: F, rng: &mut ChaCha8Rng) -> Result<TransferMatrix>
where
    F: FnMut(usize, usize) -> f64,
{
    spec.validate()?;
    let space = spec.space()?;
    let xs = space.values().to_vec();
    let j = j_values(spec, &xs, rng)?;
    let n = spec.n;
    let mut u = vec![0.0; n * n];
    for s in 0..n {
        for t in 0..n {
            u[s * n + t] = if s == t {
                j[s]
            } else {
                let noise = if spec.noise_std > 0.0 {
                    spec.noise_std * Distribution::<f64>::sample(&StandardNormal, rng)
                } else {
                    0.0
                };
                (j[s] - spec.theta_true * (xs[s] - xs[t]).abs() - degradation(s, t) + noise)
                    .clamp(0.0, 1.0)
            };
        }
    }
    TransferMatrix::from_flat(space, u, Normalization::Native)
}

/// `u[i][j] = clamp(J(x_i) - theta |x_i - x_j| + noise, 0, 1)`.
pub fn gen_linear(spec: &GeneratorSpec) -> Result<TransferMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    build(spec, |_, _| 0.0, &mut rng)
}

/// Linear gap with a sinusoidal ripple in the signed source-target offset.
pub fn gen_sinusoidal(spec: &GeneratorSpec) -> Result<TransferMatrix> {
    let GeneratorKind::Sinusoidal { amplitude, period } = spec.kind else {
        return Err(Error::Config("gen_sinusoidal needs a sinusoidal spec".into()));
    };
    spec.validate()?;
    let xs = spec.space()?.values().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    build(
        spec,
        |s, t| -amplitude * (2.0 * PI * (xs[t] - xs[s]) / period).sin(),
        &mut rng,
    )
}

/// Sampled `J` and a smooth random degradation field on top of the linear gap.
pub fn gen_gp_sample(spec: &GeneratorSpec) -> Result<TransferMatrix> {
    let GeneratorKind::GpSample {
        length_scale,
        field_scale,
    } = spec.kind
    else {
        return Err(Error::Config("gen_gp_sample needs a gp_sample spec".into()));
    };
    spec.validate()?;
    let xs = spec.space()?.values().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let field = sample_path(&xs, length_scale, &mut rng)?;
    build(
        spec,
        |s, t| field_scale * (field[t] - field[s]).abs(),
        &mut rng,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gap_model::LinearGapModel;

    #[test]
    fn linear_three_by_three() {
        let spec = GeneratorSpec::linear(3, 0.0, 2.0, 1.0, 0.3);
        let m = gen_linear(&spec).unwrap();
        let expected = [[1.0, 0.7, 0.4], [0.7, 1.0, 0.7], [0.4, 0.7, 1.0]];
        for s in 0..3 {
            for t in 0..3 {
                assert!((m.get(s, t) - expected[s][t]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_slope_rows_equal_j() {
        let mut spec = GeneratorSpec::linear(6, 0.0, 1.0, 0.8, 0.0);
        spec.j_profile = JProfile::Sinusoidal {
            base: 0.6,
            amplitude: 0.2,
            period: 0.7,
        };
        let m = gen_linear(&spec).unwrap();
        for s in 0..6 {
            assert!(m.row(s).iter().all(|v| *v == m.training_performance(s)));
        }
    }

    #[test]
    fn noiseless_constant_j_is_symmetric() {
        let m = gen_linear(&GeneratorSpec::linear(9, -1.0, 3.0, 0.9, 0.15)).unwrap();
        for s in 0..9 {
            for t in 0..9 {
                assert_eq!(m.get(s, t), m.get(t, s));
            }
        }
    }

    #[test]
    fn noise_leaves_diagonal_exact() {
        let mut spec = GeneratorSpec::linear(8, 0.0, 1.0, 0.9, 0.2);
        spec.noise_std = 0.05;
        spec.seed = 11;
        let m = gen_linear(&spec).unwrap();
        assert!(m.diagonal().iter().all(|v| *v == 0.9));
        assert_ne!(m.get(0, 1), m.get(1, 0));
    }

    #[test]
    fn any_row_recovers_theta() {
        let m = gen_linear(&GeneratorSpec::linear(11, 0.0, 1.0, 1.0, 0.4)).unwrap();
        for s in 0..11 {
            let fit = LinearGapModel::fit_from_rows(&m, &[s]);
            assert!((fit.theta - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn sinusoidal_degenerates_to_linear() {
        let base = GeneratorSpec::linear(7, 0.0, 3.0, 0.95, 0.1);
        let mut sin = base.clone();
        sin.kind = GeneratorKind::Sinusoidal {
            amplitude: 0.0,
            period: 1.3,
        };
        assert_eq!(gen_sinusoidal(&sin).unwrap(), gen_linear(&base).unwrap());

        sin.kind = GeneratorKind::Sinusoidal {
            amplitude: 0.1,
            period: 1.3,
        };
        let m = gen_sinusoidal(&sin).unwrap();
        assert!(m.diagonal().iter().all(|v| *v == 0.95));
        assert_eq!(m, gen_sinusoidal(&sin).unwrap());
        sin.kind = GeneratorKind::Sinusoidal {
            amplitude: 0.1,
            period: 0.0,
        };
        assert!(matches!(gen_sinusoidal(&sin), Err(Error::Config(_))));
    }

    #[test]
    fn gp_sample_seeding() {
        let a = gen_gp_sample(&GeneratorSpec::gp_sample(30, 1)).unwrap();
        let b = gen_gp_sample(&GeneratorSpec::gp_sample(30, 1)).unwrap();
        let c = gen_gp_sample(&GeneratorSpec::gp_sample(30, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for s in 0..30 {
            for t in 0..30 {
                assert!((0.0..=1.0).contains(&a.get(s, t)));
            }
        }
        // diagonal is the sampled J, which is not constant
        let d = a.diagonal();
        assert!(d.iter().any(|v| (v - d[0]).abs() > 1e-6));
    }

    fn mean_row_lipschitz(length_scale: f64) -> f64 {
        let mut total = 0.0;
        for seed in 0..20 {
            let mut spec = GeneratorSpec::gp_sample(40, seed);
            spec.kind = GeneratorKind::GpSample {
                length_scale,
                field_scale: 0.3,
            };
            spec.theta_true = 0.0;
            let m = gen_gp_sample(&spec).unwrap();
            let h = m.space().value(1) - m.space().value(0);
            let mut per_row = 0.0;
            for row in m.rows() {
                per_row += row
                    .windows(2)
                    .map(|w| (w[1] - w[0]).abs() / h)
                    .fold(0.0, f64::max);
            }
            total += per_row / m.n() as f64;
        }
        total / 20.0
    }

    #[test]
    fn smoother_fields_have_smaller_row_slopes() {
        let rough = mean_row_lipschitz(0.05);
        let mid = mean_row_lipschitz(0.2);
        let smooth = mean_row_lipschitz(0.8);
        assert!(rough > mid && mid > smooth, "{rough} {mid} {smooth}");
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = GeneratorSpec::linear(1, 0.0, 1.0, 1.0, 0.1);
        assert!(generate(&spec).is_err());
        spec.n = 4;
        spec.theta_true = -1.0;
        assert!(generate(&spec).is_err());
        spec.theta_true = 0.1;
        spec.noise_std = -0.1;
        assert!(generate(&spec).is_err());
    }
}
