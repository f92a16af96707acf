//! Rosenblatt variables as normalized quadratic partial sums.
//!
//! For unit-variance fGn `X` with `H = d* + 1/2`,
//! `n^{−2d*} (2C₂)^{−1/2} L⁻¹ Σ_{j≤n} H₂(X_j)` converges to a standard
//! (unit-variance) Rosenblatt variable, where `L = d*(2d*+1)` is the tail
//! constant of the correlations. The same normalization applied to the
//! transformed pair `Y* ∝ Y² − Y¹`, `Y** ∝ Y¹ + Y²` gives the two dependent
//! Rosenblatt variables of the non-central limit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{OpdError, Result};
use crate::estimators::{c2_constant, check_lrd};
use crate::hermite::LimitWeights;
use crate::processgen::{BivariateLrdModel, BivariateSimulator, FgnGenerator};
use crate::scalar::Scalar;
use crate::seed::Seed;

/// Shortest partial sum accepted.
pub const MIN_INNER_N: usize = 1000;

pub const DEFAULT_INNER_N: usize = 100_000;

/// One standardized draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RosenblattSample {
    pub d_star: f64,
    pub inner_n: usize,
    pub value: f64,
    pub seed: Seed,
}

fn check_inner_n(inner_n: usize) -> Result<()> {
    if inner_n < MIN_INNER_N {
        return Err(OpdError::InvalidInput(format!(
            "inner_n must be at least {MIN_INNER_N}, got {inner_n}"
        )));
    }
    Ok(())
}

/// `n^{−2d*} (2C₂)^{−1/2}`; divide additionally by the tail constant of the summed sequence.
pub fn partial_sum_scale(d_star: f64, inner_n: usize) -> f64 {
    (inner_n as f64).powf(-2.0 * d_star) / (2.0 * c2_constant(d_star)).sqrt()
}

fn h2_sum<T: Scalar>(x: &[T]) -> f64 {
    x.iter()
        .map(|&v| {
            let v = v.as_f64();
            v * v - 1.0
        })
        .sum()
}

/// Reusable sampler of standard Rosenblatt draws.
#[derive(Debug, Clone)]
pub struct RosenblattSampler<T: Scalar> {
    d_star: f64,
    scale: f64,
    generator: FgnGenerator<T>,
}

impl<T: Scalar> RosenblattSampler<T> {
    pub fn new(d_star: f64, inner_n: usize) -> Result<Self> {
        check_lrd(d_star)?;
        check_inner_n(inner_n)?;
        let tail = d_star * (2.0 * d_star + 1.0);
        Ok(RosenblattSampler {
            d_star,
            scale: partial_sum_scale(d_star, inner_n) / tail,
            generator: FgnGenerator::new(T::lit(d_star + 0.5), inner_n)?,
        })
    }

    pub fn d_star(&self) -> f64 {
        self.d_star
    }

    pub fn inner_n(&self) -> usize {
        self.generator.len()
    }

    /// Two independent draws from one stream (real and imaginary FFT parts).
    pub fn sample_two(&self, seed: Seed) -> (f64, f64) {
        let (a, b) = self.generator.sample_pair(&mut seed.rng());
        (self.scale * h2_sum(&a), self.scale * h2_sum(&b))
    }

    pub fn sample(&self, seed: Seed) -> f64 {
        self.sample_two(seed).0
    }

    /// `draws` values; value `i` comes from stream `seed.derive(i / 2)`.
    pub fn sample_batch(&self, draws: usize, seed: Seed) -> Vec<f64> {
        let pairs: Vec<(f64, f64)> = (0..draws.div_ceil(2))
            .into_par_iter()
            .map(|i| self.sample_two(seed.derive(i as u64)))
            .collect();
        pairs
            .into_iter()
            .flat_map(|(a, b)| [a, b])
            .take(draws)
            .collect()
    }
}

/// One standard Rosenblatt draw from an fGn partial sum of length `inner_n`.
pub fn sample_rosenblatt(d_star: f64, inner_n: usize, seed: Seed) -> Result<f64> {
    Ok(RosenblattSampler::<f64>::new(d_star, inner_n)?.sample(seed))
}

/// `draws` independent standard Rosenblatt draws.
pub fn sample_rosenblatt_batch(d_star: f64, inner_n: usize, draws: usize, seed: Seed) -> Result<Vec<f64>> {
    Ok(RosenblattSampler::<f64>::new(d_star, inner_n)?.sample_batch(draws, seed))
}

/// `(L₂,₂ − L₁,₁)² / ((L₁,₁ + L₂,₂)² − (L₁,₂ + L₂,₁)²)`, the covariance of the
/// two Rosenblatt variables of the limit.
pub fn rosenblatt_cov(l: [[f64; 2]; 2]) -> Result<f64> {
    let diag = l[0][0] + l[1][1];
    let off = l[0][1] + l[1][0];
    let denom = diag * diag - off * off;
    if denom == 0.0 || !denom.is_finite() {
        return Err(OpdError::Assumption(format!(
            "(L11 + L22)^2 = (L12 + L21)^2 for L = {l:?}"
        )));
    }
    Ok((l[1][1] - l[0][0]).powi(2) / denom)
}

/// A draw of the dependent pair `(Z*, Z**)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RosenblattPair {
    pub z_star: f64,
    pub z_star_star: f64,
    /// Empirical lag-0 cross moment `(1/n) Σ Y*_j Y**_j` of the path used.
    pub lag0_cross: f64,
}

/// Sampler of `(Z*, Z**)` for a fixed model and partial-sum length.
///
/// `Y* = (Y² − Y¹)/sd` and `Y** = (Y¹ + Y²)/sd` are rescaled to unit
/// variance; each sum is then divided by its own tail constant, e.g.
/// `L* = (L₂,₂ − L₂,₁ − L₁,₂ + L₁,₁) / Var(Y² − Y¹)`.
#[derive(Debug, Clone)]
pub struct RosenblattPairSampler<T: Scalar> {
    sim: BivariateSimulator<T>,
    sd: (f64, f64),
    scale: (f64, f64),
}

impl<T: Scalar> RosenblattPairSampler<T> {
    pub fn new(model: &BivariateLrdModel, inner_n: usize) -> Result<Self> {
        check_lrd(model.d_star())?;
        check_inner_n(inner_n)?;
        let l = model
            .tail_constants()
            .expect("d* > 1/4 implies tail constants exist");
        let r11 = model.cross_correlation(1, 1, 0)?;
        let r12 = model.cross_correlation(1, 2, 0)?;
        let r22 = model.cross_correlation(2, 2, 0)?;
        let var_diff = r11 + r22 - 2.0 * r12;
        let var_sum = r11 + r22 + 2.0 * r12;
        if !(var_diff > 0.0 && var_sum > 0.0) {
            return Err(OpdError::InvalidParameter(format!(
                "|r12(0)| = 1: Y2 - Y1 or Y1 + Y2 is degenerate (r11={r11}, r12={r12}, r22={r22})"
            )));
        }
        let l_diff = l[1][1] - l[1][0] - l[0][1] + l[0][0];
        let l_sum = l[1][1] + l[1][0] + l[0][1] + l[0][0];
        let tol = 1e-12 * (l[0][0].abs() + l[1][1].abs());
        if l_diff.abs() <= tol || l_sum.abs() <= tol {
            return Err(OpdError::Assumption(format!(
                "L11 + L22 = ±(L12 + L21) for L = {l:?}; one of Y2 - Y1, Y1 + Y2 has no long memory"
            )));
        }
        let base = partial_sum_scale(model.d_star(), inner_n);
        Ok(RosenblattPairSampler {
            sim: BivariateSimulator::new(*model, inner_n)?,
            sd: (var_diff.sqrt(), var_sum.sqrt()),
            scale: (base * var_diff / l_diff, base * var_sum / l_sum),
        })
    }

    pub fn sample(&self, seed: Seed) -> RosenblattPair {
        let path = self.sim.simulate(seed);
        let (mut s_diff, mut s_sum, mut cross) = (0.0, 0.0, 0.0);
        for (a, b) in path.y1.iter().zip(&path.y2) {
            let (a, b) = (a.as_f64(), b.as_f64());
            let ys = (b - a) / self.sd.0;
            let yss = (a + b) / self.sd.1;
            s_diff += ys * ys - 1.0;
            s_sum += yss * yss - 1.0;
            cross += ys * yss;
        }
        RosenblattPair {
            z_star: self.scale.0 * s_diff,
            z_star_star: self.scale.1 * s_sum,
            lag0_cross: cross / path.y1.len() as f64,
        }
    }

    /// Draw `i` uses stream `seed.derive(i)`.
    pub fn sample_batch(&self, draws: usize, seed: Seed) -> Vec<RosenblattPair> {
        (0..draws)
            .into_par_iter()
            .map(|i| self.sample(seed.derive(i as u64)))
            .collect()
    }
}

/// One draw of `(Z*, Z**)` for `model`.
pub fn sample_rosenblatt_pair(model: &BivariateLrdModel, inner_n: usize, seed: Seed) -> Result<(f64, f64)> {
    let pair = RosenblattPairSampler::<f64>::new(model, inner_n)?.sample(seed);
    Ok((pair.z_star, pair.z_star_star))
}

/// Weights `(w*, w**)` of the limit `w* Z* + w** Z**` of
/// `n^{1−2d*} C₂^{−1/2} (p̂ − p)`:
///
/// `w*  = (α̃₁₁ − α̃₁₂)(L₂,₂ − L₂,₁ − L₁,₂ + L₁,₁) / (2√2)`,
/// `w** = (α̃₁₁ + α̃₁₂)(L₂,₂ + L₂,₁ + L₁,₂ + L₁,₁) / (2√2)`.
///
/// The `1/√2` comes from the second-order Hermite projection
/// `½(YᵗAY − tr AΣ)` of the indicator. `α̃₁₁` is replaced by `(α̃₁₁ + α̃₂₂)/2`,
/// which is exact for models symmetric in the two components.
pub fn limit_coefficients(weights: &LimitWeights, model: &BivariateLrdModel) -> Result<(f64, f64)> {
    check_lrd(model.d_star())?;
    let l = model
        .tail_constants()
        .expect("d* > 1/4 implies tail constants exist");
    let a = weights.alpha_tilde;
    let diag = 0.5 * (a[0][0] + a[1][1]);
    let off = 0.5 * (a[0][1] + a[1][0]);
    let l_diff = l[1][1] - l[1][0] - l[0][1] + l[0][0];
    let l_sum = l[1][1] + l[1][0] + l[0][1] + l[0][0];
    let k = 0.5 * std::f64::consts::FRAC_1_SQRT_2;
    Ok((k * (diag - off) * l_diff, k * (diag + off) * l_sum))
}

/// Sampler of the weighted limit `w* Z* + w** Z**`.
#[derive(Debug, Clone)]
pub struct WeightedLimitSampler<T: Scalar> {
    pairs: RosenblattPairSampler<T>,
    coefficients: (f64, f64),
}

impl<T: Scalar> WeightedLimitSampler<T> {
    pub fn new(weights: &LimitWeights, model: &BivariateLrdModel, inner_n: usize) -> Result<Self> {
        Ok(WeightedLimitSampler {
            coefficients: limit_coefficients(weights, model)?,
            pairs: RosenblattPairSampler::new(model, inner_n)?,
        })
    }

    pub fn coefficients(&self) -> (f64, f64) {
        self.coefficients
    }

    pub fn sample(&self, seed: Seed) -> f64 {
        let p = self.pairs.sample(seed);
        self.coefficients.0 * p.z_star + self.coefficients.1 * p.z_star_star
    }

    /// Draw `i` uses stream `seed.derive(i)`.
    pub fn sample_batch(&self, draws: usize, seed: Seed) -> Vec<f64> {
        (0..draws)
            .into_par_iter()
            .map(|i| self.sample(seed.derive(i as u64)))
            .collect()
    }
}

/// One draw from the non-central limit distribution of the normalized `p̂`.
pub fn weighted_limit_sample(
    weights: &LimitWeights,
    model: &BivariateLrdModel,
    inner_n: usize,
    seed: Seed,
) -> Result<f64> {
    Ok(WeightedLimitSampler::<f64>::new(weights, model, inner_n)?.sample(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{alpha_weights, HermiteCoefficients};
    use crate::processgen::extended_covariance;

    fn h1_weights(rho: f64) -> LimitWeights {
        let model = BivariateLrdModel::unit_variance(0.8, rho).unwrap();
        alpha_weights(
            &extended_covariance(&model, 1).unwrap(),
            &HermiteCoefficients::closed_form_h1(rho).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn covariance_formula() {
        assert_eq!(rosenblatt_cov([[1.0, 0.6], [0.6, 1.0]]).unwrap(), 0.0);
        assert!((rosenblatt_cov([[1.0, 0.0], [0.0, 2.0]]).unwrap() - 1.0 / 9.0).abs() < 1e-15);
        assert!((rosenblatt_cov([[1.0, 0.5], [0.5, 1.5]]).unwrap() - 0.25 / 5.25).abs() < 1e-15);
        assert!(matches!(
            rosenblatt_cov([[1.0, 1.0], [1.0, 1.0]]),
            Err(OpdError::Assumption(_))
        ));
    }

    #[test]
    fn validation() {
        assert!(matches!(sample_rosenblatt(0.2, 10_000, Seed::new(1)), Err(OpdError::Regime(_))));
        assert!(matches!(sample_rosenblatt(0.5, 10_000, Seed::new(1)), Err(OpdError::Regime(_))));
        assert!(matches!(sample_rosenblatt(0.3, 999, Seed::new(1)), Err(OpdError::InvalidInput(_))));
        let srd = BivariateLrdModel::unit_variance(0.7, 0.6).unwrap();
        assert!(matches!(sample_rosenblatt_pair(&srd, 10_000, Seed::new(1)), Err(OpdError::Regime(_))));
        // ψ = 1 with white-noise second innovation: Y² − Y¹ is white noise
        let wn = BivariateLrdModel::with_second(0.8, 1.0, 0.5, crate::SecondInnovation::WhiteNoise).unwrap();
        assert!(matches!(sample_rosenblatt_pair(&wn, 10_000, Seed::new(1)), Err(OpdError::Assumption(_))));
    }

    #[test]
    fn batch_is_deterministic_and_pairs_streams() {
        let s = RosenblattSampler::<f64>::new(0.3, 4096).unwrap();
        let a = s.sample_batch(5, Seed::new(3));
        assert_eq!(a, s.sample_batch(5, Seed::new(3)));
        let (x, y) = s.sample_two(Seed::new(3).derive(1));
        assert_eq!((a[2], a[3]), (x, y));
        assert!(a.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn zero_weights_give_zero() {
        let model = BivariateLrdModel::unit_variance(0.8, 0.6).unwrap();
        let mut w = h1_weights(0.6);
        w.alpha_tilde = [[0.0; 2]; 2];
        assert_eq!(weighted_limit_sample(&w, &model, 2000, Seed::new(5)).unwrap(), 0.0);
    }

    #[test]
    fn limit_coefficients_h1() {
        // ρ = 0.6, L = l·[[1, .6], [.6, 1]]: (α̃₁₁ ∓ α̃₁₂) times 0.8·l or 3.2·l, over 2√2
        let model = BivariateLrdModel::unit_variance(0.8, 0.6).unwrap();
        let (w1, w2) = limit_coefficients(&h1_weights(0.6), &model).unwrap();
        let (a11, a12) = crate::hermite::alpha_tilde_h1_closed_form(0.6).unwrap();
        let l = 0.3 * 1.6;
        let k = 2.0 * 2f64.sqrt();
        assert!((w1 - (a11 - a12) * 0.8 * l / k).abs() < 1e-12);
        assert!((w2 - (a11 + a12) * 3.2 * l / k).abs() < 1e-12);
        // symmetric weights when L(1 − ρ)(a11 − a12) = −L(1 + ρ)(a11 + a12)
        assert!((w1 + w2).abs() < 1e-12);
    }

    #[test]
    fn pair_uses_one_path() {
        let model = BivariateLrdModel::unit_variance(0.8, 0.6).unwrap();
        let s = RosenblattPairSampler::<f64>::new(&model, 2048).unwrap();
        let p = s.sample(Seed::new(11));
        assert_eq!(p, s.sample(Seed::new(11)));
        // long memory: the lag-0 sample moment shrinks like n^{2d*−1}, not n^{−1/2}
        assert!(p.lag0_cross.abs() < 4.0 * 2048f64.powf(-0.4));
    }
}
