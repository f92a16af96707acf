//! Exact fractional Gaussian noise and the bivariate long-range dependent
//! increment model built from two independent fGn paths.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;
use num_traits::Float;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{OpdError, Result};
use crate::scalar::Scalar;
use crate::seed::Seed;

/// Relative tolerance below which negative embedding eigenvalues are clamped.
pub const EMBEDDING_TOLERANCE: f64 = 1e-9;

/// Absolute tolerance for the positive semidefiniteness check of Σ.
pub const PSD_TOLERANCE: f64 = 1e-10;

fn check_hurst(hurst: f64) -> Result<()> {
    if hurst > 0.0 && hurst < 1.0 {
        Ok(())
    } else {
        Err(OpdError::InvalidParameter(format!(
            "Hurst parameter must lie in (0, 1), got {hurst}"
        )))
    }
}

/// Autocovariance of unit-variance fGn,
/// `γ(k) = ½(|k+1|^{2H} − 2|k|^{2H} + |k−1|^{2H})`.
pub fn fgn_autocovariance<T: Scalar>(hurst: T, lag: usize) -> Result<T> {
    check_hurst(hurst.as_f64())?;
    Ok(fgn_acov_unchecked(hurst, lag))
}

fn fgn_acov_unchecked<T: Scalar>(hurst: T, lag: usize) -> T {
    let two_h = hurst + hurst;
    let half = T::lit(0.5);
    if lag == 0 {
        return T::one();
    }
    let k = T::from_count(lag);
    if lag < 8 {
        let one = T::one();
        return half * ((k + one).powf(two_h) - T::lit(2.0) * k.powf(two_h) + (k - one).powf(two_h));
    }
    // (1+x)^a + (1-x)^a - 2 = 2 Σ_{m≥1} C(a, 2m) x^{2m}, x = 1/k; avoids the
    // cancellation of the direct form at large lags.
    let x2 = (T::one() / k).powi(2);
    let mut coeff = two_h * (two_h - T::one()) / T::lit(2.0);
    let mut xpow = x2;
    let mut sum = T::zero();
    for m in 1..40 {
        let term = coeff * xpow;
        sum = sum + term;
        if Float::abs(term) <= T::epsilon() * Float::abs(sum) {
            break;
        }
        let j = T::from_count(2 * m);
        coeff = coeff * (two_h - j) * (two_h - j - T::one()) / ((j + T::one()) * (j + T::lit(2.0)));
        xpow = xpow * x2;
    }
    k.powf(two_h) * sum
}

/// Circulant-embedding sampler for fGn paths of a fixed length.
///
/// One complex FFT produces two independent paths (real and imaginary parts).
#[derive(Clone)]
pub struct FgnGenerator<T: Scalar> {
    hurst: T,
    n: usize,
    sqrt_eigenvalues: Arc<Vec<T>>,
    fft: Arc<dyn Fft<T>>,
}

impl<T: Scalar> std::fmt::Debug for FgnGenerator<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FgnGenerator")
            .field("hurst", &self.hurst)
            .field("n", &self.n)
            .field("embedding", &self.sqrt_eigenvalues.len())
            .finish()
    }
}

impl<T: Scalar> FgnGenerator<T> {
    pub fn new(hurst: T, n: usize) -> Result<Self> {
        check_hurst(hurst.as_f64())?;
        if n == 0 {
            return Err(OpdError::InvalidInput("path length must be at least 1".into()));
        }
        let half = n.next_power_of_two();
        let m = 2 * half;
        let mut row: Vec<Complex<T>> = Vec::with_capacity(m);
        for k in 0..=half {
            row.push(Complex::new(fgn_acov_unchecked(hurst, k), T::zero()));
        }
        for k in (1..half).rev() {
            row.push(row[k]);
        }
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut row);

        let max = row.iter().map(|c| c.re).fold(T::zero(), Float::max);
        let min = row.iter().map(|c| c.re).fold(T::infinity(), Float::min);
        if min < -T::lit(EMBEDDING_TOLERANCE) * max {
            return Err(OpdError::GenerationFailure {
                hurst: hurst.as_f64(),
                n,
                min_eigenvalue: min.as_f64(),
            });
        }
        let scale = T::from_count(m);
        let sqrt_eigenvalues = row
            .iter()
            .map(|c| (c.re.max(T::zero()) / scale).sqrt())
            .collect();
        Ok(FgnGenerator {
            hurst,
            n,
            sqrt_eigenvalues: Arc::new(sqrt_eigenvalues),
            fft,
        })
    }

    pub fn hurst(&self) -> T {
        self.hurst
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Two independent exact fGn paths of length `n`.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<T>, Vec<T>) {
        let mut buf: Vec<Complex<T>> = self
            .sqrt_eigenvalues
            .iter()
            .map(|&s| {
                let re = T::standard_normal(rng);
                let im = T::standard_normal(rng);
                Complex::new(s * re, s * im)
            })
            .collect();
        self.fft.process(&mut buf);
        let re = buf[..self.n].iter().map(|c| c.re).collect();
        let im = buf[..self.n].iter().map(|c| c.im).collect();
        (re, im)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        self.sample_pair(rng).0
    }
}

/// Exact fGn path of length `n`, deterministic in `seed`.
pub fn simulate_fgn<T: Scalar>(hurst: T, n: usize, seed: Seed) -> Result<Vec<T>> {
    let generator = FgnGenerator::new(hurst, n)?;
    Ok(generator.sample(&mut seed.rng()))
}

/// How the second innovation `U^{(2)}` is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondInnovation {
    /// fGn with the same Hurst parameter as `U^{(1)}`.
    #[default]
    SameHurst,
    /// i.i.d. standard normal (Hurst parameter 1/2).
    WhiteNoise,
}

/// `Y¹ = U¹`, `Y² = ψU¹ + φU²` with independent unit-variance innovations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariateLrdModel {
    pub hurst: f64,
    pub psi: f64,
    pub phi: f64,
    #[serde(default)]
    pub second: SecondInnovation,
}

impl BivariateLrdModel {
    pub fn new(hurst: f64, psi: f64, phi: f64) -> Result<Self> {
        Self::with_second(hurst, psi, phi, SecondInnovation::SameHurst)
    }

    /// Model with `φ = √(1 − ψ²)`, so both components have unit variance.
    pub fn unit_variance(hurst: f64, psi: f64) -> Result<Self> {
        if !(psi.abs() < 1.0) {
            return Err(OpdError::InvalidParameter(format!(
                "unit-variance model needs |psi| < 1, got {psi}"
            )));
        }
        Self::new(hurst, psi, (1.0 - psi * psi).sqrt())
    }

    pub fn with_second(hurst: f64, psi: f64, phi: f64, second: SecondInnovation) -> Result<Self> {
        check_hurst(hurst)?;
        if !psi.is_finite() || !phi.is_finite() {
            return Err(OpdError::InvalidParameter("psi and phi must be finite".into()));
        }
        // φ = 0 makes Y² a multiple of Y¹: cross-correlation ±1 and tied patterns.
        if phi == 0.0 {
            return Err(OpdError::InvalidParameter(
                "phi must be non-zero (|cross-correlation| < 1 required)".into(),
            ));
        }
        Ok(BivariateLrdModel {
            hurst,
            psi,
            phi,
            second,
        })
    }

    /// Long-memory parameter `d* = H − 1/2`.
    pub fn d_star(&self) -> f64 {
        self.hurst - 0.5
    }

    /// Variance of the second component, `ψ² + φ²`.
    pub fn second_variance(&self) -> f64 {
        self.psi * self.psi + self.phi * self.phi
    }

    pub fn has_unit_variance(&self) -> bool {
        (self.second_variance() - 1.0).abs() < 1e-12
    }

    /// Lag-0 correlation between the components.
    pub fn lag0_correlation(&self) -> f64 {
        self.psi / self.second_variance().sqrt()
    }

    /// `r^{(p,q)}(k) = E[Y_j^{(p)} Y_{j+k}^{(q)}]`, components indexed 1 and 2.
    pub fn cross_correlation(&self, p: usize, q: usize, k: i64) -> Result<f64> {
        if !(1..=2).contains(&p) || !(1..=2).contains(&q) {
            return Err(OpdError::InvalidParameter(format!(
                "component indices must be 1 or 2, got ({p}, {q})"
            )));
        }
        let lag = k.unsigned_abs() as usize;
        let g = fgn_acov_unchecked(self.hurst, lag);
        Ok(match (p, q) {
            (1, 1) => g,
            (1, 2) | (2, 1) => self.psi * g,
            _ => match self.second {
                SecondInnovation::SameHurst => self.second_variance() * g,
                SecondInnovation::WhiteNoise => {
                    self.psi * self.psi * g + if lag == 0 { self.phi * self.phi } else { 0.0 }
                }
            },
        })
    }

    /// Tail constant of unit-variance fGn, `L = H(2H − 1) = d*(2d* + 1)`.
    pub fn fgn_tail_constant(&self) -> Option<f64> {
        let d = self.d_star();
        (d > 0.0).then_some(d * (2.0 * d + 1.0))
    }

    /// Matrix `(L_{p,q})` with `r^{(p,q)}(k) ~ L_{p,q} k^{2d*−1}`; `None`
    /// unless `d* > 0`.
    pub fn tail_constants(&self) -> Option<[[f64; 2]; 2]> {
        let l = self.fgn_tail_constant()?;
        let l22 = match self.second {
            SecondInnovation::SameHurst => self.second_variance(),
            SecondInnovation::WhiteNoise => self.psi * self.psi,
        };
        Some([[l, self.psi * l], [self.psi * l, l22 * l]])
    }
}

/// Free-function form of [`BivariateLrdModel::cross_correlation`].
pub fn model_cross_correlation(model: &BivariateLrdModel, p: usize, q: usize, k: i64) -> Result<f64> {
    model.cross_correlation(p, q, k)
}

/// A simulated bivariate increment path.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariatePath<T> {
    pub y1: Vec<T>,
    pub y2: Vec<T>,
    pub seed: Seed,
    pub model: BivariateLrdModel,
}

impl<T: Scalar> BivariatePath<T> {
    pub fn len(&self) -> usize {
        self.y1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y1.is_empty()
    }

    /// Integrated paths `X_j = Σ_{i≤j} Y_i`.
    pub fn cumulative(&self) -> (Vec<T>, Vec<T>) {
        (cumsum(&self.y1), cumsum(&self.y2))
    }
}

pub fn cumsum<T: Scalar>(y: &[T]) -> Vec<T> {
    y.iter()
        .scan(T::zero(), |acc, &v| {
            *acc = *acc + v;
            Some(*acc)
        })
        .collect()
}

/// Reusable sampler for [`BivariateLrdModel`] paths of a fixed length.
#[derive(Debug, Clone)]
pub struct BivariateSimulator<T: Scalar> {
    model: BivariateLrdModel,
    generator: FgnGenerator<T>,
}

impl<T: Scalar> BivariateSimulator<T> {
    pub fn new(model: BivariateLrdModel, n: usize) -> Result<Self> {
        let generator = FgnGenerator::new(T::lit(model.hurst), n)?;
        Ok(BivariateSimulator { model, generator })
    }

    pub fn model(&self) -> &BivariateLrdModel {
        &self.model
    }

    pub fn simulate(&self, seed: Seed) -> BivariatePath<T> {
        let mut rng = seed.rng();
        let (u1, u2) = match self.model.second {
            SecondInnovation::SameHurst => self.generator.sample_pair(&mut rng),
            SecondInnovation::WhiteNoise => {
                let u1 = self.generator.sample(&mut rng);
                let u2 = (0..u1.len()).map(|_| T::standard_normal(&mut rng)).collect();
                (u1, u2)
            }
        };
        let psi = T::lit(self.model.psi);
        let phi = T::lit(self.model.phi);
        let y2 = u1.iter().zip(&u2).map(|(&a, &b)| psi * a + phi * b).collect();
        BivariatePath {
            y1: u1,
            y2,
            seed,
            model: self.model,
        }
    }
}

/// Simulate `n` steps of the bivariate model.
pub fn simulate_bivariate<T: Scalar>(
    model: &BivariateLrdModel,
    n: usize,
    seed: Seed,
) -> Result<BivariatePath<T>> {
    Ok(BivariateSimulator::new(*model, n)?.simulate(seed))
}

/// Covariance `Σ_{2,h}` of the stacked window
/// `(Y_1^{(1)}, …, Y_h^{(1)}, Y_1^{(2)}, …, Y_h^{(2)})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedCovariance {
    pub h: usize,
    pub matrix: DMatrix<f64>,
}

impl ExtendedCovariance {
    /// Dimension of the stacked vector, `2h`.
    pub fn dim(&self) -> usize {
        2 * self.h
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.matrix
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Lower Cholesky factor, for sampling windows.
    pub fn cholesky_factor(&self) -> Result<DMatrix<f64>> {
        self.matrix
            .clone()
            .cholesky()
            .map(|c| c.l())
            .ok_or_else(|| OpdError::ModelInconsistency("Σ is not positive definite".into()))
    }

    /// Inverse via an SPD factorization, refusing condition numbers above `max_condition`.
    pub fn inverse(&self, max_condition: f64) -> Result<DMatrix<f64>> {
        let eig = SymmetricEigen::new(self.matrix.clone());
        let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if condition > max_condition {
            return Err(OpdError::IllConditioned { condition });
        }
        let inv = self
            .matrix
            .clone()
            .cholesky()
            .ok_or(OpdError::IllConditioned { condition })?
            .inverse();
        // exact symmetry
        Ok((&inv + inv.transpose()) * 0.5)
    }
}

/// Assemble `Σ_{2,h}` from the model's cross-correlations.
pub fn extended_covariance(model: &BivariateLrdModel, h: usize) -> Result<ExtendedCovariance> {
    if h == 0 {
        return Err(OpdError::InvalidInput("window order h must be at least 1".into()));
    }
    let dim = 2 * h;
    let mut matrix = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        for b in 0..dim {
            let (p, i) = (a / h + 1, (a % h) as i64);
            let (q, k) = (b / h + 1, (b % h) as i64);
            matrix[(a, b)] = model.cross_correlation(p, q, k - i)?;
        }
    }
    let sigma = ExtendedCovariance { h, matrix };
    let min = sigma.min_eigenvalue();
    if min < -PSD_TOLERANCE {
        return Err(OpdError::ModelInconsistency(format!(
            "Σ_(2,{h}) has eigenvalue {min:e}"
        )));
    }
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn autocovariance_values() {
        for h in [0.1, 0.5, 0.9] {
            assert_eq!(fgn_autocovariance(h, 0).unwrap(), 1.0);
        }
        for k in 1..20 {
            assert!(fgn_autocovariance(0.5, k).unwrap().abs() < 1e-15);
        }
        let g = fgn_autocovariance(0.9f64, 1).unwrap();
        assert!((g - 0.5 * (2f64.powf(1.8) - 2.0)).abs() < 1e-14);
        assert!((g - 0.74110).abs() < 5e-6);
        let g7 = fgn_autocovariance(0.7f64, 1).unwrap();
        assert!((g7 - 0.31951).abs() < 5e-6);
        assert!(fgn_autocovariance(1.0, 1).is_err());
        assert!(fgn_autocovariance(0.0, 1).is_err());
    }

    #[test]
    fn series_branch_matches_direct_formula() {
        for &h in &[0.2f64, 0.7, 0.9] {
            for k in [8usize, 9, 20, 100] {
                let kf = k as f64;
                let direct = 0.5
                    * ((kf + 1.0).powf(2.0 * h) - 2.0 * kf.powf(2.0 * h) + (kf - 1.0).powf(2.0 * h));
                let series = fgn_autocovariance(h, k).unwrap();
                // the direct form itself loses ~eps·k^{2H}/γ(k) to cancellation
                let tol = 8.0 * f64::EPSILON * kf.powf(2.0 * h) / direct.abs();
                assert!((direct - series).abs() <= tol * direct.abs(), "H={h} k={k}");
            }
        }
        // f32 stays accurate where the direct form would cancel
        let big = fgn_autocovariance(0.8f32, 100_000).unwrap() as f64;
        let reference = fgn_autocovariance(0.8f64, 100_000).unwrap();
        assert!((big / reference - 1.0).abs() < 1e-4);
        // asymptote H(2H−1) k^{2H−2}
        let asym = 0.8 * 0.6 * 1e5f64.powf(-0.4);
        assert!((reference / asym - 1.0).abs() < 1e-6);
    }

    #[test]
    fn generator_is_deterministic() {
        let a = simulate_fgn(0.8f64, 8, Seed::new(42)).unwrap();
        let b = simulate_fgn(0.8f64, 8, Seed::new(42)).unwrap();
        assert_eq!(a.len(), 8);
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        let c = simulate_fgn(0.8f64, 8, Seed::new(43)).unwrap();
        assert_ne!(a, c);
        assert_eq!(simulate_fgn(0.3f32, 1, Seed::new(1)).unwrap().len(), 1);
        assert!(simulate_fgn(0.3f64, 0, Seed::new(1)).is_err());
        assert!(simulate_fgn(1.3f64, 10, Seed::new(1)).is_err());
    }

    #[test]
    fn model_correlations() {
        let m = BivariateLrdModel::new(0.9, 0.6, 0.8).unwrap();
        assert!((m.cross_correlation(1, 2, 0).unwrap() - 0.6).abs() < 1e-15);
        assert!((m.cross_correlation(2, 1, 0).unwrap() - 0.6).abs() < 1e-15);
        assert!((m.cross_correlation(2, 2, 0).unwrap() - 1.0).abs() < 1e-15);
        assert!((m.cross_correlation(1, 1, 1).unwrap() - 0.74110).abs() < 5e-6);
        assert!((m.cross_correlation(1, 1, -1).unwrap() - 0.74110).abs() < 5e-6);
        assert!(m.cross_correlation(3, 1, 0).is_err());
        assert!(m.cross_correlation(1, 0, 0).is_err());

        let l = m.tail_constants().unwrap();
        assert!((l[0][0] - 0.72).abs() < 1e-12);
        assert!((l[0][1] - 0.6 * 0.72).abs() < 1e-12);
        assert_eq!(l[0][1], l[1][0]);
        assert!((l[1][1] - 0.72).abs() < 1e-12);
        assert!(BivariateLrdModel::new(0.4, 0.6, 0.8).unwrap().tail_constants().is_none());

        let w = BivariateLrdModel::with_second(0.8, 0.0, 1.0, SecondInnovation::WhiteNoise).unwrap();
        assert_eq!(w.cross_correlation(2, 2, 3).unwrap(), 0.0);
        assert_eq!(w.cross_correlation(2, 2, 0).unwrap(), 1.0);
    }

    #[test]
    fn model_validation() {
        assert!(BivariateLrdModel::new(1.2, 0.6, 0.8).is_err());
        assert!(BivariateLrdModel::new(0.8, 0.6, 0.0).is_err());
        assert!(BivariateLrdModel::new(0.8, f64::NAN, 0.8).is_err());
        let u = BivariateLrdModel::unit_variance(0.8, 0.6).unwrap();
        assert!((u.phi - 0.8).abs() < 1e-15);
        assert!(u.has_unit_variance());
        assert!(BivariateLrdModel::unit_variance(0.8, 1.0).is_err());
    }

    #[test]
    fn extended_covariance_h1_and_blocks() {
        let m = BivariateLrdModel::new(0.8, 0.6, 0.8).unwrap();
        let s1 = extended_covariance(&m, 1).unwrap();
        assert_eq!(s1.rows(), vec![vec![1.0, 0.6], vec![0.6, 1.0]]);

        let s3 = extended_covariance(&m, 3).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                let lag = (k as i64 - i as i64).unsigned_abs() as usize;
                let g = fgn_autocovariance(0.8, lag).unwrap();
                assert_eq!(s3.matrix[(i, k)], g);
                assert_eq!(s3.matrix[(i + 3, k + 3)], g);
                assert_eq!(s3.matrix[(i, k + 3)], 0.6 * g);
            }
        }
        assert!(extended_covariance(&m, 0).is_err());
    }

    #[test]
    fn inverse_guards_conditioning() {
        let m = BivariateLrdModel::new(0.8, 0.6, 0.8).unwrap();
        let s = extended_covariance(&m, 2).unwrap();
        let inv = s.inverse(1e12).unwrap();
        let id = &s.matrix * &inv;
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - want).abs() < 1e-12);
            }
        }
        assert!(matches!(s.inverse(1.5), Err(OpdError::IllConditioned { .. })));
        let nearly = BivariateLrdModel::new(0.8, 1.0, 1e-7).unwrap();
        let s = extended_covariance(&nearly, 1).unwrap();
        assert!(matches!(s.inverse(1e12), Err(OpdError::IllConditioned { .. })));
    }
}
