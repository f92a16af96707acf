//! Hermite polynomials and the second-order Hermite coefficients of the
//! pattern-coincidence indicator.
//!
//! For the stacked window `Y = Y_{1,h}` with covariance `Σ = Σ_{2,h}` and the
//! indicator `I = 1{Π̃(Y⁽¹⁾) = Π̃(Y⁽²⁾)}` with mean `p`,
//!
//! * `C = E[Y (I − p) Yᵗ]` (second-order coefficients),
//! * `A = Σ⁻¹ C Σ⁻¹`,
//! * `α̃^{(p,q)}` = sum of the `(p,q)` block of `A`.
//!
//! `C` is estimated by Monte Carlo from exact draws of `N(0, Σ)`; every draw
//! contributes `(Y Yᵗ − Σ)(I − p̂)`, which has the same mean as `Y Yᵗ (I − p)`
//! and a smaller variance.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{OpdError, Result};
use crate::ordinal::encode_increments_unchecked;
use crate::processgen::{extended_covariance, BivariateLrdModel, BivariateSimulator, ExtendedCovariance};
use crate::scalar::Scalar;
use crate::seed::Seed;

/// Highest supported Hermite degree.
pub const MAX_HERMITE_DEGREE: usize = 20;

/// Condition-number guard for inverting `Σ_{2,h}`.
pub const MAX_CONDITION: f64 = 1e12;

/// Minimum Monte Carlo draws for the coefficient matrix.
pub const MIN_COEFF_DRAWS: usize = 10_000;

/// `φ(0)² = 1/(2π)`.
pub const PHI0_SQUARED: f64 = 1.0 / (2.0 * std::f64::consts::PI);

const BLOCK: usize = 8192;

/// Probabilists' Hermite polynomial `H_j(x)` by the three-term recurrence.
pub fn hermite_poly<T: Scalar>(j: usize, x: T) -> Result<T> {
    if j > MAX_HERMITE_DEGREE {
        return Err(OpdError::UnsupportedOrder {
            h: j,
            min: 0,
            max: MAX_HERMITE_DEGREE,
        });
    }
    let (mut prev, mut cur) = (T::one(), x);
    if j == 0 {
        return Ok(prev);
    }
    for k in 1..j {
        let next = x * cur - T::from_count(k) * prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// `H₂(x) = x² − 1`.
#[inline]
pub fn hermite2<T: Scalar>(x: T) -> T {
    x * x - T::one()
}

/// Draws stacked windows from `N(0, Σ_{2,h})` and evaluates the coincidence indicator.
struct WindowSampler {
    h: usize,
    chol: DMatrix<f64>,
}

impl WindowSampler {
    fn new(sigma: &ExtendedCovariance) -> Result<Self> {
        Ok(WindowSampler {
            h: sigma.h,
            chol: sigma.cholesky_factor()?,
        })
    }

    /// Fill `y` with one draw, return the indicator.
    fn draw<R: Rng>(&self, rng: &mut R, z: &mut [f64], y: &mut [f64]) -> bool {
        let dim = 2 * self.h;
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for i in 0..dim {
            let mut acc = 0.0;
            for k in 0..=i {
                acc += self.chol[(i, k)] * z[k];
            }
            y[i] = acc;
        }
        encode_increments_unchecked(&y[..self.h]) == encode_increments_unchecked(&y[self.h..])
    }
}

fn blocks(draws: usize) -> Vec<(usize, usize)> {
    (0..draws.div_ceil(BLOCK))
        .map(|b| (b, BLOCK.min(draws - b * BLOCK)))
        .collect()
}

/// Monte Carlo estimate of the coincidence probability `p` for windows of
/// order `h`, with its standard error.
pub fn coincidence_probability_mc(
    model: &BivariateLrdModel,
    h: usize,
    draws: usize,
    seed: Seed,
) -> Result<(f64, f64)> {
    crate::ordinal::check_order(h)?;
    if draws == 0 {
        return Err(OpdError::InvalidInput("need at least one draw".into()));
    }
    let sampler = WindowSampler::new(&extended_covariance(model, h)?)?;
    let hits: usize = blocks(draws)
        .into_par_iter()
        .map(|(b, len)| {
            let mut rng = seed.derive(b as u64).rng();
            let mut z = vec![0.0; 2 * h];
            let mut y = vec![0.0; 2 * h];
            (0..len).filter(|_| sampler.draw(&mut rng, &mut z, &mut y)).count()
        })
        .sum();
    let p = hits as f64 / draws as f64;
    Ok((p, (p * (1.0 - p) / draws as f64).sqrt()))
}

/// Index pairs `(i, k)`, `i <= k`, of the upper triangle.
fn upper_pairs(dim: usize) -> Vec<(usize, usize)> {
    (0..dim).flat_map(|i| (i..dim).map(move |k| (i, k))).collect()
}

#[derive(Clone)]
struct Accumulator {
    n: usize,
    hits: usize,
    // first order
    y_i: Vec<f64>,
    y: Vec<f64>,
    y2_i: Vec<f64>,
    y2: Vec<f64>,
    // second order, over upper-triangle entries
    m_i: Vec<f64>,
    m: Vec<f64>,
    mm_i: Vec<f64>,
    mm: Vec<f64>,
}

impl Accumulator {
    fn new(dim: usize, entries: usize) -> Self {
        Accumulator {
            n: 0,
            hits: 0,
            y_i: vec![0.0; dim],
            y: vec![0.0; dim],
            y2_i: vec![0.0; dim],
            y2: vec![0.0; dim],
            m_i: vec![0.0; entries],
            m: vec![0.0; entries],
            mm_i: vec![0.0; entries * entries],
            mm: vec![0.0; entries * entries],
        }
    }

    fn merge(&mut self, o: &Accumulator) {
        self.n += o.n;
        self.hits += o.hits;
        for (a, b) in [
            (&mut self.y_i, &o.y_i),
            (&mut self.y, &o.y),
            (&mut self.y2_i, &o.y2_i),
            (&mut self.y2, &o.y2),
            (&mut self.m_i, &o.m_i),
            (&mut self.m, &o.m),
            (&mut self.mm_i, &o.mm_i),
            (&mut self.mm, &o.mm),
        ] {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

/// Monte Carlo estimates of the first- and second-order Hermite coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteCoefficients {
    pub h: usize,
    pub draws: usize,
    pub p_estimate: f64,
    pub p_std_err: f64,
    /// `E[Y_i (I − p)]`; zero in theory (Hermite rank ≥ 2).
    pub first_order: Vec<f64>,
    pub first_order_std_err: Vec<f64>,
    /// `C`, row-major `2h × 2h`, exactly symmetric.
    pub c_matrix: Vec<Vec<f64>>,
    pub c_std_err: Vec<Vec<f64>>,
    /// Covariance of the estimates of the upper-triangle entries of `C`
    /// (ordered row by row); used to propagate errors into `α̃`.
    #[serde(skip)]
    pub c_entry_covariance: Vec<Vec<f64>>,
}

impl HermiteCoefficients {
    fn dim(&self) -> usize {
        2 * self.h
    }

    pub fn c(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, k| self.c_matrix[i][k])
    }

    /// Exact coefficients for `h = 1` from the bivariate orthant moments,
    /// summed over both patterns: `C = (√(1−ρ²)/π) [[ρ, 1], [1, ρ]]`.
    pub fn closed_form_h1(rho: f64) -> Result<Self> {
        check_rho(rho)?;
        let s = (1.0 - rho * rho).sqrt();
        let per_pattern_diag = PHI0_SQUARED * rho * s;
        let per_pattern_off = PHI0_SQUARED * s;
        let (diag, off) = (2.0 * per_pattern_diag, 2.0 * per_pattern_off);
        Ok(HermiteCoefficients {
            h: 1,
            draws: 0,
            p_estimate: 0.5 + rho.asin() / std::f64::consts::PI,
            p_std_err: 0.0,
            first_order: vec![0.0; 2],
            first_order_std_err: vec![0.0; 2],
            c_matrix: vec![vec![diag, off], vec![off, diag]],
            c_std_err: vec![vec![0.0; 2]; 2],
            c_entry_covariance: vec![vec![0.0; 3]; 3],
        })
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.abs() < 1.0 {
        Ok(())
    } else {
        Err(OpdError::InvalidParameter(format!(
            "correlation must satisfy |rho| < 1, got {rho}"
        )))
    }
}

/// Monte Carlo estimate of `C` (and the first-order coefficients) from `draws`
/// exact samples of the window distribution.
pub fn hermite_coeff_matrix(
    model: &BivariateLrdModel,
    h: usize,
    draws: usize,
    seed: Seed,
) -> Result<HermiteCoefficients> {
    if !(1..=3).contains(&h) {
        return Err(OpdError::UnsupportedOrder { h, min: 1, max: 3 });
    }
    if draws < MIN_COEFF_DRAWS {
        return Err(OpdError::InvalidInput(format!(
            "need at least {MIN_COEFF_DRAWS} draws, got {draws}"
        )));
    }
    let sigma = extended_covariance(model, h)?;
    let sampler = WindowSampler::new(&sigma)?;
    let dim = 2 * h;
    let pairs = upper_pairs(dim);
    let e = pairs.len();
    let sig: Vec<f64> = pairs.iter().map(|&(i, k)| sigma.matrix[(i, k)]).collect();

    let parts: Vec<Accumulator> = blocks(draws)
        .into_par_iter()
        .map(|(b, len)| {
            let mut rng = seed.derive(b as u64).rng();
            let mut acc = Accumulator::new(dim, e);
            let mut z = vec![0.0; dim];
            let mut y = vec![0.0; dim];
            let mut m = vec![0.0; e];
            for _ in 0..len {
                let hit = sampler.draw(&mut rng, &mut z, &mut y);
                for (slot, (&(i, k), &s)) in m.iter_mut().zip(pairs.iter().zip(&sig)) {
                    *slot = y[i] * y[k] - s;
                }
                acc.n += 1;
                for i in 0..dim {
                    acc.y[i] += y[i];
                    acc.y2[i] += y[i] * y[i];
                }
                for a in 0..e {
                    acc.m[a] += m[a];
                    let row = &mut acc.mm[a * e..];
                    for c in a..e {
                        row[c] += m[a] * m[c];
                    }
                }
                if hit {
                    acc.hits += 1;
                    for i in 0..dim {
                        acc.y_i[i] += y[i];
                        acc.y2_i[i] += y[i] * y[i];
                    }
                    for a in 0..e {
                        acc.m_i[a] += m[a];
                        let row = &mut acc.mm_i[a * e..];
                        for c in a..e {
                            row[c] += m[a] * m[c];
                        }
                    }
                }
            }
            acc
        })
        .collect();

    let mut tot = Accumulator::new(dim, e);
    for part in &parts {
        tot.merge(part);
    }
    let n = tot.n as f64;
    let p = tot.hits as f64 / n;
    let (w1, w2) = (1.0 - 2.0 * p, p * p);

    let mut first_order = vec![0.0; dim];
    let mut first_order_std_err = vec![0.0; dim];
    for i in 0..dim {
        let mean = (tot.y_i[i] - p * tot.y[i]) / n;
        let second = (w1 * tot.y2_i[i] + w2 * tot.y2[i]) / n;
        first_order[i] = mean;
        first_order_std_err[i] = ((second - mean * mean).max(0.0) / n).sqrt();
    }

    let c_entries: Vec<f64> = (0..e).map(|a| (tot.m_i[a] - p * tot.m[a]) / n).collect();
    let mut cov = vec![vec![0.0; e]; e];
    for a in 0..e {
        for c in a..e {
            let second = (w1 * tot.mm_i[a * e + c] + w2 * tot.mm[a * e + c]) / n;
            let v = (second - c_entries[a] * c_entries[c]) / n;
            cov[a][c] = v;
            cov[c][a] = v;
        }
    }
    let mut c_matrix = vec![vec![0.0; dim]; dim];
    let mut c_std_err = vec![vec![0.0; dim]; dim];
    for (a, &(i, k)) in pairs.iter().enumerate() {
        c_matrix[i][k] = c_entries[a];
        c_matrix[k][i] = c_entries[a];
        let se = cov[a][a].max(0.0).sqrt();
        c_std_err[i][k] = se;
        c_std_err[k][i] = se;
    }

    Ok(HermiteCoefficients {
        h,
        draws,
        p_estimate: p,
        p_std_err: (p * (1.0 - p) / n).sqrt(),
        first_order,
        first_order_std_err,
        c_matrix,
        c_std_err,
        c_entry_covariance: cov,
    })
}

/// Everything the non-central limit needs: `C`, `A = Σ⁻¹CΣ⁻¹` and the block sums `α̃`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitWeights {
    pub h: usize,
    pub draws: usize,
    pub p_estimate: f64,
    pub p_std_err: f64,
    pub c_matrix: Vec<Vec<f64>>,
    /// Monte Carlo standard errors of `c_matrix`, entry by entry.
    pub mc_std_err: Vec<Vec<f64>>,
    pub first_order: Vec<f64>,
    pub first_order_std_err: Vec<f64>,
    pub alpha_matrix: Vec<Vec<f64>>,
    pub alpha_tilde: [[f64; 2]; 2],
    pub alpha_tilde_std_err: [[f64; 2]; 2],
}

/// `A = Σ⁻¹ C Σ⁻¹` and `α̃^{(p,q)} = Σ_{i,k ≤ h} A_{i+(p−1)h, k+(q−1)h}`.
pub fn alpha_weights(sigma: &ExtendedCovariance, coeffs: &HermiteCoefficients) -> Result<LimitWeights> {
    if sigma.h != coeffs.h {
        return Err(OpdError::InvalidInput(format!(
            "order mismatch: Σ has h = {}, C has h = {}",
            sigma.h, coeffs.h
        )));
    }
    let h = sigma.h;
    let dim = 2 * h;
    let inv = sigma.inverse(MAX_CONDITION)?;
    let a = &inv * coeffs.c() * &inv;
    let a = (&a + a.transpose()) * 0.5;

    // u_p = Σ⁻¹ 1_p, so α̃^{(p,q)} = u_pᵗ C u_q
    let u: Vec<DVector<f64>> = (0..2)
        .map(|p| {
            let ind = DVector::from_fn(dim, |i, _| if i / h == p { 1.0 } else { 0.0 });
            &inv * ind
        })
        .collect();
    let pairs = upper_pairs(dim);
    let mut alpha_tilde = [[0.0; 2]; 2];
    let mut alpha_tilde_std_err = [[0.0; 2]; 2];
    for p in 0..2 {
        for q in 0..2 {
            alpha_tilde[p][q] = (0..dim)
                .flat_map(|i| (0..dim).map(move |k| (i, k)))
                .filter(|&(i, k)| i / h == p && k / h == q)
                .map(|(i, k)| a[(i, k)])
                .sum();
            let grad: Vec<f64> = pairs
                .iter()
                .map(|&(i, k)| {
                    if i == k {
                        u[p][i] * u[q][i]
                    } else {
                        u[p][i] * u[q][k] + u[p][k] * u[q][i]
                    }
                })
                .collect();
            let mut var = 0.0;
            for (x, gx) in grad.iter().enumerate() {
                for (y, gy) in grad.iter().enumerate() {
                    var += gx * gy * coeffs.c_entry_covariance[x][y];
                }
            }
            alpha_tilde_std_err[p][q] = var.max(0.0).sqrt();
        }
    }
    Ok(LimitWeights {
        h,
        draws: coeffs.draws,
        p_estimate: coeffs.p_estimate,
        p_std_err: coeffs.p_std_err,
        c_matrix: coeffs.c_matrix.clone(),
        mc_std_err: coeffs.c_std_err.clone(),
        first_order: coeffs.first_order.clone(),
        first_order_std_err: coeffs.first_order_std_err.clone(),
        alpha_matrix: a.row_iter().map(|r| r.iter().copied().collect()).collect(),
        alpha_tilde,
        alpha_tilde_std_err,
    })
}

/// Monte Carlo `C` followed by [`alpha_weights`].
pub fn limit_weights(
    model: &BivariateLrdModel,
    h: usize,
    draws: usize,
    seed: Seed,
) -> Result<LimitWeights> {
    let coeffs = hermite_coeff_matrix(model, h, draws, seed)?;
    alpha_weights(&extended_covariance(model, h)?, &coeffs)
}

/// `(α̃^{(1,1)}, α̃^{(1,2)}) = (−2φ²(0)ρ/√(1−ρ²), 2φ²(0)/√(1−ρ²))` for `h = 1`.
pub fn alpha_tilde_h1_closed_form(rho: f64) -> Result<(f64, f64)> {
    check_rho(rho)?;
    let s = (1.0 - rho * rho).sqrt();
    Ok((-2.0 * PHI0_SQUARED * rho / s, 2.0 * PHI0_SQUARED / s))
}

/// Truncated long-run variance of the coincidence indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrdVariance {
    pub sigma2: f64,
    pub std_err: f64,
    /// Bound on `Σ_{|k| > max_lag} |Cov(I_0, I_k)|`.
    pub tail_bound: f64,
    pub max_lag: usize,
    pub p_estimate: f64,
    /// `partial_sums[K]` truncates at `|k| ≤ K`, from the same draws.
    pub partial_sums: Vec<f64>,
}

/// Lags past `max_lag` evaluated exactly before switching to the power-law tail.
const TAIL_EXACT_LAGS: usize = 2000;

/// `σ² = Σ_{|k| ≤ max_lag} Cov(I_0, I_k)` by Monte Carlo over exact path segments.
pub fn srd_variance(
    model: &BivariateLrdModel,
    h: usize,
    max_lag: usize,
    reps: usize,
    seed: Seed,
) -> Result<SrdVariance> {
    crate::ordinal::check_order(h)?;
    let d = model.d_star();
    if d >= 0.25 {
        return Err(OpdError::Regime(format!(
            "d* = {d} >= 1/4: the indicator is long-range dependent, σ² diverges"
        )));
    }
    if max_lag < h {
        return Err(OpdError::InvalidInput(format!(
            "max_lag ({max_lag}) must be at least h ({h})"
        )));
    }
    if reps < 2 {
        return Err(OpdError::InvalidInput("need at least two replications".into()));
    }
    let seg = max_lag + h;
    let sim = BivariateSimulator::<f64>::new(*model, seg)?;
    let indicators: Vec<Vec<bool>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let path = sim.simulate(seed.derive(r as u64));
            (0..=max_lag)
                .map(|j| {
                    encode_increments_unchecked(&path.y1[j..j + h])
                        == encode_increments_unchecked(&path.y2[j..j + h])
                })
                .collect()
        })
        .collect();
    let total: usize = indicators.iter().map(|v| v.iter().filter(|&&b| b).count()).sum();
    let p = total as f64 / (reps * (max_lag + 1)) as f64;
    let c = |b: bool| if b { 1.0 - p } else { -p };
    // (I₀ − p̂)(I_k − p̂) per segment, summed over segments
    let mut lag_sums = vec![0.0; max_lag + 1];
    for ind in &indicators {
        let c0 = c(ind[0]);
        for (s, &b) in lag_sums.iter_mut().zip(ind.iter()) {
            *s += c0 * c(b);
        }
    }
    let n = reps as f64;
    let partial_sums: Vec<f64> = lag_sums
        .iter()
        .enumerate()
        .scan(0.0, |acc, (k, s)| {
            *acc += if k == 0 { s / n } else { 2.0 * s / n };
            Some(*acc)
        })
        .collect();
    let contrib: Vec<f64> = indicators
        .iter()
        .map(|ind| {
            let rest: f64 = ind[1..].iter().map(|&b| c(b)).sum();
            c(ind[0]) * (c(ind[0]) + 2.0 * rest)
        })
        .collect();
    let mean = partial_sums[max_lag];
    let var = contrib.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(SrdVariance {
        sigma2: mean,
        std_err: (var / n).sqrt(),
        tail_bound: indicator_tail_bound(model, h, max_lag, p)?,
        max_lag,
        p_estimate: p,
        partial_sums,
    })
}

/// Largest canonical correlation between the windows starting at 0 and `lag`.
fn canonical_correlation(model: &BivariateLrdModel, h: usize, inv_sqrt: &DMatrix<f64>, lag: usize) -> Result<f64> {
    let dim = 2 * h;
    let mut cross = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        for b in 0..dim {
            let (p, i) = (a / h + 1, (a % h) as i64);
            let (q, k) = (b / h + 1, (b % h) as i64);
            cross[(a, b)] = model.cross_correlation(p, q, lag as i64 + k - i)?;
        }
    }
    let m = inv_sqrt * cross * inv_sqrt;
    Ok(m.singular_values().iter().copied().fold(0.0, f64::max))
}

/// `2 p(1−p) Σ_{k > max_lag} ρ_max(k)²`: functions of Hermite rank 2 of two
/// Gaussian vectors with maximal canonical correlation `ρ` have correlation at
/// most `ρ²`.
fn indicator_tail_bound(model: &BivariateLrdModel, h: usize, max_lag: usize, p: f64) -> Result<f64> {
    let sigma = extended_covariance(model, h)?;
    let eig = sigma.matrix.clone().symmetric_eigen();
    let inv_sqrt_diag = eig.eigenvalues.map(|v| 1.0 / v.max(1e-300).sqrt());
    let inv_sqrt = &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt_diag) * eig.eigenvectors.transpose();
    let far = max_lag + TAIL_EXACT_LAGS;
    let mut sum = 0.0;
    let mut last = 0.0;
    for k in max_lag + 1..=far {
        last = canonical_correlation(model, h, &inv_sqrt, k)?.powi(2);
        sum += last;
    }
    // ρ(k)² ~ k^{4d*−2}; integrate the power law beyond `far`
    let decay = 2.0 - 4.0 * model.d_star();
    sum += last * far as f64 / (decay - 1.0);
    Ok(2.0 * p * (1.0 - p) * sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_values() {
        assert_eq!(hermite_poly(2, 0.0).unwrap(), -1.0);
        assert_eq!(hermite_poly(3, 2.0).unwrap(), 2.0);
        assert_eq!(hermite_poly(0, 7.5).unwrap(), 1.0);
        for x in [-2.5f64, -0.3, 0.0, 1.7] {
            assert_eq!(hermite_poly(1, x).unwrap(), x);
            assert!((hermite_poly(2, x).unwrap() - (x * x - 1.0)).abs() < 1e-14);
            let h4 = x * x * x * x - 6.0 * x * x + 3.0;
            assert!((hermite_poly(4, x).unwrap() - h4).abs() < 1e-12);
        }
        assert_eq!(hermite_poly(2, 3.0f32).unwrap(), 8.0);
        assert!(matches!(
            hermite_poly(21, 0.0),
            Err(OpdError::UnsupportedOrder { .. })
        ));
    }

    #[test]
    fn closed_form_alpha() {
        let (a11, a12) = alpha_tilde_h1_closed_form(0.0).unwrap();
        assert_eq!(a11, 0.0);
        assert!((a12 - 1.0 / std::f64::consts::PI).abs() < 1e-15);
        let (a11, a12) = alpha_tilde_h1_closed_form(0.6).unwrap();
        assert!((a11 + 0.23873).abs() < 5e-6);
        assert!((a12 - 0.39789).abs() < 5e-6);
        for rho in [0.1, 0.45, 0.8] {
            let (p11, p12) = alpha_tilde_h1_closed_form(rho).unwrap();
            let (m11, m12) = alpha_tilde_h1_closed_form(-rho).unwrap();
            assert_eq!(p11, -m11);
            assert_eq!(p12, m12);
        }
        assert!(alpha_tilde_h1_closed_form(1.0).is_err());
    }

    #[test]
    fn closed_form_coefficients_reproduce_closed_form_alpha() {
        for rho in [-0.5, 0.0, 0.2, 0.6, 0.9] {
            let model = BivariateLrdModel::unit_variance(0.8, rho).unwrap();
            let sigma = extended_covariance(&model, 1).unwrap();
            let w = alpha_weights(&sigma, &HermiteCoefficients::closed_form_h1(rho).unwrap()).unwrap();
            let (a11, a12) = alpha_tilde_h1_closed_form(rho).unwrap();
            assert!((w.alpha_tilde[0][0] - a11).abs() < 1e-12);
            assert!((w.alpha_tilde[1][1] - a11).abs() < 1e-12);
            assert!((w.alpha_tilde[0][1] - a12).abs() < 1e-12);
            assert_eq!(w.alpha_tilde[0][1], w.alpha_tilde[1][0]);
        }
    }

    #[test]
    fn coefficient_matrix_validation() {
        let m = BivariateLrdModel::unit_variance(0.8, 0.6).unwrap();
        assert!(hermite_coeff_matrix(&m, 4, 20_000, Seed::new(1)).is_err());
        assert!(hermite_coeff_matrix(&m, 1, 100, Seed::new(1)).is_err());
        let sigma2 = extended_covariance(&m, 2).unwrap();
        let c1 = HermiteCoefficients::closed_form_h1(0.6).unwrap();
        assert!(alpha_weights(&sigma2, &c1).is_err());
    }

    #[test]
    fn coefficient_matrix_is_symmetric_and_deterministic() {
        let m = BivariateLrdModel::unit_variance(0.8, 0.6).unwrap();
        let a = hermite_coeff_matrix(&m, 2, 20_000, Seed::new(9)).unwrap();
        let b = hermite_coeff_matrix(&m, 2, 20_000, Seed::new(9)).unwrap();
        assert_eq!(a, b);
        for i in 0..4 {
            for k in 0..4 {
                assert_eq!(a.c_matrix[i][k], a.c_matrix[k][i]);
            }
        }
        let w = alpha_weights(&extended_covariance(&m, 2).unwrap(), &a).unwrap();
        for i in 0..4 {
            for k in 0..4 {
                assert_eq!(w.alpha_matrix[i][k], w.alpha_matrix[k][i]);
            }
        }
        assert!((w.alpha_tilde[0][1] - w.alpha_tilde[1][0]).abs() < 1e-12);
    }

    #[test]
    fn srd_variance_rejects_lrd() {
        let m = BivariateLrdModel::unit_variance(0.8, 0.6).unwrap();
        assert!(matches!(
            srd_variance(&m, 1, 20, 100, Seed::new(1)),
            Err(OpdError::Regime(_))
        ));
        let s = BivariateLrdModel::unit_variance(0.6, 0.6).unwrap();
        assert!(srd_variance(&s, 2, 1, 100, Seed::new(1)).is_err());
    }
}
