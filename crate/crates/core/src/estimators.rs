//! Estimators of coincident-pattern probability and ordinal pattern dependence,
//! plus the normalizations used by the limit theorems.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{OpdError, Result};
use crate::ordinal::{check_order, encode_increments_unchecked, encode_unchecked, pattern_count};
use crate::scalar::Scalar;

/// Inputs at least this long are encoded in parallel.
const PAR_THRESHOLD: usize = 1 << 15;

/// Largest `q̂` for which OPD is still reported.
pub const Q_DEGENERACY_LIMIT: f64 = 1.0 - 1e-12;

/// Whether a series holds raw values or increments of the observed process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    #[default]
    Values,
    Increments,
}

impl SeriesKind {
    /// Minimum length that yields one window of order `h`.
    fn window_len(self, h: usize) -> usize {
        match self {
            SeriesKind::Values => h + 1,
            SeriesKind::Increments => h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpdEstimate {
    pub h: usize,
    /// Number of windows.
    pub n: usize,
    pub p_hat: f64,
    pub q_hat: f64,
    pub opd: f64,
}

/// Pattern ranks of every window of both series.
struct PairedPatterns {
    h: usize,
    first: Vec<u16>,
    second: Vec<u16>,
}

impl PairedPatterns {
    fn new<T: Scalar>(x1: &[T], x2: &[T], h: usize, kind: SeriesKind) -> Result<Self> {
        check_order(h)?;
        if x1.len() != x2.len() {
            return Err(OpdError::InvalidInput(format!(
                "series lengths differ: {} vs {}",
                x1.len(),
                x2.len()
            )));
        }
        let w = kind.window_len(h);
        if x1.len() < w {
            return Err(OpdError::InvalidInput(format!(
                "series of length {} too short for order h = {h}",
                x1.len()
            )));
        }
        for (name, x) in [("first", x1), ("second", x2)] {
            if let Some(i) = x.iter().position(|v| !v.is_finite()) {
                return Err(OpdError::InvalidInput(format!(
                    "non-finite value in {name} series at index {i}"
                )));
            }
        }
        Ok(PairedPatterns {
            h,
            first: window_ranks(x1, w, kind),
            second: window_ranks(x2, w, kind),
        })
    }

    fn windows(&self) -> usize {
        self.first.len()
    }

    fn coincidences(&self) -> usize {
        self.first
            .iter()
            .zip(&self.second)
            .filter(|(a, b)| a == b)
            .count()
    }

    fn p_hat(&self) -> f64 {
        self.coincidences() as f64 / self.windows() as f64
    }

    fn q_hat(&self) -> f64 {
        let k = pattern_count(self.h).expect("order checked");
        let mut c1 = vec![0u64; k];
        let mut c2 = vec![0u64; k];
        for (&a, &b) in self.first.iter().zip(&self.second) {
            c1[a as usize] += 1;
            c2[b as usize] += 1;
        }
        let n = self.windows() as f64;
        let dot: u128 = c1.iter().zip(&c2).map(|(&a, &b)| a as u128 * b as u128).sum();
        dot as f64 / (n * n)
    }
}

fn window_ranks<T: Scalar>(x: &[T], w: usize, kind: SeriesKind) -> Vec<u16> {
    let rank = |win: &[T]| -> u16 {
        let p = match kind {
            SeriesKind::Values => encode_unchecked(win),
            SeriesKind::Increments => encode_increments_unchecked(win),
        };
        p.rank() as u16
    };
    if x.len() >= PAR_THRESHOLD {
        x.par_windows(w).map(rank).collect()
    } else {
        x.windows(w).map(rank).collect()
    }
}

/// Share of windows in which both series show the same ordinal pattern.
pub fn estimate_p<T: Scalar>(x1: &[T], x2: &[T], h: usize) -> Result<f64> {
    Ok(PairedPatterns::new(x1, x2, h, SeriesKind::Values)?.p_hat())
}

/// [`estimate_p`] for increment series (patterns of the integrated paths).
pub fn estimate_p_increments<T: Scalar>(y1: &[T], y2: &[T], h: usize) -> Result<f64> {
    Ok(PairedPatterns::new(y1, y2, h, SeriesKind::Increments)?.p_hat())
}

/// Plug-in estimate of the coincidence probability under independence:
/// `Σ_π f̂₁(π) f̂₂(π)` over empirical pattern frequencies.
pub fn estimate_q<T: Scalar>(x1: &[T], x2: &[T], h: usize) -> Result<f64> {
    Ok(PairedPatterns::new(x1, x2, h, SeriesKind::Values)?.q_hat())
}

pub fn estimate_q_increments<T: Scalar>(y1: &[T], y2: &[T], h: usize) -> Result<f64> {
    Ok(PairedPatterns::new(y1, y2, h, SeriesKind::Increments)?.q_hat())
}

/// `p̂`, `q̂` and `OPD = (p̂ − q̂)/(1 − q̂)` for two series of the given kind.
pub fn estimate_opd_kind<T: Scalar>(
    x1: &[T],
    x2: &[T],
    h: usize,
    kind: SeriesKind,
) -> Result<OpdEstimate> {
    let pats = PairedPatterns::new(x1, x2, h, kind)?;
    let p_hat = pats.p_hat();
    let q_hat = pats.q_hat();
    if q_hat >= Q_DEGENERACY_LIMIT {
        return Err(OpdError::DegenerateMarginals { q: q_hat });
    }
    Ok(OpdEstimate {
        h,
        n: pats.windows(),
        p_hat,
        q_hat,
        opd: (p_hat - q_hat) / (1.0 - q_hat),
    })
}

pub fn estimate_opd<T: Scalar>(x1: &[T], x2: &[T], h: usize) -> Result<OpdEstimate> {
    estimate_opd_kind(x1, x2, h, SeriesKind::Values)
}

pub fn estimate_opd_increments<T: Scalar>(y1: &[T], y2: &[T], h: usize) -> Result<OpdEstimate> {
    estimate_opd_kind(y1, y2, h, SeriesKind::Increments)
}

/// Positive minus negative dependence: `OPD(x1, x2) − OPD(x1, −x2)`.
pub fn signed_opd<T: Scalar>(x1: &[T], x2: &[T], h: usize, kind: SeriesKind) -> Result<f64> {
    let neg: Vec<T> = x2.iter().map(|&v| -v).collect();
    Ok(estimate_opd_kind(x1, x2, h, kind)?.opd - estimate_opd_kind(x1, &neg, h, kind)?.opd)
}

/// Probability that two standard normals with correlation `rho` share their
/// sign: `1/2 + arcsin(ρ)/π`. This is `p` for `h = 1` on increments.
pub fn theoretical_p_h1(rho: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(OpdError::InvalidParameter(format!(
            "correlation must satisfy |rho| < 1, got {rho}"
        )));
    }
    Ok(0.5 + rho.asin() / std::f64::consts::PI)
}

/// `C₂ = 1 / (2d*(4d* − 1))`.
pub fn c2_constant(d_star: f64) -> f64 {
    1.0 / (2.0 * d_star * (4.0 * d_star - 1.0))
}

pub(crate) fn check_lrd(d_star: f64) -> Result<()> {
    if d_star > 0.25 && d_star < 0.5 {
        Ok(())
    } else {
        Err(OpdError::Regime(format!(
            "d* = {d_star} is outside the non-central regime (1/4, 1/2)"
        )))
    }
}

/// `n^{1−2d*} C₂^{−1/2} (p̂ − p)`, the non-central normalization.
///
/// `n` is the number of windows `p̂` averaged over.
pub fn normalize_lrd(p_hat: f64, p: f64, n: usize, d_star: f64) -> Result<f64> {
    check_lrd(d_star)?;
    if n == 0 {
        return Err(OpdError::InvalidInput("n must be at least 1".into()));
    }
    Ok((n as f64).powf(1.0 - 2.0 * d_star) / c2_constant(d_star).sqrt() * (p_hat - p))
}

/// `√n (p̂ − p)`, the central normalization.
pub fn normalize_srd(p_hat: f64, p: f64, n: usize) -> f64 {
    (n as f64).sqrt() * (p_hat - p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp_noise(n: usize) -> Vec<f64> {
        // deterministic series without ties
        (0..n).map(|i| ((i * 7919) % 1013) as f64 + i as f64 * 1e-3).collect()
    }

    #[test]
    fn identical_series() {
        let x = ramp_noise(500);
        for h in 1..=4 {
            assert_eq!(estimate_p(&x, &x, h).unwrap(), 1.0);
            let e = estimate_opd(&x, &x, h).unwrap();
            assert_eq!(e.opd, 1.0);
            assert_eq!(e.n, 500 - h);
        }
    }

    #[test]
    fn mirrored_series_never_coincide() {
        let x = ramp_noise(300);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        for h in 1..=3 {
            assert_eq!(estimate_p(&x, &neg, h).unwrap(), 0.0);
        }
        assert!(signed_opd(&x, &neg, 1, SeriesKind::Values).unwrap() < 0.0);
    }

    #[test]
    fn degenerate_marginals_rejected() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert_eq!(estimate_q(&x, &x, 2).unwrap(), 1.0);
        assert!(matches!(
            estimate_opd(&x, &x, 2),
            Err(OpdError::DegenerateMarginals { .. })
        ));
    }

    #[test]
    fn input_validation() {
        let x = [1.0, 2.0, 3.0];
        assert!(estimate_p(&x, &x[..2], 1).is_err());
        assert!(estimate_p(&x, &x, 3).is_err());
        assert!(estimate_p(&x, &x, 0).is_err());
        assert!(estimate_p(&[1.0, f64::NAN], &[1.0, 2.0], 1).is_err());
        assert!(estimate_p_increments(&[1.0], &[2.0], 1).is_ok());
        assert!(estimate_p_increments(&[1.0], &[2.0], 2).is_err());
    }

    #[test]
    fn increments_and_values_agree() {
        let x = ramp_noise(400);
        let dx: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let y: Vec<f64> = x.iter().map(|v| (v * 0.37).sin()).collect();
        let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
        for h in 1..=3 {
            assert_eq!(
                estimate_opd(&x, &y, h).unwrap(),
                estimate_opd_increments(&dx, &dy, h).unwrap()
            );
        }
    }

    #[test]
    fn orthant_formula() {
        assert_eq!(theoretical_p_h1(0.0).unwrap(), 0.5);
        assert!((theoretical_p_h1(0.6).unwrap() - 0.70483).abs() < 5e-6);
        assert!(theoretical_p_h1(1.0 - 1e-12).unwrap() > 0.9999);
        assert!(theoretical_p_h1(1.0).is_err());
        assert!(theoretical_p_h1(-1.5).is_err());
    }

    #[test]
    fn normalizations() {
        assert!((normalize_srd(0.6, 0.5, 100) - 1.0).abs() < 1e-14);
        assert_eq!(normalize_srd(0.3, 0.3, 100), 0.0);
        assert_eq!(normalize_lrd(0.4, 0.4, 1000, 0.3).unwrap(), 0.0);
        assert!((c2_constant(0.3) - 25.0 / 3.0).abs() < 1e-12);
        let n = 10_000usize;
        let got = normalize_lrd(0.51, 0.5, n, 0.3).unwrap();
        let want = (n as f64).powf(0.4) / (25.0f64 / 3.0).sqrt() * 0.01;
        assert!((got - want).abs() < 1e-12);
        // C₂ blows up at the boundary, shrinking the statistic
        let near = normalize_lrd(0.51, 0.5, n, 0.25 + 1e-9).unwrap();
        assert!(near.abs() < 1e-3);
        assert!(matches!(normalize_lrd(0.5, 0.5, n, 0.2), Err(OpdError::Regime(_))));
        assert!(normalize_lrd(0.5, 0.5, n, 0.5).is_err());
    }

    #[test]
    fn json_shape() {
        let x = ramp_noise(100);
        let y: Vec<f64> = x.iter().map(|v| (v * 1.3).cos()).collect();
        let e = estimate_opd(&x, &y, 2).unwrap();
        let text = serde_json::to_string(&e).unwrap();
        let pos: Vec<usize> = ["\"h\"", "\"n\"", "\"p_hat\"", "\"q_hat\"", "\"opd\""]
            .iter()
            .map(|k| text.find(k).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{text}");
    }

    proptest! {
        #[test]
        fn monotone_invariance(x in prop::collection::vec(-3.0f64..3.0, 10..60),
                               y in prop::collection::vec(-3.0f64..3.0, 60), h in 1usize..=3) {
            let y = &y[..x.len()];
            prop_assume!(x.len() > h);
            let fx: Vec<f64> = x.iter().map(|v| 3.0 * v + 2.0).collect();
            let gy: Vec<f64> = y.iter().map(|v| v.exp()).collect();
            let a = PairedPatterns::new(&x, y, h, SeriesKind::Values).unwrap();
            let b = PairedPatterns::new(&fx, &gy, h, SeriesKind::Values).unwrap();
            prop_assert_eq!(a.p_hat(), b.p_hat());
            prop_assert_eq!(a.q_hat(), b.q_hat());
        }

        #[test]
        fn estimates_are_bounded(x in prop::collection::vec(-3.0f64..3.0, 20),
                                 y in prop::collection::vec(-3.0f64..3.0, 20), h in 1usize..=3) {
            let pats = PairedPatterns::new(&x, &y, h, SeriesKind::Values).unwrap();
            let (p, q) = (pats.p_hat(), pats.q_hat());
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!((0.0..=1.0).contains(&q));
            if let Ok(e) = estimate_opd(&x, &y, h) {
                prop_assert!(e.opd <= 1.0);
            }
        }
    }
}
