//! Monte Carlo harness for the limit theorems of the normalized `p̂`, plus
//! the distributional diagnostics (moments, two-sample KS, QQ pairs).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{OpdError, Result};
use crate::estimators::{c2_constant, estimate_p_increments, normalize_lrd, normalize_srd, theoretical_p_h1};
use crate::hermite::{coincidence_probability_mc, limit_weights, LimitWeights};
use crate::ordinal::check_order;
use crate::processgen::{BivariateLrdModel, BivariateSimulator};
use crate::rosenblatt::{WeightedLimitSampler, MIN_INNER_N};
use crate::scalar::Scalar;
use crate::seed::Seed;

/// Asymptotic two-sample KS coefficient at the 1% level.
pub const KS_COEFF_1PCT: f64 = 1.628;

/// Lower bound on pilot draws for `p`.
pub const MIN_PILOT_DRAWS: usize = 1_000_000;

/// Upper bound on pilot draws; the guard in the diagnostics reports whether it sufficed.
pub const MAX_PILOT_DRAWS: usize = 50_000_000;

/// Draws of `C` used for the limit reference distribution.
pub const LIMIT_WEIGHT_DRAWS: usize = 1_000_000;

// stream ids under the master seed
const STREAM_PATHS: u64 = 0;
const STREAM_PILOT: u64 = 1;
const STREAM_NORMAL_REF: u64 = 2;
const STREAM_WEIGHTS: u64 = 3;
const STREAM_LIMIT_REF: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `d* ∈ (1/4, 1/2)`, non-central (Rosenblatt-type) limit.
    Lrd,
    /// `d* < 1/4`, Gaussian limit.
    Srd,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Lrd => "lrd",
            Regime::Srd => "srd",
        })
    }
}

impl Regime {
    pub fn of(d_star: f64) -> Option<Regime> {
        if d_star > 0.25 && d_star < 0.5 {
            Some(Regime::Lrd)
        } else if d_star < 0.25 {
            Some(Regime::Srd)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruePMode {
    /// Pilot Monte Carlo estimate.
    Estimate,
    /// Arcsine law when `h = 1`, pilot estimate otherwise.
    Auto,
}

/// How the centering `p` is obtained. In JSON: a number, `"estimate"` or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrueP {
    Known(f64),
    Mode(TruePMode),
}

impl Default for TrueP {
    fn default() -> Self {
        TrueP::Mode(TruePMode::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: BivariateLrdModel,
    pub h: usize,
    pub path_n: usize,
    pub replications: usize,
    pub regime: Regime,
    #[serde(default)]
    pub true_p: TrueP,
    #[serde(default)]
    pub master_seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        check_order(self.h)?;
        if self.replications < 2 {
            return Err(OpdError::InvalidInput(format!(
                "need at least 2 replications, got {}",
                self.replications
            )));
        }
        if self.path_n <= self.h {
            return Err(OpdError::InvalidInput(format!(
                "path_n ({}) must exceed h ({})",
                self.path_n, self.h
            )));
        }
        let d = self.model.d_star();
        match Regime::of(d) {
            Some(r) if r == self.regime => {}
            Some(r) => {
                return Err(OpdError::Regime(format!(
                    "regime {} requested but d* = {d} (H = {}) belongs to {r}; \
                     lrd needs d* in (1/4, 1/2), srd needs d* < 1/4",
                    self.regime, self.model.hurst
                )))
            }
            None => {
                return Err(OpdError::Regime(
                    "d* = 1/4 is the boundary between the regimes; neither normalization applies".into(),
                ))
            }
        }
        if let TrueP::Known(p) = self.true_p {
            if !(p > 0.0 && p < 1.0) {
                return Err(OpdError::InvalidParameter(format!("true_p must lie in (0, 1), got {p}")));
            }
        }
        Ok(())
    }

    /// Windows per path.
    pub fn windows(&self) -> usize {
        self.path_n - self.h + 1
    }

    /// Factor `s` in `s · (p̂ − p)`.
    pub fn statistic_scale(&self) -> f64 {
        let n = self.windows() as f64;
        match self.regime {
            Regime::Srd => n.sqrt(),
            Regime::Lrd => {
                let d = self.model.d_star();
                n.powf(1.0 - 2.0 * d) / c2_constant(d).sqrt()
            }
        }
    }

    fn normalize(&self, p_hat: f64, p: f64) -> Result<f64> {
        match self.regime {
            Regime::Srd => Ok(normalize_srd(p_hat, p, self.windows())),
            Regime::Lrd => normalize_lrd(p_hat, p, self.windows(), self.model.d_star()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruePSource {
    Supplied,
    ClosedForm,
    Pilot,
}

/// The centering actually used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruePInfo {
    pub value: f64,
    pub std_err: f64,
    pub source: TruePSource,
    pub pilot_draws: usize,
    /// `std_err` on the scale of the normalized statistic.
    pub statistic_std_err: f64,
}

/// Pilot `p` from i.i.d. exact window draws, sized so that its error on the
/// statistic scale is about 5% of a unit spread.
fn resolve_true_p(config: &ExperimentConfig) -> Result<TruePInfo> {
    let scale = config.statistic_scale();
    let h1 = config.h == 1;
    match config.true_p {
        TrueP::Known(p) => Ok(TruePInfo {
            value: p,
            std_err: 0.0,
            source: TruePSource::Supplied,
            pilot_draws: 0,
            statistic_std_err: 0.0,
        }),
        TrueP::Mode(TruePMode::Auto) if h1 => Ok(TruePInfo {
            value: theoretical_p_h1(config.model.lag0_correlation())?,
            std_err: 0.0,
            source: TruePSource::ClosedForm,
            pilot_draws: 0,
            statistic_std_err: 0.0,
        }),
        TrueP::Mode(_) => {
            let draws = ((400.0 * scale * scale).ceil() as usize).clamp(MIN_PILOT_DRAWS, MAX_PILOT_DRAWS);
            let (p, se) = coincidence_probability_mc(
                &config.model,
                config.h,
                draws,
                Seed::with_stream(config.master_seed, STREAM_PILOT),
            )?;
            Ok(TruePInfo {
                value: p,
                std_err: se,
                source: TruePSource::Pilot,
                pilot_draws: draws,
                statistic_std_err: scale * se,
            })
        }
    }
}

/// Sample moments; `variance` is unbiased, `skewness` is `m₃/m₂^{3/2}` and
/// `kurtosis` is `m₄/m₂²` (3 for the normal). Both are `None` for constant data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

pub fn moments(samples: &[f64]) -> Result<Moments> {
    let n = samples.len();
    if n < 4 {
        return Err(OpdError::InvalidInput(format!("need at least 4 samples, got {n}")));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(OpdError::InvalidInput("non-finite sample".into()));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in samples {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let variance = m2 / (nf - 1.0);
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    let degenerate = m2 <= f64::EPSILON * f64::EPSILON * mean * mean || m2 == 0.0;
    Ok(Moments {
        n,
        mean,
        variance,
        skewness: (!degenerate).then(|| m3 / m2.powf(1.5)),
        kurtosis: (!degenerate).then(|| m4 / (m2 * m2)),
    })
}

/// Standard error of the sample skewness of `n` normal draws.
pub fn skewness_std_err(n: usize) -> f64 {
    let n = n as f64;
    (6.0 * n * (n - 1.0) / ((n - 2.0) * (n + 1.0) * (n + 3.0))).sqrt()
}

/// 1% critical value of the two-sample KS statistic.
pub fn ks_critical_1pct(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    KS_COEFF_1PCT * ((n + m) / (n * m)).sqrt()
}

fn sorted(x: &[f64]) -> Result<Vec<f64>> {
    if x.iter().any(|v| v.is_nan()) {
        return Err(OpdError::InvalidInput("NaN in sample".into()));
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F̂₁ − F̂₂|`.
pub fn ks_statistic(samples: &[f64], reference: &[f64]) -> Result<f64> {
    if samples.len() < 10 || reference.len() < 10 {
        return Err(OpdError::InvalidInput(format!(
            "KS needs at least 10 values per sample, got {} and {}",
            samples.len(),
            reference.len()
        )));
    }
    let a = sorted(samples)?;
    let b = sorted(reference)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

fn quantile7(sorted: &[f64], level: f64) -> f64 {
    let pos = level * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Paired quantiles at levels `i/(m−1)`, `m` the shorter length (type-7 interpolation).
pub fn qq_data(samples: &[f64], reference: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() || reference.is_empty() {
        return Err(OpdError::InvalidInput("QQ data needs non-empty samples".into()));
    }
    let a = sorted(samples)?;
    let b = sorted(reference)?;
    let m = a.len().min(b.len());
    if m == 1 {
        return Ok(vec![(quantile7(&a, 0.5), quantile7(&b, 0.5))]);
    }
    Ok((0..m)
        .map(|i| {
            let level = i as f64 / (m - 1) as f64;
            (quantile7(&a, level), quantile7(&b, level))
        })
        .collect())
}

/// `N(0, variance)` draws, value `i` from stream `seed.derive(i)`.
pub fn normal_reference(variance: f64, count: usize, seed: Seed) -> Vec<f64> {
    let sd = variance.max(0.0).sqrt();
    (0..count)
        .map(|i| sd * f64::standard_normal(&mut seed.derive(i as u64).rng()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub mean: f64,
    pub variance: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
    pub skewness_std_err: f64,
    /// `skewness / skewness_std_err`.
    pub skewness_z: Option<f64>,
    /// `|skewness_z| > 4`.
    pub skewness_significant: bool,
    /// Set when skewness and kurtosis are undefined (constant sample).
    pub moment_error: Option<String>,
    /// Two-sample KS against simulated `N(0, variance)` of the same size.
    pub ks_vs_normal: f64,
    pub ks_critical_1pct: f64,
    pub ks_vs_normal_below_critical: bool,
    /// KS against the simulated weighted Rosenblatt limit (LRD only).
    pub ks_vs_limit: Option<f64>,
    pub ks_vs_limit_below_critical: Option<bool>,
    /// `true_p.statistic_std_err < 0.1 · sd(values)`; `None` when `p` is exact.
    pub pilot_guard_ok: Option<bool>,
}

/// Limit distribution used as the LRD reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReference {
    pub weights: LimitWeights,
    /// `(w*, w**)` multiplying `(Z*, Z**)`.
    pub coefficients: (f64, f64),
    pub inner_n: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSampleSet {
    pub values: Vec<f64>,
    pub config: ExperimentConfig,
    pub true_p: TruePInfo,
    pub diagnostics: Diagnostics,
    pub normal_reference: Vec<f64>,
    pub limit_reference: Option<LimitReference>,
}

/// Normalized `p̂` for replication `index`.
fn replicate(
    config: &ExperimentConfig,
    sim: &BivariateSimulator<f64>,
    p: f64,
    index: usize,
) -> Result<f64> {
    let seed = Seed::with_stream(config.master_seed, STREAM_PATHS).derive(index as u64);
    let path = sim.simulate(seed);
    let p_hat = estimate_p_increments(&path.y1, &path.y2, config.h)?;
    let v = config.normalize(p_hat, p)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(OpdError::ModelInconsistency(format!("non-finite statistic {v}")))
    }
}

pub fn run_limit_experiment(config: &ExperimentConfig) -> Result<McSampleSet> {
    run_limit_experiment_with_progress(config, &|_| {})
}

/// As [`run_limit_experiment`]; `progress` is called once per finished replication
/// (from worker threads, in no particular order).
pub fn run_limit_experiment_with_progress(
    config: &ExperimentConfig,
    progress: &(dyn Fn(usize) + Sync),
) -> Result<McSampleSet> {
    config.validate()?;
    let true_p = resolve_true_p(config)?;
    let sim = BivariateSimulator::<f64>::new(config.model, config.path_n)?;
    let values = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let v = replicate(config, &sim, true_p.value, r).map_err(|e| OpdError::Replication {
                index: r,
                source: Box::new(e),
            });
            progress(r);
            v
        })
        .collect::<Result<Vec<f64>>>()?;

    let m = moments(&values)?;
    let reps = config.replications;
    let normal = normal_reference(
        m.variance,
        reps,
        Seed::with_stream(config.master_seed, STREAM_NORMAL_REF),
    );
    let crit = ks_critical_1pct(reps, reps);
    let ks_normal = ks_statistic(&values, &normal)?;

    let limit_reference = match config.regime {
        Regime::Srd => None,
        Regime::Lrd => {
            let weights = limit_weights(
                &config.model,
                config.h,
                LIMIT_WEIGHT_DRAWS,
                Seed::with_stream(config.master_seed, STREAM_WEIGHTS),
            )?;
            let inner_n = config.path_n.max(MIN_INNER_N);
            let sampler = WeightedLimitSampler::<f64>::new(&weights, &config.model, inner_n)?;
            let values = sampler.sample_batch(reps, Seed::with_stream(config.master_seed, STREAM_LIMIT_REF));
            Some(LimitReference {
                coefficients: sampler.coefficients(),
                weights,
                inner_n,
                values,
            })
        }
    };
    let ks_limit = match &limit_reference {
        Some(r) => Some(ks_statistic(&values, &r.values)?),
        None => None,
    };

    let se = skewness_std_err(reps);
    let skewness_z = m.skewness.map(|s| s / se);
    let sd = m.variance.sqrt();
    let diagnostics = Diagnostics {
        mean: m.mean,
        variance: m.variance,
        skewness: m.skewness,
        kurtosis: m.kurtosis,
        skewness_std_err: se,
        skewness_z,
        skewness_significant: skewness_z.is_some_and(|z| z.abs() > 4.0),
        moment_error: m
            .skewness
            .is_none()
            .then(|| "constant sample: skewness and kurtosis undefined".to_string()),
        ks_vs_normal: ks_normal,
        ks_critical_1pct: crit,
        ks_vs_normal_below_critical: ks_normal < crit,
        ks_vs_limit: ks_limit,
        ks_vs_limit_below_critical: ks_limit.map(|k| k < crit),
        pilot_guard_ok: (true_p.source == TruePSource::Pilot).then_some(true_p.statistic_std_err < 0.1 * sd),
    };
    Ok(McSampleSet {
        values,
        config: config.clone(),
        true_p,
        diagnostics,
        normal_reference: normal,
        limit_reference,
    })
}
