//! Correlation and least-squares statistics relating ΔSEM (x) to ΔX_c (y).

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::inventory::LanguageCode;
use crate::similarity::ConceptResult;
use crate::special;
use crate::sum::{sum, CompensatedSum};

pub const DEFAULT_CI_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("series lengths differ: {xs} xs vs {ys} ys")]
    LengthMismatch { xs: usize, ys: usize },
    #[error("{count} labels for {points} points")]
    LabelCount { count: usize, points: usize },
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("need at least {needed} points, got {found}")]
    InsufficientPoints { needed: usize, found: usize },
    #[error("degenerate data: {0} has zero variance")]
    Degenerate(Axis),
    #[error("confidence level {0} is outside (0, 1)")]
    InvalidLevel(f64),
    #[error("correlation {0} is outside [-1, 1]")]
    InvalidCorrelation(f64),
}

/// Paired observations, x = ΔSEM and y = ΔX_c, with optional point labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSeries {
    xs: Vec<f64>,
    ys: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl PairedSeries {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, StatsError> {
        if xs.len() != ys.len() {
            return Err(StatsError::LengthMismatch {
                xs: xs.len(),
                ys: ys.len(),
            });
        }
        if let Some(i) = xs
            .iter()
            .zip(&ys)
            .position(|(x, y)| !x.is_finite() || !y.is_finite())
        {
            return Err(StatsError::NonFinite(i));
        }
        Ok(Self {
            xs,
            ys,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, StatsError> {
        if labels.len() != self.xs.len() {
            return Err(StatsError::LabelCount {
                count: labels.len(),
                points: self.xs.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// (delta_sem, delta_xc) pairs, labelled `concept/language` (with
    /// `#k` for pseudocorrection samples).
    pub fn from_results<'a, I>(results: I) -> Result<Self, StatsError>
    where
        I: IntoIterator<Item = &'a ConceptResult>,
    {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut labels = Vec::new();
        for r in results {
            xs.push(r.delta_sem);
            ys.push(r.delta_xc);
            labels.push(match r.sample_index {
                Some(k) => alloc::format!("{}/{}#{k}", r.concept, r.language),
                None => alloc::format!("{}/{}", r.concept, r.language),
            });
        }
        Self::new(xs, ys)?.with_labels(labels)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    fn require(&self, needed: usize) -> Result<(), StatsError> {
        if self.len() < needed {
            Err(StatsError::InsufficientPoints {
                needed,
                found: self.len(),
            })
        } else {
            Ok(())
        }
    }
}

/// Centered second moments from a two-pass, compensated evaluation.
struct Moments {
    n: f64,
    x_mean: f64,
    y_mean: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

fn constant(values: &[f64]) -> bool {
    values.iter().all(|v| *v == values[0])
}

impl Moments {
    fn of(series: &PairedSeries) -> Self {
        let n = series.len() as f64;
        let x_mean = sum(series.xs.iter().copied()) / n;
        let y_mean = sum(series.ys.iter().copied()) / n;
        let (mut sxx, mut syy, mut sxy) = (
            CompensatedSum::new(),
            CompensatedSum::new(),
            CompensatedSum::new(),
        );
        for (x, y) in series.xs.iter().zip(&series.ys) {
            let dx = x - x_mean;
            let dy = y - y_mean;
            sxx.add(dx * dx);
            syy.add(dy * dy);
            sxy.add(dx * dy);
        }
        Self {
            n,
            x_mean,
            y_mean,
            sxx: sxx.total(),
            syy: syy.total(),
            sxy: sxy.total(),
        }
    }

    fn check_x(&self, series: &PairedSeries) -> Result<(), StatsError> {
        if constant(&series.xs) || self.sxx == 0.0 {
            Err(StatsError::Degenerate(Axis::X))
        } else {
            Ok(())
        }
    }

    fn check_y(&self, series: &PairedSeries) -> Result<(), StatsError> {
        if constant(&series.ys) || self.syy == 0.0 {
            Err(StatsError::Degenerate(Axis::Y))
        } else {
            Ok(())
        }
    }
}

/// Sample Pearson correlation coefficient. Needs n ≥ 3 and variance on both axes.
pub fn pearson(series: &PairedSeries) -> Result<f64, StatsError> {
    series.require(3)?;
    let m = Moments::of(series);
    m.check_x(series)?;
    m.check_y(series)?;
    Ok((m.sxy / (libm::sqrt(m.sxx) * libm::sqrt(m.syy))).clamp(-1.0, 1.0))
}

/// Two-sided p-value for H0: ρ = 0, from t = r·√((n−2)/(1−r²)) with n−2
/// degrees of freedom.
pub fn p_value(pcc: f64, n: usize) -> Result<f64, StatsError> {
    if n < 3 {
        return Err(StatsError::InsufficientPoints {
            needed: 3,
            found: n,
        });
    }
    if !(-1.0..=1.0).contains(&pcc) {
        return Err(StatsError::InvalidCorrelation(pcc));
    }
    if pcc == 0.0 {
        return Ok(1.0);
    }
    if libm::fabs(pcc) == 1.0 {
        return Ok(0.0);
    }
    let df = (n - 2) as f64;
    let t = pcc * libm::sqrt(df / ((1.0 - pcc) * (1.0 + pcc)));
    Ok(special::student_t_two_sided_sf(t, df))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least squares y = slope·x + intercept.
pub fn linear_fit(series: &PairedSeries) -> Result<LinearFit, StatsError> {
    series.require(2)?;
    let m = Moments::of(series);
    m.check_x(series)?;
    Ok(fit_from(&m))
}

fn fit_from(m: &Moments) -> LinearFit {
    let slope = m.sxy / m.sxx;
    LinearFit {
        slope,
        intercept: m.y_mean - slope * m.x_mean,
    }
}

/// Mean-response confidence band around a least-squares line:
/// ŷ(x) ± t·s·√(1/n + (x − x̄)²/Sxx).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceBand {
    pub level: f64,
    pub fit: LinearFit,
    /// Two-sided t critical value with n − 2 degrees of freedom.
    pub t_quantile: f64,
    /// s = √(SSE / (n − 2))
    pub residual_se: f64,
    pub n: usize,
    pub x_mean: f64,
    pub sxx: f64,
}

impl ConfidenceBand {
    pub fn half_width(&self, x: f64) -> f64 {
        let dx = x - self.x_mean;
        self.t_quantile * self.residual_se * libm::sqrt(1.0 / self.n as f64 + dx * dx / self.sxx)
    }

    pub fn lower(&self, x: f64) -> f64 {
        self.fit.predict(x) - self.half_width(x)
    }

    pub fn upper(&self, x: f64) -> f64 {
        self.fit.predict(x) + self.half_width(x)
    }
}

pub fn regression_ci(series: &PairedSeries, level: f64) -> Result<ConfidenceBand, StatsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidLevel(level));
    }
    series.require(3)?;
    let m = Moments::of(series);
    m.check_x(series)?;
    Ok(band_from(series, &m, level))
}

fn band_from(series: &PairedSeries, m: &Moments, level: f64) -> ConfidenceBand {
    let fit = fit_from(m);
    let sse = sum(series.xs.iter().zip(&series.ys).map(|(x, y)| {
        let r = y - fit.predict(*x);
        r * r
    }));
    let df = m.n - 2.0;
    ConfidenceBand {
        level,
        fit,
        t_quantile: special::student_t_quantile(0.5 + level / 2.0, df),
        residual_se: libm::sqrt(sse / df),
        n: series.len(),
        x_mean: m.x_mean,
        sxx: m.sxx,
    }
}

/// One fit-statistics row: correlation, significance, best-fit line and
/// confidence band for a (model, language) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FitStats {
    pub model_id: String,
    pub language: LanguageCode,
    pub pcc: f64,
    pub p_value: f64,
    pub slope: f64,
    pub intercept: f64,
    pub n_points: usize,
    pub ci_level: f64,
    pub band: ConfidenceBand,
}

impl FitStats {
    pub fn from_series(
        model_id: &str,
        language: &LanguageCode,
        series: &PairedSeries,
        ci_level: f64,
    ) -> Result<Self, StatsError> {
        if !(ci_level > 0.0 && ci_level < 1.0) {
            return Err(StatsError::InvalidLevel(ci_level));
        }
        let pcc = pearson(series)?;
        let m = Moments::of(series);
        let band = band_from(series, &m, ci_level);
        Ok(Self {
            model_id: model_id.to_string(),
            language: language.clone(),
            pcc,
            p_value: p_value(pcc, series.len())?,
            slope: band.fit.slope,
            intercept: band.fit.intercept,
            n_points: series.len(),
            ci_level,
            band,
        })
    }
}

/// Fit statistics over the `language` entries of `results` at the default
/// 95% level.
pub fn summarize(
    model_id: &str,
    language: &LanguageCode,
    results: &[ConceptResult],
) -> Result<FitStats, StatsError> {
    summarize_at(model_id, language, results, DEFAULT_CI_LEVEL)
}

pub fn summarize_at(
    model_id: &str,
    language: &LanguageCode,
    results: &[ConceptResult],
    ci_level: f64,
) -> Result<FitStats, StatsError> {
    let series = PairedSeries::from_results(results.iter().filter(|r| &r.language == language))?;
    FitStats::from_series(model_id, language, &series, ci_level)
}
