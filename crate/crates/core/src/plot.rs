//! Plot geometry shared by report writers: ΔSEM histograms by error type and
//! sampled regression bands for scatter plots.

use alloc::vec::Vec;

use thiserror::Error;

use crate::inventory::{ErrorType, ErrorTypes};
use crate::similarity::ConceptResult;
use crate::stats::{ConfidenceBand, FitStats, PairedSeries};

pub const DEFAULT_BIN_WIDTH: f64 = 0.01;
pub const DEFAULT_BAND_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlotError {
    #[error("no results to plot")]
    EmptyResults,
    #[error("bin width must be positive and finite, got {0}")]
    InvalidBinWidth(f64),
    #[error("scatter needs at least 3 points, got {0}")]
    InsufficientPoints(usize),
    #[error("band needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("non-finite coordinate")]
    NonFiniteRange,
}

/// Index of the half-open bin `[k·w, (k+1)·w)` holding `x`.
pub fn bin_index(x: f64, width: f64) -> i64 {
    let mut k = libm::floor(x / width) as i64;
    // x / width can round across an edge; settle against the edges as computed
    if x < k as f64 * width {
        k -= 1;
    } else if x >= (k + 1) as f64 * width {
        k += 1;
    }
    k
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub index: i64,
    pub lo: f64,
    pub hi: f64,
    /// Counts in [`ErrorType::ALL`] order.
    pub counts: [usize; 6],
}

impl HistogramBin {
    pub fn count(&self, t: ErrorType) -> usize {
        self.counts[t as usize]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Contiguous bins from the lowest to the highest occupied one.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub width: f64,
    pub bins: Vec<HistogramBin>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.bins.iter().map(HistogramBin::total).sum()
    }
}

/// Bins ΔSEM by error type. A result with several types counts once under each.
pub fn histogram(results: &[ConceptResult], width: f64) -> Result<Histogram, PlotError> {
    histogram_of(results.iter().map(|r| (r.delta_sem, r.error_types)), width)
}

/// [`histogram`] over bare `(delta_sem, error_types)` pairs.
pub fn histogram_of<I>(points: I, width: f64) -> Result<Histogram, PlotError>
where
    I: IntoIterator<Item = (f64, ErrorTypes)>,
{
    if !(width.is_finite() && width > 0.0) {
        return Err(PlotError::InvalidBinWidth(width));
    }
    let points: Vec<(f64, ErrorTypes)> = points.into_iter().collect();
    if points.is_empty() {
        return Err(PlotError::EmptyResults);
    }
    if points.iter().any(|(x, _)| !x.is_finite()) {
        return Err(PlotError::NonFiniteRange);
    }
    let indices: Vec<i64> = points.iter().map(|(x, _)| bin_index(*x, width)).collect();
    let lo = *indices.iter().min().unwrap_or(&0);
    let hi = *indices.iter().max().unwrap_or(&0);
    let mut bins: Vec<HistogramBin> = (lo..=hi)
        .map(|k| HistogramBin {
            index: k,
            lo: k as f64 * width,
            hi: (k + 1) as f64 * width,
            counts: [0; 6],
        })
        .collect();
    for ((_, types), k) in points.iter().zip(indices) {
        let bin = &mut bins[(k - lo) as usize];
        for t in types.iter() {
            bin.counts[t as usize] += 1;
        }
    }
    Ok(Histogram { width, bins })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSample {
    pub x: f64,
    pub fit: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Evaluates the band at `n` evenly spaced x positions from `x_min` to `x_max`.
pub fn sample_band(
    band: &ConfidenceBand,
    x_min: f64,
    x_max: f64,
    n: usize,
) -> Result<Vec<BandSample>, PlotError> {
    if n < 2 {
        return Err(PlotError::TooFewSamples(n));
    }
    if !(x_min.is_finite() && x_max.is_finite()) {
        return Err(PlotError::NonFiniteRange);
    }
    let step = (x_max - x_min) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| {
            let x = if i == n - 1 {
                x_max
            } else {
                x_min + step * i as f64
            };
            BandSample {
                x,
                fit: band.fit.predict(x),
                lower: band.lower(x),
                upper: band.upper(x),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterSpec {
    pub points: PairedSeries,
    pub fit: FitStats,
    pub band: Vec<BandSample>,
}

impl ScatterSpec {
    /// Band spans the x range of the points.
    pub fn new(points: PairedSeries, fit: FitStats, samples: usize) -> Result<Self, PlotError> {
        if points.len() < 3 {
            return Err(PlotError::InsufficientPoints(points.len()));
        }
        let xs = points.xs();
        let x_min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let x_max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let band = sample_band(&fit.band, x_min, x_max, samples)?;
        Ok(Self { points, fit, band })
    }
}
