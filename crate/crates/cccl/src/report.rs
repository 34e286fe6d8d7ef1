//! Fit-statistics tables, histogram and scatter data files, and their SVG
//! renderings. Output is byte-identical for identical input.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cccl_core::inventory::{ErrorType, LanguageCode};
use cccl_core::plot::{
    histogram_of, BandSample, Histogram, DEFAULT_BAND_SAMPLES, DEFAULT_BIN_WIDTH,
};
use cccl_core::{FitStats, PlotError, ScatterSpec, StatsError};
use serde_json::json;

use crate::error::Result;
use crate::fs::write_atomic;
use crate::results::ResultsTable;

pub const FITSTATS_HEADER: &str = "model\tlanguage\tpcc\tp\tm\tb\tn";

/// Three decimals, never printing a negative zero.
pub fn fmt3(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".to_owned()
    } else {
        s
    }
}

/// Up to ten decimals with trailing zeros removed.
pub fn fmt_trimmed(x: f64) -> String {
    let s = format!("{x:.10}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_owned()
    } else {
        s.to_owned()
    }
}

/// Fits every (model, language) pair of the table. Pairs with fewer than 3
/// points or no variance are skipped and described in the returned warnings.
pub fn fit_table(table: &ResultsTable, ci_level: f64) -> Result<(Vec<FitStats>, Vec<String>)> {
    let mut fits = Vec::new();
    let mut warnings = Vec::new();
    for (m, model) in table.models.iter().enumerate() {
        for language in table.languages() {
            let series = table.series(m, &language)?;
            match FitStats::from_series(model, &language, &series, ci_level) {
                Ok(f) => fits.push(f),
                Err(e @ (StatsError::InsufficientPoints { .. } | StatsError::Degenerate(_))) => {
                    warnings.push(format!("skipping {model}/{language}: {e}"));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok((fits, warnings))
}

pub fn render_fitstats(rows: &[FitStats]) -> Result<String, PlotError> {
    if rows.is_empty() {
        return Err(PlotError::EmptyResults);
    }
    let mut out = format!("{FITSTATS_HEADER}\n");
    for f in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            f.model_id,
            f.language,
            fmt3(f.pcc),
            fmt3(f.p_value),
            fmt3(f.slope),
            fmt3(f.intercept),
            f.n_points
        );
    }
    Ok(out)
}

/// Full-precision companion of the TSV.
pub fn render_fitstats_json(rows: &[FitStats]) -> String {
    let rows: Vec<_> = rows
        .iter()
        .map(|f| {
            json!({
                "model": f.model_id,
                "language": f.language.as_str(),
                "pcc": f.pcc,
                "p": f.p_value,
                "m": f.slope,
                "b": f.intercept,
                "n": f.n_points,
                "ci_level": f.ci_level,
                "t_quantile": f.band.t_quantile,
                "residual_se": f.band.residual_se,
                "x_mean": f.band.x_mean,
                "sxx": f.band.sxx,
            })
        })
        .collect();
    let mut out = serde_json::to_string_pretty(&rows).expect("fit stats serialize");
    out.push('\n');
    out
}

pub fn language_histogram(
    table: &ResultsTable,
    language: &LanguageCode,
) -> Result<Histogram, PlotError> {
    histogram_of(
        table
            .rows_for(language)
            .map(|r| (r.delta_sem, r.error_types)),
        DEFAULT_BIN_WIDTH,
    )
}

pub fn render_histogram_tsv(h: &Histogram) -> String {
    let mut out = String::from("bin_lo\tbin_hi");
    for t in ErrorType::ALL {
        let _ = write!(out, "\t{}", t.tag());
    }
    out.push('\n');
    for bin in &h.bins {
        let _ = write!(out, "{}\t{}", fmt_trimmed(bin.lo), fmt_trimmed(bin.hi));
        for c in bin.counts {
            let _ = write!(out, "\t{c}");
        }
        out.push('\n');
    }
    out
}

pub fn scatter_spec(table: &ResultsTable, fit: &FitStats) -> Result<ScatterSpec> {
    let m = table.model_index(&fit.model_id).ok_or_else(|| {
        crate::Error::Inconsistent(format!("no column for model `{}`", fit.model_id))
    })?;
    let series = table.series(m, &fit.language)?;
    Ok(ScatterSpec::new(series, fit.clone(), DEFAULT_BAND_SAMPLES)?)
}

pub fn render_scatter_tsv(spec: &ScatterSpec) -> String {
    let f = &spec.fit;
    let mut out = format!(
        "# model={} language={} m={} b={} pcc={} p={} n={} ci_level={}\n",
        f.model_id, f.language, f.slope, f.intercept, f.pcc, f.p_value, f.n_points, f.ci_level
    );
    out.push_str("kind\tx\ty\tlower\tupper\tlabel\n");
    let labels = spec.points.labels().unwrap_or_default();
    for (i, (x, y)) in spec.points.xs().iter().zip(spec.points.ys()).enumerate() {
        let label = labels.get(i).map(String::as_str).unwrap_or_default();
        let _ = writeln!(out, "point\t{x}\t{y}\t\t\t{label}");
    }
    for b in &spec.band {
        let _ = writeln!(out, "band\t{}\t{}\t{}\t{}\t", b.x, b.fit, b.lower, b.upper);
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02",
];

/// Linear map from data range to pixel range, padded by 5% on each side.
struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn new(min: f64, max: f64, px_lo: f64, px_hi: f64) -> Self {
        let span = if max > min { max - min } else { 1.0 };
        Self {
            lo: min - 0.05 * span,
            hi: max + 0.05 * span,
            px_lo,
            px_hi,
        }
    }

    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

fn svg_open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn svg_axes(out: &mut String, x: &Axis, y: &Axis, x_label: &str, y_label: &str) {
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN / 2.0, MARGIN / 1.5, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<path class="axes" d="M{left:.2},{top:.2} V{bottom:.2} H{right:.2}" fill="none" stroke="black"/>"#
    );
    for (v, anchor, px) in [(x.lo, "start", left), (x.hi, "end", right)] {
        let _ = writeln!(
            out,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="{anchor}">{}</text>"#,
            bottom + 14.0,
            fmt3(v)
        );
    }
    for (v, py) in [(y.lo, bottom), (y.hi, top + 8.0)] {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{py:.2}" text-anchor="end">{}</text>"#,
            left - 4.0,
            fmt3(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(14,{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (top + bottom) / 2.0,
        escape(y_label)
    );
}

pub fn render_scatter_svg(spec: &ScatterSpec) -> String {
    let xs = spec.points.xs();
    let ys = spec.points.ys();
    let min = |v: &mut dyn Iterator<Item = f64>| v.fold(f64::INFINITY, f64::min);
    let max = |v: &mut dyn Iterator<Item = f64>| v.fold(f64::NEG_INFINITY, f64::max);
    let x = Axis::new(
        min(&mut xs.iter().copied()),
        max(&mut xs.iter().copied()),
        MARGIN,
        WIDTH - MARGIN / 2.0,
    );
    let y_min = min(&mut ys.iter().copied().chain(spec.band.iter().map(|b| b.lower)));
    let y_max = max(&mut ys.iter().copied().chain(spec.band.iter().map(|b| b.upper)));
    let y = Axis::new(y_min, y_max, HEIGHT - MARGIN, MARGIN / 1.5);

    let mut out = String::new();
    svg_open(
        &mut out,
        &format!("{} / {}", spec.fit.model_id, spec.fit.language),
    );
    svg_axes(&mut out, &x, &y, "ΔSEM", "ΔX_c");

    let upper = spec.band.iter().map(|b: &BandSample| (b.x, b.upper));
    let lower = spec.band.iter().rev().map(|b| (b.x, b.lower));
    let polygon: Vec<String> = upper
        .chain(lower)
        .map(|(bx, by)| format!("{:.2},{:.2}", x.map(bx), y.map(by)))
        .collect();
    let _ = writeln!(
        out,
        r#"<polygon class="band" points="{}" fill="{}" fill-opacity="0.2" stroke="none"/>"#,
        polygon.join(" "),
        COLORS[2]
    );
    let line: Vec<String> = spec
        .band
        .iter()
        .map(|b| format!("{:.2},{:.2}", x.map(b.x), y.map(b.fit)))
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline class="fit" points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
        line.join(" "),
        COLORS[2]
    );
    let labels = spec.points.labels().unwrap_or_default();
    for (i, (px, py)) in xs.iter().zip(ys).enumerate() {
        let _ = write!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}" fill-opacity="0.4">"#,
            x.map(*px),
            y.map(*py),
            COLORS[0]
        );
        match labels.get(i) {
            Some(l) => {
                let _ = writeln!(out, "<title>{}</title></circle>", escape(l));
            }
            None => out.push_str("</circle>\n"),
        }
    }
    let _ = writeln!(
        out,
        r#"<text class="slope" x="{:.2}" y="{:.2}" text-anchor="end" font-weight="bold" font-size="13">m = {}</text>"#,
        WIDTH - MARGIN / 2.0 - 4.0,
        HEIGHT - MARGIN - 6.0,
        fmt3(spec.fit.slope)
    );
    out.push_str("</svg>\n");
    out
}

pub fn render_histogram_svg(h: &Histogram, language: &LanguageCode) -> String {
    let tallest = h.bins.iter().map(|b| b.total()).max().unwrap_or(0).max(1) as f64;
    let first = h.bins.first().map_or(0.0, |b| b.lo);
    let last = h.bins.last().map_or(1.0, |b| b.hi);
    let x = Axis::new(first, last, MARGIN, WIDTH - MARGIN / 2.0);
    let y = Axis {
        lo: 0.0,
        hi: tallest * 1.05,
        px_lo: HEIGHT - MARGIN,
        px_hi: MARGIN / 1.5,
    };
    let mut out = String::new();
    svg_open(&mut out, &format!("error types by ΔSEM / {language}"));
    svg_axes(&mut out, &x, &y, "ΔSEM", "count");
    for bin in &h.bins {
        let (x0, x1) = (x.map(bin.lo), x.map(bin.hi));
        let mut stacked = 0usize;
        for (t, count) in ErrorType::ALL.iter().zip(bin.counts) {
            if count == 0 {
                continue;
            }
            let (top, bottom) = (y.map((stacked + count) as f64), y.map(stacked as f64));
            let _ = writeln!(
                out,
                r#"<rect class="{}" x="{x0:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{}" fill-opacity="0.8"/>"#,
                t.tag(),
                (x1 - x0).max(0.5),
                bottom - top,
                COLORS[*t as usize]
            );
            stacked += count;
        }
    }
    for (i, t) in ErrorType::ALL.iter().enumerate() {
        let ly = MARGIN / 1.5 + 14.0 * i as f64;
        let lx = WIDTH - MARGIN - 10.0;
        let _ = writeln!(
            out,
            r#"<rect x="{lx:.2}" y="{:.2}" width="9" height="9" fill="{}"/><text x="{:.2}" y="{ly:.2}">{}</text>"#,
            ly - 8.0,
            COLORS[i],
            lx + 13.0,
            t.tag()
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Files written by [`write_report`].
#[derive(Debug, Default)]
pub struct ReportOutput {
    pub files: Vec<PathBuf>,
    pub fits: Vec<FitStats>,
    pub warnings: Vec<String>,
}

/// Writes `fitstats.tsv`/`.json` (when any pair could be fit).
pub fn write_fitstats(dir: &Path, fits: &[FitStats], files: &mut Vec<PathBuf>) -> Result<()> {
    if fits.is_empty() {
        return Ok(());
    }
    let tsv = dir.join("fitstats.tsv");
    write_atomic(&tsv, render_fitstats(fits)?.as_bytes())?;
    let json = dir.join("fitstats.json");
    write_atomic(&json, render_fitstats_json(fits).as_bytes())?;
    files.extend([tsv, json]);
    Ok(())
}

/// Fit statistics, one scatter per fitted (model, language) pair and one
/// histogram per language that carries error types.
pub fn write_report(dir: &Path, table: &ResultsTable, ci_level: f64) -> Result<ReportOutput> {
    let (fits, warnings) = fit_table(table, ci_level)?;
    let mut report = ReportOutput {
        warnings,
        ..ReportOutput::default()
    };
    write_fitstats(dir, &fits, &mut report.files)?;
    for fit in &fits {
        let spec = scatter_spec(table, fit)?;
        let stem = format!("scatter_{}_{}", fit.model_id, fit.language);
        let tsv = dir.join(format!("{stem}.tsv"));
        let svg = dir.join(format!("{stem}.svg"));
        write_atomic(&tsv, render_scatter_tsv(&spec).as_bytes())?;
        write_atomic(&svg, render_scatter_svg(&spec).as_bytes())?;
        report.files.extend([tsv, svg]);
    }
    for language in table.languages() {
        if table.rows_for(&language).all(|r| r.error_types.is_empty()) {
            continue;
        }
        let h = language_histogram(table, &language)?;
        let tsv = dir.join(format!("hist_{language}.tsv"));
        let svg = dir.join(format!("hist_{language}.svg"));
        write_atomic(&tsv, render_histogram_tsv(&h).as_bytes())?;
        write_atomic(&svg, render_histogram_svg(&h, &language).as_bytes())?;
        report.files.extend([tsv, svg]);
    }
    report.fits = fits;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cccl_core::PairedSeries;

    fn fit(pcc: f64, p: f64, m: f64, b: f64) -> FitStats {
        let s = PairedSeries::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 3.0]).unwrap();
        let mut f =
            FitStats::from_series("AD", &LanguageCode::new("ja").unwrap(), &s, 0.95).unwrap();
        (f.pcc, f.p_value, f.slope, f.intercept, f.n_points) = (pcc, p, m, b, 24);
        f
    }

    #[test]
    fn fitstats_line_format() {
        let text = render_fitstats(&[fit(0.734, 4.4e-5, 1.519, 0.014)]).unwrap();
        assert_eq!(
            text,
            "model\tlanguage\tpcc\tp\tm\tb\tn\nAD\tja\t0.734\t0.000\t1.519\t0.014\t24\n"
        );
        let neg = render_fitstats(&[fit(0.576, 0.1045, 3.721, -0.075)]).unwrap();
        assert!(neg.ends_with("\t-0.075\t24\n"));
        let tiny = render_fitstats(&[fit(0.1, 0.5, 0.2, -0.0001)]).unwrap();
        assert!(tiny.ends_with("\t0.000\t24\n"));
        assert!(render_fitstats(&[]).is_err());
    }

    #[test]
    fn trimmed_edges() {
        assert_eq!(fmt_trimmed(3.0 * 0.01), "0.03");
        assert_eq!(fmt_trimmed(-10.0 * 0.01), "-0.1");
        assert_eq!(fmt_trimmed(0.0), "0");
        assert_eq!(fmt_trimmed(-0.0), "0");
        assert_eq!(fmt3(-0.0004), "0.000");
    }

    #[test]
    fn json_has_full_precision() {
        let json = render_fitstats_json(&[fit(1.0 / 3.0, 0.1, 1.5, 0.01)]);
        assert!(json.contains("0.3333333333333333"));
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed[0]["m"], 1.5);
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & \"c\">"), "a&lt;b &amp; &quot;c&quot;&gt;");
    }
}
