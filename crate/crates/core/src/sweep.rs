//! Constraint-strength sweeps and decay fits.
//!
//! A sweep translates the same paragraphs under many constraint sets and
//! records mean fidelity against the exclusion fraction of each set. The
//! resulting curve is summarized by a linear fit, an exponential fit
//! `y = a * exp(-b * x)` and the Spearman rank correlation.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoder::DecoderConfig;
use crate::lexicon::Dictionary;
use crate::metrics::embedding::cosine_similarity;
use crate::metrics::{e_score, grammar_mistakes, oov_score};
use crate::pipeline::{translate_document, Method, PipelineError, Resources};
use crate::providers::ProviderError;
use crate::text::{exclusion_fraction, ConstraintSet, FreqTable};

pub const CSV_HEADER: [&str; 8] = [
    "label",
    "letters",
    "exclusion_fraction",
    "mean_similarity",
    "mean_e_score",
    "mean_oov",
    "mean_grammar_count",
    "n_paragraphs",
];

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("paragraph count must be between 1 and {available}, got {requested}")]
    ParagraphCount { requested: usize, available: usize },
    #[error("no constraint sets to sweep")]
    NoConstraintSets,
    #[error("fit needs at least 3 points with distinct exclusion fractions, got {0}")]
    TooFewPoints(usize),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub label: String,
    pub letters: ConstraintSet,
    pub exclusion_fraction: f64,
    pub mean_similarity: f64,
    pub mean_e_score: f64,
    pub mean_oov: f64,
    pub mean_grammar_count: f64,
    pub n_paragraphs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub a: f64,
    pub b: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub linear: LinearFit,
    /// Absent when fewer than two points have a positive y.
    pub exponential: Option<ExponentialFit>,
}

/// The 26 single letters followed by the five vowels together.
pub fn default_constraint_sets() -> Vec<(String, ConstraintSet)> {
    let mut sets: Vec<(String, ConstraintSet)> = ('a'..='z')
        .map(|l| (l.to_string(), ConstraintSet::single(l).expect("a-z")))
        .collect();
    sets.push((
        "AEIOU".to_string(),
        ConstraintSet::parse("aeiou").expect("vowels"),
    ));
    sets
}

pub struct SweepSettings<'a> {
    pub method: Method,
    pub decoder: &'a DecoderConfig,
    pub dictionary: &'a Dictionary,
    pub frequencies: &'a FreqTable,
}

/// One point per constraint set, in input order. Undecodable paragraphs
/// count as empty output rather than failing the sweep.
pub fn run_sweep<S: AsRef<str>>(
    paragraphs: &[S],
    constraint_sets: &[(String, ConstraintSet)],
    n_paragraphs: usize,
    settings: &SweepSettings,
    res: &Resources,
) -> Result<Vec<SweepPoint>, SweepError> {
    if n_paragraphs == 0 || n_paragraphs > paragraphs.len() {
        return Err(SweepError::ParagraphCount {
            requested: n_paragraphs,
            available: paragraphs.len(),
        });
    }
    if constraint_sets.is_empty() {
        return Err(SweepError::NoConstraintSets);
    }
    let sources: Vec<&str> = paragraphs[..n_paragraphs]
        .iter()
        .map(AsRef::as_ref)
        .collect();
    let source_vecs = res.similarity.embed_batch(&sources)?;
    let mut points = Vec::with_capacity(constraint_sets.len());
    for (label, c) in constraint_sets {
        let t = translate_document(&sources, c, settings.method, settings.decoder, res)?;
        let outputs: Vec<&str> = t.paragraphs.iter().map(String::as_str).collect();
        let out_vecs = res.similarity.embed_batch(&outputs)?;
        let n = n_paragraphs as f64;
        let mut sim = 0.0;
        let mut es = 0.0;
        let mut oov = 0.0;
        let mut grammar = 0.0;
        for (i, out) in outputs.iter().enumerate() {
            sim += cosine_similarity(&source_vecs[i], &out_vecs[i]);
            es += e_score(out, c);
            oov += oov_score(out, settings.dictionary);
            grammar += grammar_mistakes(out, res.grammar)?.count as f64;
        }
        let point = SweepPoint {
            label: label.clone(),
            letters: *c,
            exclusion_fraction: exclusion_fraction(c, settings.frequencies),
            mean_similarity: sim / n,
            mean_e_score: es / n,
            mean_oov: oov / n,
            mean_grammar_count: grammar / n,
            n_paragraphs,
        };
        info!(
            "sweep {label}: exclusion {:.4} similarity {:.4} ({} warnings)",
            point.exclusion_fraction,
            point.mean_similarity,
            t.warnings.len()
        );
        points.push(point);
    }
    Ok(points)
}

fn r_squared(ys: &[f64], predicted: impl Iterator<Item = f64>) -> f64 {
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = ys.iter().zip(predicted).map(|(y, p)| (y - p).powi(2)).sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { 0.0 };
    }
    (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
}

/// Ordinary least squares `y = slope * x + intercept`.
fn least_squares(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

pub fn fit_xy(xs: &[f64], ys: &[f64]) -> Result<FitParams, SweepError> {
    let mut distinct: Vec<f64> = xs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if xs.len() != ys.len() || distinct.len() < 3 {
        return Err(SweepError::TooFewPoints(distinct.len().min(ys.len())));
    }
    let (slope, intercept) = least_squares(xs, ys).expect("distinct x values");
    let linear = LinearFit {
        slope,
        intercept,
        r2: r_squared(ys, xs.iter().map(|x| slope * x + intercept)),
    };
    let (px, py): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&x, &y)| (x, y.ln()))
        .unzip();
    let exponential = if px.len() >= 2 {
        least_squares(&px, &py).map(|(s, i)| {
            let (a, b) = (i.exp(), -s);
            ExponentialFit {
                a,
                b,
                r2: r_squared(ys, xs.iter().map(|x| a * (-b * x).exp())),
            }
        })
    } else {
        None
    };
    Ok(FitParams {
        linear,
        exponential,
    })
}

/// Fits mean similarity against exclusion fraction.
pub fn fit_decay(points: &[SweepPoint]) -> Result<FitParams, SweepError> {
    let xs: Vec<f64> = points.iter().map(|p| p.exclusion_fraction).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_similarity).collect();
    fit_xy(&xs, &ys)
}

/// 1-based ranks, averaged over ties.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; `None` when either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

pub fn sweep_spearman(points: &[SweepPoint]) -> Option<f64> {
    let xs: Vec<f64> = points.iter().map(|p| p.exclusion_fraction).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_similarity).collect();
    spearman(&xs, &ys)
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> SweepError + '_ {
    move |source| SweepError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_sweep_csv(points: &[SweepPoint], path: impl AsRef<Path>) -> Result<(), SweepError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    write_sweep_csv(points, file).map_err(|source| SweepError::Csv {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_sweep_csv(path: impl AsRef<Path>) -> Result<Vec<SweepPoint>, SweepError> {
    let path = path.as_ref();
    let csv_err = |source| SweepError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub fit: Option<FitParams>,
    pub spearman: Option<f64>,
    pub config_echo: serde_json::Value,
}

pub fn emit_report(
    points: &[SweepPoint],
    fit: Option<&FitParams>,
    config_echo: &serde_json::Value,
    path: impl AsRef<Path>,
) -> Result<(), SweepError> {
    let path = path.as_ref();
    let report = SweepReport {
        points: points.to_vec(),
        fit: fit.cloned(),
        spearman: sweep_spearman(points),
        config_echo: config_echo.clone(),
    };
    let json = serde_json::to_string_pretty(&report).map_err(|source| SweepError::Json {
        path: path.display().to_string(),
        source,
    })?;
    std::fs::write(path, json + "\n").map_err(io_err(path))
}

/// Whitespace-separated `x y label` rows for external plotting.
pub fn emit_dat(points: &[SweepPoint], path: impl AsRef<Path>) -> Result<(), SweepError> {
    let path = path.as_ref();
    let mut out = String::from("# exclusion_fraction mean_similarity label\n");
    for p in points {
        let _ = writeln!(
            out,
            "{} {} {}",
            p.exclusion_fraction, p.mean_similarity, p.label
        );
    }
    std::fs::write(path, out).map_err(io_err(path))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Scatter of similarity against exclusion fraction, with the linear fit.
/// The x axis is logarithmic when every fraction is positive.
pub fn render_svg(points: &[SweepPoint], fit: Option<&FitParams>) -> String {
    const W: f64 = 720.0;
    const H: f64 = 480.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 30.0;
    const BOTTOM: f64 = 60.0;
    let log_x = !points.is_empty() && points.iter().all(|p| p.exclusion_fraction > 0.0);
    let tx = |x: f64| if log_x { x.log10() } else { x };
    let xs: Vec<f64> = points.iter().map(|p| tx(p.exclusion_fraction)).collect();
    let (mut x0, mut x1) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    if !x0.is_finite() || x0 == x1 {
        x0 = if x0.is_finite() { x0 - 0.5 } else { 0.0 };
        x1 = x0 + 1.0;
    }
    let pad = (x1 - x0) * 0.05;
    let (x0, x1) = (x0 - pad, x1 + pad);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let sy = |y: f64| TOP + (1.0 - y.clamp(0.0, 1.0)) * (H - TOP - BOTTOM);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (bx, by) = (LEFT, H - BOTTOM);
    let _ = writeln!(
        svg,
        r#"<path d="M{LEFT} {TOP} V{by} H{}" fill="none" stroke="black"/>"#,
        W - RIGHT
    );
    for i in 0..=5 {
        let y = i as f64 / 5.0;
        let py = sy(y);
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{py:.1}" x2="{bx}" y2="{py:.1}" stroke="black"/><text x="{}" y="{:.1}" text-anchor="end">{y:.1}</text>"#,
            bx - 4.0,
            bx - 6.0,
            py + 4.0
        );
    }
    for i in 0..=5 {
        let v = x0 + (x1 - x0) * i as f64 / 5.0;
        let px = sx(v);
        let label = if log_x {
            format!("{:.3}", 10f64.powf(v))
        } else {
            format!("{v:.3}")
        };
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.1}" y1="{by}" x2="{px:.1}" y2="{}" stroke="black"/><text x="{px:.1}" y="{}" text-anchor="middle">{label}</text>"#,
            by + 4.0,
            by + 18.0
        );
    }
    let axis = if log_x {
        "exclusion fraction (log scale)"
    } else {
        "exclusion fraction"
    };
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{axis}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">mean similarity</text>"#,
        (TOP + by) / 2.0,
        (TOP + by) / 2.0
    );
    if let Some(fit) = fit {
        let mut d = String::new();
        for i in 0..=60 {
            let t = x0 + (x1 - x0) * i as f64 / 60.0;
            let x = if log_x { 10f64.powf(t) } else { t };
            let y = fit.linear.slope * x + fit.linear.intercept;
            let _ = write!(
                d,
                "{}{:.1} {:.1} ",
                if i == 0 { "M" } else { "L" },
                sx(t),
                sy(y)
            );
        }
        let _ = writeln!(
            svg,
            r##"<path d="{}" fill="none" stroke="#c0392b" stroke-dasharray="4 3"/>"##,
            d.trim_end()
        );
    }
    for (p, &x) in points.iter().zip(&xs) {
        let (px, py) = (sx(x), sy(p.mean_similarity));
        let label = xml_escape(&p.label);
        let _ = writeln!(
            svg,
            r##"<circle cx="{px:.1}" cy="{py:.1}" r="4" fill="#2c7fb8"><title>{label}: {:.4}</title></circle><text x="{:.1}" y="{:.1}">{label}</text>"##,
            p.mean_similarity,
            px + 5.0,
            py - 5.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_svg(
    points: &[SweepPoint],
    fit: Option<&FitParams>,
    path: impl AsRef<Path>,
) -> Result<(), SweepError> {
    let path = path.as_ref();
    std::fs::write(path, render_svg(points, fit)).map_err(io_err(path))
}
