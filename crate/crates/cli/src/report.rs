//! Evaluation artifacts: summary.json, the CSV tables and the SVG scatter.

use continuum::eval::{KdeReport, LatentScatter, NnRegressionReport};
use continuum::model::LossBreakdown;
use continuum::table::{fmt_real, render};
use serde::Serialize;

pub const METRICS_HEADER: [&str; 6] = ["step", "recon", "mmd", "hsic_ind", "hsic_dep", "total"];

pub fn metrics_csv(trace: &[LossBreakdown]) -> String {
    let mut out = METRICS_HEADER.join(",");
    out.push('\n');
    for (step, l) in trace.iter().enumerate() {
        let cells = [l.recon, l.mmd, l.hsic_ind, l.hsic_dep, l.total].map(fmt_real);
        out.push_str(&format!("{step},{}\n", cells.join(",")));
    }
    out
}

pub fn scatter_csv(s: &LatentScatter) -> String {
    render(
        &["z_dep", "pc1", "level"],
        (0..s.z_dep.len()).map(|i| vec![s.z_dep[i], s.pc1[i], s.levels[i]]),
    )
}

pub fn kde_csv(k: &KdeReport) -> String {
    render(
        &["grid", "level", "density"],
        k.curves
            .iter()
            .flat_map(|c| k.grid.iter().zip(&c.density).map(move |(&g, &d)| vec![g, c.level, d])),
    )
}

pub fn regression_csv(r: &NnRegressionReport) -> String {
    render(&["z_dep", "neighbor_s"], r.pairs().into_iter().map(|(z, s)| vec![z, s]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisSummary {
    pub axis: usize,
    pub pearson: f64,
    pub spearman: f64,
    pub zero_variance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionSummary {
    pub k: usize,
    pub n_gen: usize,
    pub mode: &'static str,
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HsicSummary {
    pub value: f64,
    pub permutations: usize,
    /// `null` when `permutations` is 0.
    pub p_value: Option<f64>,
    pub null_q95: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcSummary {
    pub direction: Vec<f64>,
    pub variance: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KdeLevel {
    pub level: f64,
    pub count: usize,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KdeSummary {
    pub levels: Vec<KdeLevel>,
    /// Levels with fewer than 2 test points (no curve written).
    pub skipped_levels: Vec<f64>,
}

/// Contents of summary.json. Keys and their order are fixed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub seed: u64,
    pub n_test: usize,
    pub d_z: usize,
    pub correlations: Vec<AxisSummary>,
    pub spearman_dep: f64,
    pub max_abs_spearman_ind: f64,
    pub regression: RegressionSummary,
    pub hsic_ind: HsicSummary,
    pub hsic_dep: HsicSummary,
    pub pc1: PcSummary,
    pub kde: KdeSummary,
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// Scatter of Z_dep (x) against PC1 of Z_ind (y), one colour per level.
pub fn scatter_svg(s: &LatentScatter) -> String {
    let (w, h, m) = (640.0, 480.0, 50.0);
    let extent = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 1.0, lo + 1.0)
        }
    };
    let xs = s.z_dep.to_vec();
    let ys = s.pc1.to_vec();
    let (x0, x1) = extent(&xs);
    let (y0, y1) = extent(&ys);
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let levels = continuum::eval::distinct_levels(s.levels.view());
    let colour = |l: f64| PALETTE[levels.iter().position(|&v| v == l).unwrap_or(0) % PALETTE.len()];

    let mut out = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <rect x=\"{m}\" y=\"{m}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        w - 2.0 * m,
        h - 2.0 * m
    );
    for ((&x, &y), &l) in xs.iter().zip(&ys).zip(&s.levels) {
        out.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"{}\" fill-opacity=\"0.6\"/>\n",
            px(x),
            py(y),
            colour(l)
        ));
    }
    for (i, &l) in levels.iter().enumerate() {
        let y = m + 15.0 + 15.0 * i as f64;
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{y}\" r=\"4\" fill=\"{}\"/><text x=\"{}\" y=\"{}\" font-size=\"11\" font-family=\"sans-serif\">S = {l}</text>\n",
            w - m - 60.0,
            colour(l),
            w - m - 50.0,
            y + 4.0
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" font-family=\"sans-serif\" text-anchor=\"middle\">Z_dep [{x0:.3}, {x1:.3}]</text>\n",
        w / 2.0,
        h - 15.0
    ));
    out.push_str(&format!(
        "<text x=\"15\" y=\"{}\" font-size=\"13\" font-family=\"sans-serif\" text-anchor=\"middle\" transform=\"rotate(-90 15 {})\">PC1 of Z_ind [{y0:.3}, {y1:.3}]</text>\n",
        h / 2.0,
        h / 2.0
    ));
    out.push_str("</svg>\n");
    out
}
