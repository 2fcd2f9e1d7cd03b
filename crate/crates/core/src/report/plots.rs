use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::tables::{format_value, KindFilter, Table, TableMetric};
use super::{write_atomic, ReportError};
use crate::condition::{EntitySetting, PositionVariant};

const PANEL_W: f64 = 300.0;
const PANEL_H: f64 = 220.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_T: f64 = 50.0;
const MARGIN_B: f64 = 50.0;
const GAP: f64 = 40.0;
const LEGEND_W: f64 = 220.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// One figure: a metric for one kind pooling and position variant, with a
/// panel per entity setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct PlotSpec {
    pub metric: TableMetric,
    pub kinds: KindFilter,
    pub position_variant: PositionVariant,
    pub n_fillers: usize,
}

impl PlotSpec {
    pub fn name(&self) -> String {
        let mut s = format!("{}_{}_{}", self.metric.as_str(), self.kinds.as_str(), self.position_variant);
        if self.n_fillers > 0 {
            s.push_str(&format!("_f{}", self.n_fillers));
        }
        s
    }

    fn title(&self) -> String {
        let what = if self.metric.is_ratio() {
            "Relative probability"
        } else {
            "Accuracy"
        };
        let mut s = format!("{what} by number of attractors ({}, {}", self.kinds.as_str(), self.position_variant);
        if self.metric.is_ratio() {
            s.push_str(if self.metric == TableMetric::RelprobMedian { ", median" } else { ", mean" });
        }
        if self.n_fillers > 0 {
            let _ = write!(s, ", {} fillers", self.n_fillers);
        }
        s.push(')');
        s
    }
}

enum YScale {
    Linear { max: f64 },
    Log { lo: i32, hi: i32 },
}

impl YScale {
    fn for_values(metric: TableMetric, values: &[f64]) -> YScale {
        if !metric.is_ratio() {
            return YScale::Linear { max: 1.0 };
        }
        let positive: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0 && v.is_finite()).collect();
        let min = positive.iter().copied().fold(f64::INFINITY, f64::min);
        let max = positive.iter().copied().fold(0.0, f64::max);
        if !positive.is_empty() && max / min > 10.0 {
            YScale::Log {
                lo: min.log10().floor() as i32,
                hi: max.log10().ceil() as i32,
            }
        } else {
            let top = values.iter().copied().filter(|v| v.is_finite()).fold(1.0, f64::max);
            YScale::Linear {
                max: (top * 2.0).ceil() / 2.0,
            }
        }
    }

    /// Fraction of the panel height from the bottom; `None` when the value
    /// cannot be placed (non-positive on a log axis).
    fn frac(&self, v: f64) -> Option<f64> {
        match *self {
            YScale::Linear { max } => Some(v / max),
            YScale::Log { lo, hi } => (v > 0.0).then(|| (v.log10() - f64::from(lo)) / f64::from(hi - lo)),
        }
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        match *self {
            YScale::Linear { max } => (0..=4)
                .map(|i| {
                    let v = max * f64::from(i) / 4.0;
                    (v, format!("{v}"))
                })
                .collect(),
            YScale::Log { lo, hi } => (lo..=hi).map(|e| (10f64.powi(e), format!("1e{e}"))).collect(),
        }
    }
}

/// Renders one figure as standalone SVG. Each plotted point carries its
/// exact table value in `data-value`.
pub fn render_plot(spec: &PlotSpec, panels: &[&Table]) -> String {
    let values: Vec<f64> = panels.iter().flat_map(|t| t.rows.iter().filter_map(|r| r.value)).collect();
    let scale = YScale::for_values(spec.metric, &values);
    let max_n = panels
        .iter()
        .flat_map(|t| t.rows.iter().map(|r| r.n_attractors))
        .max()
        .unwrap_or(0)
        .max(3);
    let mut models: Vec<&str> = Vec::new();
    for t in panels {
        for m in t.models() {
            if !models.contains(&m) {
                models.push(m);
            }
        }
    }

    let width = MARGIN_L + panels.len() as f64 * (PANEL_W + GAP) + LEGEND_W;
    let height = MARGIN_T + PANEL_H + MARGIN_B;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{MARGIN_L}" y="20" font-size="14">{}</text>"#, escape(&spec.title()));
    if let YScale::Log { .. } = scale {
        let _ = writeln!(s, r#"<text class="scale-note" x="{MARGIN_L}" y="36">log scale y-axis (values span more than one decade)</text>"#);
    }

    for (p, table) in panels.iter().enumerate() {
        let x0 = MARGIN_L + p as f64 * (PANEL_W + GAP);
        let y0 = MARGIN_T;
        let px = |n: usize| x0 + PANEL_W * n as f64 / max_n as f64;
        let py = |f: f64| y0 + PANEL_H * (1.0 - f.clamp(0.0, 1.0));
        let setting = table.spec.entity_setting;
        let _ = writeln!(s, r#"<g class="panel" data-setting="{setting}">"#);
        let label = match setting {
            EntitySetting::Multi => "multiple entities",
            EntitySetting::Single => "single entity",
        };
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#, x0 + PANEL_W / 2.0, y0 - 6.0);
        let _ = writeln!(
            s,
            r#"<rect x="{x0:.2}" y="{y0:.2}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="black"/>"#
        );
        for (v, text) in scale.ticks() {
            let y = py(scale.frac(v).unwrap_or(0.0));
            let _ = writeln!(
                s,
                r##"<line x1="{x0:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{text}</text>"##,
                x0 + PANEL_W,
                x0 - 4.0,
                y + 4.0
            );
        }
        for n in 0..=max_n {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{n}</text>"#,
                px(n),
                y0 + PANEL_H + 16.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">number of attractors</text>"#,
            x0 + PANEL_W / 2.0,
            y0 + PANEL_H + 36.0
        );
        for (m, model) in models.iter().enumerate() {
            let color = PALETTE[m % PALETTE.len()];
            let rows: Vec<_> = table.rows.iter().filter(|r| r.model == *model).collect();
            let placed: Vec<(f64, f64)> = rows
                .iter()
                .filter_map(|r| Some((px(r.n_attractors), py(scale.frac(r.value?)?))))
                .collect();
            if placed.len() > 1 {
                let pts: Vec<String> = placed.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                    pts.join(" ")
                );
            }
            for r in &rows {
                let Some(v) = r.value else { continue };
                let (y, clipped) = match scale.frac(v) {
                    Some(f) => (py(f), false),
                    None => (py(0.0), true),
                };
                let _ = writeln!(
                    s,
                    r#"<circle class="point" cx="{:.2}" cy="{y:.2}" r="3.5" fill="{color}" data-model="{}" data-n="{}" data-value="{}" data-count="{}"{}/>"#,
                    px(r.n_attractors),
                    escape(model),
                    r.n_attractors,
                    format_value(Some(v)),
                    r.count,
                    if clipped { r#" data-clipped="true""# } else { "" }
                );
            }
        }
        let _ = writeln!(s, "</g>");
    }

    let lx = MARGIN_L + panels.len() as f64 * (PANEL_W + GAP);
    for (m, model) in models.iter().enumerate() {
        let y = MARGIN_T + 10.0 + 18.0 * m as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            PALETTE[m % PALETTE.len()],
            lx + 26.0,
            y + 4.0,
            escape(model)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Groups tables into figures and writes `<dir>/<name>.svg` for each.
pub fn emit_plots(dir: &Path, tables: &[Table]) -> Result<Vec<PathBuf>, ReportError> {
    let mut figures: BTreeMap<PlotSpec, Vec<&Table>> = BTreeMap::new();
    for t in tables {
        let spec = PlotSpec {
            metric: t.spec.metric,
            kinds: t.spec.kinds,
            position_variant: t.spec.position_variant,
            n_fillers: t.spec.n_fillers,
        };
        figures.entry(spec).or_default().push(t);
    }
    figures
        .into_iter()
        .map(|(spec, mut panels)| {
            panels.sort_by_key(|t| t.spec.entity_setting != EntitySetting::Multi);
            let path = dir.join(format!("{}.svg", spec.name()));
            write_atomic(&path, render_plot(&spec, &panels).as_bytes())?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::tables::{TableRow, TableSpec};

    fn table(setting: EntitySetting, metric: TableMetric, values: &[Option<f64>]) -> Table {
        Table {
            spec: TableSpec {
                metric,
                kinds: KindFilter::Related,
                entity_setting: setting,
                position_variant: PositionVariant::AfterFact,
                n_fillers: 0,
            },
            rows: values
                .iter()
                .enumerate()
                .map(|(n, v)| TableRow {
                    model: "mock:oracle".into(),
                    n_attractors: n,
                    value: *v,
                    count: 4,
                })
                .collect(),
        }
    }

    #[test]
    fn two_panels_with_exact_values() {
        let multi = table(EntitySetting::Multi, TableMetric::Accuracy, &[Some(1.0), Some(0.25), None, Some(0.1)]);
        let single = table(EntitySetting::Single, TableMetric::Accuracy, &[Some(0.5)]);
        let spec = PlotSpec {
            metric: TableMetric::Accuracy,
            kinds: KindFilter::Related,
            position_variant: PositionVariant::AfterFact,
            n_fillers: 0,
        };
        let svg = render_plot(&spec, &[&multi, &single]);
        assert_eq!(svg.matches(r#"class="panel""#).count(), 2);
        assert_eq!(svg.matches(r#"class="point""#).count(), 4);
        assert!(svg.contains(r#"data-n="1" data-value="0.25""#));
        assert!(!svg.contains("log scale"));
    }

    #[test]
    fn wide_ratio_range_uses_log_axis() {
        let t = table(EntitySetting::Multi, TableMetric::RelprobMedian, &[Some(1.0), Some(0.001), Some(0.0)]);
        let spec = PlotSpec {
            metric: TableMetric::RelprobMedian,
            kinds: KindFilter::Related,
            position_variant: PositionVariant::AfterFact,
            n_fillers: 0,
        };
        let svg = render_plot(&spec, &[&t]);
        assert!(svg.contains("log scale"));
        assert!(svg.contains("1e-3"));
        assert!(svg.contains(r#"data-value="0" data-count="4" data-clipped="true""#));
    }
}
