//! SVG figures rendered from the CSV outputs listed in a manifest.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;

use log::warn;
use plotters::prelude::*;

use crate::config::ExperimentId;
use crate::manifest::{Manifest, OutputKind};

/// Parsed CSV: numeric columns by header name, plus text columns.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub numeric: BTreeMap<String, Vec<f64>>,
    pub text: BTreeMap<String, Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, String> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        let headers: Vec<String> = rdr.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
        let mut cols: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
        for row in rdr.records() {
            let row = row.map_err(|e| e.to_string())?;
            for (c, v) in cols.iter_mut().zip(row.iter()) {
                c.push(v.to_string());
            }
        }
        let mut t = Table::default();
        for (h, c) in headers.into_iter().zip(cols) {
            match c.iter().map(|v| v.parse::<f64>()).collect::<Result<Vec<_>, _>>() {
                Ok(v) => {
                    t.numeric.insert(h, v);
                }
                Err(_) => {
                    t.text.insert(h, c);
                }
            }
        }
        Ok(t)
    }

    pub fn col(&self, name: &str) -> Result<&[f64], String> {
        self.numeric
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| format!("missing column '{name}'"))
    }

    /// Rows with `flag == "ok"`; every row when there is no flag column.
    fn ok_rows(&self) -> Vec<bool> {
        let n = self.numeric.values().next().map_or(0, Vec::len);
        match self.text.get("flag") {
            Some(f) => f.iter().map(|v| v == "ok").collect(),
            None => vec![true; n],
        }
    }
}

#[derive(Debug, Default)]
pub struct PlotReport {
    pub written: Vec<String>,
    /// Figures that could not be drawn, with the reason.
    pub failed: Vec<(String, String)>,
    /// CSVs listed in the manifest but absent on disk.
    pub missing: Vec<String>,
}

type Series = (String, Vec<(f64, f64)>);
type Points = Vec<(f64, f64, f64)>;

const PALETTE: [RGBColor; 5] = [BLUE, RED, GREEN, MAGENTA, CYAN];

/// Renders every figure whose inputs are listed in `manifest`.
pub fn render(dir: &Path, experiment: ExperimentId, manifest: &Manifest) -> PlotReport {
    let mut report = PlotReport::default();
    let mut tables = BTreeMap::new();
    for o in &manifest.outputs {
        if !matches!(o.kind, OutputKind::G2Csv | OutputKind::SweepCsv | OutputKind::SummaryCsv) {
            continue;
        }
        let path = dir.join(&o.path);
        if !path.exists() {
            warn!("listed output {} is missing", o.path);
            report.missing.push(o.path.clone());
            continue;
        }
        match Table::read(&path) {
            Ok(t) => {
                tables.insert(o.path.clone(), t);
            }
            Err(e) => report.failed.push((o.path.clone(), e)),
        }
    }
    if tables.is_empty() {
        warn!("manifest lists no data to plot");
        return report;
    }
    let mut draw = |name: String, f: &dyn Fn(&Path) -> Result<(), String>| match f(&dir.join(&name)) {
        Ok(()) => report.written.push(name),
        Err(e) => report.failed.push((name, e)),
    };
    let by_prefix = |prefix: &str| -> Vec<(&String, &Table)> {
        tables.iter().filter(|(k, _)| k.starts_with(prefix)).collect()
    };
    match experiment {
        ExperimentId::Fig3 => draw("fig3.svg".into(), &|p| fig3(p, &tables)),
        ExperimentId::Fig4 => draw("fig4.svg".into(), &|p| fig4(p, &by_prefix("fig4_N"))),
        ExperimentId::Sweep => draw("sweep.svg".into(), &|p| sweep(p, &by_prefix("sweep_N"))),
        ExperimentId::Fig5a | ExperimentId::Fig5b | ExperimentId::Fig5c | ExperimentId::Custom => {
            for (name, t) in tables.iter().filter(|(k, _)| k.ends_with("_g2.csv")) {
                draw(name.replace(".csv", ".svg"), &|p| g2_curve(p, t));
            }
        }
    }
    report
}

fn n_label(name: &str) -> String {
    let n = name.rsplit("_N").next().unwrap_or("").trim_end_matches(".csv");
    format!("N = {n}")
}

fn span(values: impl Iterator<Item = f64>, pad: f64) -> Range<f64> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return 0.0..1.0;
    }
    let d = ((hi - lo) * pad).max(1e-3);
    (lo - d)..(hi + d)
}

fn pairs(t: &Table, x: &str, y: &str, f: impl Fn(f64, f64) -> f64) -> Result<Vec<(f64, f64)>, String> {
    let (xs, ys) = (t.col(x)?, t.col(y)?);
    Ok(xs
        .iter()
        .zip(ys)
        .zip(t.ok_rows())
        .filter(|(_, ok)| *ok)
        .map(|((&a, &b), _)| (a, f(a, b)))
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .collect())
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Log-x panel with line series, optional points with error bars and dashed guides.
fn panel<DB: DrawingBackend>(
    area: &DrawingArea<DB, plotters::coord::Shift>,
    y_desc: &str,
    x_range: Range<f64>,
    lines: &[Series],
    points: &[(String, Points)],
    guides: &[f64],
) -> Result<(), String>
where
    DB::ErrorType: 'static,
{
    let y_range = span(
        lines
            .iter()
            .flat_map(|(_, v)| v.iter().map(|p| p.1))
            .chain(points.iter().flat_map(|(_, v)| v.iter().flat_map(|p| [p.1 - p.2, p.1 + p.2])))
            .chain(guides.iter().copied()),
        0.08,
    );
    let mut chart = ChartBuilder::on(area)
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(56)
        .build_cartesian_2d(x_range.log_scale(), y_range)
        .map_err(err)?;
    chart
        .configure_mesh()
        .x_desc("w / Γc")
        .y_desc(y_desc)
        .draw()
        .map_err(err)?;
    let (lo, hi) = (chart.x_range().start, chart.x_range().end);
    for &g in guides {
        chart
            .draw_series(DashedLineSeries::new([(lo, g), (hi, g)], 6, 4, BLACK.stroke_width(1)))
            .map_err(err)?;
    }
    for (i, (label, v)) in lines.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(v.iter().copied(), c.stroke_width(2)))
            .map_err(err)?
            .label(label.as_str())
            .legend(move |(x, y)| PathElement::new([(x, y), (x + 16, y)], c.stroke_width(2)));
    }
    for (label, v) in points {
        chart
            .draw_series(v.iter().map(|&(x, y, e)| ErrorBar::new_vertical(x, y - e, y, y + e, BLACK.filled(), 6)))
            .map_err(err)?
            .label(label.as_str())
            .legend(|(x, y)| Circle::new((x + 8, y), 3, BLACK.filled()));
    }
    if !lines.is_empty() || !points.is_empty() {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(err)?;
    }
    Ok(())
}

fn fig3(path: &Path, tables: &BTreeMap<String, Table>) -> Result<(), String> {
    let mut lines = Vec::new();
    for (name, t) in tables.iter().filter(|(k, _)| k.starts_with("fig3_semiclassical_N")) {
        lines.push((n_label(name), pairs(t, "w_over_gc", "g2_zero", |_, y| y)?));
    }
    let mut points = Vec::new();
    if let Some(t) = tables.get("fig3_mc.csv") {
        let (x, y, e) = (t.col("w_over_gc")?, t.col("g2_hist")?, t.col("g2_hist_err")?);
        let v: Points = x.iter().zip(y).zip(e).map(|((&x, &y), &e)| (x, y, e)).filter(|p| p.1.is_finite()).collect();
        points.push(("Monte Carlo".to_string(), v));
    }
    let x_range = span(
        points.iter().flat_map(|(_, v)| v.iter().map(|p| p.0)).chain([0.1, 100.0]),
        0.0,
    );
    let root = SVGBackend::new(path, (800, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let x_range = (x_range.start * 0.7).max(1e-3)..x_range.end * 1.4;
    panel(&root, "g2(0)", x_range, &lines, &points, &[1.0, 2.0])?;
    root.present().map_err(err)
}

fn fig4(path: &Path, tables: &[(&String, &Table)]) -> Result<(), String> {
    let root = SVGBackend::new(path, (800, 1200)).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let areas = root.split_evenly((3, 1));
    let panels: [(&str, &str); 3] = [("s", "s"), ("p", "p"), ("z2_minus_s2", "z2 - s^2")];
    for (area, (col, desc)) in areas.iter().zip(panels) {
        let lines = tables
            .iter()
            .map(|(name, t)| Ok((n_label(name), pairs(t, "w_over_gc", col, |_, y| y)?)))
            .collect::<Result<Vec<_>, String>>()?;
        panel(area, desc, x_span(&lines), &lines, &[], &[])?;
    }
    root.present().map_err(err)
}

fn sweep(path: &Path, tables: &[(&String, &Table)]) -> Result<(), String> {
    let root = SVGBackend::new(path, (800, 800)).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let areas = root.split_evenly((2, 1));
    for (area, (col, desc, guides)) in areas.iter().zip([("p", "p", &[][..]), ("g2_zero", "g2(0)", &[1.0, 2.0][..])]) {
        let lines = tables
            .iter()
            .map(|(name, t)| Ok((n_label(name), pairs(t, "w_over_gc", col, |_, y| y)?)))
            .collect::<Result<Vec<_>, String>>()?;
        panel(area, desc, x_span(&lines), &lines, &[], guides)?;
    }
    root.present().map_err(err)
}

fn x_span(lines: &[Series]) -> Range<f64> {
    let xs = lines.iter().flat_map(|(_, v)| v.iter().map(|p| p.0)).filter(|x| *x > 0.0);
    let (lo, hi) = xs.fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(x), b.max(x)));
    if lo.is_finite() && hi > lo {
        lo..hi
    } else {
        0.1..10.0
    }
}

fn g2_curve(path: &Path, t: &Table) -> Result<(), String> {
    let (tau, g, e) = (t.col("tau")?, t.col("g2")?, t.col("g2_err")?);
    let pts: Points = tau.iter().zip(g).zip(e).map(|((&x, &y), &e)| (x, y, e)).filter(|p| p.1.is_finite()).collect();
    let thermal: Option<Vec<(f64, f64)>> = t
        .numeric
        .get("thermal")
        .map(|th| tau.iter().zip(th).map(|(&x, &y)| (x, y)).collect());
    let x_range = span(tau.iter().copied(), 0.02);
    let y_range = span(
        pts.iter()
            .flat_map(|p| [p.1 - p.2, p.1 + p.2])
            .chain(thermal.iter().flatten().map(|p| p.1))
            .chain([1.0]),
        0.08,
    );
    let root = SVGBackend::new(path, (800, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(err)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(56)
        .build_cartesian_2d(x_range.clone(), y_range)
        .map_err(err)?;
    chart.configure_mesh().x_desc("tau Γc").y_desc("g2(tau)").draw().map_err(err)?;
    chart
        .draw_series(DashedLineSeries::new([(x_range.start, 1.0), (x_range.end, 1.0)], 6, 4, BLACK.stroke_width(1)))
        .map_err(err)?;
    chart
        .draw_series(pts.iter().map(|&(x, y, e)| ErrorBar::new_vertical(x, y - e, y, y + e, BLUE.filled(), 4)))
        .map_err(err)?
        .label("Monte Carlo")
        .legend(|(x, y)| Circle::new((x + 8, y), 3, BLUE.filled()));
    if let Some(th) = thermal {
        chart
            .draw_series(LineSeries::new(th, RED.stroke_width(2)))
            .map_err(err)?
            .label("thermal")
            .legend(|(x, y)| PathElement::new([(x, y), (x + 16, y)], RED.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(err)?;
    root.present().map_err(err)
}
