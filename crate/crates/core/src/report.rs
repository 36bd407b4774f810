//! CSV tables and SVG charts for metrics and plan verification.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mogan::{EpochLoss, SizeMetrics};
use crate::planner::TrialResult;

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

fn f3(v: f64) -> String {
    format!("{v:.3}")
}

/// One row of the per-tower-size error table, lengths in dm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub tower_size: usize,
    pub records: usize,
    pub e1_mae_dm: f64,
    pub e2_mae_dm: f64,
    pub e3_error: f64,
}

impl MetricRow {
    pub fn from_metrics(model: &str, m: &SizeMetrics) -> Self {
        MetricRow { model: model.into(), tower_size: m.tower_size, records: m.records, e1_mae_dm: m.e1_mae, e2_mae_dm: m.e2_mae, e3_error: m.e3_error }
    }
}

/// Rows grouped by tower size, values with three decimals.
pub fn metrics_csv(rows: &[MetricRow]) -> Result<String> {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| (a.tower_size, &a.model).cmp(&(b.tower_size, &b.model)));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "tower_size", "records", "e1_mae_dm", "e2_mae_dm", "e3_error"]).map_err(csv_err)?;
    for r in &sorted {
        w.write_record([r.model.clone(), r.tower_size.to_string(), r.records.to_string(), f3(r.e1_mae_dm), f3(r.e2_mae_dm), f3(r.e3_error)])
            .map_err(csv_err)?;
    }
    finish(w)
}

pub fn read_metrics_csv(text: &str) -> Result<Vec<MetricRow>> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().map(|r| r.map_err(csv_err)).collect()
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub epoch: usize,
    pub head: String,
    pub split: String,
    pub loss: f64,
}

/// Per-epoch losses, one row per network and split.
pub fn loss_csv(log: &[EpochLoss]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "head", "split", "loss"]).map_err(csv_err)?;
    for l in log {
        for (split, v) in [("train", l.train_loss), ("val", l.val_loss)] {
            w.write_record([l.epoch.to_string(), l.network.clone(), split.to_string(), format!("{v:.6}")]).map_err(csv_err)?;
        }
    }
    finish(w)
}

pub fn read_loss_csv(text: &str) -> Result<Vec<LossRow>> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().map(|r| r.map_err(csv_err)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRow {
    pub task: String,
    pub predictor: String,
    pub size: usize,
    pub sample: usize,
    pub inventory: String,
    pub success: bool,
    pub failure: String,
    pub predicted_score: String,
    pub true_metric: String,
}

pub fn verification_csv(trials: &[TrialResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["task", "predictor", "size", "sample", "inventory", "success", "failure", "predicted_score", "true_metric"]).map_err(csv_err)?;
    for t in trials {
        let inv: Vec<String> = t.inventory.iter().map(u32::to_string).collect();
        let predicted = t.plan.as_ref().map(|p| f3(p.predicted_score)).unwrap_or_default();
        let truth = t.plan.as_ref().and_then(|p| p.verified.as_ref()).map(|v| f3(v.metric)).unwrap_or_default();
        w.write_record([
            t.task.clone(),
            t.predictor.clone(),
            t.size.to_string(),
            t.sample.to_string(),
            inv.join(";"),
            t.success.to_string(),
            t.failure.clone().unwrap_or_default(),
            predicted,
            truth,
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

pub fn read_verification_csv(text: &str) -> Result<Vec<VerificationRow>> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().map(|r| r.map_err(csv_err)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessRow {
    pub task: String,
    pub predictor: String,
    pub size: usize,
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
}

/// Success counts per (task, predictor, size).
pub fn success_table(rows: &[VerificationRow]) -> Vec<SuccessRow> {
    let mut m: BTreeMap<(String, String, usize), (usize, usize)> = BTreeMap::new();
    for r in rows {
        let e = m.entry((r.task.clone(), r.predictor.clone(), r.size)).or_default();
        e.0 += usize::from(r.success);
        e.1 += 1;
    }
    m.into_iter()
        .map(|((task, predictor, size), (s, n))| SuccessRow { task, predictor, size, successes: s, trials: n, rate: s as f64 / n as f64 })
        .collect()
}

pub fn success_csv(rows: &[SuccessRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["task", "predictor", "size", "successes", "trials", "rate"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([r.task.clone(), r.predictor.clone(), r.size.to_string(), r.successes.to_string(), r.trials.to_string(), f3(r.rate)])
            .map_err(csv_err)?;
    }
    finish(w)
}

pub fn read_success_csv(text: &str) -> Result<Vec<SuccessRow>> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().map(|r| r.map_err(csv_err)).collect()
}

const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

/// Grouped bars: one group per x label, one bar per series, values in [0, `y_max`].
pub fn bar_chart_svg(title: &str, x_labels: &[String], series: &[(String, Vec<f64>)], y_max: f64) -> String {
    let (w, h, left, bottom, top) = (640.0, 360.0, 56.0, 48.0, 40.0);
    let plot_w = w - left - 20.0;
    let plot_h = h - bottom - top;
    let groups = x_labels.len().max(1) as f64;
    let group_w = plot_w / groups;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    let y_max = if y_max > 0.0 { y_max } else { 1.0 };
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let base = h - bottom;
    let _ = writeln!(s, r#"<line x1="{left}" y1="{base}" x2="{}" y2="{base}" stroke="black"/>"#, w - 20.0);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{base}" stroke="black"/>"#);
    for t in 0..=4 {
        let v = y_max * t as f64 / 4.0;
        let y = base - plot_h * t as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, left - 6.0, y + 4.0, f3(v));
    }
    for (g, label) in x_labels.iter().enumerate() {
        let gx = left + group_w * g as f64 + group_w * 0.1;
        for (k, (_, values)) in series.iter().enumerate() {
            let v = values.get(g).copied().unwrap_or(0.0).clamp(0.0, y_max);
            let bh = plot_h * v / y_max;
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
                gx + bar_w * k as f64,
                base - bh,
                bar_w,
                bh,
                PALETTE[k % PALETTE.len()]
            );
        }
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, left + group_w * (g as f64 + 0.5), base + 18.0, escape(label));
    }
    for (k, (name, _)) in series.iter().enumerate() {
        let y = h - 12.0;
        let x = left + 120.0 * k as f64;
        let _ = writeln!(s, r#"<rect x="{x}" y="{}" width="10" height="10" fill="{}"/>"#, y - 9.0, PALETTE[k % PALETTE.len()]);
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, x + 14.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Success rate per size, one series per (task, predictor).
pub fn success_chart(rows: &[SuccessRow]) -> String {
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in rows {
        let v = series.entry(format!("{} / {}", r.task, r.predictor)).or_insert_with(|| vec![0.0; sizes.len()]);
        let i = sizes.iter().position(|&s| s == r.size).expect("size collected above");
        v[i] = r.rate;
    }
    let labels: Vec<String> = sizes.iter().map(|s| format!("size {s}")).collect();
    bar_chart_svg("Plan success rate", &labels, &series.into_iter().collect::<Vec<_>>(), 1.0)
}

/// E1 error per tower size, one series per model.
pub fn metrics_chart(rows: &[MetricRow]) -> String {
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.tower_size).filter(|&s| s > 0).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.tower_size > 0) {
        let v = series.entry(r.model.clone()).or_insert_with(|| vec![0.0; sizes.len()]);
        let i = sizes.iter().position(|&s| s == r.tower_size).expect("size collected above");
        v[i] = r.e1_mae_dm;
    }
    let y_max = rows.iter().map(|r| r.e1_mae_dm).fold(0.0, f64::max);
    let labels: Vec<String> = sizes.iter().map(|s| format!("size {s}")).collect();
    bar_chart_svg("Effect 1 validation error (dm)", &labels, &series.into_iter().collect::<Vec<_>>(), y_max)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_round_trip_with_three_decimals() {
        let rows = vec![
            MetricRow { model: "mogan".into(), tower_size: 2, records: 10, e1_mae_dm: 0.12345, e2_mae_dm: 0.0004, e3_error: 0.1 },
            MetricRow { model: "baseline".into(), tower_size: 1, records: 7, e1_mae_dm: 0.5, e2_mae_dm: 0.25, e3_error: 0.0 },
        ];
        let text = metrics_csv(&rows).unwrap();
        assert!(text.contains("mogan,2,10,0.123,0.000,0.100"));
        let back = read_metrics_csv(&text).unwrap();
        assert_eq!(back[0].tower_size, 1);
        assert_eq!(back[1].e1_mae_dm, 0.123);
    }

    #[test]
    fn success_table_and_chart() {
        let row = |size, success| VerificationRow {
            task: "tallest".into(),
            predictor: "oracle".into(),
            size,
            sample: 0,
            inventory: "0;7".into(),
            success,
            failure: String::new(),
            predicted_score: "1.000".into(),
            true_metric: "1.000".into(),
        };
        let table = success_table(&[row(2, true), row(2, false), row(3, true)]);
        assert_eq!(table.len(), 2);
        assert_eq!((table[0].successes, table[0].trials), (1, 2));
        let text = success_csv(&table).unwrap();
        assert_eq!(read_success_csv(&text).unwrap(), table);
        let svg = success_chart(&table);
        assert!(svg.starts_with("<svg") && svg.contains("size 3"));
    }
}
