//! `plot`: turn report JSON files into CSV tables and self-contained SVG bar
//! charts.
//!
//! Three report shapes are recognized by their top-level key:
//!
//! * an evaluation report (`per_class`) becomes a long-format CSV with one
//!   row per class and metric, plus a grouped bar chart;
//! * an ablation report (`rows`) becomes a per-model metric CSV and an
//!   accuracy-comparison CSV, each with a chart;
//! * a generic multi-model report (`models`, entries with model /
//!   precision / recall / f1 / accuracy) is treated like the ablation shape.
//!
//! A structurally valid report with no data rows still produces its CSV
//! headers (with a warning), so downstream tooling sees a stable schema.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use causecat_core::metrics::EvalReport;
use serde::Deserialize;

use crate::config::RunConfig;
use crate::fail::{io_failure, missing_input, Failure};
use crate::output::OutDir;

use super::ablate::AblationDocument;

#[derive(Debug, Deserialize)]
struct ModelRow {
    model: String,
    precision: f64,
    recall: f64,
    f1: f64,
    accuracy: f64,
}

#[derive(Debug, Deserialize)]
struct ModelsDocument {
    models: Vec<ModelRow>,
}

fn malformed(path: &Path, reason: impl std::fmt::Display) -> Failure {
    Failure::data(format!("malformed report {}: {reason}", path.display()))
}

/// File-name stem for outputs derived from `path`.
fn stem_of(path: &Path) -> String {
    let raw = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    let raw = raw
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "report".to_string());
    raw.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn csv_from_rows(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, Failure> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(header)
        .map_err(|e| Failure::data(format!("cannot write csv header: {e}")))?;
    for row in rows {
        writer
            .write_record(row)
            .map_err(|e| Failure::data(format!("cannot write csv row: {e}")))?;
    }
    writer
        .into_inner()
        .map_err(|e| Failure::data(format!("cannot finish csv output: {e}")))
}

/// Grouped bar chart as a standalone SVG document. One group per label on
/// the x axis, one bar per series inside each group.
fn bar_chart_svg(title: &str, groups: &[String], series: &[(&str, Vec<f64>)]) -> String {
    const BAR_WIDTH: f64 = 22.0;
    const BAR_GAP: f64 = 4.0;
    const GROUP_GAP: f64 = 26.0;
    const LEFT: f64 = 56.0;
    const TOP: f64 = 48.0;
    const PLOT_HEIGHT: f64 = 220.0;
    const BOTTOM: f64 = 72.0;

    let palette = ["#4878a8", "#e49444", "#5fa05a", "#c65b5b", "#8a7bb5"];
    let group_width = series.len() as f64 * (BAR_WIDTH + BAR_GAP) - BAR_GAP + GROUP_GAP;
    let width = LEFT + groups.len() as f64 * group_width + 160.0;
    let height = TOP + PLOT_HEIGHT + BOTTOM;

    let max_value = series
        .iter()
        .flat_map(|(_, values)| values.iter().copied())
        .fold(0.0_f64, f64::max)
        .max(1e-9);
    // Round the axis top up to a tidy value.
    let y_max = if max_value <= 1.0 {
        1.0
    } else {
        max_value.ceil()
    };

    let mut svg = String::new();
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"12\">"
    )
    .expect("string write");
    writeln!(
        svg,
        "  <rect width=\"{width:.0}\" height=\"{height:.0}\" fill=\"white\"/>"
    )
    .expect("string write");
    writeln!(
        svg,
        "  <text x=\"{LEFT}\" y=\"24\" font-size=\"15\" font-weight=\"bold\">{}</text>",
        xml_escape(title)
    )
    .expect("string write");

    // Axes and horizontal grid lines at quarters.
    let baseline = TOP + PLOT_HEIGHT;
    for step in 0..=4 {
        let frac = step as f64 / 4.0;
        let y = baseline - frac * PLOT_HEIGHT;
        let value = frac * y_max;
        writeln!(
            svg,
            "  <line x1=\"{LEFT}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/>",
            width - 150.0
        )
        .expect("string write");
        writeln!(
            svg,
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{value:.2}</text>",
            LEFT - 6.0,
            y + 4.0
        )
        .expect("string write");
    }
    writeln!(
        svg,
        "  <line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{baseline}\" stroke=\"#333333\"/>"
    )
    .expect("string write");
    writeln!(
        svg,
        "  <line x1=\"{LEFT}\" y1=\"{baseline}\" x2=\"{:.1}\" y2=\"{baseline}\" stroke=\"#333333\"/>",
        width - 150.0
    )
    .expect("string write");

    if groups.is_empty() || series.is_empty() {
        writeln!(
            svg,
            "  <text x=\"{:.1}\" y=\"{:.1}\" fill=\"#777777\">no data</text>",
            LEFT + 20.0,
            TOP + PLOT_HEIGHT / 2.0
        )
        .expect("string write");
    }

    for (g, group) in groups.iter().enumerate() {
        let group_x = LEFT + GROUP_GAP / 2.0 + g as f64 * group_width;
        for (s, (name, values)) in series.iter().enumerate() {
            let value = values.get(g).copied().unwrap_or(0.0);
            let bar_height = (value.max(0.0) / y_max) * PLOT_HEIGHT;
            let x = group_x + s as f64 * (BAR_WIDTH + BAR_GAP);
            let y = baseline - bar_height;
            let color = palette[s % palette.len()];
            writeln!(
                svg,
                "  <rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{BAR_WIDTH}\" height=\"{bar_height:.1}\" \
                 fill=\"{color}\"><title>{}: {} = {value:.4}</title></rect>",
                xml_escape(group),
                xml_escape(name)
            )
            .expect("string write");
        }
        let label_x = group_x + (series.len() as f64 * (BAR_WIDTH + BAR_GAP) - BAR_GAP) / 2.0;
        writeln!(
            svg,
            "  <text x=\"{label_x:.1}\" y=\"{:.1}\" text-anchor=\"end\" \
             transform=\"rotate(-35 {label_x:.1} {:.1})\">{}</text>",
            baseline + 16.0,
            baseline + 16.0,
            xml_escape(group)
        )
        .expect("string write");
    }

    // Legend.
    let legend_x = width - 140.0;
    for (s, (name, _)) in series.iter().enumerate() {
        let y = TOP + s as f64 * 20.0;
        let color = palette[s % palette.len()];
        writeln!(svg, "  <rect x=\"{legend_x:.1}\" y=\"{y:.1}\" width=\"12\" height=\"12\" fill=\"{color}\"/>")
            .expect("string write");
        writeln!(
            svg,
            "  <text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            legend_x + 18.0,
            y + 10.0,
            xml_escape(name)
        )
        .expect("string write");
    }

    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn warn_empty(path: &Path) {
    eprintln!(
        "warning: report {} has no data rows; wrote header-only CSV",
        path.display()
    );
}

fn plot_eval(out: &OutDir, path: &Path, report: &EvalReport) -> Result<Vec<String>, Failure> {
    let stem = stem_of(path);
    let mut rows = Vec::new();
    let mut groups = Vec::new();
    let mut precision = Vec::new();
    let mut recall = Vec::new();
    let mut f1 = Vec::new();
    for class in &report.per_class {
        let label = class.category.label().to_string();
        for (metric, value) in [
            ("precision", class.precision),
            ("recall", class.recall),
            ("f1", class.f1),
        ] {
            rows.push(vec![
                label.clone(),
                metric.to_string(),
                format!("{value:.6}"),
            ]);
        }
        groups.push(label);
        precision.push(class.precision);
        recall.push(class.recall);
        f1.push(class.f1);
    }
    if rows.is_empty() {
        warn_empty(path);
    }
    let csv_name = format!("{stem}_per_class.csv");
    out.write_bytes(
        &csv_name,
        &csv_from_rows(&["class", "metric", "value"], &rows)?,
    )?;
    let svg_name = format!("{stem}_per_class.svg");
    let chart = bar_chart_svg(
        "Per-class metrics",
        &groups,
        &[("precision", precision), ("recall", recall), ("f1", f1)],
    );
    out.write_text(&svg_name, &chart)?;
    Ok(vec![csv_name, svg_name])
}

/// Shared emitter for the two multi-model shapes: a metric table per model
/// plus the accuracy comparison.
fn plot_models(
    out: &OutDir,
    path: &Path,
    header: &[&str],
    table: &[Vec<String>],
    chart_series: &[(&str, Vec<f64>)],
    models: &[String],
    accuracies: &[f64],
) -> Result<Vec<String>, Failure> {
    let stem = stem_of(path);
    if table.is_empty() {
        warn_empty(path);
    }
    let models_csv = format!("{stem}_models.csv");
    out.write_bytes(&models_csv, &csv_from_rows(header, table)?)?;
    let models_svg = format!("{stem}_models.svg");
    out.write_text(
        &models_svg,
        &bar_chart_svg("Model comparison", models, chart_series),
    )?;

    let accuracy_rows: Vec<Vec<String>> = models
        .iter()
        .zip(accuracies)
        .map(|(model, acc)| vec![model.clone(), format!("{acc:.6}")])
        .collect();
    let accuracy_csv = format!("{stem}_accuracy.csv");
    out.write_bytes(
        &accuracy_csv,
        &csv_from_rows(&["model", "accuracy"], &accuracy_rows)?,
    )?;
    let accuracy_svg = format!("{stem}_accuracy.svg");
    out.write_text(
        &accuracy_svg,
        &bar_chart_svg(
            "Accuracy comparison",
            models,
            &[("accuracy", accuracies.to_vec())],
        ),
    )?;
    Ok(vec![models_csv, models_svg, accuracy_csv, accuracy_svg])
}

pub fn run(config: &RunConfig) -> Result<(), Failure> {
    if config.reports.is_empty() {
        return Err(Failure::usage(
            "plot needs at least one report JSON file (positional argument or `reports` in the config)",
        ));
    }
    for path in &config.reports {
        if !path.is_file() {
            return Err(missing_input("report", path));
        }
    }

    let out = OutDir::create(config)?;
    let mut written = Vec::new();
    for path in &config.reports {
        let bytes = fs::read(path).map_err(|e| io_failure("read", path, e))?;
        let value: serde_json::Value =
            serde_json::from_slice(&bytes).map_err(|e| malformed(path, e))?;

        let files = if value.get("per_class").is_some() {
            let report: EvalReport =
                serde_json::from_value(value).map_err(|e| malformed(path, e))?;
            plot_eval(&out, path, &report)?
        } else if value.get("rows").is_some() {
            let doc: AblationDocument =
                serde_json::from_value(value).map_err(|e| malformed(path, e))?;
            let models: Vec<String> = doc.rows.iter().map(|r| r.model.clone()).collect();
            let accuracy: Vec<f64> = doc.rows.iter().map(|r| r.accuracy).collect();
            let macro_f1: Vec<f64> = doc.rows.iter().map(|r| r.macro_f1).collect();
            let weighted_f1: Vec<f64> = doc.rows.iter().map(|r| r.weighted_f1).collect();
            let table: Vec<Vec<String>> = doc
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.model.clone(),
                        format!("{:.6}", r.accuracy),
                        format!("{:.6}", r.macro_f1),
                        format!("{:.6}", r.weighted_f1),
                        format!("{:.6}", r.loss),
                    ]
                })
                .collect();
            plot_models(
                &out,
                path,
                &["model", "accuracy", "macro_f1", "weighted_f1", "loss"],
                &table,
                &[
                    ("accuracy", accuracy.clone()),
                    ("macro_f1", macro_f1),
                    ("weighted_f1", weighted_f1),
                ],
                &models,
                &accuracy,
            )?
        } else if value.get("models").is_some() {
            let doc: ModelsDocument =
                serde_json::from_value(value).map_err(|e| malformed(path, e))?;
            let models: Vec<String> = doc.models.iter().map(|r| r.model.clone()).collect();
            let accuracy: Vec<f64> = doc.models.iter().map(|r| r.accuracy).collect();
            let precision: Vec<f64> = doc.models.iter().map(|r| r.precision).collect();
            let recall: Vec<f64> = doc.models.iter().map(|r| r.recall).collect();
            let f1: Vec<f64> = doc.models.iter().map(|r| r.f1).collect();
            let table: Vec<Vec<String>> = doc
                .models
                .iter()
                .map(|r| {
                    vec![
                        r.model.clone(),
                        format!("{:.6}", r.precision),
                        format!("{:.6}", r.recall),
                        format!("{:.6}", r.f1),
                        format!("{:.6}", r.accuracy),
                    ]
                })
                .collect();
            plot_models(
                &out,
                path,
                &["model", "precision", "recall", "f1", "accuracy"],
                &table,
                &[("precision", precision), ("recall", recall), ("f1", f1)],
                &models,
                &accuracy,
            )?
        } else {
            return Err(malformed(
                path,
                "unrecognized shape (expected a `per_class`, `rows`, or `models` key)",
            ));
        };
        written.extend(files);
    }

    for name in &written {
        println!("wrote {}", out.path(name).display());
    }
    Ok(())
}
