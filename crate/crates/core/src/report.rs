//! Robustness reports: per-cell scores against the clean baseline, plus the
//! CSV, violin-summary and SVG chart renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distortions::{DistortionKind, SeverityLevel};
use crate::error::{Error, Result};
use crate::eval::EvalResult;
use crate::stats::{aggregate_stats, robustness_rate, SummaryStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    /// No detections were supplied for this cell.
    Absent,
    /// The clean baseline scored zero, so no rate exists.
    UndefinedRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    /// `None` for the clean (level 0) baseline.
    pub kind: Option<DistortionKind>,
    pub level: u8,
    pub status: CellStatus,
    pub map: Option<f64>,
    pub ap50: Option<f64>,
    pub miou: Option<f64>,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub clean: CellScore,
    pub cells: Vec<CellScore>,
    /// Summary of the defined rates over all cells.
    pub rate_stats: Option<SummaryStats>,
    pub warnings: Vec<String>,
}

impl RobustnessReport {
    /// Builds the report from the clean evaluation and one optional
    /// evaluation per (kind, level) cell; `None` marks an absent cell.
    pub fn from_results(
        clean: &EvalResult,
        cells: Vec<(DistortionKind, SeverityLevel, Option<EvalResult>)>,
    ) -> Self {
        let mut warnings = Vec::new();
        let clean_defined = clean.map != 0.0;
        if !clean_defined {
            warnings.push(format!("{}: clean mAP is 0", Error::UndefinedRate));
        }
        let clean_score = CellScore {
            kind: None,
            level: 0,
            status: if clean_defined {
                CellStatus::Ok
            } else {
                CellStatus::UndefinedRate
            },
            map: Some(clean.map),
            ap50: Some(clean.ap50),
            miou: Some(clean.miou),
            rate: clean_defined.then_some(1.0),
        };
        let mut scores: Vec<CellScore> = cells
            .into_iter()
            .map(|(kind, level, result)| match result {
                None => {
                    warnings.push(format!("{kind} level {level}: detections absent"));
                    CellScore {
                        kind: Some(kind),
                        level: level.get(),
                        status: CellStatus::Absent,
                        map: None,
                        ap50: None,
                        miou: None,
                        rate: None,
                    }
                }
                Some(r) => {
                    let rate = robustness_rate(r.map, clean.map).ok();
                    CellScore {
                        kind: Some(kind),
                        level: level.get(),
                        status: if rate.is_some() {
                            CellStatus::Ok
                        } else {
                            CellStatus::UndefinedRate
                        },
                        map: Some(r.map),
                        ap50: Some(r.ap50),
                        miou: Some(r.miou),
                        rate,
                    }
                }
            })
            .collect();
        scores.sort_by_key(|c| (c.kind, c.level));
        let rates: Vec<f64> = scores.iter().filter_map(|c| c.rate).collect();
        Self {
            clean: clean_score,
            rate_stats: aggregate_stats(&rates).ok(),
            cells: scores,
            warnings,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json(text, &e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Kinds present in the report, in canonical order.
    pub fn kinds(&self) -> Vec<DistortionKind> {
        let mut kinds: Vec<DistortionKind> = self.cells.iter().filter_map(|c| c.kind).collect();
        kinds.dedup();
        kinds
    }

    /// `(level, mAP)` points of one kind, absent cells dropped.
    pub fn curve(&self, kind: DistortionKind) -> Vec<(u8, f64)> {
        self.cells
            .iter()
            .filter(|c| c.kind == Some(kind))
            .filter_map(|c| c.map.map(|m| (c.level, m)))
            .collect()
    }

    /// Flat CSV with columns `kind,level,mAP,AP50,mIoU,rate`; the clean row
    /// comes first as kind `clean`, level 0. Missing values are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,level,mAP,AP50,mIoU,rate\n");
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        for cell in std::iter::once(&self.clean).chain(&self.cells) {
            let kind = cell.kind.map_or("clean", DistortionKind::slug);
            let _ = writeln!(
                out,
                "{kind},{},{},{},{},{}",
                cell.level,
                opt(cell.map),
                opt(cell.ap50),
                opt(cell.miou),
                opt(cell.rate)
            );
        }
        out
    }
}

/// Violin-plot statistics: mAP per kind over its levels, plus mAP and rate
/// over every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolinSummary {
    pub per_kind: BTreeMap<DistortionKind, SummaryStats>,
    pub overall_map: Option<SummaryStats>,
    pub overall_rate: Option<SummaryStats>,
}

pub fn violin_summary(report: &RobustnessReport) -> ViolinSummary {
    let per_kind = report
        .kinds()
        .into_iter()
        .filter_map(|k| {
            let maps: Vec<f64> = report.curve(k).into_iter().map(|(_, m)| m).collect();
            aggregate_stats(&maps).ok().map(|s| (k, s))
        })
        .collect();
    let maps: Vec<f64> = report.cells.iter().filter_map(|c| c.map).collect();
    let rates: Vec<f64> = report.cells.iter().filter_map(|c| c.rate).collect();
    ViolinSummary {
        per_kind,
        overall_map: aggregate_stats(&maps).ok(),
        overall_rate: aggregate_stats(&rates).ok(),
    }
}

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 48.0;

/// Line chart of mAP against severity level (x axis 0..=10, y axis 0..=1).
pub fn chart_svg(kind: DistortionKind, points: &[(u8, f64)]) -> String {
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let x = |level: f64| MARGIN + level / SeverityLevel::MAX as f64 * plot_w;
    let y = |v: f64| HEIGHT - MARGIN - v.clamp(0.0, 1.0) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        svg,
        r#"  <text x="{:.1}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{} mAP by severity</text>"#,
        WIDTH / 2.0,
        kind.name()
    );
    let _ = writeln!(
        svg,
        r#"  <line x1="{0:.1}" y1="{1:.1}" x2="{2:.1}" y2="{1:.1}" stroke="black"/>"#,
        MARGIN,
        HEIGHT - MARGIN,
        WIDTH - MARGIN
    );
    let _ = writeln!(
        svg,
        r#"  <line x1="{0:.1}" y1="{1:.1}" x2="{0:.1}" y2="{2:.1}" stroke="black"/>"#,
        MARGIN,
        HEIGHT - MARGIN,
        MARGIN
    );
    for level in 0..=SeverityLevel::MAX {
        let _ = writeln!(
            svg,
            r#"  <text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="10">{level}</text>"#,
            x(level as f64),
            HEIGHT - MARGIN + 14.0
        );
    }
    for tick in 0..=4 {
        let v = tick as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"  <text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="10">{v:.2}</text>"#,
            MARGIN - 4.0,
            y(v) + 3.0
        );
    }
    let coords: Vec<String> = points
        .iter()
        .map(|&(l, v)| format!("{:.2},{:.2}", x(l as f64), y(v)))
        .collect();
    let _ = writeln!(
        svg,
        r#"  <polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#,
        coords.join(" ")
    );
    for &(l, v) in points {
        let _ = writeln!(
            svg,
            r#"  <circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#,
            x(l as f64),
            y(v)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
