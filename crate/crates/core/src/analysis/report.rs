//! Joins predictions onto the corpus and writes the report directory.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{DateTime, TimeZone, Utc};
use serde::Serialize;

use super::{
    affinity_by_label, bin_by_fortnight, count_by_label, detect_lead_changes, percent_difference, ratio_to_fixed,
    svg, AffinityReport, AnalysisError, LabeledComment, LeadChangeEvent, Percent, TrendSeries, DEFAULT_LEAD_EXCLUDE,
};
use crate::classifier::{detect_class_collapse, CollapseWarning, PredictionRow};
use crate::corpus::{rfc3339_secs, Comment, StudyWindow};
use crate::labels::{StanceLabel, NUM_LABELS};
use num_rational::Ratio;

#[derive(Debug, Clone)]
pub struct ReportConfig {
    pub window: StudyWindow,
    /// Start of the zoomed trend chart; it runs to the window end.
    pub focus_start: DateTime<Utc>,
    pub lead_exclude: Vec<StanceLabel>,
    /// Pairs `(a, b)` reported as the percent difference of a over b.
    pub comparisons: Vec<(StanceLabel, StanceLabel)>,
    /// Enables the class-collapse check when known.
    pub trained_label_counts: Option<[u64; NUM_LABELS]>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            window: StudyWindow::default(),
            focus_start: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
            lead_exclude: DEFAULT_LEAD_EXCLUDE.to_vec(),
            comparisons: vec![
                (StanceLabel::ProPalestino, StanceLabel::ProIsrael),
                (StanceLabel::AntiIsrael, StanceLabel::AntiPalestino),
            ],
            trained_label_counts: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CountRow {
    pub code: u8,
    pub label: StanceLabel,
    pub display_name: &'static str,
    pub count: u64,
    pub share_percent: Option<Percent>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub a: StanceLabel,
    pub b: StanceLabel,
    pub a_count: u64,
    pub b_count: u64,
    /// Absent when `b_count` is zero.
    pub percent_difference: Option<Percent>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AffinityOut {
    pub code: u8,
    pub label: StanceLabel,
    pub comment_count: u64,
    pub like_sum: u64,
    pub mean_likes: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LeadChangeOut {
    pub bin_index: usize,
    #[serde(with = "rfc3339_secs")]
    pub bin_start: DateTime<Utc>,
    pub previous_leader: StanceLabel,
    pub new_leader: StanceLabel,
    pub margin: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub total_comments: u64,
    #[serde(with = "rfc3339_secs")]
    pub window_start: DateTime<Utc>,
    #[serde(with = "rfc3339_secs")]
    pub window_end: DateTime<Utc>,
    pub bins: usize,
    pub counts: Vec<CountRow>,
    pub comparisons: Vec<Comparison>,
    pub affinity: Vec<AffinityOut>,
    pub lead_changes: Vec<LeadChangeOut>,
    pub class_collapse: Vec<CollapseWarning>,
}

#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub counts: [u64; NUM_LABELS],
    pub trend: TrendSeries,
    pub affinity: AffinityReport,
    pub lead_changes: Vec<LeadChangeEvent>,
    pub collapse: Vec<CollapseWarning>,
    pub summary: Summary,
    pub files: Vec<PathBuf>,
}

/// Pairs each comment with its predicted code. Every comment must be covered.
pub fn join_predictions(comments: &[Comment], predictions: &[PredictionRow]) -> Result<Vec<LabeledComment>, AnalysisError> {
    let by_id: HashMap<&str, u8> = predictions.iter().map(|p| (p.comment_id.as_str(), p.code)).collect();
    let mut missing = Vec::new();
    let mut out = Vec::with_capacity(comments.len());
    for c in comments {
        match by_id.get(c.comment_id.as_str()) {
            Some(&code) => out.push(LabeledComment {
                comment_id: c.comment_id.clone(),
                published_at: c.published_at,
                like_count: c.like_count,
                code,
            }),
            None => missing.push(c.comment_id.clone()),
        }
    }
    if missing.is_empty() {
        Ok(out)
    } else {
        Err(AnalysisError::Coverage { missing })
    }
}

pub fn build_report(
    comments: &[Comment],
    predictions: &[PredictionRow],
    config: &ReportConfig,
    out_dir: &Path,
) -> Result<ReportBundle, AnalysisError> {
    let labeled = join_predictions(comments, predictions)?;
    let counts = count_by_label(labeled.iter().map(|c| c.code));
    let trend = bin_by_fortnight(&labeled, config.window.start, Some(config.window.end))?;
    let affinity = affinity_by_label(&labeled);
    let lead_changes = detect_lead_changes(&trend, &config.lead_exclude);
    let collapse = config
        .trained_label_counts
        .map(|t| detect_class_collapse(&counts, &t))
        .unwrap_or_default();
    let total: u64 = counts.iter().sum();

    let summary = Summary {
        total_comments: total,
        window_start: config.window.start,
        window_end: config.window.end,
        bins: trend.len(),
        counts: StanceLabel::ALL
            .iter()
            .map(|&l| CountRow {
                code: l.code(),
                label: l,
                display_name: l.display_name(),
                count: counts[l.index()],
                share_percent: (total > 0)
                    .then(|| Percent(Ratio::new(counts[l.index()] as i128 * 100, total as i128))),
            })
            .collect(),
        comparisons: config
            .comparisons
            .iter()
            .map(|&(a, b)| Comparison {
                a,
                b,
                a_count: counts[a.index()],
                b_count: counts[b.index()],
                percent_difference: percent_difference(counts[a.index()], counts[b.index()]).ok(),
            })
            .collect(),
        affinity: affinity
            .rows
            .iter()
            .map(|r| AffinityOut {
                code: r.label.code(),
                label: r.label,
                comment_count: r.comment_count,
                like_sum: r.like_sum,
                mean_likes: r.mean_likes.map(|m| ratio_to_fixed(m, 2)),
            })
            .collect(),
        lead_changes: lead_changes
            .iter()
            .map(|e| LeadChangeOut {
                bin_index: e.bin_index,
                bin_start: trend.bins[e.bin_index].start,
                previous_leader: e.previous_leader,
                new_leader: e.new_leader,
                margin: e.margin,
            })
            .collect(),
        class_collapse: collapse.clone(),
    };

    let files = write_outputs(out_dir, &summary, &trend, config)?;
    Ok(ReportBundle {
        counts,
        trend,
        affinity,
        lead_changes,
        collapse,
        summary,
        files,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AnalysisError + '_ {
    move |source| AnalysisError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_outputs(
    dir: &Path,
    summary: &Summary,
    trend: &TrendSeries,
    config: &ReportConfig,
) -> Result<Vec<PathBuf>, AnalysisError> {
    let charts = dir.join("charts");
    std::fs::create_dir_all(&charts).map_err(io_err(&charts))?;
    let mut files = Vec::new();
    let mut put = |name: &str, contents: String| -> Result<(), AnalysisError> {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(io_err(&path))?;
        files.push(path);
        Ok(())
    };

    let mut counts_csv = String::from("code,label,count\n");
    for r in &summary.counts {
        let _ = writeln!(counts_csv, "{},{},{}", r.code, r.label, r.count);
    }
    put("counts.csv", counts_csv)?;

    let mut trend_csv = String::from("bin_index,bin_start,label_code,count\n");
    for (bin, counts) in trend.bins.iter().zip(&trend.counts) {
        for l in StanceLabel::ALL {
            let _ = writeln!(
                trend_csv,
                "{},{},{},{}",
                bin.index,
                rfc3339_secs::format(&bin.start),
                l.code(),
                counts[l.index()]
            );
        }
    }
    put("trend.csv", trend_csv)?;

    let mut affinity_csv = String::from("code,label,comment_count,like_sum,mean_likes\n");
    for r in &summary.affinity {
        let _ = writeln!(
            affinity_csv,
            "{},{},{},{},{}",
            r.code,
            r.label,
            r.comment_count,
            r.like_sum,
            r.mean_likes.as_deref().unwrap_or("")
        );
    }
    put("affinity.csv", affinity_csv)?;

    put("lead_changes.json", pretty(&summary.lead_changes))?;
    put("summary.json", pretty(summary))?;
    put("summary.txt", summary_text(summary))?;

    let count_rows: Vec<_> = summary
        .counts
        .iter()
        .map(|r| (r.label, r.count as f64, r.count.to_string()))
        .collect();
    put("charts/counts.svg", svg::bar_chart("Comments per category", &count_rows))?;

    let trend_chart = |s: &TrendSeries, title: &str| {
        let ticks: Vec<String> = s.bins.iter().map(|b| b.start.format("%Y-%m-%d").to_string()).collect();
        let series: Vec<_> = StanceLabel::ALL
            .iter()
            .map(|&l| (l, s.counts.iter().map(|c| c[l.index()]).collect()))
            .collect();
        svg::line_chart(title, &ticks, &series)
    };
    put("charts/trend.svg", trend_chart(trend, "Comments per fortnight"))?;
    let focus = trend.subset(config.focus_start, config.window.end);
    put("charts/trend_focus.svg", trend_chart(&focus, "Comments per fortnight, final weeks"))?;

    let affinity_rows: Vec<_> = summary
        .affinity
        .iter()
        .map(|r| {
            let mean = r.mean_likes.as_deref().unwrap_or("0");
            (r.label, mean.parse::<f64>().unwrap_or(0.0), mean.to_string())
        })
        .collect();
    put("charts/affinity.svg", svg::bar_chart("Mean likes per comment", &affinity_rows))?;
    Ok(files)
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn summary_text(s: &Summary) -> String {
    let mut t = String::new();
    let _ = writeln!(
        t,
        "{} comments, {} to {}, {} fortnights",
        s.total_comments,
        rfc3339_secs::format(&s.window_start),
        rfc3339_secs::format(&s.window_end),
        s.bins
    );
    t.push('\n');
    for r in &s.counts {
        let share = r.share_percent.map(|p| format!(" ({p}%)")).unwrap_or_default();
        let _ = writeln!(t, "{:>16} {:>8}{share}", r.display_name, r.count);
    }
    t.push('\n');
    for c in &s.comparisons {
        match &c.percent_difference {
            Some(p) => {
                let _ = writeln!(t, "{} vs {}: {p}%", c.a.display_name(), c.b.display_name());
            }
            None => {
                let _ = writeln!(t, "{} vs {}: undefined", c.a.display_name(), c.b.display_name());
            }
        }
    }
    t.push('\n');
    for r in &s.affinity {
        let _ = writeln!(
            t,
            "{:>16} mean likes {}",
            r.label.display_name(),
            r.mean_likes.as_deref().unwrap_or("n/a")
        );
    }
    if !s.lead_changes.is_empty() {
        t.push('\n');
        for e in &s.lead_changes {
            let _ = writeln!(
                t,
                "lead change in fortnight {} ({}): {} overtakes {} by {}",
                e.bin_index,
                e.bin_start.format("%Y-%m-%d"),
                e.new_leader.display_name(),
                e.previous_leader.display_name(),
                e.margin
            );
        }
    }
    for w in &s.class_collapse {
        let _ = writeln!(t, "warning: {}", w.message);
    }
    t
}
