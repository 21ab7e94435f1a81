//! Selection-provenance counts and table rendering.

use std::fmt::Write as _;

use super::result::{Occurrence, RunResult};
use crate::data::Video;
use crate::pool::Pool;

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Per-class composition of the labeled part of `pool`. `videos` are the
/// training videos the pool was built over, in pool order.
pub fn occurrence_report(pool: &Pool, videos: &[Video], classes: usize) -> Occurrence {
    let mut labeled_counts = vec![0usize; classes];
    let mut total_counts = vec![0usize; classes];
    for (v, video) in videos.iter().enumerate() {
        for label in &video.labels {
            for (c, n) in total_counts.iter_mut().enumerate() {
                *n += usize::from(label.has_class(c));
            }
        }
        for label in pool.revealed(v).iter().flatten() {
            for (c, n) in labeled_counts.iter_mut().enumerate() {
                *n += usize::from(label.has_class(c));
            }
        }
    }
    let labeled = pool.annotated_frames();
    Occurrence {
        share_pct: labeled_counts.iter().map(|&n| pct(n, labeled)).collect(),
        captured_pct: labeled_counts
            .iter()
            .zip(&total_counts)
            .map(|(&n, &t)| pct(n, t))
            .collect(),
        labeled_counts,
        total_counts,
    }
}

/// Text and CSV renderings of a set of results.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tables {
    pub text: String,
    pub csv: String,
}

fn column_label(r: &RunResult) -> String {
    match &r.significance {
        Some(s) => format!("{} [{}]", r.method, s.test.band.label()),
        None => r.method.clone(),
    }
}

/// Performance table (rows: annotated fraction, columns: runs, cells:
/// `F1 (accuracy)` in percent) followed by one class-occurrence table per run
/// (cells: `share (captured)` in percent).
pub fn render_tables(results: &[RunResult]) -> Tables {
    let mut fractions: Vec<f64> = results
        .iter()
        .flat_map(|r| r.checkpoints.iter().map(|c| c.nominal_fraction))
        .collect();
    fractions.sort_by(f64::total_cmp);
    fractions.dedup();

    let mut text = String::new();
    let mut csv = String::from("table,method,fraction,class,value,secondary\n");

    let headers: Vec<String> = results.iter().map(column_label).collect();
    let width = headers.iter().map(String::len).max().unwrap_or(0).max(13);
    write!(text, "{:<10}", "annotated").unwrap();
    for h in &headers {
        write!(text, " {h:>width$}").unwrap();
    }
    text.push('\n');
    for &f in &fractions {
        write!(text, "{:<10}", format!("{:.0}%", 100.0 * f)).unwrap();
        for r in results {
            let cell = match r.checkpoints.iter().find(|c| c.nominal_fraction == f) {
                Some(c) => {
                    writeln!(
                        csv,
                        "performance,{},{f},,{:.6},{:.6}",
                        r.method, c.weighted_f1, c.accuracy
                    )
                    .unwrap();
                    format!("{:.1} ({:.1})", 100.0 * c.weighted_f1, 100.0 * c.accuracy)
                }
                None => "-".into(),
            };
            write!(text, " {cell:>width$}").unwrap();
        }
        text.push('\n');
    }
    if let Some(s) = results.iter().find_map(|r| r.significance.as_ref()) {
        writeln!(
            text,
            "\n{} vs random (mean of {} runs): W = {}, n = {}, p = {:.4} ({}), paired per {}",
            s.method,
            s.baseline_runs.len(),
            s.test.statistic,
            s.test.n,
            s.test.p_value,
            s.test.band.label(),
            s.pairing
        )
        .unwrap();
    }

    for r in results {
        let classes = r.checkpoints.first().map_or(0, |c| c.occurrence.share_pct.len());
        writeln!(text, "\nclass occurrence, {}: labeled share % (captured %)", r.method).unwrap();
        write!(text, "{:<10}", "annotated").unwrap();
        for c in 0..classes {
            write!(text, " {:>13}", format!("class {c}")).unwrap();
        }
        text.push('\n');
        for cp in &r.checkpoints {
            write!(text, "{:<10}", format!("{:.0}%", 100.0 * cp.nominal_fraction)).unwrap();
            for c in 0..classes {
                let (share, cap) = (cp.occurrence.share_pct[c], cp.occurrence.captured_pct[c]);
                write!(text, " {:>13}", format!("{share:.1} ({cap:.1})")).unwrap();
                writeln!(
                    csv,
                    "occurrence,{},{},{c},{share:.6},{cap:.6}",
                    r.method, cp.nominal_fraction
                )
                .unwrap();
            }
            text.push('\n');
        }
    }
    Tables { text, csv }
}
