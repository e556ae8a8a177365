//! Human-readable and machine-readable report rendering.
//!
//! Percentages shown to people are truncated (not rounded) to three
//! significant digits; JSON outputs keep full precision.

use serde::Serialize;
use smsl_core::RetrievalReport;

/// Truncates `x` to three significant digits, e.g. `62.987 → "62.9"`,
/// `5.4321 → "5.43"`, `100 → "100"`.
///
/// The decimal expansion is taken at 12 places first, so a value such as
/// `62.899999999999999` (from `0.629 * 100`) reads as `62.9`.
pub fn truncate3(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let sign = if x < 0.0 { "-" } else { "" };
    let digits = format!("{:.12}", x.abs());
    let (int_part, frac_part) = digits.split_once('.').expect("fixed notation has a point");
    if int_part.trim_start_matches('0').is_empty() && frac_part.trim_end_matches('0').is_empty() {
        return "0.00".into();
    }
    let int_sig = int_part.trim_start_matches('0');
    if int_sig.len() >= 3 {
        let kept: String = int_sig
            .chars()
            .enumerate()
            .map(|(i, c)| if i < 3 { c } else { '0' })
            .collect();
        return format!("{sign}{kept}");
    }
    let mut out = String::from(sign);
    out.push_str(if int_sig.is_empty() { "0" } else { int_sig });
    out.push('.');
    let mut remaining = 3 - int_sig.len();
    let mut seen_nonzero = !int_sig.is_empty();
    for c in frac_part.chars() {
        if remaining == 0 {
            break;
        }
        out.push(c);
        if c != '0' {
            seen_nonzero = true;
        }
        if seen_nonzero {
            remaining -= 1;
        }
    }
    out
}

/// Like [`truncate3`] but with an explicit `+` on positive values.
pub fn signed3(x: f64) -> String {
    let s = truncate3(x);
    if x > 0.0 {
        format!("+{s}")
    } else {
        s
    }
}

/// Flat `key: value` lines.
pub fn text_block(r: &RetrievalReport) -> String {
    let mut out = String::new();
    for (k, v) in [
        ("map_v2t", r.map_v2t),
        ("map_t2v", r.map_t2v),
        ("map_avg", r.map_avg),
        ("ndcg_v2t", r.ndcg_v2t),
        ("ndcg_t2v", r.ndcg_t2v),
        ("ndcg_avg", r.ndcg_avg),
    ] {
        out.push_str(&format!("{k}: {}\n", truncate3(v)));
    }
    out.push_str(&format!("skipped_anchors_v2t: {}\n", r.skipped_anchors_v2t));
    out.push_str(&format!("skipped_anchors_t2v: {}\n", r.skipped_anchors_t2v));
    out
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn metric_cells(r: &RetrievalReport, fmt: fn(f64) -> String) -> [String; 6] {
    [
        r.map_v2t, r.map_t2v, r.map_avg, r.ndcg_v2t, r.ndcg_t2v, r.ndcg_avg,
    ]
    .map(fmt)
}

/// A table row: label plus six formatted metric cells.
pub type Row = (String, [String; 6]);

pub fn row(label: &str, r: &RetrievalReport) -> Row {
    (label.into(), metric_cells(r, truncate3))
}

/// Per-metric difference `a − b`, formatted with a sign.
pub fn delta_row(label: &str, a: &RetrievalReport, b: &RetrievalReport) -> Row {
    let d = [
        a.map_v2t - b.map_v2t,
        a.map_t2v - b.map_t2v,
        a.map_avg - b.map_avg,
        a.ndcg_v2t - b.ndcg_v2t,
        a.ndcg_t2v - b.ndcg_t2v,
        a.ndcg_avg - b.ndcg_avg,
    ];
    (label.into(), d.map(signed3))
}

/// Two-level header table: mAP and nDCG, each split into V→T, T→V and Avg.
pub fn text_table(rows: &[Row]) -> String {
    let width = rows
        .iter()
        .map(|(l, _)| l.chars().count())
        .chain([6])
        .max()
        .unwrap_or(6);
    let mut out = format!("{:width$} | {:^20} | {:^20}\n", "", "mAP", "nDCG");
    out.push_str(&format!(
        "{:width$} | {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6}\n",
        "Method", "V→T", "T→V", "Avg", "V→T", "T→V", "Avg"
    ));
    out.push_str(&format!(
        "{}-+-{}-+-{}\n",
        "-".repeat(width),
        "-".repeat(20),
        "-".repeat(20)
    ));
    for (label, c) in rows {
        let pad = width - label.chars().count() + label.len();
        out.push_str(&format!(
            "{label:pad$} | {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6}\n",
            c[0], c[1], c[2], c[3], c[4], c[5]
        ));
    }
    out
}

pub fn csv_table(rows: &[Row]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "method", "map_v2t", "map_t2v", "map_avg", "ndcg_v2t", "ndcg_t2v", "ndcg_avg",
    ])
    .expect("in-memory write");
    for (label, c) in rows {
        let mut rec = vec![label.as_str()];
        rec.extend(c.iter().map(String::as_str));
        w.write_record(rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation() {
        assert_eq!(truncate3(62.987), "62.9");
        assert_eq!(truncate3(5.4321), "5.43");
        assert_eq!(truncate3(100.0), "100");
        assert_eq!(truncate3(0.5), "0.500");
        assert_eq!(truncate3(0.012345), "0.0123");
        assert_eq!(truncate3(0.0), "0.00");
        assert_eq!(truncate3(1234.5), "1230");
        assert_eq!(truncate3(-1.2345), "-1.23");
        assert_eq!(truncate3(0.629 * 100.0), "62.9");
        assert_eq!(truncate3(99.99), "99.9");
        assert_eq!(signed3(1.1), "+1.10");
        assert_eq!(signed3(0.0), "0.00");
    }

    fn report() -> RetrievalReport {
        RetrievalReport {
            map_v2t: 50.0,
            map_t2v: 40.0,
            map_avg: 45.0,
            ndcg_v2t: 66.666,
            ndcg_t2v: 60.0,
            ndcg_avg: 63.333,
            skipped_anchors_v2t: 1,
            skipped_anchors_t2v: 0,
        }
    }

    #[test]
    fn json_keys() {
        let v: serde_json::Value = serde_json::from_str(&to_json(&report())).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(
            keys,
            [
                "map_avg",
                "map_t2v",
                "map_v2t",
                "ndcg_avg",
                "ndcg_t2v",
                "ndcg_v2t",
                "skipped_anchors_t2v",
                "skipped_anchors_v2t"
            ]
        );
    }

    #[test]
    fn text_outputs() {
        let block = text_block(&report());
        assert!(block.contains("ndcg_v2t: 66.6\n"));
        assert!(block.contains("skipped_anchors_v2t: 1\n"));
        let rows = [
            row("SMS w/o τ", &report()),
            delta_row("Δ", &report(), &report()),
        ];
        let t = text_table(&rows);
        assert_eq!(t.lines().count(), 5);
        assert!(t.contains("SMS w/o τ"));
        let c = csv_table(&rows);
        assert_eq!(
            c.lines().nth(1).unwrap(),
            "SMS w/o τ,50.0,40.0,45.0,66.6,60.0,63.3"
        );
        assert_eq!(c.lines().nth(2).unwrap(), "Δ,0.00,0.00,0.00,0.00,0.00,0.00");
    }
}
