//! The evaluation table: one row per method with average cut-off, mean
//! metric, mean latency and significance marks against each baseline.

use rltlab_core::metrics::MetricKind;
use rltlab_core::sim::{CostModel, EvalRow};
use rltlab_core::stats::paired_t_test;
use rltlab_core::MetricId;

use crate::commands::num;

/// Marker for the i-th baseline.
pub const MARKS: [&str; 6] = ["*", "†", "‡", "§", "¶", "#"];

pub fn mark(i: usize) -> String {
    MARKS[i % MARKS.len()].repeat(1 + i / MARKS.len())
}

/// Display label such as `nDCG@10`.
pub fn metric_label(metric: MetricId) -> String {
    let stem = match metric.kind {
        MetricKind::Precision => "P",
        MetricKind::Recall => "R",
        MetricKind::F1 => "F1",
        MetricKind::DcgPenalized => "DCG",
        MetricKind::Ndcg => "nDCG",
        MetricKind::NdcgExp => "nDCG-exp",
        MetricKind::Judged => "Judged",
    };
    format!("{stem}@{}", metric.k)
}

/// Two decimals with trailing zeros dropped: `10`, `37.5`, `37.46`.
pub fn format_avg_k(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub eval: EvalRow,
    /// Significant difference from each baseline, in baseline order.
    pub significant: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub dataset: String,
    pub metric: MetricId,
    pub cost_model: CostModel,
    pub baselines: Vec<String>,
    pub rows: Vec<ReportRow>,
}

impl ReportTable {
    /// Marks come from a paired t-test at 0.05 on per-query metric values.
    /// A row is never marked against itself.
    pub fn build(dataset: &str, metric: MetricId, cost_model: CostModel, baselines: &[String], rows: Vec<EvalRow>) -> Self {
        let base_values: Vec<Option<Vec<f64>>> = baselines
            .iter()
            .map(|b| rows.iter().find(|r| &r.method == b).map(EvalRow::metric_values))
            .collect();
        let rows = rows
            .into_iter()
            .map(|eval| {
                let values = eval.metric_values();
                let significant = baselines
                    .iter()
                    .zip(&base_values)
                    .map(|(b, bv)| match bv {
                        Some(bv) if *b != eval.method => paired_t_test(&values, bv).is_ok_and(|t| t.significant),
                        _ => false,
                    })
                    .collect();
                ReportRow { eval, significant }
            })
            .collect();
        Self {
            dataset: dataset.to_string(),
            metric,
            cost_model,
            baselines: baselines.to_vec(),
            rows,
        }
    }

    pub fn row(&self, method: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.eval.method == method)
    }

    /// Full-precision values; significance as `sig_vs_<baseline>` booleans.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![
            "method".to_string(),
            "avg_k".into(),
            self.metric.to_string(),
            "latency".into(),
        ];
        header.extend(self.baselines.iter().map(|b| format!("sig_vs_{b}")));
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![
                r.eval.method.clone(),
                num(r.eval.avg_k),
                num(r.eval.mean_metric),
                num(r.eval.mean_latency),
            ];
            rec.extend(r.significant.iter().map(|s| s.to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn per_query_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "query_id", "k", &self.metric.to_string()])
            .expect("in-memory write");
        for r in &self.rows {
            for o in &r.eval.per_query {
                w.write_record([r.eval.method.as_str(), &o.query_id, &o.k.to_string(), &num(o.metric)])
                    .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Aligned plain-text table with marks as suffixes on the metric.
    pub fn to_text(&self) -> String {
        let metric = metric_label(self.metric);
        let header = ["Method".to_string(), "Avg. k".into(), metric.clone(), "Lat.".into()];
        let body: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| {
                let marks: String = r
                    .significant
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| **s)
                    .map(|(i, _)| mark(i))
                    .collect();
                [
                    r.eval.method.clone(),
                    format_avg_k(r.eval.avg_k),
                    format!("{:.3}{marks}", r.eval.mean_metric),
                    format!("{:.2}", r.eval.mean_latency),
                ]
            })
            .collect();
        let width = |i: usize| {
            std::iter::once(&header[i])
                .chain(body.iter().map(|r| &r[i]))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        };
        let widths: Vec<usize> = (0..4).map(width).collect();
        let line = |cells: &[String; 4]| {
            let mut s = format!("{:<w$}", cells[0], w = widths[0]);
            for (i, c) in cells.iter().enumerate().skip(1) {
                let pad = widths[i] - c.chars().count();
                s.push_str("  ");
                s.push_str(&" ".repeat(pad));
                s.push_str(c);
            }
            s.trim_end().to_string()
        };

        let mut out = format!(
            "Dataset: {}\nMetric: {}  Latency: {} s/item + {} s/query\n\n",
            self.dataset, metric, self.cost_model.per_item_latency, self.cost_model.fixed_overhead
        );
        out.push_str(&line(&header));
        out.push('\n');
        out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 6));
        out.push('\n');
        for r in &body {
            out.push_str(&line(r));
            out.push('\n');
        }
        if !self.baselines.is_empty() {
            out.push('\n');
            for (i, b) in self.baselines.iter().enumerate() {
                out.push_str(&format!("{} significant difference from {b} (paired t-test, p < 0.05)\n", mark(i)));
            }
        }
        out
    }
}
