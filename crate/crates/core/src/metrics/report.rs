use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use serde_json::Value;

use super::spans::SpanMatchReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Ser,
    Exact,
    Sari,
    Span,
    Tagging,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Ser, Metric::Exact, Metric::Sari, Metric::Span, Metric::Tagging];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Ser => "ser",
            Metric::Exact => "exact",
            Metric::Sari => "sari",
            Metric::Span => "span",
            Metric::Tagging => "tagging",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let valid: Vec<&str> = Metric::ALL.iter().map(|m| m.name()).collect();
            format!("unknown metric `{s}` (valid: {})", valid.join(", "))
        })
    }
}

/// One scored metric: `{"metric": ..., "value": ..., <counts>}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub metric: String,
    pub value: f64,
    #[serde(flatten)]
    pub counts: BTreeMap<String, Value>,
}

impl MetricReport {
    pub fn scalar(metric: Metric, value: f64, sentences: usize) -> Self {
        MetricReport {
            metric: metric.name().into(),
            value,
            counts: BTreeMap::from([("sentences".to_string(), Value::from(sentences))]),
        }
    }

    /// Reports F-beta as the value, with the counts and P/R alongside.
    pub fn prf(metric: Metric, r: &SpanMatchReport) -> Self {
        let counts = BTreeMap::from([
            ("true_positives".to_string(), Value::from(r.true_positives)),
            ("hyp_count".to_string(), Value::from(r.hyp_count)),
            ("gold_count".to_string(), Value::from(r.gold_count)),
            ("precision".to_string(), Value::from(r.precision)),
            ("recall".to_string(), Value::from(r.recall)),
            ("beta".to_string(), Value::from(r.beta)),
        ]);
        MetricReport {
            metric: metric.name().into(),
            value: r.f_beta,
            counts,
        }
    }
}

/// Fixed-width table, one metric per row.
pub fn render_table(reports: &[MetricReport]) -> String {
    let mut out = format!("{:<10} {:>10}  details\n", "metric", "value");
    for r in reports {
        let details: Vec<String> = r.counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
        out.push_str(&format!("{:<10} {:>10.4}  {}\n", r.metric, r.value, details.join(" ")));
    }
    out
}
