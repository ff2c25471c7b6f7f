use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::volumes::{Slice, Window};

use super::fsim::fsim_in_range;
use super::pixel::{hist_cc, mae, psnr};
use super::ssim::ssim;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Ssim,
    Psnr,
    Mae,
    HistCc,
    Fsim,
}

impl MetricKind {
    pub const ALL: [MetricKind; 5] = [MetricKind::Ssim, MetricKind::Psnr, MetricKind::Mae, MetricKind::HistCc, MetricKind::Fsim];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Ssim => "ssim",
            MetricKind::Psnr => "psnr",
            MetricKind::Mae => "mae",
            MetricKind::HistCc => "hist_cc",
            MetricKind::Fsim => "fsim",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Evaluation window: SSIM dynamic range and PSNR peak are `hi - lo`,
/// HistCC bins span `[lo, hi]` and FSIM maps it onto `[0, 255]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub metrics: Vec<MetricKind>,
    pub window: (f64, f64),
    pub hist_bins: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            metrics: MetricKind::ALL.to_vec(),
            window: (Window::CT.lo, Window::CT.hi),
            hist_bins: 64,
        }
    }
}

impl EvalConfig {
    pub fn for_window(window: Window) -> Self {
        EvalConfig {
            window: (window.lo, window.hi),
            ..Self::default()
        }
    }

    pub fn evaluate(&self, kind: MetricKind, pred: &Slice, reference: &Slice) -> Result<f64> {
        let (lo, hi) = self.window;
        if !(lo < hi) {
            return Err(Error::domain(format!("invalid window ({lo}, {hi})")));
        }
        match kind {
            MetricKind::Ssim => ssim(pred, reference, hi - lo),
            MetricKind::Psnr => psnr(pred, reference, hi - lo),
            MetricKind::Mae => mae(pred, reference),
            MetricKind::HistCc => hist_cc(pred, reference, self.hist_bins, self.window),
            MetricKind::Fsim => fsim_in_range(pred, reference, self.window),
        }
    }
}

mod float_text {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&super::format_value(*v))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad number {other:?}"))),
            },
        }
    }
}

/// Shortest round-trip decimal; non-finite values as `inf`, `-inf`, `nan`.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub slice: usize,
    pub metric: MetricKind,
    #[serde(with = "float_text")]
    pub value: f64,
}

/// Mean and sample standard deviation (`n - 1`) of the finite values, in
/// entry order. Non-finite values (PSNR of identical slices) are only counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub count: usize,
    pub non_finite: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let n = finite.len();
        let mean = (n > 0).then(|| finite.iter().sum::<f64>() / n as f64);
        let std = mean.map(|m| {
            if n < 2 {
                0.0
            } else {
                (finite.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64).sqrt()
            }
        });
        MetricSummary {
            count: n,
            non_finite: values.len() - n,
            mean,
            std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dataset: String,
    pub window: (f64, f64),
    pub per_slice: Vec<MetricEntry>,
    pub aggregate: BTreeMap<MetricKind, MetricSummary>,
}

impl MetricReport {
    pub fn new(dataset: impl Into<String>, window: (f64, f64), per_slice: Vec<MetricEntry>) -> Self {
        let mut grouped: BTreeMap<MetricKind, Vec<f64>> = BTreeMap::new();
        for e in &per_slice {
            grouped.entry(e.metric).or_default().push(e.value);
        }
        let aggregate = grouped.into_iter().map(|(k, v)| (k, MetricSummary::of(&v))).collect();
        MetricReport {
            dataset: dataset.into(),
            window,
            per_slice,
            aggregate,
        }
    }

    pub fn values(&self, metric: MetricKind) -> Vec<f64> {
        self.per_slice.iter().filter(|e| e.metric == metric).map(|e| e.value).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("slice,metric,value\n");
        for e in &self.per_slice {
            s.push_str(&format!("{},{},{}\n", e.slice, e.metric.name(), format_value(e.value)));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Evaluates `(prediction, reference)` pairs; entries are ordered by pair,
/// then by `cfg.metrics`, whatever `exec` is.
pub fn evaluate_pairs(pairs: &[(Slice, Slice)], cfg: &EvalConfig, dataset: &str, exec: Exec) -> Result<MetricReport> {
    let rows = exec.map(pairs, |(p, r)| cfg.metrics.iter().map(|&k| cfg.evaluate(k, p, r)).collect::<Result<Vec<f64>>>());
    let mut entries = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        for (&metric, value) in cfg.metrics.iter().zip(row?) {
            entries.push(MetricEntry { slice: i, metric, value });
        }
    }
    Ok(MetricReport::new(dataset, cfg.window, entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs() -> Vec<(Slice, Slice)> {
        (0..3)
            .map(|k| {
                let r = Slice::from_fn(32, 32, |x, y| if (x / 8 + y / 8) % 2 == 0 { -200.0 } else { 300.0 });
                let p = r.map(|v| v + 10.0 * k as f64);
                (p, r)
            })
            .collect()
    }

    #[test]
    fn aggregate_recomputes() {
        let rep = evaluate_pairs(&pairs(), &EvalConfig::default(), "unit", Exec::Sequential).unwrap();
        assert_eq!(rep.per_slice.len(), 15);
        let mae = rep.values(MetricKind::Mae);
        assert_eq!(mae, vec![0.0, 10.0, 20.0]);
        let s = &rep.aggregate[&MetricKind::Mae];
        assert_eq!(s.mean, Some(10.0));
        assert_eq!(s.std, Some(10.0));
        let p = &rep.aggregate[&MetricKind::Psnr];
        assert_eq!((p.count, p.non_finite), (2, 1));
    }

    #[test]
    fn policies_agree_and_serialize() {
        let cfg = EvalConfig::default();
        let a = evaluate_pairs(&pairs(), &cfg, "unit", Exec::Sequential).unwrap();
        let b = evaluate_pairs(&pairs(), &cfg, "unit", Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(a.to_csv().contains("\n0,psnr,inf\n"));
        let back: MetricReport = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn names_round_trip() {
        for k in MetricKind::ALL {
            assert_eq!(MetricKind::parse(k.name()), Some(k));
        }
        assert_eq!(MetricKind::parse("nope"), None);
    }
}
