//! Packet-delay traces to three-state channel observations.
//!
//! Each delay is classified against two adaptive borders:
//!
//! ```text
//! t1 = baseline + margin          state 1: delay <= t1  (decoded at first try)
//! t2 = t1 + harq_offset           state 2: t1 < delay <= t2  (HARQ corrected)
//!                                 state 3: delay > t2  (further correction)
//! ```
//!
//! The baseline is the moving average of the last `window` delays classified
//! as state 1; delays in states 2 and 3 are outliers and never enter it. The
//! baseline is seeded with the median of the first `warmup_inliers` delays of
//! a trace and stays frozen until that many inliers have been seen. Clock-skew correction between
//! sender and receiver is not attempted.

use std::collections::VecDeque;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::chain::State;
use crate::error::{Error, Result};
use crate::sim::{seeded_rng, unit_f64};

pub const DEFAULT_MARGIN_MS: f64 = 3.0;
pub const DEFAULT_HARQ_OFFSET_MS: f64 = 7.0;
pub const DEFAULT_AVERAGE_WINDOW: usize = 500;
pub const DEFAULT_WARMUP_INLIERS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayRecord {
    pub packet_index: u64,
    pub delay_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    pub margin_ms: f64,
    pub harq_offset_ms: f64,
    /// Moving-average length in inliers.
    pub average_window: usize,
    pub warmup_inliers: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            margin_ms: DEFAULT_MARGIN_MS,
            harq_offset_ms: DEFAULT_HARQ_OFFSET_MS,
            average_window: DEFAULT_AVERAGE_WINDOW,
            warmup_inliers: DEFAULT_WARMUP_INLIERS,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("margin_ms", self.margin_ms),
            ("harq_offset_ms", self.harq_offset_ms),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.average_window == 0 {
            return Err(Error::Config("average_window must be >= 1".into()));
        }
        Ok(())
    }
}

/// Adaptive decision borders.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdState {
    baseline: f64,
    cfg: ThresholdConfig,
    inliers: VecDeque<f64>,
    inliers_seen: usize,
}

impl ThresholdState {
    /// Thresholds seeded with an initial baseline (usually the first delay).
    pub fn seeded(baseline_ms: f64, cfg: ThresholdConfig) -> Result<Self> {
        cfg.validate()?;
        if !(baseline_ms.is_finite() && baseline_ms > 0.0) {
            return Err(Error::Parameter(format!(
                "baseline must be > 0, got {baseline_ms}"
            )));
        }
        Ok(ThresholdState {
            baseline: baseline_ms,
            inliers: VecDeque::with_capacity(cfg.average_window),
            cfg,
            inliers_seen: 0,
        })
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    pub fn config(&self) -> &ThresholdConfig {
        &self.cfg
    }

    /// Upper border of state 1.
    pub fn lower_threshold(&self) -> f64 {
        self.baseline + self.cfg.margin_ms
    }

    /// Upper border of state 2.
    pub fn upper_threshold(&self) -> f64 {
        self.lower_threshold() + self.cfg.harq_offset_ms
    }

    pub fn classify(&self, rec: &DelayRecord) -> State {
        let id = if rec.delay_ms <= self.lower_threshold() {
            1
        } else if rec.delay_ms <= self.upper_threshold() {
            2
        } else {
            3
        };
        State::new(id).expect("nonzero id")
    }

    /// Moves the baseline if `rec` is an inlier under the current borders.
    pub fn update(&mut self, rec: &DelayRecord) {
        if self.classify(rec).id() != 1 {
            return;
        }
        if self.inliers.len() == self.cfg.average_window {
            self.inliers.pop_front();
        }
        self.inliers.push_back(rec.delay_ms);
        self.inliers_seen += 1;
        if self.inliers_seen >= self.cfg.warmup_inliers {
            self.baseline = self.inliers.iter().sum::<f64>() / self.inliers.len() as f64;
        }
    }
}

/// Median of the first `warmup_inliers` delays (at least one). Robust to a
/// trace that opens with a retransmitted packet.
pub fn seed_baseline(trace: &[DelayRecord], cfg: &ThresholdConfig) -> f64 {
    let k = cfg.warmup_inliers.clamp(1, trace.len().max(1));
    let mut head: Vec<f64> = trace.iter().take(k).map(|r| r.delay_ms).collect();
    head.sort_by(f64::total_cmp);
    head.get(head.len() / 2).copied().unwrap_or(f64::NAN)
}

/// Classifies every record (classify, then update) into states 1..=3.
pub fn pipeline(trace: &[DelayRecord], cfg: &ThresholdConfig) -> Result<Vec<State>> {
    cfg.validate()?;
    if trace.is_empty() {
        return Ok(Vec::new());
    }
    for (i, rec) in trace.iter().enumerate() {
        if !(rec.delay_ms.is_finite() && rec.delay_ms > 0.0) {
            return Err(Error::trace(
                i as u64 + 1,
                format!("delay {} must be > 0", rec.delay_ms),
            ));
        }
        if i > 0 && rec.packet_index <= trace[i - 1].packet_index {
            return Err(Error::trace(
                i as u64 + 1,
                format!("packet_index {} is not increasing", rec.packet_index),
            ));
        }
    }
    let mut th = ThresholdState::seeded(seed_baseline(trace, cfg), *cfg)?;
    Ok(trace
        .iter()
        .map(|rec| {
            let state = th.classify(rec);
            th.update(rec);
            state
        })
        .collect())
}

/// Reads either `packet_index,delay_ms` or
/// `packet_index,t_send_us,t_recv_us` (delay = (t_recv - t_send) / 1000).
/// A header row is required; malformed rows are reported with their line.
pub fn read_delay_csv<R: std::io::Read>(input: R) -> Result<Vec<DelayRecord>> {
    enum Shape {
        Delay(usize, usize),
        Timestamps(usize, usize, usize),
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let shape = match (
        col("packet_index"),
        col("delay_ms"),
        col("t_send_us"),
        col("t_recv_us"),
    ) {
        (Some(i), Some(d), _, _) => Shape::Delay(i, d),
        (Some(i), None, Some(s), Some(r)) => Shape::Timestamps(i, s, r),
        _ => {
            return Err(Error::trace(
                1,
                "expected header `packet_index,delay_ms` or `packet_index,t_send_us,t_recv_us`",
            ))
        }
    };

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let num = |c: usize, what: &str| -> Result<f64> {
            let raw = record.get(c).map(str::trim).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::trace(line, format!("bad {what} `{raw}`")))
        };
        let (index_col, delay_ms) = match shape {
            Shape::Delay(i, d) => (i, num(d, "delay_ms")?),
            Shape::Timestamps(i, s, r) => {
                (i, (num(r, "t_recv_us")? - num(s, "t_send_us")?) / 1000.0)
            }
        };
        let raw_index = record.get(index_col).map(str::trim).unwrap_or("");
        let packet_index = raw_index
            .parse::<u64>()
            .map_err(|_| Error::trace(line, format!("bad packet_index `{raw_index}`")))?;
        if delay_ms <= 0.0 {
            return Err(Error::trace(
                line,
                format!("delay {delay_ms} ms must be > 0"),
            ));
        }
        if out
            .last()
            .is_some_and(|p: &DelayRecord| packet_index <= p.packet_index)
        {
            return Err(Error::trace(
                line,
                format!("packet_index {packet_index} is not increasing"),
            ));
        }
        out.push(DelayRecord {
            packet_index,
            delay_ms,
        });
    }
    Ok(out)
}

/// Writes `packet_index,delay_ms,state`.
pub fn write_state_csv<W: std::io::Write>(
    trace: &[DelayRecord],
    states: &[State],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["packet_index", "delay_ms", "state"])?;
    for (rec, s) in trace.iter().zip(states) {
        w.write_record([
            rec.packet_index.to_string(),
            rec.delay_ms.to_string(),
            s.id().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_delay_csv<W: std::io::Write>(trace: &[DelayRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["packet_index", "delay_ms"])?;
    for rec in trace {
        w.write_record([rec.packet_index.to_string(), rec.delay_ms.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Parameters of a synthetic three-cluster delay trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticDelayConfig {
    pub packets: usize,
    pub baseline_ms: f64,
    pub noise_sigma_ms: f64,
    /// Total baseline change from the first to the last packet.
    pub drift_ms: f64,
    pub harq_rate: f64,
    pub harq_offset_ms: f64,
    pub severe_rate: f64,
    pub severe_offset_ms: f64,
}

impl Default for SyntheticDelayConfig {
    fn default() -> Self {
        SyntheticDelayConfig {
            packets: 100_000,
            baseline_ms: 20.0,
            noise_sigma_ms: 0.5,
            drift_ms: 2.0,
            harq_rate: 0.09,
            harq_offset_ms: 7.0,
            severe_rate: 0.01,
            severe_offset_ms: 40.0,
        }
    }
}

/// Synthetic trace plus the generating labels. Each packet independently
/// needs HARQ with probability `harq_rate` and further correction with
/// probability `severe_rate`.
pub fn synthetic_delay_trace(
    cfg: &SyntheticDelayConfig,
    seed: u64,
) -> Result<(Vec<DelayRecord>, Vec<State>)> {
    if !(cfg.harq_rate >= 0.0 && cfg.severe_rate >= 0.0 && cfg.harq_rate + cfg.severe_rate <= 1.0) {
        return Err(Error::Config(
            "harq_rate + severe_rate must lie in [0, 1]".into(),
        ));
    }
    let noise = Normal::new(0.0, cfg.noise_sigma_ms)
        .map_err(|e| Error::Config(format!("noise sigma: {e}")))?;
    let mut rng = seeded_rng(seed);
    let span = cfg.packets.saturating_sub(1).max(1) as f64;
    let mut records = Vec::with_capacity(cfg.packets);
    let mut labels = Vec::with_capacity(cfg.packets);
    for k in 0..cfg.packets {
        let u = unit_f64(&mut rng);
        let (id, offset) = if u < cfg.severe_rate {
            (3, cfg.severe_offset_ms)
        } else if u < cfg.severe_rate + cfg.harq_rate {
            (2, cfg.harq_offset_ms)
        } else {
            (1, 0.0)
        };
        let base = cfg.baseline_ms + cfg.drift_ms * k as f64 / span;
        let delay = (base + offset + noise.sample(&mut rng)).max(1e-3);
        records.push(DelayRecord {
            packet_index: k as u64,
            delay_ms: delay,
        });
        labels.push(State::new(id).expect("nonzero id"));
    }
    Ok((records, labels))
}
