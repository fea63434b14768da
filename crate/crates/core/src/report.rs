//! Per-window run reports and comparison metrics.
//!
//! Report CSV columns, with `i`, `j` as 1-based state ids:
//!
//! ```text
//! window_index,
//! sl_p{i}_{j}...      projected SL transition matrix
//! u_{i}...            per-row uncertainty
//! dc_{i}...           per-row degree of conflict (empty for window 0)
//! reset_{i}...        1 when row i was reset
//! cl_p{i}_{j}...      classical per-window estimate
//! gt_p{i}_{j}...      ground truth (only when known)
//! ```

use std::fmt;

use crate::chain::{State, TransitionMatrix};
use crate::error::{Error, Result};
use crate::ident::{
    classical_estimate, Identifier, IdentifierConfig, IdentifierOutput, WindowStats, Windows,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub window_index: usize,
    pub sl: TransitionMatrix,
    pub uncertainty: Vec<f64>,
    pub conflicts: Option<Vec<f64>>,
    pub reset: Vec<bool>,
    pub classical: TransitionMatrix,
    pub ground_truth: Option<TransitionMatrix>,
}

impl ReportRow {
    pub fn from_output(
        stats: &WindowStats,
        out: &IdentifierOutput,
        ground_truth: Option<TransitionMatrix>,
    ) -> ReportRow {
        let n = out.transition.num_states();
        let mut reset = vec![false; n];
        for &r in &out.reset_rows {
            reset[r] = true;
        }
        ReportRow {
            window_index: out.window_index,
            sl: out.transition.clone(),
            uncertainty: out.opinions.uncertainties(),
            conflicts: out.conflicts.clone(),
            reset,
            classical: classical_estimate(stats).matrix,
            ground_truth,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub num_states: usize,
    pub rows: Vec<ReportRow>,
}

fn matrix_columns(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).flat_map(move |i| (1..=n).map(move |j| format!("{prefix}_p{i}_{j}")))
}

impl RunReport {
    pub fn has_ground_truth(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.ground_truth.is_some())
    }

    fn header(&self) -> Vec<String> {
        let n = self.num_states;
        let mut h = vec!["window_index".to_string()];
        h.extend(matrix_columns("sl", n));
        h.extend((1..=n).map(|i| format!("u_{i}")));
        h.extend((1..=n).map(|i| format!("dc_{i}")));
        h.extend((1..=n).map(|i| format!("reset_{i}")));
        h.extend(matrix_columns("cl", n));
        if self.has_ground_truth() {
            h.extend(matrix_columns("gt", n));
        }
        h
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        let with_gt = self.has_ground_truth();
        for row in &self.rows {
            let mut rec = vec![row.window_index.to_string()];
            rec.extend(row.sl.as_flat().iter().map(f64::to_string));
            rec.extend(row.uncertainty.iter().map(f64::to_string));
            match &row.conflicts {
                Some(c) => rec.extend(c.iter().map(f64::to_string)),
                None => rec.extend(std::iter::repeat_n(String::new(), self.num_states)),
            }
            rec.extend(row.reset.iter().map(|&r| u8::from(r).to_string()));
            rec.extend(row.classical.as_flat().iter().map(f64::to_string));
            if with_gt {
                let gt = row.ground_truth.as_ref().expect("checked above");
                rec.extend(gt.as_flat().iter().map(f64::to_string));
            }
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<RunReport> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        let headers: Vec<String> = reader
            .headers()?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let n = headers.iter().filter(|h| h.starts_with("u_")).count();
        if n < 2 {
            return Err(Error::trace(
                1,
                "report header has fewer than two `u_` columns",
            ));
        }
        let find = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::trace(1, format!("missing column `{name}`")))
        };
        let matrix_cols = |prefix: &str| -> Result<Vec<usize>> {
            matrix_columns(prefix, n).map(|c| find(&c)).collect()
        };
        let window_col = find("window_index")?;
        let sl_cols = matrix_cols("sl")?;
        let cl_cols = matrix_cols("cl")?;
        let gt_cols = matrix_cols("gt").ok();
        let u_cols: Vec<_> = (1..=n)
            .map(|i| find(&format!("u_{i}")))
            .collect::<Result<_>>()?;
        let dc_cols: Vec<_> = (1..=n)
            .map(|i| find(&format!("dc_{i}")))
            .collect::<Result<_>>()?;
        let reset_cols: Vec<_> = (1..=n)
            .map(|i| find(&format!("reset_{i}")))
            .collect::<Result<_>>()?;

        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let raw = |c: usize| record.get(c).map(str::trim).unwrap_or("");
            let num = |c: usize| -> Result<f64> {
                raw(c).parse().map_err(|_| {
                    Error::trace(line, format!("bad number `{}` in `{}`", raw(c), headers[c]))
                })
            };
            let matrix = |cols: &[usize]| -> Result<TransitionMatrix> {
                let probs = cols.iter().map(|&c| num(c)).collect::<Result<Vec<_>>>()?;
                TransitionMatrix::from_flat(n, probs).map_err(|e| Error::trace(line, e.to_string()))
            };
            let window_index = raw(window_col).parse().map_err(|_| {
                Error::trace(line, format!("bad window_index `{}`", raw(window_col)))
            })?;
            let conflicts = if dc_cols.iter().all(|&c| raw(c).is_empty()) {
                None
            } else {
                Some(
                    dc_cols
                        .iter()
                        .map(|&c| num(c))
                        .collect::<Result<Vec<_>>>()?,
                )
            };
            rows.push(ReportRow {
                window_index,
                sl: matrix(&sl_cols)?,
                uncertainty: u_cols.iter().map(|&c| num(c)).collect::<Result<_>>()?,
                conflicts,
                reset: reset_cols.iter().map(|&c| raw(c) == "1").collect(),
                classical: matrix(&cl_cols)?,
                ground_truth: gt_cols.as_deref().map(matrix).transpose()?,
            });
        }
        Ok(RunReport {
            num_states: n,
            rows,
        })
    }
}

/// Runs the identifier and the classical estimator over every complete
/// window of `states`. `ground_truth`, when given, must hold at least one
/// matrix per complete window.
pub fn build_report(
    states: &[State],
    cfg: &IdentifierConfig,
    ground_truth: Option<&[TransitionMatrix]>,
) -> Result<RunReport> {
    let mut ident = Identifier::new(cfg.clone())?;
    let mut rows = Vec::with_capacity(states.len() / cfg.window_len);
    for stats in Windows::new(states.iter().copied(), cfg) {
        let stats = stats?;
        let out = ident.step_window(&stats)?;
        let gt = match ground_truth {
            Some(gt) => Some(gt.get(stats.window_index).cloned().ok_or_else(|| {
                Error::Config(format!("no ground truth for window {}", stats.window_index))
            })?),
            None => None,
        };
        rows.push(ReportRow::from_output(&stats, &out, gt));
    }
    Ok(RunReport {
        num_states: cfg.num_states,
        rows,
    })
}

/// Reference series for traces without a known generator: the classical
/// estimate averaged over a centered window of `2 * half_width + 1` windows,
/// truncated at both ends.
pub fn smoothed_classical(rows: &[ReportRow], half_width: usize) -> Vec<TransitionMatrix> {
    (0..rows.len())
        .map(|k| {
            let lo = k.saturating_sub(half_width);
            let hi = (k + half_width + 1).min(rows.len());
            let span = &rows[lo..hi];
            let first = &span[0].classical;
            let mut acc = first.clone();
            for (t, r) in span.iter().enumerate().skip(1) {
                // Running mean: acc <- acc + (x - acc) / (t + 1).
                acc = acc.lerp(&r.classical, 1.0 / (t as f64 + 1.0));
            }
            acc
        })
        .collect()
}

/// Root-mean-square difference of two equally long series.
pub fn rmse(estimate: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(estimate.len(), truth.len(), "series lengths differ");
    if estimate.is_empty() {
        return 0.0;
    }
    let sq: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| (e - t) * (e - t))
        .sum();
    (sq / estimate.len() as f64).sqrt()
}

/// Window whose transitions first include the one leaving packet `packet`.
pub fn jump_window(packet: usize, window_len: usize) -> usize {
    (packet + 1) / window_len
}

/// Windows between `jump_window` and the first reset at or after it,
/// restricted to `row` when given. `None` when no reset follows.
pub fn reset_latency(rows: &[ReportRow], jump_window: usize, row: Option<usize>) -> Option<usize> {
    rows.iter()
        .filter(|r| r.window_index >= jump_window)
        .find(|r| match row {
            Some(i) => r.reset.get(i).copied().unwrap_or(false),
            None => r.reset.iter().any(|&x| x),
        })
        .map(|r| r.window_index - jump_window)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryRmse {
    pub from: usize,
    pub to: usize,
    pub sl: f64,
    pub classical: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpLatency {
    pub packet: usize,
    pub window: usize,
    /// `None` when no reset was detected after the jump.
    pub latency: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub windows: usize,
    /// RMSE over all matrix entries and windows.
    pub rmse_sl: f64,
    pub rmse_classical: f64,
    pub entries: Vec<EntryRmse>,
    pub jumps: Vec<JumpLatency>,
}

impl Summary {
    /// Summary of `report` against its ground-truth columns. `jumps` are
    /// packet indices of parameter jumps.
    pub fn compute(report: &RunReport, jumps: &[usize], window_len: usize) -> Result<Summary> {
        if !report.has_ground_truth() {
            return Err(Error::Config("report has no ground-truth columns".into()));
        }
        let n = report.num_states;
        let gt = |r: &ReportRow| r.ground_truth.clone().expect("checked");
        let mut entries = Vec::with_capacity(n * n);
        let (mut all_sl, mut all_cl, mut all_gt) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..n {
            for j in 0..n {
                let sl: Vec<f64> = report.rows.iter().map(|r| r.sl.get(i, j)).collect();
                let cl: Vec<f64> = report.rows.iter().map(|r| r.classical.get(i, j)).collect();
                let truth: Vec<f64> = report.rows.iter().map(|r| gt(r).get(i, j)).collect();
                entries.push(EntryRmse {
                    from: i,
                    to: j,
                    sl: rmse(&sl, &truth),
                    classical: rmse(&cl, &truth),
                });
                all_sl.extend(sl);
                all_cl.extend(cl);
                all_gt.extend(truth);
            }
        }
        let jumps = jumps
            .iter()
            .map(|&packet| {
                let window = jump_window(packet, window_len.max(1));
                JumpLatency {
                    packet,
                    window,
                    latency: reset_latency(&report.rows, window, None),
                }
            })
            .collect();
        Ok(Summary {
            windows: report.rows.len(),
            rmse_sl: rmse(&all_sl, &all_gt),
            rmse_classical: rmse(&all_cl, &all_gt),
            entries,
            jumps,
        })
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "windows: {}", self.windows)?;
        writeln!(f, "rmse_sl: {:.6}", self.rmse_sl)?;
        writeln!(f, "rmse_classical: {:.6}", self.rmse_classical)?;
        for e in &self.entries {
            writeln!(
                f,
                "rmse_p{}_{}: sl {:.6} classical {:.6}",
                e.from + 1,
                e.to + 1,
                e.sl,
                e.classical
            )?;
        }
        for j in &self.jumps {
            match j.latency {
                Some(l) => writeln!(
                    f,
                    "jump at packet {} (window {}): reset after {l} windows",
                    j.packet, j.window
                )?,
                None => writeln!(
                    f,
                    "jump at packet {} (window {}): undetected",
                    j.packet, j.window
                )?,
            }
        }
        Ok(())
    }
}
