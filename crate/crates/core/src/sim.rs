//! Seedable simulator for time-varying finite Markov chains.
//!
//! A [`ScenarioSpec`] is a piecewise schedule of transition matrices: each
//! segment is either constant or a per-packet linear drift between two
//! matrices. The matrix in effect at packet `k` governs the transition from
//! `states[k]` to `states[k + 1]`.
//!
//! Randomness comes from PCG-XSL-RR 128/64 (`Pcg64`) seeded through
//! `SeedableRng::seed_from_u64`. Each step draws one `u64` and maps it to
//! `[0, 1)` as `(x >> 11) · 2⁻⁵³`; the next state is the first column whose
//! cumulative row probability exceeds that value.

use rand_core::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::chain::{State, TransitionMatrix};
use crate::error::{Error, Result};

pub type ChannelRng = Pcg64;

pub fn seeded_rng(seed: u64) -> ChannelRng {
    Pcg64::seed_from_u64(seed)
}

/// Uniform draw in `[0, 1)` from the top 53 bits of one `u64`.
pub fn unit_f64<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn sample_row(row: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    for (j, p) in row.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return j;
        }
    }
    // Rounding left u above the final cumulative sum.
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

/// Draws the successor of `current` from its row of `matrix`.
pub fn step_chain<R: Rng + ?Sized>(
    current: State,
    matrix: &TransitionMatrix,
    rng: &mut R,
) -> State {
    State::from_index(sample_row(matrix.row(current.index()), unit_f64(rng)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixSpec {
    Constant {
        matrix: Vec<Vec<f64>>,
    },
    /// Linear interpolation from `from` at the first packet of the segment
    /// to `to` at its last packet.
    Drift {
        from: Vec<Vec<f64>>,
        to: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    #[serde(flatten)]
    pub matrix: MatrixSpec,
}

/// Scenario file schema:
///
/// ```json
/// {
///   "states": 2,
///   "total_packets": 100000,
///   "initial_state": 1,
///   "seed": 42,
///   "segments": [
///     { "start": 0, "kind": "constant", "matrix": [[0.9, 0.1], [0.4, 0.6]] },
///     { "start": 500, "kind": "drift", "from": [[0.9, 0.1], [0.4, 0.6]],
///       "to": [[0.7, 0.3], [0.4, 0.6]] }
///   ]
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(rename = "states")]
    pub num_states: usize,
    pub segments: Vec<Segment>,
    pub total_packets: usize,
    #[serde(default = "default_initial_state")]
    pub initial_state: u32,
    #[serde(default)]
    pub seed: u64,
}

fn default_initial_state() -> u32 {
    1
}

#[derive(Debug, Clone)]
enum Schedule {
    Constant(TransitionMatrix),
    Drift {
        from: TransitionMatrix,
        to: TransitionMatrix,
    },
}

/// A validated segment with matrices parsed and its end resolved.
#[derive(Debug, Clone)]
struct ResolvedSegment {
    start: usize,
    end: usize,
    schedule: Schedule,
}

impl ResolvedSegment {
    fn matrix_at(&self, packet: usize) -> TransitionMatrix {
        match &self.schedule {
            Schedule::Constant(m) => m.clone(),
            Schedule::Drift { from, to } => from.lerp(to, self.fraction(packet)),
        }
    }

    fn fraction(&self, packet: usize) -> f64 {
        let span = self.end - self.start;
        if span <= 1 {
            0.0
        } else {
            (packet - self.start) as f64 / (span - 1) as f64
        }
    }

    /// Row `from` of the effective matrix, written into `out`.
    fn row_into(&self, packet: usize, from: usize, out: &mut [f64]) {
        match &self.schedule {
            Schedule::Constant(m) => out.copy_from_slice(m.row(from)),
            Schedule::Drift { from: a, to: b } => {
                let t = self.fraction(packet);
                for ((o, x), y) in out.iter_mut().zip(a.row(from)).zip(b.row(from)) {
                    *o = x + (y - x) * t;
                }
            }
        }
    }

    fn first_matrix(&self) -> TransitionMatrix {
        self.matrix_at(self.start)
    }

    fn last_matrix(&self) -> TransitionMatrix {
        self.matrix_at(self.end.saturating_sub(1).max(self.start))
    }
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<ScenarioSpec> {
        let spec: ScenarioSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.resolve().map(|_| ())
    }

    fn parse_matrix(&self, rows: &[Vec<f64>], segment: usize) -> Result<TransitionMatrix> {
        let m = TransitionMatrix::from_rows(rows)
            .map_err(|e| Error::Config(format!("segment {segment}: {e}")))?;
        if m.num_states() != self.num_states {
            return Err(Error::Config(format!(
                "segment {segment}: matrix is {0}x{0}, scenario has {1} states",
                m.num_states(),
                self.num_states
            )));
        }
        Ok(m)
    }

    fn resolve(&self) -> Result<Vec<ResolvedSegment>> {
        if self.num_states < 2 {
            return Err(Error::Config(format!(
                "states must be >= 2, got {}",
                self.num_states
            )));
        }
        if self.initial_state == 0 || self.initial_state as usize > self.num_states {
            return Err(Error::Config(format!(
                "initial_state {} outside 1..={}",
                self.initial_state, self.num_states
            )));
        }
        match self.segments.first() {
            None => return Err(Error::Config("scenario has no segments".into())),
            Some(s) if s.start != 0 => {
                return Err(Error::Config(format!(
                    "first segment starts at {}, expected 0",
                    s.start
                )))
            }
            _ => {}
        }
        let mut resolved = Vec::with_capacity(self.segments.len());
        for (idx, seg) in self.segments.iter().enumerate() {
            let end = match self.segments.get(idx + 1) {
                Some(next) if next.start <= seg.start => {
                    return Err(Error::Config(format!(
                        "segment starts must be strictly increasing ({} then {})",
                        seg.start, next.start
                    )))
                }
                Some(next) => next.start,
                None => self.total_packets.max(seg.start + 1),
            };
            let schedule = match &seg.matrix {
                MatrixSpec::Constant { matrix } => {
                    Schedule::Constant(self.parse_matrix(matrix, idx)?)
                }
                MatrixSpec::Drift { from, to } => Schedule::Drift {
                    from: self.parse_matrix(from, idx)?,
                    to: self.parse_matrix(to, idx)?,
                },
            };
            resolved.push(ResolvedSegment {
                start: seg.start,
                end,
                schedule,
            });
        }
        Ok(resolved)
    }

    /// Effective matrix at packet `packet`.
    pub fn matrix_at(&self, packet: usize) -> Result<TransitionMatrix> {
        let segments = self.resolve()?;
        let seg = segments
            .iter()
            .rev()
            .find(|s| s.start <= packet)
            .expect("first segment starts at 0");
        Ok(seg.matrix_at(packet.min(seg.end.saturating_sub(1)).max(seg.start)))
    }

    /// Packet indices at which the schedule is discontinuous.
    pub fn jump_packets(&self) -> Result<Vec<usize>> {
        let segments = self.resolve()?;
        Ok(segments
            .windows(2)
            .filter(|w| w[0].last_matrix().max_abs_diff(&w[1].first_matrix()) > 1e-9)
            .map(|w| w[1].start)
            .collect())
    }

    /// Simulates the scenario with its own seed.
    pub fn generate(&self) -> Result<ObservationTrace> {
        self.generate_with_seed(self.seed)
    }

    pub fn generate_with_seed(&self, seed: u64) -> Result<ObservationTrace> {
        let segments = self.resolve()?;
        let n = self.num_states;
        let mut rng = seeded_rng(seed);
        let mut states = Vec::with_capacity(self.total_packets);
        let mut row = vec![0.0; n];
        let mut seg_idx = 0;
        let mut current = State::new(self.initial_state).expect("validated initial state");
        for packet in 0..self.total_packets {
            states.push(current);
            if packet + 1 == self.total_packets {
                break;
            }
            while seg_idx + 1 < segments.len() && segments[seg_idx + 1].start <= packet {
                seg_idx += 1;
            }
            segments[seg_idx].row_into(packet, current.index(), &mut row);
            current = State::from_index(sample_row(&row, unit_f64(&mut rng)));
        }
        Ok(ObservationTrace {
            states,
            scenario: self.clone(),
            seed,
        })
    }
}

/// Built-in two-state burst-error scenario with two parameter jumps.
///
/// Good/bad channel (state 1 = good). 100 000 packets; `p_GG` starts at
/// 0.90, jumps down at packet 19 081, drifts until packet 30 851 and then
/// jumps into a 0.95 regime. The jump targets, drift endpoints and the
/// `p_BB` trajectory are illustrative defaults, not measured values.
pub fn reference_scenario() -> ScenarioSpec {
    let m = |p_gg: f64, p_bb: f64| vec![vec![p_gg, 1.0 - p_gg], vec![1.0 - p_bb, p_bb]];
    ScenarioSpec {
        num_states: 2,
        total_packets: 100_000,
        initial_state: 1,
        seed: 42,
        segments: vec![
            Segment {
                start: 0,
                matrix: MatrixSpec::Constant {
                    matrix: m(0.90, 0.60),
                },
            },
            Segment {
                start: 19_081,
                matrix: MatrixSpec::Drift {
                    from: m(0.65, 0.70),
                    to: m(0.72, 0.65),
                },
            },
            Segment {
                start: 30_851,
                matrix: MatrixSpec::Constant {
                    matrix: m(0.95, 0.50),
                },
            },
        ],
    }
}

#[derive(Debug, Clone)]
pub struct ObservationTrace {
    pub states: Vec<State>,
    pub scenario: ScenarioSpec,
    pub seed: u64,
}

impl ObservationTrace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Effective matrix governing the transition out of packet `packet`.
    pub fn ground_truth(&self, packet: usize) -> TransitionMatrix {
        self.scenario
            .matrix_at(packet)
            .expect("trace scenario is valid")
    }

    /// Mean effective matrix over the transitions counted in each complete
    /// window of length `window_len` (destinations `m·l_w .. (m+1)·l_w`).
    pub fn window_ground_truth(&self, window_len: usize) -> Vec<TransitionMatrix> {
        window_ground_truth(&self.scenario, self.states.len(), window_len)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        write_trace_csv(&self.states, out)
    }
}

pub fn window_ground_truth(
    scenario: &ScenarioSpec,
    len: usize,
    window_len: usize,
) -> Vec<TransitionMatrix> {
    let segments = scenario.resolve().expect("scenario is valid");
    let n = scenario.num_states;
    let matrix_at = |k: usize| {
        let seg = segments
            .iter()
            .rev()
            .find(|s| s.start <= k)
            .expect("segment");
        seg.matrix_at(k.min(seg.end - 1))
    };
    (0..len / window_len.max(1))
        .map(|m| {
            // Window 0 of length 1 holds no transition; use the first matrix.
            let first_dest = (m * window_len).max(1);
            let last_dest = ((m + 1) * window_len).max(2);
            let mut acc = vec![0.0; n * n];
            for k in first_dest - 1..last_dest - 1 {
                for (a, p) in acc.iter_mut().zip(matrix_at(k).as_flat()) {
                    *a += p;
                }
            }
            let count = (last_dest - first_dest) as f64;
            acc.iter_mut().for_each(|a| *a /= count);
            TransitionMatrix::from_flat(n, acc).expect("average of stochastic matrices")
        })
        .collect()
}

/// Writes `packet_index,state` rows with a header.
pub fn write_trace_csv<W: std::io::Write>(states: &[State], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["packet_index", "state"])?;
    for (i, s) in states.iter().enumerate() {
        w.write_record([i.to_string(), s.id().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `packet_index,state` CSV. Packet indices must be strictly
/// increasing; state ids must be >= 1.
pub fn read_trace_csv<R: std::io::Read>(input: R) -> Result<Vec<State>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (Some(idx_col), Some(state_col)) = (col("packet_index"), col("state")) else {
        return Err(Error::trace(1, "expected header `packet_index,state`"));
    };
    let mut states = Vec::new();
    let mut last_index: Option<u64> = None;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |c: usize| record.get(c).map(str::trim).unwrap_or("");
        let index: u64 = field(idx_col)
            .parse()
            .map_err(|_| Error::trace(line, format!("bad packet_index `{}`", field(idx_col))))?;
        if last_index.is_some_and(|prev| index <= prev) {
            return Err(Error::trace(
                line,
                format!("packet_index {index} is not increasing"),
            ));
        }
        last_index = Some(index);
        let id: u32 = field(state_col)
            .parse()
            .map_err(|_| Error::trace(line, format!("bad state `{}`", field(state_col))))?;
        let state = State::new(id).ok_or_else(|| Error::trace(line, "state ids start at 1"))?;
        states.push(state);
    }
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(rows: Vec<Vec<f64>>, total: usize) -> ScenarioSpec {
        ScenarioSpec {
            num_states: rows.len(),
            segments: vec![Segment {
                start: 0,
                matrix: MatrixSpec::Constant { matrix: rows },
            }],
            total_packets: total,
            initial_state: 1,
            seed: 7,
        }
    }

    #[test]
    fn identity_is_absorbing() {
        let trace = constant(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 1000)
            .generate()
            .unwrap();
        assert_eq!(trace.len(), 1000);
        assert!(trace.states.iter().all(|s| s.id() == 1));

        let mut rng = seeded_rng(1);
        let id = TransitionMatrix::identity(3);
        let s = State::new(3).unwrap();
        assert!((0..100).all(|_| step_chain(s, &id, &mut rng) == s));
    }

    #[test]
    fn swap_matrix_alternates() {
        let trace = constant(vec![vec![0.0, 1.0], vec![1.0, 0.0]], 101)
            .generate()
            .unwrap();
        for (i, s) in trace.states.iter().enumerate() {
            assert_eq!(s.id(), if i % 2 == 0 { 1 } else { 2 });
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let spec = reference_scenario();
        let a = spec.generate_with_seed(9).unwrap();
        let b = spec.generate_with_seed(9).unwrap();
        let c = spec.generate_with_seed(10).unwrap();
        assert_eq!(a.states, b.states);
        assert_ne!(a.states, c.states);
    }

    #[test]
    fn empirical_frequencies_within_three_sigma() {
        let rows = vec![vec![0.9, 0.1], vec![0.5, 0.5]];
        let trace = constant(rows.clone(), 1_000_000)
            .generate_with_seed(2024)
            .unwrap();
        let mut counts = [[0u64; 2]; 2];
        for pair in trace.states.windows(2) {
            counts[pair[0].index()][pair[1].index()] += 1;
        }
        for (i, row) in rows.iter().enumerate() {
            let n = (counts[i][0] + counts[i][1]) as f64;
            let p = row[0];
            let sigma = (p * (1.0 - p) / n).sqrt();
            let est = counts[i][0] as f64 / n;
            assert!(
                (est - p).abs() < 3.0 * sigma,
                "row {i}: {est} vs {p} (σ {sigma})"
            );
        }
    }

    #[test]
    fn reference_scenario_shape() {
        let spec = reference_scenario();
        spec.validate().unwrap();
        let starts: Vec<_> = spec.segments.iter().map(|s| s.start).collect();
        assert_eq!(starts, vec![0, 19_081, 30_851]);
        assert_eq!(spec.total_packets, 100_000);
        assert_eq!(spec.matrix_at(0).unwrap().get(0, 0), 0.90);
        assert_eq!(spec.jump_packets().unwrap(), vec![19_081, 30_851]);
        for k in (0..spec.total_packets).step_by(997) {
            let m = spec.matrix_at(k).unwrap();
            for i in 0..2 {
                assert!((m.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn drift_hits_both_endpoints() {
        let spec = reference_scenario();
        assert!((spec.matrix_at(19_081).unwrap().get(0, 0) - 0.65).abs() < 1e-12);
        assert!((spec.matrix_at(30_850).unwrap().get(0, 0) - 0.72).abs() < 1e-12);
        assert!((spec.matrix_at(30_851).unwrap().get(0, 0) - 0.95).abs() < 1e-12);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = reference_scenario();
        spec.segments[1].start = 0;
        assert!(spec.validate().is_err());

        let bad = constant(vec![vec![0.9, 0.2], vec![0.5, 0.5]], 10);
        assert!(matches!(bad.generate(), Err(Error::Config(_))));

        let mut spec = constant(vec![vec![0.9, 0.1], vec![0.5, 0.5]], 10);
        spec.initial_state = 3;
        assert!(spec.validate().is_err());

        let text = r#"{"states": 2, "total_packets": 5, "segments": [{"start": 0, "kind": "constant", "matrix": [[0.5, 0.6], [0.5, 0.5]]}]}"#;
        assert!(ScenarioSpec::from_json(text).is_err());
    }

    #[test]
    fn json_round_trip() {
        let spec = reference_scenario();
        assert_eq!(ScenarioSpec::from_json(&spec.to_json()).unwrap(), spec);
    }

    #[test]
    fn window_ground_truth_constant_and_mixed() {
        let spec = reference_scenario();
        let gt = window_ground_truth(&spec, 100_000, 100);
        assert_eq!(gt.len(), 1000);
        assert!((gt[0].get(0, 0) - 0.90).abs() < 1e-12);
        // Window 190 holds destinations 19000..19099: transitions out of
        // packets 18999..=19080 use 0.90, the remaining 18 use the drift.
        assert!(gt[190].get(0, 0) < 0.90 && gt[190].get(0, 0) > 0.80);
        assert!((gt[999].get(0, 0) - 0.95).abs() < 1e-12);
    }

    #[test]
    fn trace_csv_round_trip() {
        let trace = constant(vec![vec![0.5, 0.5], vec![0.5, 0.5]], 50)
            .generate()
            .unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        assert_eq!(read_trace_csv(buf.as_slice()).unwrap(), trace.states);

        let bad = "packet_index,state\n0,1\n1,x\n";
        match read_trace_csv(bad.as_bytes()) {
            Err(Error::Trace { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_trace_csv("packet_index,state\n1,1\n1,1\n".as_bytes()).is_err());
        assert!(read_trace_csv("a,b\n1,1\n".as_bytes()).is_err());
    }
}
