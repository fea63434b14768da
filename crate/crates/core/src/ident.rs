//! Online identification of a time-varying Markov chain.
//!
//! Observations are consumed in windows of `window_len` states. For each
//! window the transition counts of every row are mapped to an opinion, both
//! the running opinion and the window opinion are trust-discounted, and the
//! degree of conflict between them decides whether the window is fused into
//! the running opinion or replaces it. The last state of a window is carried
//! as the predecessor of the next window's first state, so every observed
//! transition is counted exactly once.
//!
//! The first window has nothing to compare against: its (undiscounted) window
//! opinions become the running state directly.

use crate::chain::{State, TransitionMatrix};
use crate::error::{Error, Result};
use crate::opinion::{check_distribution, EvidenceVector, Opinion, DEFAULT_PRIOR_WEIGHT};

pub const DEFAULT_WINDOW_LEN: usize = 100;
pub const DEFAULT_CONFLICT_THRESHOLD: f64 = 0.15;
pub const DEFAULT_DISCOUNT: f64 = 0.999;

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifierConfig {
    pub num_states: usize,
    pub window_len: usize,
    pub prior_weight: f64,
    /// One base-rate distribution per row.
    pub base_rates: Vec<Vec<f64>>,
    /// Per-row discount applied to the running opinion.
    pub discount_prev: Vec<f64>,
    /// Per-row discount applied to the window opinion.
    pub discount_new: Vec<f64>,
    /// Rows whose degree of conflict exceeds this value are reset.
    pub conflict_threshold: f64,
}

impl IdentifierConfig {
    /// Defaults: `l_w = 100`, `W = 2`, uniform base rates, discounts 0.999,
    /// threshold 0.15.
    pub fn new(num_states: usize) -> Self {
        let uniform = vec![1.0 / num_states.max(1) as f64; num_states];
        IdentifierConfig {
            num_states,
            window_len: DEFAULT_WINDOW_LEN,
            prior_weight: DEFAULT_PRIOR_WEIGHT,
            base_rates: vec![uniform; num_states],
            discount_prev: vec![DEFAULT_DISCOUNT; num_states],
            discount_new: vec![DEFAULT_DISCOUNT; num_states],
            conflict_threshold: DEFAULT_CONFLICT_THRESHOLD,
        }
    }

    pub fn with_window_len(mut self, window_len: usize) -> Self {
        self.window_len = window_len;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.conflict_threshold = threshold;
        self
    }

    /// Uses the same discount for every row.
    pub fn with_discounts(mut self, prev: f64, new: f64) -> Self {
        self.discount_prev = vec![prev; self.num_states];
        self.discount_new = vec![new; self.num_states];
        self
    }

    pub fn with_prior_weight(mut self, prior_weight: f64) -> Self {
        self.prior_weight = prior_weight;
        self
    }

    pub fn with_base_rates(mut self, base_rates: Vec<Vec<f64>>) -> Self {
        self.base_rates = base_rates;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_states;
        if n < 2 {
            return Err(Error::Config(format!("num_states must be >= 2, got {n}")));
        }
        if n > u32::MAX as usize {
            return Err(Error::Config(format!("num_states {n} too large")));
        }
        if self.window_len == 0 {
            return Err(Error::Config("window length must be >= 1".into()));
        }
        if !(self.prior_weight.is_finite() && self.prior_weight > 0.0) {
            return Err(Error::Config(format!(
                "prior weight must be > 0, got {}",
                self.prior_weight
            )));
        }
        if self.conflict_threshold.is_nan() || self.conflict_threshold <= 0.0 {
            return Err(Error::Config(format!(
                "conflict threshold must be > 0, got {}",
                self.conflict_threshold
            )));
        }
        if self.base_rates.len() != n {
            return Err(Error::Config(format!(
                "expected {n} base-rate rows, got {}",
                self.base_rates.len()
            )));
        }
        for (i, row) in self.base_rates.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Config(format!(
                    "base-rate row {} has {} entries, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            check_distribution(row, "base rate")
                .map_err(|e| Error::Config(format!("base-rate row {}: {e}", i + 1)))?;
        }
        for (name, discounts) in [
            ("discount_prev", &self.discount_prev),
            ("discount_new", &self.discount_new),
        ] {
            if discounts.len() != n {
                return Err(Error::Config(format!(
                    "{name} needs {n} entries, got {}",
                    discounts.len()
                )));
            }
            if let Some(d) = discounts.iter().find(|d| !(0.0..=1.0).contains(*d)) {
                return Err(Error::Config(format!("{name} entry {d} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Transition counts observed in one window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowStats {
    num_states: usize,
    counts: Vec<u64>,
    pub window_index: usize,
    /// State carried in from the previous window, if any.
    pub first_state: Option<State>,
    /// Last observation of this window; carried into the next one.
    pub last_state: Option<State>,
}

impl WindowStats {
    /// Stats from an explicit row-major count matrix.
    pub fn from_counts(num_states: usize, counts: Vec<u64>, window_index: usize) -> Result<Self> {
        if counts.len() != num_states * num_states {
            return Err(Error::Cardinality {
                expected: num_states * num_states,
                found: counts.len(),
            });
        }
        Ok(WindowStats {
            num_states,
            counts,
            window_index,
            first_state: None,
            last_state: None,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn count(&self, from: usize, to: usize) -> u64 {
        self.counts[from * self.num_states + to]
    }

    pub fn row(&self, from: usize) -> &[u64] {
        &self.counts[from * self.num_states..(from + 1) * self.num_states]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Pulls exactly `window_len` observations from `stream` and counts the
/// transitions in `carry ⊕ window`.
///
/// Returns `Ok(None)` when the stream ends before the window is full; the
/// partial window is discarded.
pub fn accumulate_window<I>(
    stream: &mut I,
    cfg: &IdentifierConfig,
    window_index: usize,
    carry: Option<State>,
) -> Result<Option<WindowStats>>
where
    I: Iterator<Item = State>,
{
    let n = cfg.num_states;
    let mut counts = vec![0u64; n * n];
    let mut prev = carry;
    for offset in 0..cfg.window_len {
        let Some(state) = stream.next() else {
            return Ok(None);
        };
        if state.index() >= n {
            return Err(Error::Observation {
                id: state.id(),
                num_states: n,
                window: window_index,
                offset,
            });
        }
        if let Some(p) = prev {
            counts[p.index() * n + state.index()] += 1;
        }
        prev = Some(state);
    }
    Ok(Some(WindowStats {
        num_states: n,
        counts,
        window_index,
        first_state: carry,
        last_state: prev,
    }))
}

/// Iterator over consecutive complete windows of an observation stream.
pub struct Windows<'c, I> {
    stream: I,
    cfg: &'c IdentifierConfig,
    next_index: usize,
    carry: Option<State>,
    done: bool,
}

impl<'c, I: Iterator<Item = State>> Windows<'c, I> {
    pub fn new(stream: I, cfg: &'c IdentifierConfig) -> Self {
        Windows {
            stream,
            cfg,
            next_index: 0,
            carry: None,
            done: false,
        }
    }
}

impl<I: Iterator<Item = State>> Iterator for Windows<'_, I> {
    type Item = Result<WindowStats>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match accumulate_window(&mut self.stream, self.cfg, self.next_index, self.carry) {
            Ok(Some(stats)) => {
                self.carry = stats.last_state;
                self.next_index += 1;
                Some(Ok(stats))
            }
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// One opinion per Markov state; row `i` describes the next-state
/// distribution given current state `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionMatrix {
    rows: Vec<Opinion>,
}

impl OpinionMatrix {
    pub fn new(rows: Vec<Opinion>) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::Config(format!(
                "opinion matrix needs N >= 2, got {n}"
            )));
        }
        if let Some(bad) = rows.iter().find(|r| r.cardinality() != n) {
            return Err(Error::Cardinality {
                expected: n,
                found: bad.cardinality(),
            });
        }
        Ok(OpinionMatrix { rows })
    }

    pub fn vacuous(cfg: &IdentifierConfig) -> Result<Self> {
        let rows = cfg
            .base_rates
            .iter()
            .map(|a| Opinion::vacuous(a.clone()))
            .collect::<Result<Vec<_>>>()?;
        OpinionMatrix::new(rows)
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Opinion] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &Opinion {
        &self.rows[i]
    }

    pub fn uncertainties(&self) -> Vec<f64> {
        self.rows.iter().map(Opinion::uncertainty).collect()
    }

    /// Row-wise projected probabilities.
    pub fn project(&self) -> TransitionMatrix {
        let n = self.rows.len();
        let mut probs: Vec<f64> = self.rows.iter().flat_map(Opinion::project).collect();
        // Clamping inside `project` can leave a row a few ulps off 1.
        for row in probs.chunks_mut(n) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= s);
        }
        TransitionMatrix::from_flat(n, probs).expect("projection of valid opinions is stochastic")
    }

    /// Total evidence held by all rows for prior weight `prior_weight`.
    pub fn total_evidence(&self, prior_weight: f64) -> f64 {
        self.rows
            .iter()
            .map(|r| prior_weight * (1.0 - r.uncertainty()) / r.uncertainty())
            .sum()
    }

    /// `W / (W + Σr)` with the evidence of all rows pooled.
    pub fn pooled_uncertainty(&self, prior_weight: f64) -> f64 {
        prior_weight / (prior_weight + self.total_evidence(prior_weight))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifierOutput {
    pub window_index: usize,
    pub transition: TransitionMatrix,
    pub opinions: OpinionMatrix,
    /// Per-row degree of conflict; `None` for the bootstrap window.
    pub conflicts: Option<Vec<f64>>,
    /// Rows whose running opinion was discarded, ascending.
    pub reset_rows: Vec<usize>,
}

/// Maps each row of counts to an opinion through the evidence mapping.
pub fn window_opinions(stats: &WindowStats, cfg: &IdentifierConfig) -> Result<OpinionMatrix> {
    if stats.num_states() != cfg.num_states {
        return Err(Error::Cardinality {
            expected: cfg.num_states,
            found: stats.num_states(),
        });
    }
    let rows = (0..cfg.num_states)
        .map(|i| {
            let evidence = stats.row(i).iter().map(|&c| c as f64).collect();
            EvidenceVector::new(evidence, cfg.prior_weight, cfg.base_rates[i].clone())
                .map(|ev| Opinion::from_evidence(&ev))
        })
        .collect::<Result<Vec<_>>>()?;
    OpinionMatrix::new(rows)
}

/// Cumulative fusion extended to vacuous operands, which act as the
/// neutral element.
fn fuse_rows(new: &Opinion, prev: &Opinion) -> Result<Opinion> {
    match (new.is_vacuous(), prev.is_vacuous()) {
        (true, _) => Ok(prev.clone()),
        (false, true) => Ok(new.clone()),
        (false, false) => new.cumulative_fuse(prev),
    }
}

/// One identification step. `prev` is the running opinion matrix, or `None`
/// before the first window.
pub fn step(
    prev: Option<&OpinionMatrix>,
    stats: &WindowStats,
    cfg: &IdentifierConfig,
) -> Result<IdentifierOutput> {
    cfg.validate()?;
    let window = window_opinions(stats, cfg)?;

    let Some(prev) = prev else {
        return Ok(IdentifierOutput {
            window_index: stats.window_index,
            transition: window.project(),
            opinions: window,
            conflicts: None,
            reset_rows: Vec::new(),
        });
    };
    if prev.num_states() != cfg.num_states {
        return Err(Error::Config(format!(
            "previous opinion matrix has {} rows, configuration expects {}",
            prev.num_states(),
            cfg.num_states
        )));
    }

    let n = cfg.num_states;
    let mut rows = Vec::with_capacity(n);
    let mut conflicts = Vec::with_capacity(n);
    let mut reset_rows = Vec::new();
    for i in 0..n {
        let old = prev.row(i).trust_discount(cfg.discount_prev[i])?;
        let new = window.row(i).trust_discount(cfg.discount_new[i])?;
        let dc = old.degree_of_conflict(&new)?;
        conflicts.push(dc);
        if dc <= cfg.conflict_threshold {
            rows.push(fuse_rows(&new, &old)?);
        } else {
            reset_rows.push(i);
            rows.push(new);
        }
    }
    let opinions = OpinionMatrix::new(rows)?;
    Ok(IdentifierOutput {
        window_index: stats.window_index,
        transition: opinions.project(),
        opinions,
        conflicts: Some(conflicts),
        reset_rows,
    })
}

/// Stateful identifier: owns the running opinion matrix and the window
/// buffer for push-style use.
#[derive(Debug, Clone)]
pub struct Identifier {
    cfg: IdentifierConfig,
    opinions: Option<OpinionMatrix>,
    buffer: Vec<State>,
    carry: Option<State>,
    next_window: usize,
}

impl Identifier {
    pub fn new(cfg: IdentifierConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Identifier {
            buffer: Vec::with_capacity(cfg.window_len),
            cfg,
            opinions: None,
            carry: None,
            next_window: 0,
        })
    }

    pub fn config(&self) -> &IdentifierConfig {
        &self.cfg
    }

    /// Running opinion matrix, `None` before the first window completes.
    pub fn opinions(&self) -> Option<&OpinionMatrix> {
        self.opinions.as_ref()
    }

    pub fn windows_processed(&self) -> usize {
        self.next_window
    }

    /// Feeds one observation; returns an output when it completes a window.
    pub fn push(&mut self, state: State) -> Result<Option<IdentifierOutput>> {
        if state.index() >= self.cfg.num_states {
            return Err(Error::Observation {
                id: state.id(),
                num_states: self.cfg.num_states,
                window: self.next_window,
                offset: self.buffer.len(),
            });
        }
        self.buffer.push(state);
        if self.buffer.len() < self.cfg.window_len {
            return Ok(None);
        }
        let mut drained = std::mem::take(&mut self.buffer).into_iter();
        let stats = accumulate_window(&mut drained, &self.cfg, self.next_window, self.carry)?
            .expect("buffer holds a full window");
        self.buffer = Vec::with_capacity(self.cfg.window_len);
        self.carry = stats.last_state;
        self.step_window(&stats).map(Some)
    }

    /// Applies an externally computed window.
    pub fn step_window(&mut self, stats: &WindowStats) -> Result<IdentifierOutput> {
        let out = step(self.opinions.as_ref(), stats, &self.cfg)?;
        self.opinions = Some(out.opinions.clone());
        self.next_window = stats.window_index + 1;
        Ok(out)
    }
}

/// Runs the identifier over every complete window of `stream`.
pub fn run<I>(stream: I, cfg: &IdentifierConfig) -> Result<Vec<IdentifierOutput>>
where
    I: IntoIterator<Item = State>,
{
    cfg.validate()?;
    let mut prev: Option<OpinionMatrix> = None;
    let mut outputs = Vec::new();
    for stats in Windows::new(stream.into_iter(), cfg) {
        let out = step(prev.as_ref(), &stats?, cfg)?;
        prev = Some(out.opinions.clone());
        outputs.push(out);
    }
    Ok(outputs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalEstimate {
    pub matrix: TransitionMatrix,
    /// Rows with no observed transitions; these fall back to uniform.
    pub fallback_rows: Vec<usize>,
}

/// Per-window maximum-likelihood estimate `s_ij / Σ_l s_il`.
pub fn classical_estimate(stats: &WindowStats) -> ClassicalEstimate {
    let n = stats.num_states();
    let mut probs = Vec::with_capacity(n * n);
    let mut fallback_rows = Vec::new();
    for i in 0..n {
        let row = stats.row(i);
        let total: u64 = row.iter().sum();
        if total == 0 {
            fallback_rows.push(i);
            probs.extend(std::iter::repeat_n(1.0 / n as f64, n));
        } else {
            probs.extend(row.iter().map(|&c| c as f64 / total as f64));
        }
    }
    ClassicalEstimate {
        matrix: TransitionMatrix::from_flat(n, probs).expect("count ratios are stochastic"),
        fallback_rows,
    }
}
