//! Counterexample-guided search over the instrumentation space.
//!
//! The candidate set starts as the full selection space and shrinks through
//! blocking constraints: when an added assertion fails, every selection
//! agreeing with the failed one on the instrumented points that occur on the
//! counterexample is excluded. Unknown oracle verdicts requeue the selection
//! with a doubled budget; if the space is exhausted with unknowns left, the
//! operator is composed with a fresh instance of itself and the search
//! restarts, up to a configured instance count.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::ast::{ControlPointId, Program};
use crate::error::SearchError;
use crate::eval::Trace;
use crate::instr::space::{instrument, instrumentation_space, SpaceInfo};
use crate::instr::{compose, InstrumentationOperator, InstrumentedProgram, Selection};

type InstrumentedItem = Result<(InstrumentedProgram, OracleVerdict), SearchError>;
use crate::oracle::witness::{back_translate_cex, back_translate_witness};
use crate::oracle::{Oracle, OracleBudget, OracleVerdict, WitnessFormula};

/// Spaces larger than this are not searched.
const MAX_SPACE: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PickStrategy {
    /// Maximal rewriting first, then by descending rewrite count.
    AllFirst,
    /// Plain lexicographic enumeration.
    Lex,
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub strategy: PickStrategy,
    pub initial_budget: OracleBudget,
    /// Budget doublings granted to a selection whose verdict was unknown.
    pub max_budget_doublings: u32,
    /// Operator instances to escalate to (1 = never compose).
    pub max_operator_instances: u32,
    pub deadline: Option<Duration>,
    /// Concurrent oracle checks.
    pub jobs: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            strategy: PickStrategy::AllFirst,
            initial_budget: OracleBudget::default(),
            max_budget_doublings: 2,
            max_operator_instances: 1,
            deadline: None,
            jobs: 1,
        }
    }
}

#[derive(Debug)]
pub enum SearchResult {
    Verified {
        selection: Selection,
        witness: Option<WitnessFormula>,
    },
    Incorrect {
        trace: Trace,
    },
    Inconclusive,
}

/// One progress-log record per oracle check.
#[derive(Debug, Clone, Serialize)]
pub struct ProgressRecord {
    pub iteration: u64,
    pub selection: serde_json::Value,
    pub verdict: String,
    #[serde(rename = "candidatesRemaining")]
    pub candidates_remaining: u64,
}

#[derive(Debug)]
pub struct SearchOutcome {
    pub result: SearchResult,
    pub iterations: u64,
    pub operator_instances: u32,
    pub progress: Vec<ProgressRecord>,
}

/// The candidate set: the base space plus blocking constraints, enumerated
/// lazily.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    points: Vec<ControlPointId>,
    /// Per-point choices in pick order (rules first, then `⊥`).
    options: BTreeMap<ControlPointId, Vec<Option<String>>>,
    blocks: Vec<BTreeMap<ControlPointId, Option<String>>>,
}

impl CandidateSet {
    pub fn new(space: &SpaceInfo) -> CandidateSet {
        let options = space
            .choices
            .iter()
            .map(|(p, rules)| {
                let mut opts: Vec<Option<String>> =
                    rules.iter().cloned().map(Some).collect();
                opts.push(None);
                (*p, opts)
            })
            .collect();
        CandidateSet {
            points: space.points.clone(),
            options,
            blocks: Vec::new(),
        }
    }

    pub fn is_blocked(&self, sel: &Selection) -> bool {
        self.blocks.iter().any(|block| {
            block
                .iter()
                .all(|(p, choice)| sel.get(*p) == Some(choice))
        })
    }

    /// Add a blocking constraint excluding all selections that agree with
    /// `sel` on `points`; with no points, exactly `sel` is excluded.
    pub fn block(&mut self, sel: &Selection, points: &BTreeSet<ControlPointId>) {
        let constraint: BTreeMap<ControlPointId, Option<String>> = if points.is_empty() {
            sel.choices.clone()
        } else {
            points
                .iter()
                .filter_map(|p| sel.get(*p).map(|c| (*p, c.clone())))
                .collect()
        };
        self.blocks.push(constraint);
    }

    /// Number of unblocked selections (exact, by enumeration).
    pub fn count_remaining(&self) -> u64 {
        let mut count = 0u64;
        self.for_each(|_| {
            count += 1;
            false
        });
        count
    }

    pub fn is_empty(&self) -> bool {
        self.pick(PickStrategy::Lex).is_none()
    }

    /// First unblocked selection in strategy order.
    pub fn pick(&self, strategy: PickStrategy) -> Option<Selection> {
        self.pick_many(strategy, 1).into_iter().next()
    }

    /// Up to `n` unblocked selections in strategy order.
    pub fn pick_many(&self, strategy: PickStrategy, n: usize) -> Vec<Selection> {
        let mut out = Vec::new();
        match strategy {
            PickStrategy::Lex => {
                self.for_each(|sel| {
                    out.push(sel);
                    out.len() >= n
                });
            }
            PickStrategy::AllFirst => {
                // Descending number of rewritten points; lexicographic within
                // each band.
                for k in (0..=self.points.len()).rev() {
                    let full = self.for_each_with_count(k, |sel| {
                        out.push(sel);
                        out.len() >= n
                    });
                    if full {
                        break;
                    }
                }
            }
        }
        out
    }

    /// Enumerate unblocked selections in lexicographic order; `f` returns
    /// true to stop. Returns whether enumeration was stopped.
    fn for_each(&self, mut f: impl FnMut(Selection) -> bool) -> bool {
        let mut current = Selection::default();
        self.enumerate(0, None, &mut current, &mut f)
    }

    fn for_each_with_count(&self, k: usize, mut f: impl FnMut(Selection) -> bool) -> bool {
        let mut current = Selection::default();
        self.enumerate(0, Some(k), &mut current, &mut f)
    }

    fn enumerate(
        &self,
        idx: usize,
        rewrites_left: Option<usize>,
        current: &mut Selection,
        f: &mut impl FnMut(Selection) -> bool,
    ) -> bool {
        if let Some(k) = rewrites_left {
            let remaining_points = self.points.len() - idx;
            if k > remaining_points {
                return false;
            }
        }
        if idx == self.points.len() {
            if rewrites_left.is_some_and(|k| k != 0) {
                return false;
            }
            if !self.is_blocked(current) {
                return f(current.clone());
            }
            return false;
        }
        let p = self.points[idx];
        for choice in &self.options[&p] {
            let next_left = match (rewrites_left, choice.is_some()) {
                (Some(0), true) => continue,
                (Some(k), true) => Some(k - 1),
                (Some(k), false) => Some(k),
                (None, _) => None,
            };
            current.choices.insert(p, choice.clone());
            if self.enumerate(idx + 1, next_left, current, f) {
                current.choices.remove(&p);
                return true;
            }
            current.choices.remove(&p);
        }
        false
    }
}

/// Add a blocking constraint for a refuted selection: exclude everything
/// agreeing with it on the instrumented points occurring on the
/// counterexample.
pub fn refine(cand: &mut CandidateSet, sel: &Selection, cex_points: &BTreeSet<ControlPointId>) {
    cand.block(sel, cex_points);
}

/// Algorithm: pick a candidate, check it, return on success or on a
/// counterexample for an original assertion, refine otherwise.
pub fn search(
    p: &Program,
    op: &InstrumentationOperator,
    oracle: &dyn Oracle,
    cfg: &SearchConfig,
) -> Result<SearchOutcome, SearchError> {
    let started = Instant::now();
    let mut iterations = 0u64;
    let mut progress = Vec::new();

    let mut current_op = op.clone();
    for instance_count in 1..=cfg.max_operator_instances.max(1) {
        let outcome = search_one_space(
            p,
            &current_op,
            oracle,
            cfg,
            started,
            &mut iterations,
            &mut progress,
        )?;
        match outcome {
            SpaceOutcome::Done(result) => {
                return Ok(SearchOutcome {
                    result,
                    iterations,
                    operator_instances: instance_count,
                    progress,
                })
            }
            SpaceOutcome::ExhaustedWithUnknowns => {
                if instance_count == cfg.max_operator_instances.max(1) {
                    break;
                }
                // Escalate: compose with a fresh instance of the base
                // operator and restart over the larger space.
                current_op = compose(&current_op, op);
            }
            SpaceOutcome::Exhausted => break,
        }
    }
    Ok(SearchOutcome {
        result: SearchResult::Inconclusive,
        iterations,
        operator_instances: cfg.max_operator_instances.max(1),
        progress,
    })
}

enum SpaceOutcome {
    Done(SearchResult),
    Exhausted,
    ExhaustedWithUnknowns,
}

fn search_one_space(
    p: &Program,
    op: &InstrumentationOperator,
    oracle: &dyn Oracle,
    cfg: &SearchConfig,
    started: Instant,
    iterations: &mut u64,
    progress: &mut Vec<ProgressRecord>,
) -> Result<SpaceOutcome, SearchError> {
    let space = instrumentation_space(p, op);
    if space.size() > MAX_SPACE {
        return Ok(SpaceOutcome::Done(SearchResult::Inconclusive));
    }
    let mut cand = CandidateSet::new(&space);
    // Selections awaiting a retry at a higher budget.
    let mut retries: Vec<(Selection, OracleBudget)> = Vec::new();
    let mut had_unknown = false;

    loop {
        if let Some(deadline) = cfg.deadline {
            if started.elapsed() > deadline {
                return Ok(SpaceOutcome::Done(SearchResult::Inconclusive));
            }
        }

        // Gather work: fresh candidates at the base budget, then requeued
        // unknowns at their escalated budgets.
        let fresh = cand.pick_many(cfg.strategy, cfg.jobs.max(1));
        let mut batch: Vec<(Selection, OracleBudget)> = fresh
            .into_iter()
            .map(|s| (s, cfg.initial_budget))
            .collect();
        if batch.is_empty() {
            while batch.len() < cfg.jobs.max(1) {
                match retries.pop() {
                    Some(item) => batch.push(item),
                    None => break,
                }
            }
        }
        if batch.is_empty() {
            return Ok(if had_unknown {
                SpaceOutcome::ExhaustedWithUnknowns
            } else {
                SpaceOutcome::Exhausted
            });
        }

        // Check the batch (in parallel when jobs > 1); apply verdicts in
        // batch order.
        type Checked = (Selection, OracleBudget, InstrumentedItem);
        let checked: Vec<Checked> = if batch.len() == 1 {
            let (sel, budget) = batch.pop().unwrap();
            let ip = instrument(p, op, &sel, true)?;
            let verdict = oracle
                .check(&ip.program, budget)
                .map_err(SearchError::OracleFailure);
            vec![(sel, budget, verdict.map(|v| (ip, v)))]
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = batch
                    .into_iter()
                    .map(|(sel, budget)| {
                        scope.spawn(move || {
                            let item = instrument(p, op, &sel, true)
                                .map_err(SearchError::Instr)
                                .and_then(|ip| {
                                    oracle
                                        .check(&ip.program, budget)
                                        .map_err(SearchError::OracleFailure)
                                        .map(|v| (ip, v))
                                });
                            (sel, budget, item)
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("oracle worker panicked"))
                    .collect()
            })
        };

        for (sel, budget, res) in checked {
            let (ip, verdict) = res?;
            *iterations += 1;
            progress.push(ProgressRecord {
                iteration: *iterations,
                selection: sel.to_json(),
                verdict: verdict.kind().to_string(),
                candidates_remaining: cand.count_remaining(),
            });
            match verdict {
                OracleVerdict::Correct { witness } => {
                    let witness = witness.map(|w| back_translate_witness(&w, op));
                    return Ok(SpaceOutcome::Done(SearchResult::Verified {
                        selection: sel,
                        witness,
                    }));
                }
                OracleVerdict::Incorrect { trace } => {
                    if trace.is_empty() {
                        // A refutation without a concrete trace cannot be
                        // attributed to an original or added assertion.
                        had_unknown = true;
                        cand.block(&sel, &BTreeSet::new());
                        continue;
                    }
                    let failing = trace.last().expect("nonempty").point;
                    if ip.is_original_assert(failing) {
                        let back = back_translate_cex(&trace, &ip)
                            .expect("failing point checked to be original");
                        return Ok(SpaceOutcome::Done(SearchResult::Incorrect { trace: back }));
                    }
                    // The instrumentation itself failed: refine away every
                    // selection agreeing on the points seen by this trace.
                    let cex_points: BTreeSet<ControlPointId> = trace
                        .iter()
                        .filter_map(|step| ip.origin_of(step.point))
                        .filter(|orig| sel.choices.contains_key(orig))
                        .collect();
                    refine(&mut cand, &sel, &cex_points);
                }
                OracleVerdict::Unknown { .. } => {
                    // Defer; never shrinks the candidate set conceptually,
                    // but the selection moves to the retry queue.
                    cand.block(&sel, &BTreeSet::new());
                    if budget.level < cfg.max_budget_doublings {
                        retries.push((sel, budget.escalated()));
                    } else {
                        had_unknown = true;
                    }
                }
            }
        }
    }
}
