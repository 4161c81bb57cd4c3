//! Search-tree learners for polyhedral classifiers.
//!
//! Nodes of the tree are sets `A` (all positives plus some negatives) with a
//! feasible state for the strict system over `A`. Each level keeps every node
//! of the previous level and tries to extend nodes by one negative that their
//! halfspace still contains, warm-starting the solver from the parent state.
//!
//! * [`proper_separate`] stops as soon as at most `t` node halfspaces jointly
//!   exclude every negative (exact set cover over exclusion masks).
//! * [`improper_separate`] intersects all node halfspaces and, while that
//!   polyhedron contains a negative, extends every node by it.
//!
//! When a gamma-separating `t`-polyhedron exists both stop within
//! `ceil(4 t / gamma^2)` levels; exceeding that cap therefore certifies that
//! none exists.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cover::{assemble_cover_with_stats, ExclusionMask};
use crate::dual::{potential, DualState, Label, Sample};
use crate::error::{check_dim, Error, Result};
use crate::kernel::KernelSpec;
use crate::lp::{lp_solve, LpOutcome};

/// Arcs raising the potential by at least this much are progress-contributing.
pub const PROGRESS_ARC_GAIN: f64 = 0.25;

/// `ceil(4 t / gamma^2)`.
pub fn level_cap(t: usize, gamma: f64) -> usize {
    (4.0 * t as f64 / (gamma * gamma)).ceil() as usize
}

/// Natural log of the improper halfspace-count bound `(8 t / gamma^2)^(4 / gamma^2)`.
pub fn improper_halfspace_bound_ln(t: usize, gamma: f64) -> f64 {
    let g2 = gamma * gamma;
    4.0 / g2 * (8.0 * t as f64 / g2).ln()
}

/// A support point of a trained model: sample index, encoding and label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "(usize, Vec<f64>, i8)", try_from = "(usize, Vec<f64>, i8)")]
pub struct SupportPoint {
    pub index: usize,
    pub encoding: Vec<f64>,
    pub label: Label,
}

impl From<SupportPoint> for (usize, Vec<f64>, i8) {
    fn from(p: SupportPoint) -> Self {
        (p.index, p.encoding, p.label.as_i8())
    }
}

impl TryFrom<(usize, Vec<f64>, i8)> for SupportPoint {
    type Error = String;

    fn try_from((index, encoding, label): (usize, Vec<f64>, i8)) -> std::result::Result<Self, String> {
        let label = Label::from_value(label as f64).ok_or_else(|| format!("bad label {label}"))?;
        Ok(SupportPoint { index, encoding, label })
    }
}

fn default_scale() -> f64 {
    1.0
}

/// Intersection of halfspaces `{z : <z, h_j> + d_j >= 0}`, each stored in
/// dual form over a shared table of support points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyhedron {
    pub kernel: KernelSpec,
    pub support: Vec<SupportPoint>,
    pub halfspaces: Vec<DualState>,
    pub gamma: f64,
    pub t: usize,
    /// Raw inputs are divided by this before evaluation (max-norm rescaling
    /// applied at ingestion).
    #[serde(default = "default_scale")]
    pub input_scale: f64,
}

impl Polyhedron {
    /// Collects the support of `states` from `sample`.
    pub fn from_states(sample: &Sample, states: Vec<DualState>, gamma: f64, t: usize) -> Result<Self> {
        if states.is_empty() || states.iter().any(DualState::is_empty) {
            return Err(Error::Contract("a polyhedron needs at least one non-empty halfspace".into()));
        }
        let mut indices: Vec<usize> = states.iter().flat_map(|s| s.support().iter().map(|e| e.index)).collect();
        indices.sort_unstable();
        indices.dedup();
        let support = indices
            .into_iter()
            .map(|i| SupportPoint {
                index: i,
                encoding: sample.point(i).encoding.clone(),
                label: sample.point(i).label,
            })
            .collect();
        Ok(Polyhedron { kernel: sample.kernel().clone(), support, halfspaces: states, gamma, t, input_scale: 1.0 })
    }

    pub fn dim(&self) -> usize {
        self.support[0].encoding.len()
    }

    /// Checks that every halfspace refers only to listed support points.
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if self.support.is_empty() || self.halfspaces.is_empty() {
            return Err(Error::Input("model has no halfspaces".into()));
        }
        let dim = self.dim();
        for p in &self.support {
            check_dim(dim, p.encoding.len())?;
        }
        if self.support.windows(2).any(|w| w[0].index >= w[1].index) {
            return Err(Error::Input("support indices must be strictly increasing".into()));
        }
        for h in &self.halfspaces {
            if h.is_empty() {
                return Err(Error::Input("empty halfspace in model".into()));
            }
            for e in h.support() {
                self.position(e.index)
                    .ok_or_else(|| Error::Input(format!("halfspace refers to unknown support point {}", e.index)))?;
            }
        }
        if !(self.input_scale > 0.0) {
            return Err(Error::Input("input_scale must be positive".into()));
        }
        Ok(())
    }

    fn position(&self, index: usize) -> Option<usize> {
        self.support.binary_search_by_key(&index, |p| p.index).ok()
    }

    /// `<phi(omega), h_j> + d_j` for every halfspace.
    pub fn decision_values(&self, omega: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), omega.len())?;
        let query: Vec<f64>;
        let omega = if self.input_scale != 1.0 {
            query = omega.iter().map(|v| v / self.input_scale).collect();
            &query[..]
        } else {
            omega
        };
        let kvals: Vec<f64> = self.support.iter().map(|p| self.kernel.eval(&p.encoding, omega)).collect();
        Ok(self
            .halfspaces
            .iter()
            .map(|h| {
                let (hv, dv) = h.affine_parts(|i| {
                    let pos = self.position(i).expect("validated support");
                    (self.support[pos].label.sign(), kvals[pos])
                });
                hv + dv
            })
            .collect())
    }
}

/// `+1` iff `omega` lies in every halfspace of `poly`.
pub fn classify(poly: &Polyhedron, omega: &[f64]) -> Result<Label> {
    let values = poly.decision_values(omega)?;
    Ok(if values.iter().all(|&v| v >= 0.0) { Label::Positive } else { Label::Negative })
}

/// A node `(A, k)` of the search tree.
#[derive(Debug, Clone)]
pub struct SearchNode {
    /// Positions (into the negative list) of the negatives in `A`; the
    /// positives are implicit.
    pub negatives: ExclusionMask,
    /// Level at which the current state was attached.
    pub level: usize,
    pub state: Arc<DualState>,
    pub potential: f64,
    /// Negatives strictly outside the node's halfspace.
    pub mask: ExclusionMask,
    /// Progress-contributing arcs on the path that produced `state`.
    pub path_progress_arcs: usize,
    tried: HashSet<usize>,
}

impl SearchNode {
    fn root(n_neg: usize) -> Self {
        SearchNode {
            negatives: ExclusionMask::new(n_neg),
            level: 0,
            state: Arc::new(DualState::empty()),
            potential: 0.0,
            mask: ExclusionMask::new(n_neg),
            path_progress_arcs: 0,
            tried: HashSet::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Keep a summary of every node of the final level in the telemetry.
    pub record_nodes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub negatives: Vec<usize>,
    pub level: usize,
    pub potential: f64,
    pub path_progress_arcs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTelemetry {
    /// Outer iterations performed (the level counter at termination).
    pub levels: usize,
    pub level_cap: usize,
    /// `|A|` at the start of each outer iteration.
    pub width_per_level: Vec<usize>,
    pub lp_solves: usize,
    pub lp_progress_steps: usize,
    pub arcs: usize,
    pub progress_arcs: usize,
    pub max_path_progress_arcs: usize,
    /// Smallest potential change over all recorded arcs.
    pub min_arc_gain: f64,
    pub max_potential: f64,
    pub cover_expansions: usize,
    pub halfspaces: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nodes: Option<Vec<NodeRecord>>,
}

impl SearchTelemetry {
    fn new(cap: usize) -> Self {
        SearchTelemetry {
            levels: 0,
            level_cap: cap,
            width_per_level: Vec::new(),
            lp_solves: 0,
            lp_progress_steps: 0,
            arcs: 0,
            progress_arcs: 0,
            max_path_progress_arcs: 0,
            min_arc_gain: f64::INFINITY,
            max_potential: 0.0,
            cover_expansions: 0,
            halfspaces: 0,
            nodes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Separation {
    Polyhedron(Polyhedron),
    NoSeparatingPolyhedron,
}

#[derive(Debug, Clone)]
pub struct SearchRun {
    pub result: Separation,
    pub telemetry: SearchTelemetry,
}

impl SearchRun {
    pub fn polyhedron(&self) -> Option<&Polyhedron> {
        match &self.result {
            Separation::Polyhedron(p) => Some(p),
            Separation::NoSeparatingPolyhedron => None,
        }
    }
}

/// Shared per-run state: the sample split by label and the current level.
struct Tree<'a> {
    sample: &'a Sample,
    gamma: f64,
    positives: Vec<usize>,
    negatives: Vec<usize>,
    nodes: BTreeMap<ExclusionMask, SearchNode>,
    /// Negative sets already certified not gamma-separable.
    infeasible: HashSet<ExclusionMask>,
    tel: SearchTelemetry,
}

impl<'a> Tree<'a> {
    fn new(sample: &'a Sample, t: usize, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Input(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        if t == 0 {
            return Err(Error::Input("t must be >= 1".into()));
        }
        let positives = sample.positives();
        let negatives = sample.negatives();
        if positives.is_empty() || negatives.is_empty() {
            return Err(Error::Input("separation needs at least one positive and one negative".into()));
        }
        let n_neg = negatives.len();
        let mut nodes = BTreeMap::new();
        nodes.insert(ExclusionMask::new(n_neg), SearchNode::root(n_neg));
        Ok(Tree {
            sample,
            gamma,
            positives,
            negatives,
            nodes,
            infeasible: HashSet::new(),
            tel: SearchTelemetry::new(level_cap(t, gamma)),
        })
    }

    fn n_neg(&self) -> usize {
        self.negatives.len()
    }

    fn constraints(&self, set: &ExclusionMask) -> Vec<usize> {
        let mut c = self.positives.clone();
        c.extend(set.ones().map(|j| self.negatives[j]));
        c.sort_unstable();
        c
    }

    fn mask_of(&self, state: &DualState) -> ExclusionMask {
        let mut mask = ExclusionMask::new(self.n_neg());
        if state.is_empty() {
            return mask;
        }
        for (j, &i) in self.negatives.iter().enumerate() {
            if state.inner_with_atom(self.sample, i) > 0.0 {
                mask.set(j);
            }
        }
        mask
    }

    /// Runs the solver for every `(node, negative)` task in parallel and
    /// merges the results in task order.
    fn branch(&mut self, tasks: Vec<(ExclusionMask, usize)>, level: usize) -> Result<()> {
        let jobs: Vec<(ExclusionMask, usize, ExclusionMask, Arc<DualState>, f64, usize)> = tasks
            .into_iter()
            .filter_map(|(key, j)| {
                let mut child = key.clone();
                child.set(j);
                if self.infeasible.contains(&child) {
                    return None;
                }
                let node = &self.nodes[&key];
                Some((key, j, child, node.state.clone(), node.potential, node.path_progress_arcs))
            })
            .collect();

        let this = &*self;
        let results: Vec<Result<crate::lp::LpRun>> = jobs
            .par_iter()
            .map(|(_, _, child, start, _, _)| lp_solve(this.sample, &this.constraints(child), start, this.gamma))
            .collect();

        for ((key, j, child, _, parent_pi, parent_arcs), run) in jobs.into_iter().zip(results) {
            let run = run?;
            self.tel.lp_solves += 1;
            self.tel.lp_progress_steps += run.telemetry.progress_steps;
            if let Some(parent) = self.nodes.get_mut(&key) {
                parent.tried.insert(j);
            }
            let state = match run.outcome {
                LpOutcome::Feasible(s) => s,
                LpOutcome::NotGammaSeparable => {
                    self.infeasible.insert(child);
                    continue;
                }
                LpOutcome::InternalOverflow { iterations } => {
                    return Err(Error::Internal(format!("solver exceeded its step cap after {iterations} iterations")));
                }
            };
            let pi = potential(&state);
            let gain = pi - parent_pi;
            let progress = gain >= PROGRESS_ARC_GAIN;
            self.tel.arcs += 1;
            self.tel.progress_arcs += progress as usize;
            self.tel.min_arc_gain = self.tel.min_arc_gain.min(gain);
            let path_arcs = parent_arcs + progress as usize;

            let replace = match self.nodes.get(&child) {
                Some(existing) => pi > existing.potential,
                None => true,
            };
            if replace {
                if let Some(existing) = self.nodes.get(&child) {
                    // the carried-forward arc (A, k-1) -> (A, k) now gains
                    self.tel.min_arc_gain = self.tel.min_arc_gain.min(pi - existing.potential);
                }
                let mask = self.mask_of(&state);
                debug_assert!(child.is_subset_of(&mask));
                self.nodes.insert(
                    child.clone(),
                    SearchNode {
                        negatives: child,
                        level,
                        state: Arc::new(state),
                        potential: pi,
                        mask,
                        path_progress_arcs: path_arcs,
                        tried: HashSet::new(),
                    },
                );
                self.tel.max_path_progress_arcs = self.tel.max_path_progress_arcs.max(path_arcs);
                self.tel.max_potential = self.tel.max_potential.max(pi);
            }
        }
        Ok(())
    }

    fn finish(mut self, result: Separation, options: &SearchOptions) -> SearchRun {
        if let Separation::Polyhedron(p) = &result {
            self.tel.halfspaces = p.halfspaces.len();
        }
        if options.record_nodes {
            self.tel.nodes = Some(
                self.nodes
                    .values()
                    .map(|n| NodeRecord {
                        negatives: n.negatives.ones().map(|j| self.negatives[j]).collect(),
                        level: n.level,
                        potential: n.potential,
                        path_progress_arcs: n.path_progress_arcs,
                    })
                    .collect(),
            );
        }
        SearchRun { result, telemetry: self.tel }
    }
}

/// Proper learner: returns a consistent polyhedron of at most `t`
/// halfspaces, or `NoSeparatingPolyhedron` once the level counter exceeds
/// `ceil(4 t / gamma^2)`.
pub fn proper_separate(sample: &Sample, t: usize, gamma: f64) -> Result<SearchRun> {
    proper_separate_with(sample, t, gamma, &SearchOptions::default())
}

pub fn proper_separate_with(sample: &Sample, t: usize, gamma: f64, options: &SearchOptions) -> Result<SearchRun> {
    let mut tree = Tree::new(sample, t, gamma)?;
    let cap = tree.tel.level_cap;
    let mut level = 0;
    loop {
        level += 1;
        if level > cap {
            tree.tel.levels = cap;
            return Ok(tree.finish(Separation::NoSeparatingPolyhedron, options));
        }
        tree.tel.levels = level;
        tree.tel.width_per_level.push(tree.nodes.len());

        let keys: Vec<&ExclusionMask> = tree.nodes.keys().collect();
        let masks: Vec<ExclusionMask> = tree.nodes.values().map(|n| n.mask.clone()).collect();
        let (selection, stats) = assemble_cover_with_stats(&masks, t, tree.n_neg());
        tree.tel.cover_expansions += stats.expansions;
        if let Some(sel) = selection {
            let states: Vec<DualState> = sel.iter().map(|&i| (*tree.nodes[keys[i]].state).clone()).collect();
            let poly = Polyhedron::from_states(sample, states, gamma, t)?;
            return Ok(tree.finish(Separation::Polyhedron(poly), options));
        }

        let mut tasks = Vec::new();
        for (key, node) in &tree.nodes {
            for j in 0..tree.n_neg() {
                if !node.mask.get(j) && !node.negatives.get(j) && !node.tried.contains(&j) {
                    tasks.push((key.clone(), j));
                }
            }
        }
        tree.branch(tasks, level)?;
    }
}

/// Improper learner: returns the intersection of all node halfspaces once it
/// is consistent. `t_hint` only sets the level cap.
pub fn improper_separate(sample: &Sample, t_hint: usize, gamma: f64) -> Result<SearchRun> {
    improper_separate_with(sample, t_hint, gamma, &SearchOptions::default())
}

pub fn improper_separate_with(
    sample: &Sample,
    t_hint: usize,
    gamma: f64,
    options: &SearchOptions,
) -> Result<SearchRun> {
    let mut tree = Tree::new(sample, t_hint, gamma)?;
    let cap = tree.tel.level_cap;
    let mut level = 0;
    loop {
        level += 1;
        if level > cap {
            tree.tel.levels = cap;
            return Ok(tree.finish(Separation::NoSeparatingPolyhedron, options));
        }
        tree.tel.levels = level;
        tree.tel.width_per_level.push(tree.nodes.len());

        let mut excluded = ExclusionMask::new(tree.n_neg());
        for node in tree.nodes.values() {
            excluded.union_with(&node.mask);
        }
        let Some(j) = excluded.first_zero() else {
            let states: Vec<DualState> =
                tree.nodes.values().filter(|n| !n.state.is_empty()).map(|n| (*n.state).clone()).collect();
            let poly = Polyhedron::from_states(sample, states, gamma, t_hint)?;
            return Ok(tree.finish(Separation::Polyhedron(poly), options));
        };

        let tasks: Vec<(ExclusionMask, usize)> = tree
            .nodes
            .iter()
            .filter(|(_, n)| !n.negatives.get(j) && !n.tried.contains(&j))
            .map(|(k, _)| (k.clone(), j))
            .collect();
        tree.branch(tasks, level)?;
    }
}
