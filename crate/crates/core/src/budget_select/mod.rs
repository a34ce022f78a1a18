//! Budget-constrained node selection and assembly of the refined context.
//!
//! Nodes are taken in descending score order. Taking a node takes its whole
//! subtree; a parent whose children are all taken is taken too. A candidate
//! whose additions would push the assembled context over the budget is
//! skipped as a unit (or ends selection, with `stop_on_first_overflow`).

mod assemble;
mod recall;
mod refine;

use serde::{Deserialize, Serialize};

use crate::doctree::{DocTree, NodeId, NodeKind};
use crate::tokens::TokenCounter;

pub use assemble::{assemble, heading, CostModel, MARKER};
pub use recall::{answer_in_context, normalize_answer, recall};
pub use refine::{document_header, refine, refine_scored, share_budget, DocRefinement, RefineOptions, RefineResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_tokens: usize,
}

impl Budget {
    pub fn new(max_tokens: usize) -> Option<Self> {
        (max_tokens >= 1).then_some(Self { max_tokens })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepAction {
    Committed,
    Skipped,
    /// Over budget with `stop_on_first_overflow`; selection ends here.
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub node: NodeId,
    pub action: StepAction,
    /// Nodes the step would add through the downward closure.
    pub added: Vec<NodeId>,
    /// Ancestors promoted because all their children became selected.
    pub promoted: Vec<NodeId>,
    /// Context size before the step.
    pub cost_before: usize,
    /// Context size had the step been committed.
    pub cost_after: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub steps: Vec<SelectionStep>,
    /// Nothing fitted the budget.
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub selected: Vec<bool>,
    /// Token count of the assembled context.
    pub tokens: usize,
    pub trace: SelectionTrace,
}

impl Selection {
    pub fn ids(&self) -> Vec<NodeId> {
        (0..self.selected.len()).filter(|&i| self.selected[i]).collect()
    }
}

/// Non-root nodes by descending score, ties by ascending id. NaN scores rank
/// last.
pub fn ranking(tree: &DocTree, scores: &[f64]) -> Vec<NodeId> {
    let key = |i: NodeId| if scores[i].is_nan() { f64::NEG_INFINITY } else { scores[i] };
    let mut ids: Vec<NodeId> = (0..tree.len()).filter(|&i| i != tree.root).collect();
    ids.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    ids
}

/// Nodes added by taking `n` given the current selection: the unselected part
/// of its subtree, then the ancestors completed by it (root excluded).
pub fn closure(tree: &DocTree, n: NodeId, selected: &[bool]) -> (Vec<NodeId>, Vec<NodeId>) {
    let added: Vec<NodeId> = tree.subtree(n).into_iter().filter(|&d| !selected[d]).collect();
    let mut promoted = Vec::new();
    let mut cur = n;
    while let Some(p) = tree.parent(cur) {
        if p == tree.root || selected[p] {
            break;
        }
        let complete = tree.children(p).iter().all(|&c| c == cur || selected[c] || promoted.contains(&c));
        if !complete {
            break;
        }
        promoted.push(p);
        cur = p;
    }
    (added, promoted)
}

pub fn select(tree: &DocTree, scores: &[f64], budget: Budget, counter: &dyn TokenCounter, stop_on_first_overflow: bool) -> Selection {
    let costs = CostModel::new(tree, counter);
    select_with(tree, scores, budget, &costs, stop_on_first_overflow)
}

pub fn select_with(tree: &DocTree, scores: &[f64], budget: Budget, costs: &CostModel, stop_on_first_overflow: bool) -> Selection {
    let mut selected = vec![false; tree.len()];
    let mut current = 0;
    let mut trace = SelectionTrace::default();
    for n in ranking(tree, scores) {
        if selected[n] {
            continue;
        }
        let before = current;
        let (added, promoted) = closure(tree, n, &selected);
        for &i in added.iter().chain(&promoted) {
            selected[i] = true;
        }
        let after = costs.cost(&selected);
        let action = if after <= budget.max_tokens {
            current = after;
            StepAction::Committed
        } else {
            for &i in added.iter().chain(&promoted) {
                selected[i] = false;
            }
            if stop_on_first_overflow {
                StepAction::Stopped
            } else {
                StepAction::Skipped
            }
        };
        trace.steps.push(SelectionStep { node: n, action, added, promoted, cost_before: before, cost_after: after });
        if action == StepAction::Stopped {
            break;
        }
    }
    trace.empty = !selected.iter().any(|&s| s);
    Selection { selected, tokens: current, trace }
}

/// Checks the closure rules on a final selection: a selected internal node has
/// every descendant selected, and a non-root node whose children are all
/// selected is selected. Returns the offending node ids.
pub fn closure_violations(tree: &DocTree, selected: &[bool]) -> Vec<NodeId> {
    let mut bad = Vec::new();
    for id in 0..tree.len() {
        let node = tree.node(id);
        if node.kind == NodeKind::Root {
            continue;
        }
        let kids = &node.children;
        let down_ok = !selected[id] || kids.iter().all(|&c| selected[c]);
        let up_ok = kids.is_empty() || selected[id] || !kids.iter().all(|&c| selected[c]);
        if !down_ok || !up_ok {
            bad.push(id);
        }
    }
    bad
}

#[cfg(test)]
mod tests;
