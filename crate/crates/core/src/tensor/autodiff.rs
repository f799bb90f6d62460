//! Reverse-mode replay over the recorded operation DAG.

use std::collections::{HashMap, HashSet};

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Ordered record of the differentiable operations reachable from one root:
/// a topological ordering in which every operation appears after all of its
/// inputs. Reverse replay therefore visits each recorded operation exactly
/// once, with the full output gradient available at that moment.
pub struct ComputationTape<S: Scalar> {
    /// Topological order, inputs before outputs; the root is last.
    order: Vec<Tensor<S>>,
}

impl<S: Scalar> ComputationTape<S> {
    /// Collects every tracked tensor reachable from `root` through recorded
    /// operations, in topological order.
    pub fn trace(root: &Tensor<S>) -> Self {
        let mut order: Vec<Tensor<S>> = Vec::new();
        if !root.requires_grad() {
            return ComputationTape { order };
        }
        let mut seen: HashSet<u64> = HashSet::new();
        // Iterative post-order DFS: (node, next parent index to visit).
        let mut stack: Vec<(Tensor<S>, usize)> = vec![(root.clone(), 0)];
        seen.insert(root.id());
        while let Some((node, idx)) = stack.pop() {
            let parents = node.parents();
            if idx < parents.len() {
                let parent = parents[idx].clone();
                stack.push((node, idx + 1));
                if parent.requires_grad() && seen.insert(parent.id()) {
                    stack.push((parent, 0));
                }
            } else {
                order.push(node);
            }
        }
        ComputationTape { order }
    }

    /// Number of recorded tensors (leaves included).
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Number of non-leaf operations on the tape.
    pub fn op_count(&self) -> usize {
        self.order.iter().filter(|t| t.backward_fn().is_some()).count()
    }

    /// Replays the tape in reverse, seeding the root with `d(root)/d(root) = 1`
    /// and accumulating gradients into every tracked tensor. Returns the
    /// number of operations whose backward closure ran (each exactly once).
    pub fn replay_reverse(&self) -> usize {
        let Some(root) = self.order.last() else {
            return 0;
        };
        // Gradient flow lives in a scratch map during replay; the slots on
        // the tensors are written (never read) as each node retires, so
        // repeated backward calls accumulate correctly.
        let mut flow: HashMap<u64, Vec<S>> = HashMap::new();
        flow.insert(root.id(), vec![S::one(); root.numel()]);

        let mut ops_visited = 0;
        for node in self.order.iter().rev() {
            let Some(grad_out) = flow.remove(&node.id()) else {
                continue;
            };
            match node.backward_fn() {
                Some(f) => {
                    ops_visited += 1;
                    let parent_grads = f(&grad_out, node.parents());
                    debug_assert_eq!(parent_grads.len(), node.parents().len());
                    for (parent, pg) in node.parents().iter().zip(parent_grads) {
                        let Some(pg) = pg else { continue };
                        if !parent.requires_grad() {
                            continue;
                        }
                        debug_assert_eq!(pg.len(), parent.numel());
                        match flow.get_mut(&parent.id()) {
                            Some(acc) => {
                                for (a, d) in acc.iter_mut().zip(&pg) {
                                    *a += *d;
                                }
                            }
                            None => {
                                flow.insert(parent.id(), pg);
                            }
                        }
                    }
                }
                // only leaves keep a gradient slot; interior gradients are
                // transient
                None => node.accumulate_grad_owned(grad_out),
            }
        }
        ops_visited
    }
}
