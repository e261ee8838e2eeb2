//! Index-based DAG helpers shared by role graphs and object hierarchies.
//!
//! Nodes are `0..n`. Successor lists are kept sorted so every traversal is
//! deterministic.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Fixed-capacity bit set over node or permission indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    pub fn new(capacity: usize) -> Self {
        BitSet {
            words: vec![0; capacity.div_ceil(64)],
        }
    }

    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words
            .get(i / 64)
            .is_some_and(|w| w & (1 << (i % 64)) != 0)
    }

    pub fn union_with(&mut self, other: &BitSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= *b;
        }
    }

    pub fn difference_with(&mut self, other: &BitSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !*b;
        }
    }

    pub fn intersect_with(&mut self, other: &BitSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= *b;
        }
    }

    pub fn is_subset(&self, other: &BitSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn intersects(&self, other: &BitSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            (0..64).filter(move |b| w & (1 << b) != 0).map(move |b| wi * 64 + b)
        })
    }
}

#[derive(Debug, Clone)]
pub struct Dag {
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
}

impl Dag {
    pub fn new(n: usize, arcs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        for (a, b) in arcs {
            succ[a].push(b);
            pred[b].push(a);
        }
        for list in succ.iter_mut().chain(pred.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        Dag { succ, pred }
    }

    pub fn len(&self) -> usize {
        self.succ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succ.is_empty()
    }

    pub fn succ(&self, v: usize) -> &[usize] {
        &self.succ[v]
    }

    pub fn pred(&self, v: usize) -> &[usize] {
        &self.pred[v]
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(a, list)| list.iter().map(move |&b| (a, b)))
    }

    pub fn roots(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&v| self.pred[v].is_empty())
    }

    /// Kahn's algorithm, smallest ready index first. `None` on a cycle.
    pub fn topo_order(&self) -> Option<Vec<usize>> {
        let mut indeg: Vec<usize> = self.pred.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<usize>> =
            self.roots().map(Reverse).collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(Reverse(v)) = ready.pop() {
            order.push(v);
            for &w in &self.succ[v] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    ready.push(Reverse(w));
                }
            }
        }
        (order.len() == self.len()).then_some(order)
    }

    /// Nodes reachable from `v` along at least zero arcs (so `v` itself is included).
    /// Works on cyclic graphs too.
    pub fn reach_from(&self, v: usize) -> BitSet {
        let mut seen = BitSet::new(self.len());
        seen.insert(v);
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            for &w in &self.succ[u] {
                if !seen.contains(w) {
                    seen.insert(w);
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Nodes lying on some directed cycle, in index order.
    pub fn cyclic_nodes(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&v| self.succ[v].iter().any(|&w| self.reach_from(w).contains(v)))
            .collect()
    }

    /// Reflexive-transitive closure, one set per node. The graph must be acyclic.
    pub fn closure(&self) -> Vec<BitSet> {
        let order = self.topo_order().expect("closure of a cyclic graph");
        let mut reach = vec![BitSet::new(self.len()); self.len()];
        for &v in order.iter().rev() {
            let mut set = BitSet::new(self.len());
            set.insert(v);
            for &w in &self.succ[v] {
                set.union_with(&reach[w]);
            }
            reach[v] = set;
        }
        reach
    }

    /// The unique transitive reduction of an acyclic graph: an arc `(a, b)` is
    /// dropped when `b` is reachable from another successor of `a`.
    pub fn transitive_reduction(&self) -> Vec<(usize, usize)> {
        let reach = self.closure();
        self.arcs()
            .filter(|&(a, b)| {
                !self.succ[a]
                    .iter()
                    .any(|&c| c != b && reach[c].contains(b))
            })
            .collect()
    }

    /// Number of root-to-node paths for each node, saturating.
    pub fn path_counts(&self) -> Vec<usize> {
        let order = self.topo_order().expect("path counts of a cyclic graph");
        let mut count = vec![0usize; self.len()];
        for &v in &order {
            if self.pred[v].is_empty() {
                count[v] = 1;
            } else {
                count[v] = self.pred[v]
                    .iter()
                    .fold(0usize, |acc, &p| acc.saturating_add(count[p]));
            }
        }
        count
    }

    /// Unfolds the DAG into a forest: every node is copied once per distinct
    /// root-to-node path. Fails with the required node count when it exceeds
    /// `budget`.
    pub fn unfold(&self, budget: usize) -> Result<Unfolding, usize> {
        let counts = self.path_counts();
        let needed = counts.iter().fold(0usize, |acc, c| acc.saturating_add(*c));
        if needed > budget {
            return Err(needed);
        }
        let mut origin = Vec::with_capacity(needed);
        let mut parent = Vec::with_capacity(needed);
        for root in self.roots() {
            // Preorder, children in index order.
            let mut stack = vec![(root, None)];
            while let Some((v, par)) = stack.pop() {
                let me = origin.len();
                origin.push(v);
                parent.push(par);
                for &w in self.succ[v].iter().rev() {
                    stack.push((w, Some(me)));
                }
            }
        }
        Ok(Unfolding {
            origin,
            parent,
            paths: counts,
        })
    }
}

/// Result of [`Dag::unfold`]. Copies are numbered in preorder.
#[derive(Debug, Clone)]
pub struct Unfolding {
    /// Original node of each copy.
    pub origin: Vec<usize>,
    /// Parent copy, `None` for roots.
    pub parent: Vec<Option<usize>>,
    /// Root-to-node path count per original node (= number of copies).
    pub paths: Vec<usize>,
}

impl Unfolding {
    /// Copies of each original node in creation order.
    pub fn classes(&self, n: usize) -> Vec<Vec<usize>> {
        let mut classes = vec![Vec::new(); n];
        for (copy, &orig) in self.origin.iter().enumerate() {
            classes[orig].push(copy);
        }
        classes
    }
}

/// Picks `stem` or, if taken, the first free `stem#k` with `k >= 2`.
pub(crate) fn fresh_name(stem: &str, taken: impl Fn(&str) -> bool) -> String {
    if !taken(stem) {
        return stem.to_string();
    }
    (2..)
        .map(|k| format!("{stem}#{k}"))
        .find(|c| !taken(c))
        .expect("unbounded search")
}
