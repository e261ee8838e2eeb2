//! Permission-leakage risk on a tree-shaped leaf hierarchy, computed with
//! analytic-hierarchy weights derived from effective-set sizes.
//!
//! Each role node is extended with one child per directly held permission.
//! A child's weight is its size over the total size of its siblings (a role
//! counts its effective set, a permission node counts 1), and the risk of a
//! permission is the sum, over its permission nodes, of the weight products
//! on the path from the root. Everything is exact.

use std::collections::{BTreeMap, VecDeque};

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::graph::BitSet;
use crate::model::{hierarchy_flags, is_tree_like, leaf_violation, PermId, RbacModel, RoleId, RoleIndex};
use crate::optimizer::{optimize, Algorithm, OptimizeOptions};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    /// Added above several tree roots so the forest has a single top.
    VirtualRoot,
    Role(RoleId),
    Permission(PermId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub payload: Payload,
    /// `|RP|` of the node: effective-set size for roles, 1 for permissions.
    pub size: usize,
    pub weight: BigRational,
}

/// The role forest extended with permission leaves. Node 0 is the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtendedTree {
    pub nodes: Vec<TreeNode>,
}

/// Pairwise comparison matrix of one sibling group, `entries[i][j] = size_i / size_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairwiseMatrix {
    pub parent: usize,
    pub children: Vec<usize>,
    pub entries: Vec<Vec<BigRational>>,
}

impl PairwiseMatrix {
    pub fn is_reciprocal(&self) -> bool {
        let e = &self.entries;
        (0..e.len()).all(|i| {
            e[i][i].is_one() && (0..e.len()).all(|j| (&e[i][j] * &e[j][i]).is_one())
        })
    }

    /// `entries[i][j] * entries[j][k] == entries[i][k]` for all triples.
    pub fn is_consistent(&self) -> bool {
        let e = &self.entries;
        let n = e.len();
        (0..n).all(|i| (0..n).all(|j| (0..n).all(|k| &e[i][j] * &e[j][k] == e[i][k])))
    }

    /// Weight vector recovered from the matrix: the normalized first column,
    /// which is the principal eigenvector when the matrix is consistent.
    pub fn priorities(&self) -> Vec<BigRational> {
        let col: Vec<BigRational> = self.entries.iter().map(|row| row[0].clone()).collect();
        let total = col.iter().fold(BigRational::zero(), |a, b| a + b);
        col.into_iter().map(|c| c / &total).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RiskReport {
    pub risks: BTreeMap<PermId, BigRational>,
    pub ranking: Vec<PermId>,
}

fn ratio(a: usize, b: usize) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

/// Builds the extended tree. The model must be tree-like and leaf.
pub fn extend_tree(model: &RbacModel) -> Result<ExtendedTree> {
    let index = RoleIndex::new(model);
    if !is_tree_like(&index) {
        let v = (0..index.roles.len())
            .find(|&v| index.dag.pred(v).len() > 1)
            .expect("some role has two seniors");
        return Err(Error::NotTreeLike(index.roles[v].clone()));
    }
    if index.dag.topo_order().is_none() {
        return Err(Error::InvalidModel(model.validate()));
    }
    let eff = index.effective_all();
    if let Some(v) = leaf_violation(&index, &eff) {
        return Err(Error::NotLeaf(index.roles[v].clone()));
    }

    let roots: Vec<usize> = index.dag.roots().collect();
    let mut nodes: Vec<TreeNode> = Vec::new();
    let attach = |nodes: &mut Vec<TreeNode>, parent: Option<usize>, payload, size| {
        let id = nodes.len();
        if let Some(p) = parent {
            nodes[p].children.push(id);
        }
        nodes.push(TreeNode {
            parent,
            children: Vec::new(),
            payload,
            size,
            weight: BigRational::zero(),
        });
        id
    };
    let mut queue = VecDeque::new();
    if roots.len() == 1 {
        let me = attach(&mut nodes, None, Payload::Role(index.roles[roots[0]].clone()), eff[roots[0]].len());
        queue.push_back((roots[0], me));
    } else {
        let mut all = BitSet::new(index.perms.len());
        for &r in &roots {
            all.union_with(&eff[r]);
        }
        attach(&mut nodes, None, Payload::VirtualRoot, all.len());
        for &r in &roots {
            let me = attach(&mut nodes, Some(0), Payload::Role(index.roles[r].clone()), eff[r].len());
            queue.push_back((r, me));
        }
    }
    // Breadth-first, so each node's role children come before its permission nodes.
    while let Some((v, me)) = queue.pop_front() {
        for &w in index.dag.succ(v) {
            let child = attach(&mut nodes, Some(me), Payload::Role(index.roles[w].clone()), eff[w].len());
            queue.push_back((w, child));
        }
        for p in index.direct[v].iter() {
            attach(&mut nodes, Some(me), Payload::Permission(index.perms[p].clone()), 1);
        }
    }
    Ok(ExtendedTree { nodes })
}

/// Sets every weight to size over total sibling size (zero for empty groups).
pub fn relative_coefficients(mut tree: ExtendedTree) -> ExtendedTree {
    tree.nodes[0].weight = BigRational::one();
    for i in 0..tree.nodes.len() {
        let children = tree.nodes[i].children.clone();
        let total: usize = children.iter().map(|&c| tree.nodes[c].size).sum();
        for c in children {
            tree.nodes[c].weight = if total == 0 {
                BigRational::zero()
            } else {
                ratio(tree.nodes[c].size, total)
            };
        }
    }
    tree
}

impl ExtendedTree {
    /// Comparison matrix over the children of `node` with a non-empty
    /// effective set, or `None` when there are none.
    pub fn pairwise_matrix(&self, node: usize) -> Option<PairwiseMatrix> {
        let children: Vec<usize> = self.nodes[node]
            .children
            .iter()
            .copied()
            .filter(|&c| self.nodes[c].size > 0)
            .collect();
        if children.is_empty() {
            return None;
        }
        let entries = children
            .iter()
            .map(|&i| {
                children
                    .iter()
                    .map(|&j| ratio(self.nodes[i].size, self.nodes[j].size))
                    .collect()
            })
            .collect();
        Some(PairwiseMatrix {
            parent: node,
            children,
            entries,
        })
    }

    /// Product of weights from the top down to each node.
    pub fn cumulative_weights(&self) -> Vec<BigRational> {
        let mut cum: Vec<BigRational> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let above = match node.parent {
                Some(p) => cum[p].clone(),
                None => BigRational::one(),
            };
            cum.push(above * &node.weight);
        }
        cum
    }
}

/// Risk of every permission. Models that are not tree-like leaf hierarchies
/// are normalized with `III+I` first.
pub fn leakage_risks(model: &RbacModel) -> Result<RiskReport> {
    leakage_risks_with(model, &OptimizeOptions::default())
}

/// Same as [`leakage_risks`] with an explicit node budget for normalization.
pub fn leakage_risks_with(model: &RbacModel, opts: &OptimizeOptions) -> Result<RiskReport> {
    model.check()?;
    if model.direct_rp.values().all(|s| s.is_empty()) {
        return Err(Error::EmptyPermissionSet);
    }
    let flags = hierarchy_flags(model);
    let tree = if flags.tree_like && flags.leaf {
        extend_tree(model)?
    } else {
        extend_tree(&optimize(model, Algorithm::IIIPlusI, opts)?.0)?
    };
    Ok(risks_of_tree(model, &relative_coefficients(tree)))
}

fn risks_of_tree(model: &RbacModel, tree: &ExtendedTree) -> RiskReport {
    let cum = tree.cumulative_weights();
    let mut risks: BTreeMap<PermId, BigRational> = model
        .permissions
        .iter()
        .map(|p| (p.clone(), BigRational::zero()))
        .collect();
    for (node, c) in tree.nodes.iter().zip(cum) {
        if let Payload::Permission(p) = &node.payload {
            *risks.get_mut(p).expect("declared permission") += c;
        }
    }
    let ranking = rank(&risks);
    RiskReport { risks, ranking }
}

fn rank(risks: &BTreeMap<PermId, BigRational>) -> Vec<PermId> {
    let mut order: Vec<&PermId> = risks.keys().collect();
    order.sort_by(|a, b| risks[*b].cmp(&risks[*a]).then_with(|| a.cmp(b)));
    order.into_iter().cloned().collect()
}

/// Permissions by non-increasing risk, ties by id.
pub fn rank_permissions(report: &RiskReport) -> Vec<PermId> {
    rank(&report.risks)
}

/// Rounds half away from zero to `places` decimals.
pub fn decimal(r: &BigRational, places: usize) -> String {
    let scale = num::pow(BigInt::from(10), places);
    let scaled = r * BigRational::from_integer(scale.clone());
    let rounded = scaled.round().to_integer();
    let neg = rounded.is_negative();
    let digits = rounded.abs().to_string();
    let digits = format!("{digits:0>width$}", width = places + 1);
    let (int, frac) = digits.split_at(digits.len() - places);
    let sign = if neg { "-" } else { "" };
    if places == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

/// Lossy view for display and benchmarks.
pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    fn two_leaves() -> RbacModel {
        RbacModel::new()
            .role("root", &[])
            .role("r1", &["a"])
            .role("r2", &["a", "b", "c"])
            .arc("root", "r1")
            .arc("root", "r2")
    }

    #[test]
    fn worked_example() {
        let tree = relative_coefficients(extend_tree(&two_leaves()).unwrap());
        let w: Vec<_> = tree.nodes[0].children.iter().map(|&c| tree.nodes[c].weight.clone()).collect();
        assert_eq!(w, vec![q(1, 4), q(3, 4)]);

        let report = leakage_risks(&two_leaves()).unwrap();
        assert_eq!(report.risks["a"], q(1, 2));
        assert_eq!(report.risks["b"], q(1, 4));
        assert_eq!(report.risks["c"], q(1, 4));
        assert_eq!(report.ranking, ["a", "b", "c"]);
    }

    #[test]
    fn extended_tree_shape() {
        let t = extend_tree(&RbacModel::new().role("r", &["a", "b", "c"])).unwrap();
        assert_eq!(t.nodes.len(), 4);
        assert_eq!(t.nodes[0].children, vec![1, 2, 3]);
        assert_eq!(t.nodes[3].payload, Payload::Permission("c".into()));

        let t = extend_tree(&RbacModel::new().role("r", &["a"])).unwrap();
        assert_eq!(t.nodes[0].children.len(), 1);

        let diamond = RbacModel::new()
            .role("r1", &[])
            .role("r2", &[])
            .role("r3", &[])
            .role("r4", &["p"])
            .arc("r1", "r2")
            .arc("r1", "r3")
            .arc("r2", "r4")
            .arc("r3", "r4");
        assert!(matches!(extend_tree(&diamond), Err(Error::NotTreeLike(r)) if r == "r4"));
    }

    #[test]
    fn role_children_precede_permission_nodes() {
        let m = RbacModel::new().role("top", &["x"]).role("kid", &[]).arc("top", "kid");
        let t = extend_tree(&m).unwrap();
        let kinds: Vec<_> = t.nodes[0].children.iter().map(|&c| t.nodes[c].payload.clone()).collect();
        assert_eq!(kinds, vec![Payload::Role("kid".into()), Payload::Permission("x".into())]);
        let r = leakage_risks(&m).unwrap();
        assert_eq!(r.risks["x"], q(1, 1));
    }

    #[test]
    fn sibling_weights() {
        let t = relative_coefficients(extend_tree(&RbacModel::new().role("r", &["a", "b", "c"])).unwrap());
        assert!(t.nodes[1..].iter().all(|n| n.weight == q(1, 3)));
        let single = relative_coefficients(extend_tree(&RbacModel::new().role("r", &["a"])).unwrap());
        assert_eq!(single.nodes[1].weight, q(1, 1));
    }

    #[test]
    fn matrices_are_consistent() {
        let tree = relative_coefficients(extend_tree(&two_leaves()).unwrap());
        let m = tree.pairwise_matrix(0).unwrap();
        assert!(m.is_reciprocal() && m.is_consistent());
        assert_eq!(m.entries[0][1], q(1, 3));
        let prio = m.priorities();
        assert_eq!(prio, vec![q(1, 4), q(3, 4)]);
    }

    #[test]
    fn forests_get_a_virtual_root() {
        let m = RbacModel::new().role("x", &["a"]).role("y", &["b", "c", "d"]);
        let r = leakage_risks(&m).unwrap();
        assert_eq!(r.risks["a"], q(1, 4));
        assert_eq!(r.risks["b"], q(1, 4));
    }

    #[test]
    fn rankings() {
        let one = leakage_risks(&RbacModel::new().role("r", &["p"])).unwrap();
        assert_eq!(one.risks["p"], q(1, 1));
        assert_eq!(rank_permissions(&one), ["p"]);
        let eq = leakage_risks(&RbacModel::new().role("r", &["c", "a", "b"])).unwrap();
        assert_eq!(eq.ranking, ["a", "b", "c"]);
    }

    #[test]
    fn empty_models_are_rejected() {
        let m = RbacModel::new().role("r", &[]).permission("p");
        assert!(matches!(leakage_risks(&m), Err(Error::EmptyPermissionSet)));
    }

    #[test]
    fn decimals() {
        assert_eq!(decimal(&q(1, 2), 6), "0.500000");
        assert_eq!(decimal(&q(1, 3), 6), "0.333333");
        assert_eq!(decimal(&q(2, 3), 6), "0.666667");
        assert_eq!(decimal(&q(1, 1), 6), "1.000000");
        assert_eq!(decimal(&q(1, 2_000_000), 6), "0.000001");
    }
}
