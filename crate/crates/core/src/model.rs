//! RBAC sets and mappings, permission closure, and the checkers that decide
//! whether two models are equivalent and how a role-graph conversion relates
//! the two graphs.
//!
//! Arcs point from senior to junior: `(a, b)` means `b ∈ RR(a)`, so `a`
//! inherits every permission of `b`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BitSet, Dag};

pub type UserId = String;
pub type PermId = String;
pub type RoleId = String;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RbacModel {
    pub users: BTreeSet<UserId>,
    pub permissions: BTreeSet<PermId>,
    pub roles: BTreeSet<RoleId>,
    /// Direct permission assignment. Roles without an entry hold nothing directly.
    pub direct_rp: BTreeMap<RoleId, BTreeSet<PermId>>,
    pub ur: BTreeMap<UserId, BTreeSet<RoleId>>,
    pub rr_arcs: BTreeSet<(RoleId, RoleId)>,
}

impl RbacModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a role holding `perms` directly; the permissions join `P`.
    pub fn role(mut self, role: &str, perms: &[&str]) -> Self {
        self.roles.insert(role.to_string());
        for p in perms {
            self.permissions.insert(p.to_string());
            self.direct_rp
                .entry(role.to_string())
                .or_default()
                .insert(p.to_string());
        }
        self
    }

    pub fn permission(mut self, perm: &str) -> Self {
        self.permissions.insert(perm.to_string());
        self
    }

    pub fn arc(mut self, senior: &str, junior: &str) -> Self {
        self.rr_arcs.insert((senior.to_string(), junior.to_string()));
        self
    }

    pub fn user(mut self, user: &str, roles: &[&str]) -> Self {
        self.users.insert(user.to_string());
        let entry = self.ur.entry(user.to_string()).or_default();
        entry.extend(roles.iter().map(|r| r.to_string()));
        self
    }

    /// Direct permissions of `role` (empty when it has none).
    pub fn direct(&self, role: &str) -> impl Iterator<Item = &PermId> {
        self.direct_rp.get(role).into_iter().flatten()
    }

    /// Drops empty entries from `direct_rp` and `ur` so that structurally equal
    /// models compare equal.
    pub fn canonicalize(&mut self) {
        self.direct_rp.retain(|_, v| !v.is_empty());
        self.ur.retain(|_, v| !v.is_empty());
    }

    pub fn canonical(mut self) -> Self {
        self.canonicalize();
        self
    }

    /// Union of direct permissions over every role reachable from `role`,
    /// `role` included.
    pub fn effective_permissions(&self, role: &str) -> Result<BTreeSet<PermId>> {
        let index = RoleIndex::new(self);
        let v = index
            .position(role)
            .ok_or_else(|| Error::UnknownRole(role.to_string()))?;
        Ok(index.perm_names(&index.effective(v)))
    }

    /// Effective permission set of every role.
    pub fn effective_map(&self) -> BTreeMap<RoleId, BTreeSet<PermId>> {
        let index = RoleIndex::new(self);
        index
            .effective_all()
            .iter()
            .enumerate()
            .map(|(v, set)| (index.roles[v].clone(), index.perm_names(set)))
            .collect()
    }

    pub fn user_permissions(&self, user: &str) -> Result<BTreeSet<PermId>> {
        if !self.users.contains(user) {
            return Err(Error::UnknownUser(user.to_string()));
        }
        let index = RoleIndex::new(self);
        let mut acc = BitSet::new(index.perms.len());
        for role in self.ur.get(user).into_iter().flatten() {
            let v = index
                .position(role)
                .ok_or_else(|| Error::UnknownRole(role.clone()))?;
            acc.union_with(&index.effective(v));
        }
        Ok(index.perm_names(&acc))
    }

    /// The `UP` mapping for every user.
    pub fn user_permission_map(&self) -> BTreeMap<UserId, BTreeSet<PermId>> {
        let index = RoleIndex::new(self);
        let eff = index.effective_all();
        self.users
            .iter()
            .map(|u| {
                let mut acc = BitSet::new(index.perms.len());
                for r in self.ur.get(u).into_iter().flatten() {
                    if let Some(v) = index.position(r) {
                        acc.union_with(&eff[v]);
                    }
                }
                (u.clone(), index.perm_names(&acc))
            })
            .collect()
    }

    pub fn validate(&self) -> Diagnostics {
        let mut diags = Diagnostics::default();
        let dangling_roles: BTreeSet<&String> = self
            .rr_arcs
            .iter()
            .flat_map(|(a, b)| [a, b])
            .chain(self.direct_rp.keys())
            .chain(self.ur.values().flatten())
            .filter(|r| !self.roles.contains(*r))
            .collect();
        if !dangling_roles.is_empty() {
            diags.push(
                DiagCode::DanglingRole,
                "referenced role is not declared",
                dangling_roles,
            );
        }
        let dangling_perms: BTreeSet<&String> = self
            .direct_rp
            .values()
            .flatten()
            .filter(|p| !self.permissions.contains(*p))
            .collect();
        if !dangling_perms.is_empty() {
            diags.push(
                DiagCode::DanglingPermission,
                "assigned permission is not declared",
                dangling_perms,
            );
        }
        let dangling_users: BTreeSet<&String> =
            self.ur.keys().filter(|u| !self.users.contains(*u)).collect();
        if !dangling_users.is_empty() {
            diags.push(
                DiagCode::DanglingUser,
                "user with role assignments is not declared",
                dangling_users,
            );
        }
        let index = RoleIndex::new(self);
        let cyclic = index.dag.cyclic_nodes();
        if !cyclic.is_empty() {
            diags.push(
                DiagCode::Cycle,
                "role graph has a directed cycle",
                cyclic.iter().map(|&v| &index.roles[v]),
            );
        }
        diags
    }

    /// `Ok(())` when valid, otherwise the diagnostics as an error.
    pub fn check(&self) -> Result<()> {
        let diags = self.validate();
        if diags.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(diags))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DiagCode {
    Cycle,
    DanglingRole,
    DanglingPermission,
    DanglingUser,
}

impl DiagCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagCode::Cycle => "cycle",
            DiagCode::DanglingRole => "dangling-role",
            DiagCode::DanglingPermission => "dangling-permission",
            DiagCode::DanglingUser => "dangling-user",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub code: DiagCode,
    pub message: String,
    pub ids: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub errors: Vec<Diagnostic>,
}

impl Diagnostics {
    fn push<'a>(&mut self, code: DiagCode, message: &str, ids: impl IntoIterator<Item = &'a String>) {
        self.errors.push(Diagnostic {
            code,
            message: message.to_string(),
            ids: ids.into_iter().cloned().collect(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn has(&self, code: DiagCode) -> bool {
        self.errors.iter().any(|d| d.code == code)
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.errors.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{}: {} [{}]", d.code.as_str(), d.message, d.ids.join(", "))?;
        }
        Ok(())
    }
}

/// Index view of a model: roles and permissions numbered in sorted order.
/// Arcs touching undeclared roles are ignored.
#[derive(Debug, Clone)]
pub(crate) struct RoleIndex {
    pub roles: Vec<RoleId>,
    pub perms: Vec<PermId>,
    pub dag: Dag,
    pub direct: Vec<BitSet>,
}

impl RoleIndex {
    pub fn new(model: &RbacModel) -> Self {
        let roles: Vec<RoleId> = model.roles.iter().cloned().collect();
        let perms: Vec<PermId> = model
            .permissions
            .iter()
            .chain(model.direct_rp.values().flatten())
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let rpos = |r: &str| roles.binary_search_by(|x| x.as_str().cmp(r)).ok();
        let arcs: Vec<(usize, usize)> = model
            .rr_arcs
            .iter()
            .filter_map(|(a, b)| Some((rpos(a)?, rpos(b)?)))
            .collect();
        let direct = roles
            .iter()
            .map(|r| {
                let mut set = BitSet::new(perms.len());
                for p in model.direct(r) {
                    set.insert(perms.binary_search(p).expect("interned"));
                }
                set
            })
            .collect();
        let dag = Dag::new(roles.len(), arcs);
        RoleIndex {
            roles,
            perms,
            dag,
            direct,
        }
    }

    pub fn position(&self, role: &str) -> Option<usize> {
        self.roles.binary_search_by(|x| x.as_str().cmp(role)).ok()
    }

    pub fn effective(&self, v: usize) -> BitSet {
        let mut acc = BitSet::new(self.perms.len());
        for w in self.dag.reach_from(v).iter() {
            acc.union_with(&self.direct[w]);
        }
        acc
    }

    pub fn effective_all(&self) -> Vec<BitSet> {
        match self.dag.topo_order() {
            Some(order) => {
                let mut eff = self.direct.clone();
                for &v in order.iter().rev() {
                    for &w in self.dag.succ(v) {
                        let child = eff[w].clone();
                        eff[v].union_with(&child);
                    }
                }
                eff
            }
            None => (0..self.roles.len()).map(|v| self.effective(v)).collect(),
        }
    }

    pub fn perm_names(&self, set: &BitSet) -> BTreeSet<PermId> {
        set.iter().map(|i| self.perms[i].clone()).collect()
    }

    /// Groups roles by effective set; returns the class id of each role.
    pub fn eff_classes(&self, eff: &[BitSet]) -> Vec<usize> {
        let mut ids: BTreeMap<&BitSet, usize> = BTreeMap::new();
        eff.iter()
            .map(|set| {
                let next = ids.len();
                *ids.entry(set).or_insert(next)
            })
            .collect()
    }
}

/// Reachability of an acyclic role graph lifted to effective-set classes.
///
/// Identifying two roles `x`, `y` of the same class adds exactly the endpoint
/// pairs `anc*(x ∪ y) × desc*(x ∪ y)`, and creates a cycle iff some third role
/// lies on a path between them.
#[derive(Debug, Clone)]
pub(crate) struct PathRelation {
    reach: Vec<BitSet>,
    anc: Vec<BitSet>,
    class: Vec<usize>,
    /// Classes reachable from `v`.
    desc_classes: Vec<BitSet>,
    /// Classes every ancestor of `v` already reaches.
    allowed: Vec<BitSet>,
}

impl PathRelation {
    pub fn new(dag: &Dag, class: Vec<usize>) -> Self {
        let n = dag.len();
        let classes = class.iter().max().map_or(0, |m| m + 1);
        let reach = dag.closure();
        let mut anc = vec![BitSet::new(n); n];
        for (u, set) in reach.iter().enumerate() {
            for v in set.iter() {
                anc[v].insert(u);
            }
        }
        let desc_classes: Vec<BitSet> = reach
            .iter()
            .map(|set| {
                let mut c = BitSet::new(classes);
                for v in set.iter() {
                    c.insert(class[v]);
                }
                c
            })
            .collect();
        let mut rel = vec![BitSet::new(classes); classes];
        for (u, dc) in desc_classes.iter().enumerate() {
            rel[class[u]].union_with(dc);
        }
        let allowed = anc
            .iter()
            .map(|ancestors| {
                let mut ok = BitSet::new(classes);
                for c in 0..classes {
                    ok.insert(c);
                }
                for a in ancestors.iter() {
                    ok.intersect_with(&rel[class[a]]);
                }
                ok
            })
            .collect();
        PathRelation {
            reach,
            anc,
            class,
            desc_classes,
            allowed,
        }
    }

    fn has_intermediate(&self, from: usize, to: usize) -> bool {
        if !self.reach[from].contains(to) {
            return false;
        }
        let mut mid = self.reach[from].clone();
        mid.intersect_with(&self.anc[to]);
        mid.remove(from);
        mid.remove(to);
        !mid.is_empty()
    }

    /// Whether `x` and `y` can be merged without changing which effective
    /// sets are joined by directed paths.
    pub fn interchangeable(&self, x: usize, y: usize) -> bool {
        x != y
            && self.class[x] == self.class[y]
            && self.desc_classes[y].is_subset(&self.allowed[x])
            && self.desc_classes[x].is_subset(&self.allowed[y])
            && !self.has_intermediate(x, y)
            && !self.has_intermediate(y, x)
    }
}

/// Same users, same permissions, and identical per-user permission sets.
pub fn models_equivalent(a: &RbacModel, b: &RbacModel) -> bool {
    a.permissions == b.permissions
        && a.users == b.users
        && a.user_permission_map() == b.user_permission_map()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConversionClass {
    Neither,
    RpAdmissible,
    RpEquivalent,
}

impl ConversionClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ConversionClass::Neither => "neither",
            ConversionClass::RpAdmissible => "rp_admissible",
            ConversionClass::RpEquivalent => "rp_equivalent",
        }
    }
}

impl fmt::Display for ConversionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

type EffSet = BTreeSet<PermId>;

/// Effective-set pairs `(eff(u), eff(v))` for every directed path `u ⇝ v`,
/// including the zero-length path from each role to itself.
fn endpoint_pairs(model: &RbacModel) -> BTreeSet<(EffSet, EffSet)> {
    let index = RoleIndex::new(model);
    let eff: Vec<EffSet> = index
        .effective_all()
        .iter()
        .map(|s| index.perm_names(s))
        .collect();
    let cls = index.eff_classes(&index.effective_all());
    let mut class_pairs = BTreeSet::new();
    for u in 0..index.roles.len() {
        for v in index.dag.reach_from(u).iter() {
            class_pairs.insert((cls[u], cls[v]));
        }
    }
    let mut repr: BTreeMap<usize, &EffSet> = BTreeMap::new();
    for (v, &c) in cls.iter().enumerate() {
        repr.entry(c).or_insert(&eff[v]);
    }
    class_pairs
        .into_iter()
        .map(|(a, b)| (repr[&a].clone(), repr[&b].clone()))
        .collect()
}

/// Classifies the conversion `g -> g_star`.
///
/// A conjugate of a path `u ⇝ v` is any path whose endpoints carry the same
/// effective sets, so only reachable endpoint pairs matter. The zero-length
/// path of every role takes part; its conjugate condition is exactly the
/// `RP(G) ⊆ RP(G*)` inclusion.
pub fn conversion_class(g: &RbacModel, g_star: &RbacModel) -> ConversionClass {
    let before = endpoint_pairs(g);
    let after = endpoint_pairs(g_star);
    if before == after {
        ConversionClass::RpEquivalent
    } else if before.is_subset(&after) {
        ConversionClass::RpAdmissible
    } else {
        ConversionClass::Neither
    }
}

/// Structural properties of a role graph used as optimisation targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HierarchyFlags {
    /// Every role has at most one senior.
    pub tree_like: bool,
    /// A role holding permissions directly has no junior that holds permissions.
    pub leaf: bool,
    /// No redundant direct assignment, and no two roles with equal effective
    /// sets could be merged without changing path endpoints.
    pub rp_reduced: bool,
    /// No arc is implied by a longer path.
    pub transitive_reduced: bool,
    /// Every role holds at most one permission directly.
    pub single: bool,
    /// `leaf ∧ single` and every permission is held directly by at most one role.
    pub taxonomic: bool,
}

impl HierarchyFlags {
    /// Names of the flags that are set, in declaration order.
    pub fn names(&self) -> Vec<&'static str> {
        [
            ("tree_like", self.tree_like),
            ("leaf", self.leaf),
            ("rp_reduced", self.rp_reduced),
            ("transitive_reduced", self.transitive_reduced),
            ("single", self.single),
            ("taxonomic", self.taxonomic),
        ]
        .into_iter()
        .filter_map(|(n, on)| on.then_some(n))
        .collect()
    }

    /// Whether every flag set in `required` is also set here.
    pub fn includes(&self, required: &HierarchyFlags) -> bool {
        let have = self.names();
        required.names().iter().all(|n| have.contains(n))
    }
}

pub(crate) fn is_tree_like(index: &RoleIndex) -> bool {
    (0..index.roles.len()).all(|v| index.dag.pred(v).len() <= 1)
}

/// First role violating the leaf property, if any.
pub(crate) fn leaf_violation(index: &RoleIndex, eff: &[BitSet]) -> Option<usize> {
    (0..index.roles.len()).find(|&v| {
        !index.direct[v].is_empty() && index.dag.succ(v).iter().any(|&w| !eff[w].is_empty())
    })
}

pub(crate) fn has_redundant_direct(index: &RoleIndex, eff: &[BitSet]) -> bool {
    (0..index.roles.len())
        .any(|v| index.dag.succ(v).iter().any(|&w| index.direct[v].intersects(&eff[w])))
}

pub fn hierarchy_flags(model: &RbacModel) -> HierarchyFlags {
    let index = RoleIndex::new(model);
    let eff = index.effective_all();

    let tree_like = is_tree_like(&index);
    let leaf = leaf_violation(&index, &eff).is_none();
    let single = index.direct.iter().all(|d| d.len() <= 1);
    let mut holders = vec![0usize; index.perms.len()];
    for d in &index.direct {
        for p in d.iter() {
            holders[p] += 1;
        }
    }
    let taxonomic = leaf && single && holders.iter().all(|&h| h <= 1);

    let acyclic = index.dag.topo_order().is_some();
    let transitive_reduced = acyclic && index.dag.transitive_reduction().len() == index.dag.arcs().count();

    let rp_reduced = acyclic && !has_redundant_direct(&index, &eff) && {
        let class = index.eff_classes(&eff);
        let relation = PathRelation::new(&index.dag, class.clone());
        let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (v, &c) in class.iter().enumerate() {
            members.entry(c).or_default().push(v);
        }
        members.values().all(|group| {
            group.iter().enumerate().all(|(i, &x)| {
                group[i + 1..].iter().all(|&y| !relation.interchangeable(x, y))
            })
        })
    };

    HierarchyFlags {
        tree_like,
        leaf,
        rp_reduced,
        transitive_reduced,
        single,
        taxonomic,
    }
}
