//! Security lattices: MAC labels, the lattice generated by a role tree, and
//! their product.
//!
//! Role order puts seniors on top: a role dominates every role below it in
//! the tree. A synthetic bottom is always present; a synthetic top is added
//! when the tree is a forest with several roots.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{hierarchy_flags, RbacModel, RoleId, RoleIndex};
use crate::optimizer::{optimize, Algorithm, OptimizeOptions};

/// A finite lattice with an explicit carrier.
pub trait FiniteLattice {
    type Elem: Clone + PartialEq + fmt::Debug;

    fn elements(&self) -> Vec<Self::Elem>;
    fn leq(&self, a: &Self::Elem, b: &Self::Elem) -> bool;
    fn join(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn meet(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacLattice {
    /// Classification levels, lowest first.
    pub levels: Vec<String>,
    pub categories: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MacLabel {
    pub level: usize,
    /// Bit `i` set means category `i` is present.
    pub categories: u64,
}

impl MacLattice {
    pub fn new(levels: &[&str], categories: &[&str]) -> Result<Self> {
        let lattice = MacLattice {
            levels: levels.iter().map(|s| s.to_string()).collect(),
            categories: categories.iter().map(|s| s.to_string()).collect(),
        };
        lattice.check()?;
        Ok(lattice)
    }

    pub fn check(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::InvalidHierarchy("a MAC lattice needs at least one level".into()));
        }
        if self.categories.len() > 63 {
            return Err(Error::InvalidHierarchy("at most 63 categories are supported".into()));
        }
        Ok(())
    }

    fn all_categories(&self) -> u64 {
        (1u64 << self.categories.len()) - 1
    }

    /// Label from names.
    pub fn label(&self, level: &str, categories: &[&str]) -> Result<MacLabel> {
        let level = self
            .levels
            .iter()
            .position(|l| l == level)
            .ok_or_else(|| Error::ForeignLabel(format!("unknown level `{level}`")))?;
        let mut bits = 0;
        for c in categories {
            let i = self
                .categories
                .iter()
                .position(|x| x == c)
                .ok_or_else(|| Error::ForeignLabel(format!("unknown category `{c}`")))?;
            bits |= 1 << i;
        }
        Ok(MacLabel {
            level,
            categories: bits,
        })
    }

    pub fn contains(&self, l: &MacLabel) -> bool {
        l.level < self.levels.len() && l.categories & !self.all_categories() == 0
    }
}

impl FiniteLattice for MacLattice {
    type Elem = MacLabel;

    fn elements(&self) -> Vec<MacLabel> {
        (0..self.levels.len())
            .flat_map(|level| (0..=self.all_categories()).map(move |categories| MacLabel { level, categories }))
            .collect()
    }

    fn leq(&self, a: &MacLabel, b: &MacLabel) -> bool {
        a.level <= b.level && a.categories & !b.categories == 0
    }

    fn join(&self, a: &MacLabel, b: &MacLabel) -> MacLabel {
        MacLabel {
            level: a.level.max(b.level),
            categories: a.categories | b.categories,
        }
    }

    fn meet(&self, a: &MacLabel, b: &MacLabel) -> MacLabel {
        MacLabel {
            level: a.level.min(b.level),
            categories: a.categories & b.categories,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RoleElem {
    Bottom,
    Node(usize),
    Top,
}

/// Lattice of a role forest plus bottom (and top for several roots).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleLattice {
    pub names: Vec<RoleId>,
    pub parent: Vec<Option<usize>>,
    depth: Vec<usize>,
    pub has_top: bool,
}

/// Builds the role lattice, unfolding the role graph first when it is not a
/// forest.
pub fn role_lattice(model: &RbacModel) -> Result<RoleLattice> {
    role_lattice_with(model, &OptimizeOptions::default())
}

pub fn role_lattice_with(model: &RbacModel, opts: &OptimizeOptions) -> Result<RoleLattice> {
    model.check()?;
    let tree = if hierarchy_flags(model).tree_like {
        model.clone()
    } else {
        optimize(model, Algorithm::III, opts)?.0
    };
    let index = RoleIndex::new(&tree);
    let order = index.dag.topo_order().expect("validated");
    let n = index.roles.len();
    let mut parent = vec![None; n];
    let mut depth = vec![0; n];
    for &v in &order {
        if let Some(&p) = index.dag.pred(v).first() {
            parent[v] = Some(p);
            depth[v] = depth[p] + 1;
        }
    }
    let roots = parent.iter().filter(|p| p.is_none()).count();
    Ok(RoleLattice {
        names: index.roles,
        parent,
        depth,
        has_top: roots > 1,
    })
}

impl RoleLattice {
    pub fn element(&self, role: &str) -> Result<RoleElem> {
        match role {
            "bottom" => Ok(RoleElem::Bottom),
            "top" if self.has_top => Ok(RoleElem::Top),
            _ => self
                .names
                .binary_search_by(|x| x.as_str().cmp(role))
                .map(RoleElem::Node)
                .map_err(|_| Error::ForeignLabel(format!("unknown role `{role}`"))),
        }
    }

    pub fn name(&self, e: &RoleElem) -> String {
        match e {
            RoleElem::Bottom => "bottom".into(),
            RoleElem::Top => "top".into(),
            RoleElem::Node(i) => self.names[*i].clone(),
        }
    }

    pub fn contains(&self, e: &RoleElem) -> bool {
        match e {
            RoleElem::Bottom => true,
            RoleElem::Top => self.has_top,
            RoleElem::Node(i) => *i < self.names.len(),
        }
    }

    /// Whether `hi` is `lo` or one of its ancestors.
    fn is_ancestor(&self, hi: usize, mut lo: usize) -> bool {
        loop {
            if hi == lo {
                return true;
            }
            match self.parent[lo] {
                Some(p) => lo = p,
                None => return false,
            }
        }
    }

    fn lca(&self, mut a: usize, mut b: usize) -> Option<usize> {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a]?;
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b]?;
        }
        while a != b {
            a = self.parent[a]?;
            b = self.parent[b]?;
        }
        Some(a)
    }
}

impl FiniteLattice for RoleLattice {
    type Elem = RoleElem;

    fn elements(&self) -> Vec<RoleElem> {
        let mut out = vec![RoleElem::Bottom];
        out.extend((0..self.names.len()).map(RoleElem::Node));
        if self.has_top {
            out.push(RoleElem::Top);
        }
        out
    }

    fn leq(&self, a: &RoleElem, b: &RoleElem) -> bool {
        match (a, b) {
            (RoleElem::Bottom, _) | (_, RoleElem::Top) => true,
            (_, RoleElem::Bottom) | (RoleElem::Top, _) => false,
            (RoleElem::Node(x), RoleElem::Node(y)) => self.is_ancestor(*y, *x),
        }
    }

    fn join(&self, a: &RoleElem, b: &RoleElem) -> RoleElem {
        match (a, b) {
            (RoleElem::Bottom, x) | (x, RoleElem::Bottom) => *x,
            (RoleElem::Top, _) | (_, RoleElem::Top) => RoleElem::Top,
            (RoleElem::Node(x), RoleElem::Node(y)) => {
                self.lca(*x, *y).map_or(RoleElem::Top, RoleElem::Node)
            }
        }
    }

    fn meet(&self, a: &RoleElem, b: &RoleElem) -> RoleElem {
        if self.leq(a, b) {
            *a
        } else if self.leq(b, a) {
            *b
        } else {
            RoleElem::Bottom
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProductLabel {
    pub mac: MacLabel,
    pub role: RoleElem,
}

/// Cartesian product of a MAC lattice and a role lattice, ordered componentwise.
#[derive(Debug, Clone)]
pub struct ProductLattice<'a> {
    pub mac: &'a MacLattice,
    pub roles: &'a RoleLattice,
}

impl<'a> ProductLattice<'a> {
    pub fn new(mac: &'a MacLattice, roles: &'a RoleLattice) -> Self {
        ProductLattice { mac, roles }
    }

    fn check(&self, l: &ProductLabel) -> Result<()> {
        if !self.mac.contains(&l.mac) {
            return Err(Error::ForeignLabel(format!("MAC component {:?}", l.mac)));
        }
        if !self.roles.contains(&l.role) {
            return Err(Error::ForeignLabel(format!("role component {:?}", l.role)));
        }
        Ok(())
    }

    /// `a` dominates `b` in both components.
    pub fn dominates(&self, a: &ProductLabel, b: &ProductLabel) -> Result<bool> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.leq(b, a))
    }
}

impl FiniteLattice for ProductLattice<'_> {
    type Elem = ProductLabel;

    fn elements(&self) -> Vec<ProductLabel> {
        let roles = self.roles.elements();
        self.mac
            .elements()
            .into_iter()
            .flat_map(|mac| roles.iter().map(move |&role| ProductLabel { mac, role }))
            .collect()
    }

    fn leq(&self, a: &ProductLabel, b: &ProductLabel) -> bool {
        self.mac.leq(&a.mac, &b.mac) && self.roles.leq(&a.role, &b.role)
    }

    fn join(&self, a: &ProductLabel, b: &ProductLabel) -> ProductLabel {
        ProductLabel {
            mac: self.mac.join(&a.mac, &b.mac),
            role: self.roles.join(&a.role, &b.role),
        }
    }

    fn meet(&self, a: &ProductLabel, b: &ProductLabel) -> ProductLabel {
        ProductLabel {
            mac: self.mac.meet(&a.mac, &b.mac),
            role: self.roles.meet(&a.role, &b.role),
        }
    }
}

/// `a ≥ b` in the product of `mac` and `roles`.
pub fn product_dominates(
    mac: &MacLattice,
    roles: &RoleLattice,
    a: &ProductLabel,
    b: &ProductLabel,
) -> Result<bool> {
    ProductLattice::new(mac, roles).dominates(a, b)
}

/// First violated lattice law, checked over every pair and triple of elements.
pub fn check_lattice_axioms<L: FiniteLattice>(l: &L) -> std::result::Result<(), String> {
    let elems = l.elements();
    for a in &elems {
        if !l.leq(a, a) {
            return Err(format!("leq not reflexive at {a:?}"));
        }
        if l.join(a, a) != *a || l.meet(a, a) != *a {
            return Err(format!("not idempotent at {a:?}"));
        }
        for b in &elems {
            let j = l.join(a, b);
            let m = l.meet(a, b);
            if j != l.join(b, a) || m != l.meet(b, a) {
                return Err(format!("not commutative at {a:?}, {b:?}"));
            }
            if l.join(a, &l.meet(a, b)) != *a || l.meet(a, &l.join(a, b)) != *a {
                return Err(format!("absorption fails at {a:?}, {b:?}"));
            }
            if l.leq(a, b) && l.leq(b, a) && a != b {
                return Err(format!("leq not antisymmetric at {a:?}, {b:?}"));
            }
            if l.leq(a, b) != (j == *b) {
                return Err(format!("join does not match leq at {a:?}, {b:?}"));
            }
            // Least upper bound and greatest lower bound.
            for c in &elems {
                if l.leq(a, c) && l.leq(b, c) && !l.leq(&j, c) {
                    return Err(format!("join not least at {a:?}, {b:?}"));
                }
                if l.leq(c, a) && l.leq(c, b) && !l.leq(c, &m) {
                    return Err(format!("meet not greatest at {a:?}, {b:?}"));
                }
                if l.join(&j, c) != l.join(a, &l.join(b, c)) || l.meet(&m, c) != l.meet(a, &l.meet(b, c)) {
                    return Err(format!("not associative at {a:?}, {b:?}, {c:?}"));
                }
                if l.leq(a, b) && l.leq(b, c) && !l.leq(a, c) {
                    return Err(format!("leq not transitive at {a:?}, {b:?}, {c:?}"));
                }
            }
        }
    }
    Ok(())
}
