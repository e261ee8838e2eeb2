use std::collections::{BTreeMap, BTreeSet};

use super::Rewrite;
use crate::model::{PathRelation, RbacModel, RoleId, RoleIndex};

pub(crate) fn transitive_reduce(model: &RbacModel) -> Rewrite {
    let index = RoleIndex::new(model);
    let mut out = model.clone();
    out.rr_arcs = index
        .dag
        .transitive_reduction()
        .into_iter()
        .map(|(a, b)| (index.roles[a].clone(), index.roles[b].clone()))
        .collect();
    Rewrite {
        model: out,
        provenance: BTreeMap::new(),
    }
}

/// Drops every direct permission already inherited from a junior.
pub(crate) fn strip_redundant(model: &mut RbacModel) {
    let index = RoleIndex::new(model);
    let eff = index.effective_all();
    for (v, role) in index.roles.iter().enumerate() {
        let inherited: BTreeSet<_> = index
            .dag
            .succ(v)
            .iter()
            .flat_map(|&w| eff[w].iter())
            .map(|p| index.perms[p].clone())
            .collect();
        if let Some(direct) = model.direct_rp.get_mut(role) {
            direct.retain(|p| !inherited.contains(p));
        }
    }
    model.canonicalize();
}

/// Folds `drop` into `keep`: arcs are redirected, direct sets unioned,
/// self-loops dropped and users moved over.
pub(crate) fn merge_roles(model: &mut RbacModel, keep: &str, drop: &str) {
    let rename = |r: &RoleId| if r == drop { keep.to_string() } else { r.clone() };
    model.rr_arcs = model
        .rr_arcs
        .iter()
        .map(|(a, b)| (rename(a), rename(b)))
        .filter(|(a, b)| a != b)
        .collect();
    if let Some(perms) = model.direct_rp.remove(drop) {
        model.direct_rp.entry(keep.to_string()).or_default().extend(perms);
    }
    for roles in model.ur.values_mut() {
        if roles.remove(drop) {
            roles.insert(keep.to_string());
        }
    }
    model.roles.remove(drop);
}

fn first_interchangeable(model: &RbacModel) -> Option<(RoleId, RoleId)> {
    let index = RoleIndex::new(model);
    let eff = index.effective_all();
    let class = index.eff_classes(&eff);
    let relation = PathRelation::new(&index.dag, class.clone());
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (v, &c) in class.iter().enumerate() {
        members.entry(c).or_default().push(v);
    }
    let mut best: Option<(usize, usize)> = None;
    for group in members.values().filter(|g| g.len() > 1) {
        for (i, &x) in group.iter().enumerate() {
            if let Some(&y) = group[i + 1..].iter().find(|&&y| relation.interchangeable(x, y)) {
                if best.is_none_or(|b| (x, y) < b) {
                    best = Some((x, y));
                }
                break;
            }
        }
    }
    best.map(|(x, y)| (index.roles[x].clone(), index.roles[y].clone()))
}

pub(crate) fn rp_reduce(model: &RbacModel) -> Rewrite {
    let mut out = model.clone();
    strip_redundant(&mut out);
    while let Some((keep, drop)) = first_interchangeable(&out) {
        merge_roles(&mut out, &keep, &drop);
    }
    strip_redundant(&mut out);
    Rewrite {
        model: out,
        provenance: BTreeMap::new(),
    }
}
