use std::collections::{BTreeMap, BTreeSet};

use super::Rewrite;
use crate::error::{Error, Result};
use crate::graph::Unfolding;
use crate::model::{RbacModel, RoleIndex};

/// Names for the copies of an unfolding. A node with a single copy keeps its
/// name; the copies of a shared node become `name#1`, `name#2`, ... skipping
/// names already in use.
pub(crate) fn unfold_names(names: &[String], unfolding: &Unfolding) -> Vec<String> {
    let mut used: BTreeSet<String> = names.iter().cloned().collect();
    let mut next = vec![1usize; names.len()];
    unfolding
        .origin
        .iter()
        .map(|&v| {
            if unfolding.paths[v] == 1 {
                return names[v].clone();
            }
            loop {
                let candidate = format!("{}#{}", names[v], next[v]);
                next[v] += 1;
                if used.insert(candidate.clone()) {
                    return candidate;
                }
            }
        })
        .collect()
}

pub(crate) fn treeify(model: &RbacModel, budget: usize) -> Result<Rewrite> {
    let index = RoleIndex::new(model);
    let unfolding = index
        .dag
        .unfold(budget)
        .map_err(|needed| Error::NodeBudgetExceeded { budget, needed })?;
    let names = unfold_names(&index.roles, &unfolding);

    let mut out = RbacModel {
        users: model.users.clone(),
        permissions: model.permissions.clone(),
        ..RbacModel::default()
    };
    let mut canonical: BTreeMap<&str, &str> = BTreeMap::new();
    let mut provenance = BTreeMap::new();
    for (copy, &v) in unfolding.origin.iter().enumerate() {
        let name = &names[copy];
        let orig = index.roles[v].as_str();
        out.roles.insert(name.clone());
        if let Some(direct) = model.direct_rp.get(orig) {
            out.direct_rp.insert(name.clone(), direct.clone());
        }
        if let Some(p) = unfolding.parent[copy] {
            out.rr_arcs.insert((names[p].clone(), name.clone()));
        }
        canonical.entry(orig).or_insert(name);
        if name != orig {
            provenance.insert(name.clone(), orig.to_string());
        }
    }
    for (user, roles) in &model.ur {
        let mapped = roles
            .iter()
            .map(|r| canonical.get(r.as_str()).map_or_else(|| r.clone(), |c| c.to_string()))
            .collect();
        out.ur.insert(user.clone(), mapped);
    }
    out.canonicalize();
    Ok(Rewrite {
        model: out,
        provenance,
    })
}
