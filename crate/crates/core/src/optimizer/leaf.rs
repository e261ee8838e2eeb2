use std::collections::{BTreeMap, BTreeSet};

use super::Rewrite;
use crate::graph::fresh_name;
use crate::model::{PermId, RbacModel, RoleId, RoleIndex};

fn fresh_role(model: &RbacModel, stem: &str) -> RoleId {
    fresh_name(stem, |c| model.roles.contains(c))
}

fn juniors<'a>(model: &'a RbacModel, role: &'a str) -> impl Iterator<Item = &'a RoleId> + 'a {
    model
        .rr_arcs
        .iter()
        .filter(move |(a, _)| a == role)
        .map(|(_, b)| b)
}

/// Roles whose effective set is empty, computed once up front. Passes below
/// never change the effective set of an existing role and only add roles
/// holding permissions, so the answer stays valid while rewriting.
fn empty_roles(model: &RbacModel) -> BTreeSet<RoleId> {
    let index = RoleIndex::new(model);
    index
        .effective_all()
        .iter()
        .zip(&index.roles)
        .filter(|(eff, _)| eff.is_empty())
        .map(|(_, r)| r.clone())
        .collect()
}

/// Moves the direct permissions of every role that also inherits something
/// into a fresh junior `role#leaf`.
pub(crate) fn leafify(model: &RbacModel) -> Rewrite {
    let empty = empty_roles(model);
    let offenders: Vec<RoleId> = model
        .direct_rp
        .iter()
        .filter(|(r, perms)| !perms.is_empty() && juniors(model, r).any(|j| !empty.contains(j)))
        .map(|(r, _)| r.clone())
        .collect();
    let mut out = model.clone();
    let mut provenance = BTreeMap::new();
    for role in offenders {
        let leaf = fresh_role(&out, &format!("{role}#leaf"));
        let perms = out.direct_rp.remove(&role).unwrap_or_default();
        out.roles.insert(leaf.clone());
        out.direct_rp.insert(leaf.clone(), perms);
        out.rr_arcs.insert((role.clone(), leaf.clone()));
        provenance.insert(leaf, role);
    }
    Rewrite {
        model: out,
        provenance,
    }
}

/// Gives every permission exactly one holder, a role whose effective set is
/// that permission alone. Other holders inherit it through an arc; holders
/// that were nothing but a copy of it are removed.
pub(crate) fn leaf_single(model: &RbacModel) -> Rewrite {
    let empty = empty_roles(model);
    let mut out = model.clone();
    let mut provenance = BTreeMap::new();
    let perms: Vec<PermId> = model.permissions.iter().cloned().collect();
    for p in perms {
        let holders: Vec<RoleId> = out
            .direct_rp
            .iter()
            .filter(|(_, set)| set.contains(&p))
            .map(|(r, _)| r.clone())
            .collect();
        let Some(first) = holders.first() else { continue };
        let is_unit = |m: &RbacModel, r: &str| {
            m.direct_rp.get(r).is_some_and(|s| s.len() == 1)
                && juniors(m, r).all(|j| empty.contains(j))
        };
        let holder = match holders.iter().find(|r| is_unit(&out, r)) {
            Some(r) => r.clone(),
            None => {
                let fresh = fresh_role(&out, &format!("{first}#{p}"));
                out.roles.insert(fresh.clone());
                out.direct_rp.insert(fresh.clone(), BTreeSet::from([p.clone()]));
                provenance.insert(fresh.clone(), first.clone());
                fresh
            }
        };
        for r in holders.iter().filter(|r| **r != holder) {
            let bare = is_unit(&out, r) && juniors(&out, r).next().is_none();
            if bare {
                redirect(&mut out, r, &holder);
            } else {
                out.direct_rp.get_mut(r).expect("holder").remove(&p);
                out.rr_arcs.insert((r.clone(), holder.clone()));
            }
        }
    }
    out.canonicalize();
    Rewrite {
        model: out,
        provenance,
    }
}

/// Removes `from`, pointing its seniors and users at `to` instead.
fn redirect(model: &mut RbacModel, from: &str, to: &str) {
    model.rr_arcs = model
        .rr_arcs
        .iter()
        .map(|(a, b)| {
            let b = if b == from { to.to_string() } else { b.clone() };
            (a.clone(), b)
        })
        .collect();
    model.direct_rp.remove(from);
    for roles in model.ur.values_mut() {
        if roles.remove(from) {
            roles.insert(to.to_string());
        }
    }
    model.roles.remove(from);
}

/// Replaces each multi-permission assignment with one junior per permission.
pub(crate) fn split_permissions(model: &RbacModel) -> Rewrite {
    let mut out = model.clone();
    let mut provenance = BTreeMap::new();
    let wide: Vec<(RoleId, BTreeSet<PermId>)> = model
        .direct_rp
        .iter()
        .filter(|(_, s)| s.len() > 1)
        .map(|(r, s)| (r.clone(), s.clone()))
        .collect();
    for (role, perms) in wide {
        out.direct_rp.remove(&role);
        for p in perms {
            let child = fresh_role(&out, &format!("{role}#{p}"));
            out.roles.insert(child.clone());
            out.direct_rp.insert(child.clone(), BTreeSet::from([p]));
            out.rr_arcs.insert((role.clone(), child.clone()));
            provenance.insert(child, role.clone());
        }
    }
    Rewrite {
        model: out,
        provenance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::hierarchy_flags;

    fn names<'a>(it: impl Iterator<Item = &'a String>) -> Vec<&'a str> {
        it.map(String::as_str).collect()
    }

    #[test]
    fn leafify_moves_inner_permissions() {
        let m = RbacModel::new().role("r1", &["a"]).role("r2", &["b"]).arc("r1", "r2");
        let out = leafify(&m).model;
        assert_eq!(names(out.roles.iter()), ["r1", "r1#leaf", "r2"]);
        assert_eq!(out.direct("r1").count(), 0);
        assert_eq!(names(out.direct("r1#leaf")), ["a"]);
        assert!(out.rr_arcs.contains(&("r1".into(), "r1#leaf".into())));
        assert_eq!(leafify(&out).model, out);
    }

    #[test]
    fn duplicate_leaves_are_shared() {
        let m = RbacModel::new()
            .role("r1", &[])
            .role("r2", &[])
            .role("x", &["p"])
            .role("y", &["p"])
            .arc("r1", "x")
            .arc("r2", "y")
            .user("u", &["y"]);
        let out = leaf_single(&m).model;
        assert_eq!(names(out.roles.iter()), ["r1", "r2", "x"]);
        assert!(out.rr_arcs.contains(&("r2".into(), "x".into())));
        assert_eq!(names(out.ur["u"].iter()), ["x"]);
    }

    #[test]
    fn leaf_single_reaches_single_and_leaf() {
        let m = RbacModel::new()
            .role("top", &["a", "b"])
            .role("mid", &["b", "c"])
            .role("low", &["c"])
            .arc("top", "mid")
            .arc("mid", "low");
        let out = leaf_single(&m).model;
        let f = hierarchy_flags(&out);
        assert!(f.single && f.leaf && f.taxonomic, "{f:?}");
        assert_eq!(out.effective_map()["top"].len(), 3);
        assert_eq!(leaf_single(&out).model, out);
    }

    #[test]
    fn split_gives_one_child_per_permission() {
        let m = RbacModel::new().role("r", &["a", "b"]);
        let out = split_permissions(&m).model;
        assert_eq!(names(out.roles.iter()), ["r", "r#a", "r#b"]);
        assert_eq!(out.rr_arcs.len(), 2);
    }
}
