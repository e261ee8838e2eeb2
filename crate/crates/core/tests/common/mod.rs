//! Seeded generators and brute-force oracles shared by the integration tests.
//! The oracles work on names and explicit path enumeration and do not call
//! into the library's graph code.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use num::{BigRational, One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rolegraph_core::hbakd::{Key, ObjectHierarchy};
use rolegraph_core::RbacModel;
use sha2::{Digest, Sha256};

pub type Set = BTreeSet<String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random acyclic arcs over `names`: a hidden random topological order, each
/// forward pair kept with probability `density`.
pub fn random_arcs(rng: &mut impl Rng, names: &[String], density: f64) -> Vec<(String, String)> {
    let mut order: Vec<&String> = names.iter().collect();
    order.shuffle(rng);
    let mut arcs = Vec::new();
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            if rng.gen_bool(density) {
                arcs.push((order[i].clone(), order[j].clone()));
            }
        }
    }
    arcs
}

/// Valid model with at most 8 roles, 6 permissions and 4 users.
pub fn random_model(rng: &mut impl Rng) -> RbacModel {
    random_model_sized(rng, 8, 6, 4)
}

pub fn random_model_sized(rng: &mut impl Rng, max_roles: usize, max_perms: usize, max_users: usize) -> RbacModel {
    let n = rng.gen_range(1..=max_roles);
    let m = rng.gen_range(0..=max_perms);
    let k = rng.gen_range(0..=max_users);
    let roles: Vec<String> = (0..n).map(|i| format!("r{i}")).collect();
    let perms: Vec<String> = (0..m).map(|i| format!("p{i}")).collect();
    let density = rng.gen_range(0.1..0.6);
    let mut model = RbacModel::new();
    for r in &roles {
        model = model.role(r, &[]);
    }
    for p in &perms {
        model = model.permission(p);
    }
    for (a, b) in random_arcs(rng, &roles, density) {
        model = model.arc(&a, &b);
    }
    let assign = rng.gen_range(0.1..0.5);
    for r in &roles {
        for p in &perms {
            if rng.gen_bool(assign) {
                model.direct_rp.entry(r.clone()).or_default().insert(p.clone());
            }
        }
    }
    for u in 0..k {
        let user = format!("u{u}");
        let picked: Vec<&str> = roles
            .iter()
            .filter(|_| rng.gen_bool(0.3))
            .map(String::as_str)
            .collect();
        model = model.user(&user, &picked);
    }
    model.canonical()
}

/// Random forest over `n` roles (each role after the first picks a parent or
/// becomes a root).
pub fn random_tree_model(rng: &mut impl Rng, n: usize, perms: usize) -> RbacModel {
    let mut model = RbacModel::new();
    for i in 0..n {
        model = model.role(&format!("r{i}"), &[]);
        if i > 0 && rng.gen_bool(0.9) {
            let p = rng.gen_range(0..i);
            model = model.arc(&format!("r{p}"), &format!("r{i}"));
        }
    }
    for p in 0..perms {
        model = model.permission(&format!("p{p}"));
    }
    model
}

pub fn children(model: &RbacModel, role: &str) -> Vec<String> {
    model
        .rr_arcs
        .iter()
        .filter(|(a, _)| a == role)
        .map(|(_, b)| b.clone())
        .collect()
}

pub fn parents(model: &RbacModel, role: &str) -> Vec<String> {
    model
        .rr_arcs
        .iter()
        .filter(|(_, b)| b == role)
        .map(|(a, _)| a.clone())
        .collect()
}

pub fn direct(model: &RbacModel, role: &str) -> Set {
    model.direct_rp.get(role).cloned().unwrap_or_default()
}

/// Effective set by plain recursion over arcs.
pub fn eff(model: &RbacModel, role: &str) -> Set {
    let mut out = direct(model, role);
    for c in children(model, role) {
        out.extend(eff(model, &c));
    }
    out
}

pub fn user_perms(model: &RbacModel, user: &str) -> Set {
    model
        .ur
        .get(user)
        .into_iter()
        .flatten()
        .flat_map(|r| eff(model, r))
        .collect()
}

pub fn equivalent(a: &RbacModel, b: &RbacModel) -> bool {
    a.users == b.users
        && a.permissions == b.permissions
        && a.users.iter().all(|u| user_perms(a, u) == user_perms(b, u))
}

/// Every directed path (as a role sequence), including single roles.
pub fn all_paths(model: &RbacModel) -> Vec<Vec<String>> {
    fn extend(model: &RbacModel, path: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
        out.push(path.clone());
        let last = path.last().unwrap().clone();
        for c in children(model, &last) {
            path.push(c);
            extend(model, path, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    for r in &model.roles {
        extend(model, &mut vec![r.clone()], &mut out);
    }
    out
}

pub fn endpoint_pairs(model: &RbacModel) -> BTreeSet<(Set, Set)> {
    all_paths(model)
        .iter()
        .map(|p| (eff(model, &p[0]), eff(model, p.last().unwrap())))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Class {
    Neither,
    Admissible,
    Equivalent,
}

/// Every path of `g` needs a conjugate path in `g_star`; equivalence also
/// needs the converse.
pub fn conversion_class(g: &RbacModel, g_star: &RbacModel) -> Class {
    let before = endpoint_pairs(g);
    let after = endpoint_pairs(g_star);
    if !before.is_subset(&after) {
        Class::Neither
    } else if after.is_subset(&before) {
        Class::Equivalent
    } else {
        Class::Admissible
    }
}

pub fn is_acyclic(model: &RbacModel) -> bool {
    fn visit(model: &RbacModel, r: &str, stack: &mut Vec<String>, done: &mut Set) -> bool {
        if stack.iter().any(|s| s == r) {
            return false;
        }
        if done.contains(r) {
            return true;
        }
        stack.push(r.to_string());
        let ok = children(model, r).iter().all(|c| visit(model, c, stack, done));
        stack.pop();
        done.insert(r.to_string());
        ok
    }
    let mut done = Set::new();
    model.roles.iter().all(|r| visit(model, r, &mut Vec::new(), &mut done))
}

/// Merges `y` into `x` by renaming, without any cleverness.
pub fn naive_merge(model: &RbacModel, x: &str, y: &str) -> RbacModel {
    let mut out = model.clone();
    out.roles.remove(y);
    let rename = |r: &String| if r == y { x.to_string() } else { r.clone() };
    out.rr_arcs = model
        .rr_arcs
        .iter()
        .map(|(a, b)| (rename(a), rename(b)))
        .filter(|(a, b)| a != b)
        .collect();
    let moved = out.direct_rp.remove(y).unwrap_or_default();
    out.direct_rp.entry(x.to_string()).or_default().extend(moved);
    for roles in out.ur.values_mut() {
        if roles.remove(y) {
            roles.insert(x.to_string());
        }
    }
    out.canonical()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flags {
    pub tree_like: bool,
    pub leaf: bool,
    pub rp_reduced: bool,
    pub transitive_reduced: bool,
    pub single: bool,
    pub taxonomic: bool,
}

fn reaches(model: &RbacModel, from: &str, to: &str, skip: Option<(&str, &str)>) -> bool {
    let mut seen = Set::new();
    let mut stack = vec![from.to_string()];
    while let Some(r) = stack.pop() {
        if r == to {
            return true;
        }
        for (a, b) in &model.rr_arcs {
            if *a == r && Some((a.as_str(), b.as_str())) != skip && seen.insert(b.clone()) {
                stack.push(b.clone());
            }
        }
    }
    false
}

/// Flags from their definitions; the `rp_reduced` merge test actually
/// performs every candidate merge.
pub fn flags(model: &RbacModel) -> Flags {
    let roles: Vec<&String> = model.roles.iter().collect();
    let tree_like = roles.iter().all(|r| parents(model, r).len() <= 1);
    let leaf = roles.iter().all(|r| {
        direct(model, r).is_empty() || children(model, r).iter().all(|c| eff(model, c).is_empty())
    });
    let single = roles.iter().all(|r| direct(model, r).len() <= 1);
    let taxonomic = leaf
        && single
        && model
            .permissions
            .iter()
            .all(|p| roles.iter().filter(|r| direct(model, r).contains(p)).count() <= 1);
    let transitive_reduced = model
        .rr_arcs
        .iter()
        .all(|(a, b)| !reaches(model, a, b, Some((a, b))));
    let no_redundant = roles.iter().all(|r| {
        children(model, r)
            .iter()
            .all(|c| direct(model, r).is_disjoint(&eff(model, c)))
    });
    let pairs = endpoint_pairs(model);
    let no_merge = roles.iter().enumerate().all(|(i, x)| {
        roles[i + 1..].iter().all(|y| {
            if eff(model, x) != eff(model, y) {
                return true;
            }
            let merged = naive_merge(model, x, y);
            !(is_acyclic(&merged) && endpoint_pairs(&merged) == pairs)
        })
    });
    Flags {
        tree_like,
        leaf,
        rp_reduced: no_redundant && no_merge,
        transitive_reduced,
        single,
        taxonomic,
    }
}

impl Flags {
    pub fn includes(&self, names: &[&str]) -> bool {
        names.iter().all(|n| match *n {
            "tree_like" => self.tree_like,
            "leaf" => self.leaf,
            "rp_reduced" => self.rp_reduced,
            "transitive_reduced" => self.transitive_reduced,
            "single" => self.single,
            "taxonomic" => self.taxonomic,
            other => panic!("unknown flag {other}"),
        })
    }
}

/// Smallest arc subset with the same reachability, by enumerating subsets.
/// Returns every subset of minimum size (a DAG has exactly one).
pub fn minimal_arc_sets(nodes: &[String], arcs: &[(String, String)]) -> Vec<BTreeSet<(String, String)>> {
    assert!(arcs.len() <= 16, "too many arcs to enumerate");
    let pos = |s: &String| nodes.iter().position(|n| n == s).unwrap();
    let idx: Vec<(usize, usize)> = arcs.iter().map(|(a, b)| (pos(a), pos(b))).collect();
    let closure = |mask: u32| {
        let mut reach = vec![0u32; nodes.len()];
        for (i, &(a, b)) in idx.iter().enumerate() {
            if mask & (1 << i) != 0 {
                reach[a] |= 1 << b;
            }
        }
        loop {
            let mut changed = false;
            for a in 0..nodes.len() {
                let mut r = reach[a];
                for b in 0..nodes.len() {
                    if reach[a] & (1 << b) != 0 {
                        r |= reach[b];
                    }
                }
                if r != reach[a] {
                    reach[a] = r;
                    changed = true;
                }
            }
            if !changed {
                return reach;
            }
        }
    };
    let full = closure((1u32 << idx.len()) - 1);
    let mut best: Vec<u32> = Vec::new();
    let mut best_len = usize::MAX;
    for mask in 0..(1u32 << idx.len()) {
        let len = mask.count_ones() as usize;
        if len > best_len || closure(mask) != full {
            continue;
        }
        if len < best_len {
            best.clear();
            best_len = len;
        }
        best.push(mask);
    }
    best.into_iter()
        .map(|mask| {
            (0..idx.len())
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| arcs[i].clone())
                .collect()
        })
        .collect()
}

/// Leakage risk by enumerating every path from the top of the hierarchy to a
/// permission, on a leaf model that need not be a tree.
pub fn risk_by_paths(model: &RbacModel) -> BTreeMap<String, BigRational> {
    let size = |r: &str| eff(model, r).len();
    let group_total = |r: &str| -> usize {
        children(model, r).iter().map(|c| size(c)).sum::<usize>() + direct(model, r).len()
    };
    let mut risk: BTreeMap<String, BigRational> =
        model.permissions.iter().map(|p| (p.clone(), BigRational::zero())).collect();
    fn walk(
        model: &RbacModel,
        r: &str,
        acc: BigRational,
        size: &dyn Fn(&str) -> usize,
        total: &dyn Fn(&str) -> usize,
        risk: &mut BTreeMap<String, BigRational>,
    ) {
        let t = total(r);
        if t == 0 || acc.is_zero() {
            return;
        }
        for c in children(model, r) {
            let w = BigRational::new(size(&c).into(), t.into());
            walk(model, &c, &acc * w, size, total, risk);
        }
        for p in direct(model, r) {
            *risk.get_mut(&p).unwrap() += &acc * BigRational::new(1.into(), t.into());
        }
    }
    let roots: Vec<String> = model
        .roles
        .iter()
        .filter(|r| parents(model, r).is_empty())
        .cloned()
        .collect();
    let top_total: usize = roots.iter().map(|r| size(r)).sum();
    for r in &roots {
        let w = if roots.len() == 1 {
            BigRational::one()
        } else {
            BigRational::new(size(r).into(), top_total.into())
        };
        walk(model, r, w, &size, &group_total, &mut risk);
    }
    risk
}

/// SHA-256 of `key ‖ data`.
pub fn sha(key: &[u8; 32], data: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(key);
    h.update(data);
    h.finalize().into()
}

/// Random object DAG with distinct identifiers `ID<name>`.
pub fn random_hierarchy(rng: &mut impl Rng, max_objects: usize, density: f64) -> ObjectHierarchy {
    let n = rng.gen_range(1..=max_objects);
    let names: Vec<String> = (0..n).map(|i| format!("o{i}")).collect();
    let mut h = ObjectHierarchy::new();
    for o in &names {
        h = h.object(o, &format!("ID{o}"));
    }
    for (a, b) in random_arcs(rng, &names, density) {
        h = h.arc(&a, &b);
    }
    h
}

/// Random forest of objects.
pub fn random_object_tree(rng: &mut impl Rng, max_objects: usize) -> ObjectHierarchy {
    let n = rng.gen_range(1..=max_objects);
    let mut h = ObjectHierarchy::new();
    for i in 0..n {
        h = h.object(&format!("o{i}"), &format!("ID{i}"));
        if i > 0 && rng.gen_bool(0.85) {
            let p = rng.gen_range(0..i);
            h = h.arc(&format!("o{p}"), &format!("o{i}"));
        }
    }
    h
}

/// Every root-to-`target` path of a hierarchy, as object sequences.
pub fn object_paths(h: &ObjectHierarchy, target: &str) -> Vec<Vec<String>> {
    let preds = |o: &str| -> Vec<String> {
        h.arcs.iter().filter(|(_, b)| b == o).map(|(a, _)| a.clone()).collect()
    };
    let ps = preds(target);
    if ps.is_empty() {
        return vec![vec![target.to_string()]];
    }
    let mut out = Vec::new();
    for p in ps {
        for mut path in object_paths(h, &p) {
            path.push(target.to_string());
            out.push(path);
        }
    }
    out
}

/// Chain value along `path` starting from `k0`.
pub fn chain_along(h: &ObjectHierarchy, k0: &Key, path: &[String]) -> Key {
    path.iter()
        .fold(*k0, |k, o| Key(sha(&k.0, h.id_of(o).as_bytes())))
}
