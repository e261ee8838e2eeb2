//! Synthetic inputs for the benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rolegraph_core::hbakd::ObjectHierarchy;
use rolegraph_core::RbacModel;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random tree of `n` roles; `m` permissions are spread over the leaves,
/// each on one to three of them.
pub fn tree_policy(n: usize, m: usize, seed: u64) -> RbacModel {
    let mut rng = rng(seed);
    let mut model = RbacModel::new();
    let mut has_child = vec![false; n];
    for i in 0..n {
        model = model.role(&format!("r{i}"), &[]);
        if i > 0 {
            let p = rng.gen_range(0..i);
            has_child[p] = true;
            model = model.arc(&format!("r{p}"), &format!("r{i}"));
        }
    }
    let leaves: Vec<usize> = (0..n).filter(|&i| !has_child[i]).collect();
    for p in 0..m {
        let perm = format!("p{p}");
        model = model.permission(&perm);
        let k = rng.gen_range(1..=3);
        for &leaf in leaves.choose_multiple(&mut rng, k) {
            model
                .direct_rp
                .entry(format!("r{leaf}"))
                .or_default()
                .insert(perm.clone());
        }
    }
    model.user("u", &["r0"])
}

/// Layered DAG: `layers` layers of `width` roles, each role linked to two
/// random roles of the next layer and, with probability `shortcut`, to one
/// two layers down. Bottom roles hold one permission each.
pub fn layered_policy(layers: usize, width: usize, shortcut: f64, seed: u64) -> RbacModel {
    let mut rng = rng(seed);
    let name = |l: usize, i: usize| format!("l{l}r{i}");
    let mut model = RbacModel::new();
    for l in 0..layers {
        for i in 0..width {
            let perms = if l + 1 == layers { vec![format!("p{i}")] } else { vec![] };
            let perms: Vec<&str> = perms.iter().map(String::as_str).collect();
            model = model.role(&name(l, i), &perms);
        }
    }
    for l in 0..layers.saturating_sub(1) {
        for i in 0..width {
            for _ in 0..2 {
                model = model.arc(&name(l, i), &name(l + 1, rng.gen_range(0..width)));
            }
            if l + 2 < layers && rng.gen_bool(shortcut) {
                model = model.arc(&name(l, i), &name(l + 2, rng.gen_range(0..width)));
            }
        }
    }
    model
}

/// Random object tree with `n` objects.
pub fn object_tree(n: usize, seed: u64) -> ObjectHierarchy {
    let mut rng = rng(seed);
    let mut h = ObjectHierarchy::new();
    for i in 0..n {
        h = h.object(&format!("o{i}"), &format!("O{i}"));
        if i > 0 {
            let p = rng.gen_range(0..i);
            h = h.arc(&format!("o{p}"), &format!("o{i}"));
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_inputs_are_valid() {
        assert!(tree_policy(50, 40, 1).validate().is_empty());
        assert!(layered_policy(4, 6, 0.3, 1).validate().is_empty());
        assert!(object_tree(30, 1).check().is_ok());
    }
}
