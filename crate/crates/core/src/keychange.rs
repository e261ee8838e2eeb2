//! Simulator of the key-change exchange between a parent key holder and a
//! child key holder, with two substitution attacks.
//!
//! Messages:
//!
//! 1. parent → child: `KeyChange { child, new_id, nonce_p }`
//! 2. optional mutual proof of the current child key `k_c`:
//!    child → parent `ChildProof { nonce_c, H(k_c ‖ "child" ‖ nonce_p) }`,
//!    parent → child `ParentProof { H(k_c ‖ "parent" ‖ nonce_c) }`
//! 3. parent → child: `NewKey { k' ⊕ pad }` with `k' = H(k_parent ‖ new_id)`;
//!    `pad = H(k_c ‖ "wrap" ‖ nonce_p ‖ nonce_c)` after step 2, zero otherwise.
//!    child → parent: `Ack { H(k' ‖ "ack") }`
//!
//! A party that fails a check aborts. The adversary sits on the channel and
//! never holds `k_c`.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hbakd::{chain, derive_keys, hash, Key, KeyTable, ObjectHierarchy, ObjectId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adversary {
    #[default]
    None,
    /// Intercepts the key-change request and answers in place of the child.
    InterceptSubstituteChild,
    /// Sends a forged key-change request in place of the parent.
    ForgeSubstituteParent,
}

impl Adversary {
    pub fn as_str(self) -> &'static str {
        match self {
            Adversary::None => "none",
            Adversary::InterceptSubstituteChild => "intercept_substitute_child",
            Adversary::ForgeSubstituteParent => "forge_substitute_parent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub hierarchy: ObjectHierarchy,
    pub k0: Key,
    pub parent: ObjectId,
    pub child: ObjectId,
    pub new_id: String,
    #[serde(default)]
    pub adversary: Adversary,
    #[serde(default = "yes")]
    pub step2: bool,
    #[serde(default)]
    pub seed: u64,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Parent,
    Child,
    Adversary,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::Parent => "parent",
            Party::Child => "child",
            Party::Adversary => "adversary",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Message {
    pub from: Party,
    pub to: Party,
    pub kind: String,
    pub payload: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    KeyChanged,
    AbortedAuthFailure,
    Compromised,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::KeyChanged => "key_changed",
            Outcome::AbortedAuthFailure => "aborted_auth_failure",
            Outcome::Compromised => "compromised",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Transcript {
    pub messages: Vec<Message>,
    pub outcome: Outcome,
    /// Key the parent committed to, if it got that far.
    pub parent_key: Option<Key>,
    /// Key the child committed to, if it got that far.
    pub child_key: Option<Key>,
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.messages.iter().enumerate() {
            writeln!(f, "{}\t{}\t{}\t{}\t{}", i + 1, m.from, m.to, m.kind, m.payload)?;
        }
        writeln!(f, "outcome\t{}", self.outcome)
    }
}

struct Run {
    log: Vec<Message>,
    rng: ChaCha20Rng,
}

impl Run {
    fn send(&mut self, from: Party, to: Party, kind: &str, fields: &[(&str, String)]) {
        let payload = fields
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ");
        self.log.push(Message {
            from,
            to,
            kind: kind.to_string(),
            payload,
        });
    }

    fn nonce(&mut self) -> Key {
        Key::random(&mut self.rng)
    }
}

fn child_proof(k_c: &Key, nonce_p: &Key) -> Key {
    hash(k_c, &[b"child", &nonce_p.0])
}

fn parent_proof(k_c: &Key, nonce_c: &Key) -> Key {
    hash(k_c, &[b"parent", &nonce_c.0])
}

fn pad(k_c: &Key, nonce_p: &Key, nonce_c: &Key) -> Key {
    hash(k_c, &[b"wrap", &nonce_p.0, &nonce_c.0])
}

fn ack(k: &Key) -> Key {
    hash(k, &[b"ack"])
}

/// Runs one exchange. Deterministic in the scenario, seed included.
pub fn run_scenario(s: &Scenario) -> Result<Transcript> {
    if !s.hierarchy.arcs.contains(&(s.parent.clone(), s.child.clone())) {
        return Err(Error::NotAnArc {
            parent: s.parent.clone(),
            child: s.child.clone(),
        });
    }
    let table = derive_keys(&s.hierarchy, &s.k0)?;
    let k_parent = *table.key(&s.parent)?;
    let k_c = *table.key(&s.child)?;
    let mut run = Run {
        log: Vec::new(),
        rng: ChaCha20Rng::seed_from_u64(s.seed),
    };
    let aborted = |run: Run| Transcript {
        messages: run.log,
        outcome: Outcome::AbortedAuthFailure,
        parent_key: None,
        child_key: None,
    };

    // The two ends of the exchange as seen by each honest party.
    let (p_end, c_end) = match s.adversary {
        Adversary::None => (Party::Parent, Party::Child),
        Adversary::InterceptSubstituteChild => (Party::Parent, Party::Adversary),
        Adversary::ForgeSubstituteParent => (Party::Adversary, Party::Child),
    };
    let honest = |p: Party| p != Party::Adversary;
    let mut stolen: Vec<Key> = Vec::new();

    let nonce_p = run.nonce();
    let new_id = if honest(p_end) {
        s.new_id.clone()
    } else {
        format!("{}~forged", s.new_id)
    };
    run.send(
        p_end,
        c_end,
        "KeyChange",
        &[("child", s.child.clone()), ("new_id", new_id), ("nonce", nonce_p.to_string())],
    );

    let mut nonce_c = Key::ZERO;
    if s.step2 {
        nonce_c = run.nonce();
        let proof = if honest(c_end) { child_proof(&k_c, &nonce_p) } else { run.nonce() };
        run.send(c_end, p_end, "ChildProof", &[("nonce", nonce_c.to_string()), ("proof", proof.to_string())]);
        if honest(p_end) && proof != child_proof(&k_c, &nonce_p) {
            return Ok(aborted(run));
        }
        let answer = if honest(p_end) { parent_proof(&k_c, &nonce_c) } else { run.nonce() };
        run.send(p_end, c_end, "ParentProof", &[("proof", answer.to_string())]);
        if honest(c_end) && answer != parent_proof(&k_c, &nonce_c) {
            return Ok(aborted(run));
        }
    }
    // Only a holder of k_c can compute the pad.
    let pad_for = |p: Party| {
        if s.step2 && honest(p) {
            pad(&k_c, &nonce_p, &nonce_c)
        } else {
            Key::ZERO
        }
    };

    let sent = if honest(p_end) {
        chain(&k_parent, &s.new_id)
    } else {
        let k = run.nonce();
        stolen.push(k);
        k
    };
    let wrapped = sent ^ pad_for(p_end);
    run.send(p_end, c_end, "NewKey", &[("wrapped", wrapped.to_string())]);
    let received = wrapped ^ pad_for(c_end);
    if !honest(c_end) {
        stolen.push(received);
    }
    let tag = ack(&received);
    run.send(c_end, p_end, "Ack", &[("tag", tag.to_string())]);
    if honest(p_end) && tag != ack(&sent) {
        return Ok(aborted(run));
    }

    let parent_key = honest(p_end).then_some(sent);
    let child_key = honest(c_end).then_some(received);
    let committed = parent_key.iter().chain(child_key.iter());
    let leaked = committed.clone().any(|k| stolen.contains(k));
    let disagree = matches!((parent_key, child_key), (Some(a), Some(b)) if a != b);
    let outcome = if leaked || disagree {
        Outcome::Compromised
    } else {
        Outcome::KeyChanged
    };
    Ok(Transcript {
        messages: run.log,
        outcome,
        parent_key,
        child_key,
    })
}

/// Changes the identifier of `child` and re-derives its subtree. Returns the
/// updated hierarchy and table; keys outside the subtree are kept.
pub fn apply_key_change(
    table: &KeyTable,
    h: &ObjectHierarchy,
    child: &str,
    new_id: &str,
) -> Result<(ObjectHierarchy, KeyTable)> {
    if !h.objects.contains(child) {
        return Err(Error::UnknownObject(child.to_string()));
    }
    if h.objects.iter().any(|o| o != child && h.id_of(o) == new_id) {
        return Err(Error::IdCollision(new_id.to_string()));
    }
    let mut updated = h.clone();
    updated.ids.insert(child.to_string(), new_id.to_string());
    let fresh = derive_keys(&updated, &table.k0)?;
    let below = updated.subtree(child)?;
    let mut out = table.clone();
    for o in &below {
        out.keys.insert(o.clone(), fresh.keys[o]);
        out.classes.insert(o.clone(), fresh.classes[o].clone());
    }
    Ok((updated, out))
}
