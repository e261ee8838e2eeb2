//! Hash-based access key distribution over object hierarchies.
//!
//! Every root key is `H(k0 ‖ id)` and every other key `H(parent key ‖ id)`,
//! with `H` = SHA-256 and identifiers encoded as UTF-8. Keys have a fixed
//! length, so the concatenation is unambiguous.
//!
//! Hierarchies that are not trees are first unfolded into an ID-equivalent
//! tree whose clones share the original identifier; the clones of one object
//! then share its key through one of the [`SharingMode`]s.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::BitXor;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::optimizer::{unfold_names, DEFAULT_NODE_BUDGET};

pub type ObjectId = String;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Key(pub [u8; 32]);

impl Key {
    pub const ZERO: Key = Key([0; 32]);

    pub fn random(rng: &mut impl RngCore) -> Key {
        let mut bytes = [0; 32];
        rng.fill_bytes(&mut bytes);
        Key(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Key({self})")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyParseError(pub String);

impl fmt::Display for KeyParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "expected 64 hex characters: {}", self.0)
    }
}

impl std::error::Error for KeyParseError {}

impl FromStr for Key {
    type Err = KeyParseError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let mut bytes = [0; 32];
        hex::decode_to_slice(s.trim(), &mut bytes).map_err(|e| KeyParseError(e.to_string()))?;
        Ok(Key(bytes))
    }
}

impl BitXor for Key {
    type Output = Key;

    fn bitxor(self, rhs: Key) -> Key {
        let mut out = self.0;
        for (a, b) in out.iter_mut().zip(rhs.0) {
            *a ^= b;
        }
        Key(out)
    }
}

impl Serialize for Key {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Key {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `SHA-256(key ‖ part_1 ‖ part_2 ‖ ...)`.
pub fn hash(key: &Key, parts: &[&[u8]]) -> Key {
    let mut h = Sha256::new();
    h.update(key.0);
    for p in parts {
        h.update(p);
    }
    Key(h.finalize().into())
}

/// One chain step: `H(key ‖ utf8(id))`.
pub fn chain(key: &Key, id: &str) -> Key {
    hash(key, &[id.as_bytes()])
}

/// Recovers a class key from a wrap and one clone's chain key.
pub fn unwrap_key(wrap: &Key, chain_key: &Key) -> Key {
    *wrap ^ hash(chain_key, &[b"wrap"])
}

/// XOR of all shares.
pub fn combine_shares<'a>(shares: impl IntoIterator<Item = &'a Key>) -> Key {
    shares.into_iter().fold(Key::ZERO, |acc, k| acc ^ *k)
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectHierarchy {
    pub objects: BTreeSet<ObjectId>,
    /// Public identifier of each object; objects without an entry use their
    /// own name.
    #[serde(default)]
    pub ids: BTreeMap<ObjectId, String>,
    /// `(parent, child)` pairs.
    #[serde(default)]
    pub arcs: BTreeSet<(ObjectId, ObjectId)>,
}

impl ObjectHierarchy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn object(mut self, name: &str, id: &str) -> Self {
        self.objects.insert(name.to_string());
        self.ids.insert(name.to_string(), id.to_string());
        self
    }

    pub fn arc(mut self, parent: &str, child: &str) -> Self {
        self.arcs.insert((parent.to_string(), child.to_string()));
        self
    }

    pub fn id_of<'a>(&'a self, object: &'a str) -> &'a str {
        self.ids.get(object).map_or(object, String::as_str)
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    fn position(&self, object: &str) -> Option<usize> {
        self.objects.iter().position(|o| o == object)
    }

    fn names(&self) -> Vec<ObjectId> {
        self.objects.iter().cloned().collect()
    }

    pub(crate) fn dag(&self) -> Result<Dag> {
        let names = self.names();
        let pos = |o: &str| {
            names
                .binary_search_by(|x| x.as_str().cmp(o))
                .map_err(|_| Error::UnknownObject(o.to_string()))
        };
        let arcs = self
            .arcs
            .iter()
            .map(|(a, b)| Ok((pos(a)?, pos(b)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dag::new(names.len(), arcs))
    }

    /// Known objects, acyclic arcs and unique identifiers.
    pub fn check(&self) -> Result<()> {
        if let Some(o) = self.ids.keys().find(|o| !self.objects.contains(*o)) {
            return Err(Error::UnknownObject(o.clone()));
        }
        let dag = self.dag()?;
        if let Some(&v) = dag.cyclic_nodes().first() {
            return Err(Error::InvalidHierarchy(format!(
                "cycle through `{}`",
                self.names()[v]
            )));
        }
        let mut seen = BTreeSet::new();
        for o in &self.objects {
            if !seen.insert(self.id_of(o)) {
                return Err(Error::IdCollision(self.id_of(o).to_string()));
            }
        }
        Ok(())
    }

    /// Parent of `object` in a tree-like hierarchy.
    pub fn parent_of(&self, object: &str) -> Option<&ObjectId> {
        self.arcs.iter().find(|(_, b)| b == object).map(|(a, _)| a)
    }

    /// `object` and everything below it.
    pub fn subtree(&self, object: &str) -> Result<BTreeSet<ObjectId>> {
        let v = self
            .position(object)
            .ok_or_else(|| Error::UnknownObject(object.to_string()))?;
        let names = self.names();
        Ok(self.dag()?.reach_from(v).iter().map(|i| names[i].clone()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharingMode {
    /// Any one clone's chain key unwraps the class key.
    #[default]
    AnyPath,
    /// The class key is the XOR of every clone's chain key.
    AllPaths,
}

impl SharingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SharingMode::AnyPath => "any_path",
            SharingMode::AllPaths => "all_paths",
        }
    }
}

/// One copy of an object in the ID-equivalent tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClonePosition {
    pub clone: String,
    pub parent: Option<String>,
    /// Original objects from the root down to this copy.
    pub path: Vec<ObjectId>,
    pub chain_key: Key,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeyTable {
    pub k0: Key,
    /// `None` for a plain tree derivation.
    pub mode: Option<SharingMode>,
    pub keys: BTreeMap<ObjectId, Key>,
    pub classes: BTreeMap<ObjectId, Vec<ClonePosition>>,
    /// Wrapped class key per clone, any-path classes only.
    pub wraps: BTreeMap<String, Key>,
}

impl KeyTable {
    pub fn key(&self, object: &str) -> Result<&Key> {
        self.keys
            .get(object)
            .ok_or_else(|| Error::UnknownObject(object.to_string()))
    }
}

/// The ID-equivalent tree: clones of a shared object are named `name#k` and
/// carry its identifier. Returns the tree and the clones of every original.
pub fn id_equivalent_tree(
    g: &ObjectHierarchy,
    budget: usize,
) -> Result<(ObjectHierarchy, BTreeMap<ObjectId, Vec<ObjectId>>)> {
    let (tree, classes, _) = unfold(g, budget)?;
    Ok((tree, classes))
}

type Unfolded = (
    ObjectHierarchy,
    BTreeMap<ObjectId, Vec<ObjectId>>,
    Vec<(String, Option<usize>, ObjectId)>,
);

fn unfold(g: &ObjectHierarchy, budget: usize) -> Result<Unfolded> {
    g.check()?;
    let names = g.names();
    let unfolding = g
        .dag()?
        .unfold(budget)
        .map_err(|needed| Error::NodeBudgetExceeded { budget, needed })?;
    let copies = unfold_names(&names, &unfolding);
    let mut tree = ObjectHierarchy::new();
    let mut classes: BTreeMap<ObjectId, Vec<ObjectId>> = BTreeMap::new();
    let mut order = Vec::with_capacity(copies.len());
    for (i, (&v, name)) in unfolding.origin.iter().zip(&copies).enumerate() {
        let orig = &names[v];
        tree = tree.object(name, g.id_of(orig));
        if let Some(p) = unfolding.parent[i] {
            tree.arcs.insert((copies[p].clone(), name.clone()));
        }
        classes.entry(orig.clone()).or_default().push(name.clone());
        order.push((name.clone(), unfolding.parent[i], orig.clone()));
    }
    Ok((tree, classes, order))
}

/// Chain keys of every copy, in unfolding order (parents first).
fn chain_positions(g: &ObjectHierarchy, k0: &Key, order: &[(String, Option<usize>, ObjectId)]) -> Vec<ClonePosition> {
    let mut out: Vec<ClonePosition> = Vec::with_capacity(order.len());
    for (name, parent, orig) in order {
        let (parent_key, parent_name, mut path) = match parent {
            Some(p) => (out[*p].chain_key, Some(out[*p].clone.clone()), out[*p].path.clone()),
            None => (*k0, None, Vec::new()),
        };
        path.push(orig.clone());
        out.push(ClonePosition {
            clone: name.clone(),
            parent: parent_name,
            path,
            chain_key: chain(&parent_key, g.id_of(orig)),
        });
    }
    out
}

fn group(positions: Vec<ClonePosition>) -> BTreeMap<ObjectId, Vec<ClonePosition>> {
    let mut classes: BTreeMap<ObjectId, Vec<ClonePosition>> = BTreeMap::new();
    for pos in positions {
        let orig = pos.path.last().expect("non-empty path").clone();
        classes.entry(orig).or_default().push(pos);
    }
    classes
}

/// Keys of a tree-like hierarchy. Fails with [`Error::NotUnique`] naming an
/// object with more than one parent.
pub fn derive_keys(h: &ObjectHierarchy, k0: &Key) -> Result<KeyTable> {
    h.check()?;
    let mut parents: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, b) in &h.arcs {
        *parents.entry(b.as_str()).or_default() += 1;
    }
    if let Some((o, _)) = parents.iter().find(|(_, &n)| n > 1) {
        return Err(Error::NotUnique(o.to_string()));
    }
    let (_, _, order) = unfold(h, h.len().max(1))?;
    let classes = group(chain_positions(h, k0, &order));
    let keys = classes.iter().map(|(o, c)| (o.clone(), c[0].chain_key)).collect();
    Ok(KeyTable {
        k0: *k0,
        mode: None,
        keys,
        classes,
        wraps: BTreeMap::new(),
    })
}

/// Keys of an arbitrary DAG hierarchy via its ID-equivalent tree.
pub fn distribute_keys(
    g: &ObjectHierarchy,
    k0: &Key,
    mode: SharingMode,
    rng: &mut impl RngCore,
) -> Result<KeyTable> {
    distribute_keys_with(g, k0, mode, rng, DEFAULT_NODE_BUDGET)
}

pub fn distribute_keys_with(
    g: &ObjectHierarchy,
    k0: &Key,
    mode: SharingMode,
    rng: &mut impl RngCore,
    budget: usize,
) -> Result<KeyTable> {
    let (_, _, order) = unfold(g, budget)?;
    let classes = group(chain_positions(g, k0, &order));
    let mut keys = BTreeMap::new();
    let mut wraps = BTreeMap::new();
    for (object, clones) in &classes {
        let key = match (clones.len(), mode) {
            (1, _) => clones[0].chain_key,
            (_, SharingMode::AnyPath) => {
                let k = Key::random(rng);
                for c in clones {
                    wraps.insert(c.clone.clone(), k ^ hash(&c.chain_key, &[b"wrap"]));
                }
                k
            }
            (_, SharingMode::AllPaths) => combine_shares(clones.iter().map(|c| &c.chain_key)),
        };
        keys.insert(object.clone(), key);
    }
    Ok(KeyTable {
        k0: *k0,
        mode: Some(mode),
        keys,
        classes,
        wraps,
    })
}

/// What a subject holds.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectKnowledge {
    #[serde(default)]
    pub known_keys: BTreeMap<ObjectId, Key>,
    /// Identifiers the subject knows.
    #[serde(default)]
    pub id_set: BTreeSet<String>,
    #[serde(default)]
    pub has_k0: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessMode {
    /// Identifiers are public; start from known keys.
    Mandatory,
    /// Identifiers are secret; start from `k0`, extend only through known ids.
    Discretionary,
    /// Start from known keys, extend only through known ids.
    Both,
}

impl FromStr for AccessMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mandatory" => Ok(AccessMode::Mandatory),
            "discretionary" => Ok(AccessMode::Discretionary),
            "both" => Ok(AccessMode::Both),
            other => Err(Error::InvalidHierarchy(format!("unknown access mode `{other}`"))),
        }
    }
}

/// Whether the subject can compute the key of `target`.
///
/// The subject's computation is simulated over every copy in the
/// ID-equivalent tree: a chain value is extended to a child copy when the
/// child's identifier is available, and the resulting object key is compared
/// with the table. Holding `k0` counts as holding the chain value above the
/// roots in every mode.
pub fn can_access(
    h: &ObjectHierarchy,
    table: &KeyTable,
    s: &SubjectKnowledge,
    target: &str,
    mode: AccessMode,
) -> Result<bool> {
    let expected = table.key(target)?;
    let use_known = mode != AccessMode::Discretionary;
    if use_known && s.known_keys.get(target) == Some(expected) {
        return Ok(true);
    }
    let id_ok = |id: &str| mode == AccessMode::Mandatory || s.id_set.contains(id);

    let mut positions: Vec<&ClonePosition> = table.classes.values().flatten().collect();
    positions.sort_by_key(|p| p.path.len());
    let mut derived: BTreeMap<&str, Key> = BTreeMap::new();
    for pos in positions {
        let orig = pos.path.last().expect("non-empty path");
        let id = h.id_of(orig);
        let from_above = match &pos.parent {
            Some(p) => derived.get(p.as_str()).copied(),
            None => s.has_k0.then_some(table.k0),
        };
        let value = from_above
            .filter(|_| id_ok(id))
            .map(|k| chain(&k, id))
            .or_else(|| {
                let held = s.known_keys.get(orig.as_str())?;
                (use_known && *held == pos.chain_key).then_some(*held)
            });
        if let Some(v) = value {
            derived.insert(pos.clone.as_str(), v);
        }
    }

    let clones = &table.classes[target];
    let got: Vec<Option<&Key>> = clones.iter().map(|c| derived.get(c.clone.as_str())).collect();
    let key = match (clones.len(), table.mode) {
        (1, _) | (_, None) => got[0].copied(),
        (_, Some(SharingMode::AnyPath)) => clones
            .iter()
            .zip(&got)
            .find_map(|(c, k)| Some(unwrap_key(table.wraps.get(&c.clone)?, (*k)?))),
        (_, Some(SharingMode::AllPaths)) => got
            .iter()
            .copied()
            .collect::<Option<Vec<_>>>()
            .map(combine_shares),
    };
    Ok(key.as_ref() == Some(expected))
}
