//! JSON policy documents.
//!
//! ```json
//! {
//!   "users": ["alice"],
//!   "permissions": ["read"],
//!   "roles": ["staff"],
//!   "arcs": [],
//!   "role_permissions": {"staff": ["read"]},
//!   "user_roles": {"alice": ["staff"]}
//! }
//! ```
//!
//! Unknown keys are rejected. Serialization is canonical: every list sorted,
//! empty map entries omitted, two-space indentation, trailing newline.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::RbacModel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyDocument {
    pub users: Vec<String>,
    pub permissions: Vec<String>,
    pub roles: Vec<String>,
    #[serde(default)]
    pub arcs: Vec<(String, String)>,
    #[serde(default)]
    pub role_permissions: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub user_roles: BTreeMap<String, Vec<String>>,
}

impl From<&RbacModel> for PolicyDocument {
    fn from(m: &RbacModel) -> Self {
        let nonempty = |map: &BTreeMap<String, BTreeSet<String>>| {
            map.iter()
                .filter(|(_, v)| !v.is_empty())
                .map(|(k, v)| (k.clone(), v.iter().cloned().collect()))
                .collect()
        };
        PolicyDocument {
            users: m.users.iter().cloned().collect(),
            permissions: m.permissions.iter().cloned().collect(),
            roles: m.roles.iter().cloned().collect(),
            arcs: m.rr_arcs.iter().cloned().collect(),
            role_permissions: nonempty(&m.direct_rp),
            user_roles: nonempty(&m.ur),
        }
    }
}

impl From<PolicyDocument> for RbacModel {
    fn from(doc: PolicyDocument) -> Self {
        let collect = |map: BTreeMap<String, Vec<String>>| {
            map.into_iter()
                .map(|(k, v)| (k, v.into_iter().collect::<BTreeSet<_>>()))
                .collect()
        };
        RbacModel {
            users: doc.users.into_iter().collect(),
            permissions: doc.permissions.into_iter().collect(),
            roles: doc.roles.into_iter().collect(),
            direct_rp: collect(doc.role_permissions),
            ur: collect(doc.user_roles),
            rr_arcs: doc.arcs.into_iter().collect(),
        }
        .canonical()
    }
}

/// Parses a policy document. Does not validate the resulting model.
pub fn parse_policy(text: &str) -> Result<RbacModel> {
    let doc: PolicyDocument = serde_json::from_str(text)?;
    Ok(doc.into())
}

pub fn serialize_policy(model: &RbacModel) -> String {
    let mut out = serde_json::to_string_pretty(&PolicyDocument::from(model))
        .expect("policy documents always serialize");
    out.push('\n');
    out
}

/// 1-based line of the first quoted occurrence of `id` in `text`.
pub fn locate(text: &str, id: &str) -> Option<usize> {
    let needle = serde_json::to_string(id).ok()?;
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}
