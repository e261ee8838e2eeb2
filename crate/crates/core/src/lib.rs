//! Role-graph optimisation for RBAC policies, with permission-leakage risk,
//! hash-chained key distribution over object hierarchies, and the product of
//! role and MAC lattices.

pub mod error;
pub mod graph;
pub mod hbakd;
pub mod keychange;
pub mod lattice;
pub mod model;
pub mod optimizer;
pub mod policy;
pub mod risk;

pub use error::{DocumentErrorKind, Error, Result};
pub use hbakd::{
    can_access, derive_keys, distribute_keys, id_equivalent_tree, AccessMode, Key, KeyTable,
    ObjectHierarchy, SharingMode, SubjectKnowledge,
};
pub use keychange::{apply_key_change, run_scenario, Adversary, Outcome, Scenario, Transcript};
pub use lattice::{
    product_dominates, role_lattice, FiniteLattice, MacLabel, MacLattice, ProductLabel,
    ProductLattice, RoleElem, RoleLattice,
};
pub use model::{
    conversion_class, hierarchy_flags, models_equivalent, ConversionClass, DiagCode, Diagnostics,
    HierarchyFlags, RbacModel,
};
pub use optimizer::{compose, optimize, verify, Algorithm, ConversionReport, OptimizeOptions};
pub use policy::{parse_policy, serialize_policy, PolicyDocument};
pub use risk::{leakage_risks, rank_permissions, RiskReport};
