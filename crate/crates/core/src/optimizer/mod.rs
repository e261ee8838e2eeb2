//! Local optimisation of a role graph: conversions that bring the hierarchy
//! to a target form while keeping every user's permissions intact.
//!
//! | name     | conversion    | target form                              |
//! |----------|---------------|------------------------------------------|
//! | `I`      | rp-admissible | single, leaf                             |
//! | `Ia`     | rp-admissible | leaf                                     |
//! | `II`     | rp-equivalent | rp-reduced                               |
//! | `III`    | rp-equivalent | tree-like                                |
//! | `IV`     | rp-equivalent | transitive-reduced                       |
//! | `I+II`   | rp-admissible | single, taxonomic, leaf, rp-reduced      |
//! | `III+I`  | rp-admissible | leaf, tree-like                          |
//! | `III+Ia` | rp-admissible | single, leaf, tree-like                  |
//!
//! Every conversion re-assigns users so the result is an equivalent model;
//! [`verify`] re-checks that claim independently.

mod leaf;
mod reduce;
mod treeify;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    conversion_class, hierarchy_flags, models_equivalent, ConversionClass, HierarchyFlags,
    RbacModel, RoleId,
};

pub(crate) use treeify::unfold_names;

pub const DEFAULT_NODE_BUDGET: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OptimizeOptions {
    /// Upper bound on the role count produced by unfolding.
    pub node_budget: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

/// A single rewriting pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    /// `I`: share one single-permission holder per permission.
    LeafSingle,
    /// `Ia`: move direct permissions of inner roles into a new leaf.
    Leafify,
    /// `II`: strip redundant assignments and merge duplicate roles.
    RpReduce,
    /// `III`: unfold the DAG into a forest.
    Treeify,
    /// `IV`: transitive reduction.
    TransitiveReduce,
    /// Split multi-permission roles into one leaf per permission, without
    /// sharing leaves between seniors.
    SplitPermissions,
}

impl Step {
    fn class(self) -> ConversionClass {
        match self {
            Step::RpReduce | Step::Treeify | Step::TransitiveReduce => ConversionClass::RpEquivalent,
            Step::LeafSingle | Step::Leafify | Step::SplitPermissions => ConversionClass::RpAdmissible,
        }
    }

    fn apply(self, model: &RbacModel, opts: &OptimizeOptions) -> Result<Rewrite> {
        match self {
            Step::LeafSingle => Ok(leaf::leaf_single(model)),
            Step::Leafify => Ok(leaf::leafify(model)),
            Step::RpReduce => Ok(reduce::rp_reduce(model)),
            Step::Treeify => treeify::treeify(model, opts.node_budget),
            Step::TransitiveReduce => Ok(reduce::transitive_reduce(model)),
            Step::SplitPermissions => Ok(leaf::split_permissions(model)),
        }
    }
}

/// A named entry of the algorithm table: one main algorithm or a preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    I,
    Ia,
    II,
    III,
    IV,
    IPlusII,
    IIIPlusI,
    IIIPlusIa,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::I,
        Algorithm::Ia,
        Algorithm::II,
        Algorithm::III,
        Algorithm::IV,
        Algorithm::IPlusII,
        Algorithm::IIIPlusI,
        Algorithm::IIIPlusIa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::I => "I",
            Algorithm::Ia => "Ia",
            Algorithm::II => "II",
            Algorithm::III => "III",
            Algorithm::IV => "IV",
            Algorithm::IPlusII => "I+II",
            Algorithm::IIIPlusI => "III+I",
            Algorithm::IIIPlusIa => "III+Ia",
        }
    }

    pub fn steps(self) -> &'static [Step] {
        match self {
            Algorithm::I => &[Step::LeafSingle],
            Algorithm::Ia => &[Step::Leafify],
            Algorithm::II => &[Step::RpReduce],
            Algorithm::III => &[Step::Treeify],
            Algorithm::IV => &[Step::TransitiveReduce],
            Algorithm::IPlusII => &[Step::LeafSingle, Step::RpReduce],
            Algorithm::IIIPlusI => &[Step::LeafSingle, Step::Treeify],
            Algorithm::IIIPlusIa => &[Step::Treeify, Step::Leafify, Step::SplitPermissions],
        }
    }

    /// Weakest conversion class the algorithm guarantees.
    pub fn class(self) -> ConversionClass {
        self.steps()
            .iter()
            .map(|s| s.class())
            .min()
            .expect("non-empty")
    }

    /// Structural features the output is guaranteed to have.
    pub fn features(self) -> HierarchyFlags {
        let mut f = HierarchyFlags::default();
        match self {
            Algorithm::I => {
                f.single = true;
                f.leaf = true;
            }
            Algorithm::Ia => f.leaf = true,
            Algorithm::II => f.rp_reduced = true,
            Algorithm::III => f.tree_like = true,
            Algorithm::IV => f.transitive_reduced = true,
            Algorithm::IPlusII => {
                f.single = true;
                f.taxonomic = true;
                f.leaf = true;
                f.rp_reduced = true;
            }
            Algorithm::IIIPlusI => {
                f.leaf = true;
                f.tree_like = true;
            }
            Algorithm::IIIPlusIa => {
                f.single = true;
                f.leaf = true;
                f.tree_like = true;
            }
        }
        f
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::UnknownAlgorithm(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConversionReport {
    pub pipeline: Vec<String>,
    pub input_flags: HierarchyFlags,
    pub output_flags: HierarchyFlags,
    pub claimed_class: ConversionClass,
    pub nodes_added: usize,
    pub nodes_removed: usize,
    pub arcs_added: usize,
    pub arcs_removed: usize,
    /// Roles that did not exist in the input, mapped to the input role they
    /// were derived from.
    pub clone_map: BTreeMap<RoleId, RoleId>,
}

impl fmt::Display for ConversionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "pipeline\t{}", self.pipeline.join(" "))?;
        writeln!(f, "class\t{}", self.claimed_class)?;
        writeln!(f, "input_flags\t{}", self.input_flags.names().join(","))?;
        writeln!(f, "output_flags\t{}", self.output_flags.names().join(","))?;
        writeln!(f, "nodes_added\t{}", self.nodes_added)?;
        writeln!(f, "nodes_removed\t{}", self.nodes_removed)?;
        writeln!(f, "arcs_added\t{}", self.arcs_added)?;
        writeln!(f, "arcs_removed\t{}", self.arcs_removed)?;
        for (new, orig) in &self.clone_map {
            writeln!(f, "clone\t{new}\t{orig}")?;
        }
        Ok(())
    }
}

/// Output of one pass plus provenance of the roles it created.
pub(crate) struct Rewrite {
    pub model: RbacModel,
    pub provenance: BTreeMap<RoleId, RoleId>,
}

fn added<T: Ord>(before: &BTreeSet<T>, after: &BTreeSet<T>) -> usize {
    after.difference(before).count()
}

fn report(
    pipeline: Vec<String>,
    input: &RbacModel,
    output: &RbacModel,
    claimed_class: ConversionClass,
    clone_map: BTreeMap<RoleId, RoleId>,
) -> ConversionReport {
    ConversionReport {
        pipeline,
        input_flags: hierarchy_flags(input),
        output_flags: hierarchy_flags(output),
        claimed_class,
        nodes_added: added(&input.roles, &output.roles),
        nodes_removed: added(&output.roles, &input.roles),
        arcs_added: added(&input.rr_arcs, &output.rr_arcs),
        arcs_removed: added(&output.rr_arcs, &input.rr_arcs),
        clone_map,
    }
}

/// Applies `steps` in order, composing provenance so every new role maps back
/// to a role of `model`.
pub fn run_steps(
    model: &RbacModel,
    steps: &[Step],
    label: Vec<String>,
    opts: &OptimizeOptions,
) -> Result<(RbacModel, ConversionReport)> {
    if steps.is_empty() {
        return Err(Error::EmptyPipeline);
    }
    model.check()?;
    let mut current = model.clone();
    let mut clone_map: BTreeMap<RoleId, RoleId> = BTreeMap::new();
    let mut class = ConversionClass::RpEquivalent;
    for step in steps {
        let Rewrite { model: next, provenance } = step.apply(&current, opts)?;
        let mut composed = BTreeMap::new();
        for role in next.roles.iter().filter(|r| !model.roles.contains(*r)) {
            let origin = match provenance.get(role) {
                Some(src) => clone_map.get(src).unwrap_or(src).clone(),
                None => clone_map
                    .get(role)
                    .cloned()
                    .unwrap_or_else(|| role.clone()),
            };
            composed.insert(role.clone(), origin);
        }
        clone_map = composed;
        class = class.min(step.class());
        current = next;
    }
    let out = report(label, model, &current, class, clone_map);
    Ok((current, out))
}

/// Runs `algorithm` on `model`. A model that already has every feature the
/// algorithm targets is returned unchanged.
pub fn optimize(
    model: &RbacModel,
    algorithm: Algorithm,
    opts: &OptimizeOptions,
) -> Result<(RbacModel, ConversionReport)> {
    let label = vec![algorithm.name().to_string()];
    model.check()?;
    if hierarchy_flags(model).includes(&algorithm.features()) {
        let out = report(label, model, model, ConversionClass::RpEquivalent, BTreeMap::new());
        return Ok((model.clone(), out));
    }
    run_steps(model, algorithm.steps(), label, opts)
}

/// Algorithm `IV`.
pub fn transitive_reduce(model: &RbacModel) -> Result<(RbacModel, ConversionReport)> {
    optimize(model, Algorithm::IV, &OptimizeOptions::default())
}

/// Algorithm `II`.
pub fn rp_reduce(model: &RbacModel) -> Result<(RbacModel, ConversionReport)> {
    optimize(model, Algorithm::II, &OptimizeOptions::default())
}

/// Algorithm `III` with the default node budget.
pub fn treeify(model: &RbacModel) -> Result<(RbacModel, ConversionReport)> {
    optimize(model, Algorithm::III, &OptimizeOptions::default())
}

/// Algorithm `Ia`.
pub fn leafify(model: &RbacModel) -> Result<(RbacModel, ConversionReport)> {
    optimize(model, Algorithm::Ia, &OptimizeOptions::default())
}

/// Algorithm `I`.
pub fn leaf_single(model: &RbacModel) -> Result<(RbacModel, ConversionReport)> {
    optimize(model, Algorithm::I, &OptimizeOptions::default())
}

/// Runs a pipeline of algorithm or preset names, e.g. `["III", "IV"]`.
pub fn compose(
    model: &RbacModel,
    pipeline: &[&str],
    opts: &OptimizeOptions,
) -> Result<(RbacModel, ConversionReport)> {
    let algorithms = pipeline
        .iter()
        .map(|name| name.parse::<Algorithm>())
        .collect::<Result<Vec<_>>>()?;
    let steps: Vec<Step> = algorithms.iter().flat_map(|a| a.steps()).copied().collect();
    let label = algorithms.iter().map(|a| a.name().to_string()).collect();
    run_steps(model, &steps, label, opts)
}

/// Independently re-checks a conversion: the output is valid, equivalent to
/// the input, and at least as strong as the claimed class.
pub fn verify(input: &RbacModel, output: &RbacModel, report: &ConversionReport) -> Result<()> {
    output.check()?;
    if !models_equivalent(input, output) {
        return Err(Error::Verification("user permissions changed".into()));
    }
    let actual = conversion_class(input, output);
    if actual < report.claimed_class {
        return Err(Error::Verification(format!(
            "claimed {} but the conversion is {}",
            report.claimed_class, actual
        )));
    }
    Ok(())
}
