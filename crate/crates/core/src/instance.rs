//! Instance files: one TOML document holding the space, the distribution
//! family, and hypothesis families.
//!
//! Probabilities are stored as decimal strings and kept verbatim through
//! load/store round-trips; they are parsed to floats only for
//! computation. Malformed syntax, non-normalized rows, and label rows of
//! the wrong length map to distinct error variants.
//!
//! ```toml
//! [space]
//! atoms = ["x0", "x1", "x2", "x3"]
//!
//! [base]                      # optional reference measure
//! probs = ["0.25", "0.25", "0.25", "0.25"]
//!
//! [[distribution]]
//! name = "spike0"
//! probs = ["0.7", "0.1", "0.1", "0.1"]
//!
//! [[family]]
//! name = "thresholds"
//! threshold = true
//! order = [3, 2, 1, 0]        # optional preorder ranks
//! members = [[1, 1, 1, 1], [0, 1, 1, 1]]
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::{HypothesisFamily, ThresholdOrder};
use crate::space::{Distribution, DistributionFamily, FiniteSpace};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InstanceFile {
    pub space: SpaceSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<ProbRow>,
    #[serde(rename = "distribution")]
    pub distributions: Vec<NamedProbRow>,
    #[serde(default, rename = "family", skip_serializing_if = "Vec::is_empty")]
    pub families: Vec<FamilySection>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpaceSection {
    pub atoms: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProbRow {
    pub probs: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NamedProbRow {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub probs: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FamilySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub threshold: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<u32>>,
    pub members: Vec<Vec<u8>>,
}

/// A loaded instance: validated objects plus the raw file for exact
/// round-trips.
#[derive(Debug, Clone)]
pub struct Instance {
    pub space: Arc<FiniteSpace>,
    pub family: DistributionFamily,
    pub base: Option<Distribution>,
    pub hypothesis_families: Vec<(String, HypothesisFamily)>,
    pub raw: InstanceFile,
}

impl Instance {
    pub fn hypothesis_family(&self, name: &str) -> Result<&HypothesisFamily> {
        self.hypothesis_families
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, f)| f)
            .ok_or_else(|| Error::input(format!("no hypothesis family named {name:?}")))
    }
}

fn parse_prob_row(space: &Arc<FiniteSpace>, row: &[String], what: &str) -> Result<Distribution> {
    let mut probs = Vec::with_capacity(row.len());
    for s in row {
        let p: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::Malformed(format!("{what}: bad decimal {s:?}")))?;
        probs.push(p);
    }
    Distribution::new(space.clone(), probs)
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let raw: InstanceFile = toml::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    instance_from_file(raw)
}

pub fn instance_from_file(raw: InstanceFile) -> Result<Instance> {
    let space = FiniteSpace::new(raw.space.atoms.clone())?;
    if raw.distributions.is_empty() {
        return Err(Error::Malformed(
            "instance needs at least one [[distribution]]".to_string(),
        ));
    }
    let mut members = Vec::with_capacity(raw.distributions.len());
    for (i, row) in raw.distributions.iter().enumerate() {
        if row.probs.len() != space.atom_count() {
            return Err(Error::Malformed(format!(
                "distribution {i} has {} entries for {} atoms",
                row.probs.len(),
                space.atom_count()
            )));
        }
        members.push(parse_prob_row(
            &space,
            &row.probs,
            &format!("distribution {i}"),
        )?);
    }
    let family = DistributionFamily::new(members)?;

    let base = match &raw.base {
        None => None,
        Some(b) => Some(parse_prob_row(&space, &b.probs, "base")?),
    };

    let mut hfams = Vec::with_capacity(raw.families.len());
    for (i, f) in raw.families.iter().enumerate() {
        for (j, row) in f.members.iter().enumerate() {
            if row.len() != space.atom_count() {
                return Err(Error::MaskRange(format!(
                    "family {i} member {j} has {} labels for {} atoms",
                    row.len(),
                    space.atom_count()
                )));
            }
        }
        let mut fam = HypothesisFamily::from_label_vecs(space.clone(), &f.members)?;
        if f.threshold {
            fam = match &f.order {
                Some(ranks) => fam.into_threshold_with_order(ThresholdOrder {
                    ranks: ranks.clone(),
                })?,
                None => fam.into_threshold()?,
            };
        }
        let name = f.name.clone().unwrap_or_else(|| format!("family{i}"));
        hfams.push((name, fam));
    }
    Ok(Instance {
        space,
        family,
        base,
        hypothesis_families: hfams,
        raw,
    })
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Malformed(format!("{}: {e}", path.as_ref().display())))?;
    parse_instance(&text)
}

/// Serializes the instance back to TOML, preserving the original decimal
/// strings verbatim.
pub fn instance_to_string(instance: &Instance) -> Result<String> {
    toml::to_string_pretty(&instance.raw).map_err(|e| Error::Malformed(e.to_string()))
}

pub fn store_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
    let text = instance_to_string(instance)?;
    std::fs::write(path.as_ref(), text)
        .map_err(|e| Error::Malformed(format!("{}: {e}", path.as_ref().display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAIR: &str = r#"
[space]
atoms = ["x0", "x1", "x2", "x3"]

[base]
probs = ["0.25", "0.25", "0.25", "0.25"]

[[distribution]]
name = "spike0"
probs = ["0.7", "0.1", "0.1", "0.1"]

[[distribution]]
name = "spike1"
probs = ["0.1", "0.7", "0.1", "0.1"]

[[family]]
name = "thresholds"
threshold = true
members = [[1,1,1,1],[0,1,1,1],[0,0,1,1],[0,0,0,1],[0,0,0,0]]
"#;

    #[test]
    fn pair_fixture_parses() {
        let inst = parse_instance(PAIR).unwrap();
        assert_eq!(inst.space.atom_count(), 4);
        assert_eq!(inst.family.len(), 2);
        assert_eq!(inst.family.member(0).prob(0), 0.7);
        let f = inst.hypothesis_family("thresholds").unwrap();
        assert_eq!(f.len(), 5);
        assert!(f.is_threshold());
    }

    #[test]
    fn minimal_one_atom_instance() {
        let text = r#"
[space]
atoms = ["only"]

[[distribution]]
probs = ["1.0"]
"#;
        let inst = parse_instance(text).unwrap();
        assert_eq!(inst.space.atom_count(), 1);
        assert_eq!(inst.family.len(), 1);
        assert_eq!(inst.family.member(0).prob(0), 1.0);
    }

    #[test]
    fn non_normalized_row_is_a_normalization_error() {
        let text = r#"
[space]
atoms = ["a", "b"]

[[distribution]]
probs = ["0.5", "0.499999"]
"#;
        assert!(matches!(parse_instance(text), Err(Error::Normalization(_))));
    }

    #[test]
    fn syntax_error_is_malformed() {
        assert!(matches!(
            parse_instance("[space\natoms=[]"),
            Err(Error::Malformed(_))
        ));
    }

    #[test]
    fn wrong_length_label_row_is_mask_range() {
        let text = r#"
[space]
atoms = ["a", "b"]

[[distribution]]
probs = ["0.5", "0.5"]

[[family]]
members = [[1, 0, 1]]
"#;
        assert!(matches!(parse_instance(text), Err(Error::MaskRange(_))));
    }

    #[test]
    fn decimal_strings_survive_round_trip() {
        let text = r#"
[space]
atoms = ["a", "b"]

[[distribution]]
probs = ["0.300", "0.70"]
"#;
        let inst = parse_instance(text).unwrap();
        let out = instance_to_string(&inst).unwrap();
        assert!(out.contains("\"0.300\""));
        assert!(out.contains("\"0.70\""));
        let again = parse_instance(&out).unwrap();
        assert_eq!(again.raw, inst.raw);
    }
}
