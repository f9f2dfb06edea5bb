//! Versioned JSON documents bundling a measure space, an energy, and named
//! functions, so instances travel between runs, files, and the CLI.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{EnergyFunctional, EnergySpec};
use crate::space::{L2Fn, MeasureSpace};

pub const FORMAT_VERSION: u32 = 1;

/// On-disk form of one problem instance. The energy is stored structurally
/// (edge list / matrix / shift tree) and rebuilt through the validating
/// constructors on load, so a hand-edited document cannot smuggle in an
/// inconsistent instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub version: u32,
    pub space: MeasureSpace,
    /// Named inputs for resolvent and evolution runs, keyed for stable output.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub functions: BTreeMap<String, Vec<f64>>,
    pub energy: EnergySpec,
}

impl InstanceDoc {
    pub fn from_energy(energy: &EnergyFunctional) -> InstanceDoc {
        InstanceDoc {
            version: FORMAT_VERSION,
            space: energy.space().clone(),
            functions: BTreeMap::new(),
            energy: energy.to_spec(),
        }
    }

    pub fn with_function(mut self, name: &str, f: &L2Fn) -> InstanceDoc {
        self.functions.insert(name.to_string(), f.values().to_vec());
        self
    }

    /// Rebuilds the energy on the document's space, re-running all
    /// constructor validation.
    pub fn build(&self) -> Result<EnergyFunctional> {
        if self.version != FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "instance document version {} is unsupported (expected {FORMAT_VERSION})",
                self.version
            )));
        }
        self.energy.build(&self.space)
    }

    pub fn function(&self, name: &str) -> Result<L2Fn> {
        let values = self.functions.get(name).ok_or_else(|| {
            Error::InvalidConfig(format!("instance document has no function named {name:?}"))
        })?;
        L2Fn::new(self.space.clone(), values.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<InstanceDoc> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<InstanceDoc> {
        InstanceDoc::from_json(&fs::read_to_string(path)?)
    }
}
