//! Model files: a single JSON document describing a transition matrix,
//! named potentials with exact literals, suspension profiles, and canned
//! experiments.
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "name": "bernoulli",
//!   "alphabet": ["a", "b"],
//!   "transitions": [[1, 1], [1, 1]],
//!   "potentials": { "psi": { "memory": 1, "values": { "a": "1", "b": "0" } } },
//!   "profiles":   { "pulse": { "kind": "bump", "roof": "tau", "level": "1/2", "mass": "psi" } },
//!   "experiments": { "default": { "p": 0.7, "schedule": "poly:c=1,beta=2", "n": [100], ... } }
//! }
//! ```
//!
//! Potential values are exact literals (`"1/3"`, `"sqrt2"`, `"2*golden-1/2"`,
//! `"-12.5e-3"`), parsed into symbolic scalars so downstream lattice checks
//! and cycle extremes can run in exact arithmetic.
//!
//! Files are identified by the SHA-256 of their canonical form: the parsed
//! JSON re-serialized with sorted keys, no whitespace, and normalized
//! numbers. Formatting, key order, and comments-by-whitespace therefore
//! never change a model's hash.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ldp_core::potentials::Potential;
use ldp_core::scalar::Scalar;
use ldp_core::sft::MarkovModel;
use ldp_core::suspension::{Profile, Suspension};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// The seven bundled corpus models, embedded so `ldp selftest` runs on a
/// fresh checkout with no paths to resolve.
pub const BUNDLED: &[(&str, &str)] = &[
    ("bernoulli", include_str!("../../../models/bernoulli.model")),
    ("golden-mean", include_str!("../../../models/golden-mean.model")),
    ("golden-lattice", include_str!("../../../models/golden-lattice.model")),
    ("golden-nonlattice", include_str!("../../../models/golden-nonlattice.model")),
    ("dense-nonlattice", include_str!("../../../models/dense-nonlattice.model")),
    ("integer", include_str!("../../../models/integer.model")),
    ("triple", include_str!("../../../models/triple.model")),
];

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    format_version: u32,
    name: String,
    alphabet: Vec<String>,
    transitions: Vec<Vec<u8>>,
    #[serde(default)]
    potentials: BTreeMap<String, RawPotential>,
    #[serde(default)]
    profiles: BTreeMap<String, RawProfile>,
    #[serde(default)]
    experiments: BTreeMap<String, RawExperiment>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotential {
    memory: usize,
    values: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    kind: String,
    roof: String,
    #[serde(default)]
    level: Option<String>,
    #[serde(default)]
    mass: Option<String>,
    #[serde(default)]
    values: Option<Vec<f64>>,
}

#[derive(Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct RawExperiment {
    #[serde(default)]
    pub phi: Option<String>,
    #[serde(default)]
    pub psi: Option<String>,
    pub p: f64,
    pub schedule: String,
    pub n: Vec<usize>,
    #[serde(default)]
    pub cutoff: Option<String>,
    #[serde(default)]
    pub band: Option<[f64; 2]>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// A loaded, validated model file.
#[derive(Debug)]
pub struct ModelFile {
    pub name: String,
    /// Full SHA-256 of the canonical content, lowercase hex.
    pub hash: String,
    pub model: MarkovModel,
    pub potentials: BTreeMap<String, Potential>,
    pub profiles: BTreeMap<String, ProfileSpec>,
    pub experiments: BTreeMap<String, RawExperiment>,
}

/// A parsed suspension profile, still holding the roof's name for reports.
#[derive(Debug)]
pub struct ProfileSpec {
    pub kind: String,
    pub roof_name: String,
    pub suspension: Suspension,
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::msg(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text).map_err(|e| e.prefix(&format!("{}: ", path.display())))
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        // two passes: a Value for canonical hashing, typed structs for use;
        // serde_json reports line/column on malformed input
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| CliError::msg(format!("parse error: {e}")))?;
        let hash = canonical_hash(&value);
        let raw: RawFile = serde_json::from_value(value)
            .map_err(|e| CliError::msg(format!("schema error: {e}")))?;

        if raw.format_version != 1 {
            return Err(CliError::msg(format!(
                "unsupported format_version {} (this tool reads version 1)",
                raw.format_version
            )));
        }
        check_name(&raw.name)?;

        let k = raw.alphabet.len();
        if raw.transitions.len() != k {
            return Err(CliError::msg(format!(
                "alphabet lists {k} symbols but the transition matrix has {} rows",
                raw.transitions.len()
            )));
        }
        // name dead symbols before the core structural check, which only
        // knows state indices
        for (i, row) in raw.transitions.iter().enumerate() {
            if row.iter().all(|&v| v == 0) {
                return Err(CliError::msg(format!(
                    "dead symbol {:?}: row {i} of the transition matrix is all zero",
                    raw.alphabet[i]
                )));
            }
        }
        for j in 0..k {
            if raw.transitions.iter().all(|row| row.get(j) == Some(&0)) {
                return Err(CliError::msg(format!(
                    "dead symbol {:?}: column {j} of the transition matrix is all zero",
                    raw.alphabet.get(j).map(String::as_str).unwrap_or("?")
                )));
            }
        }
        let model = MarkovModel::new(raw.transitions)
            .and_then(|m| m.with_labels(raw.alphabet))
            .map_err(CliError::core)?;

        let mut potentials = BTreeMap::new();
        for (name, rp) in raw.potentials {
            check_name(&name)?;
            let mut values = BTreeMap::new();
            for (word, literal) in &rp.values {
                let w = model.parse_word(word).map_err(CliError::core)?;
                let s = Scalar::parse(literal).map_err(|e| {
                    CliError::msg(format!("potential {name:?}, word {word:?}: {e}"))
                })?;
                values.insert(w, s);
            }
            let pot = Potential::from_table(&model, rp.memory, values)
                .map_err(|e| CliError::core(e).prefix(&format!("potential {name:?}: ")))?;
            potentials.insert(name, pot);
        }

        let mut profiles = BTreeMap::new();
        for (name, rp) in raw.profiles {
            check_name(&name)?;
            let roof = potentials
                .get(&rp.roof)
                .ok_or_else(|| {
                    CliError::msg(format!("profile {name:?} roof {:?} is not a potential", rp.roof))
                })?
                .clone();
            let parse_level = |field: &Option<String>| -> Result<Scalar, CliError> {
                let lit = field.as_deref().ok_or_else(|| {
                    CliError::msg(format!("profile {name:?} ({}) needs a \"level\"", rp.kind))
                })?;
                Scalar::parse(lit)
                    .map_err(|e| CliError::msg(format!("profile {name:?} level: {e}")))
            };
            let profile = match rp.kind.as_str() {
                "constant" => Profile::Constant { level: parse_level(&rp.level)? },
                "return-unit" => Profile::ReturnUnit,
                "bump" => {
                    let mass_name = rp.mass.as_deref().ok_or_else(|| {
                        CliError::msg(format!("profile {name:?} (bump) needs a \"mass\" potential"))
                    })?;
                    let mass = potentials.get(mass_name).cloned().ok_or_else(|| {
                        CliError::msg(format!(
                            "profile {name:?} mass {mass_name:?} is not a potential"
                        ))
                    })?;
                    Profile::Bump { level: parse_level(&rp.level)?, mass }
                }
                "sampled" => {
                    let values = rp.values.clone().ok_or_else(|| {
                        CliError::msg(format!("profile {name:?} (sampled) needs \"values\""))
                    })?;
                    Profile::Sampled { values }
                }
                other => {
                    return Err(CliError::msg(format!(
                        "profile {name:?}: unknown kind {other:?} \
                         (constant | return-unit | bump | sampled)"
                    )))
                }
            };
            let suspension = Suspension::new(roof, profile)
                .map_err(|e| CliError::core(e).prefix(&format!("profile {name:?}: ")))?;
            profiles.insert(
                name,
                ProfileSpec { kind: rp.kind, roof_name: rp.roof, suspension },
            );
        }

        for (name, exp) in &raw.experiments {
            check_name(name)?;
            for (role, pot) in [("phi", &exp.phi), ("psi", &exp.psi)] {
                if let Some(p) = pot {
                    if !potentials.contains_key(p) {
                        return Err(CliError::msg(format!(
                            "experiment {name:?} {role} {p:?} is not a potential"
                        )));
                    }
                }
            }
        }

        Ok(ModelFile {
            name: raw.name,
            hash,
            model,
            potentials,
            profiles,
            experiments: raw.experiments,
        })
    }

    /// First 12 hex digits of the content hash, for summary lines.
    pub fn short_hash(&self) -> &str {
        &self.hash[..12]
    }

    /// A named potential, or the zero potential for the conventional
    /// default name "zero".
    pub fn potential(&self, name: &str) -> Result<Potential, CliError> {
        if let Some(p) = self.potentials.get(name) {
            return Ok(p.clone());
        }
        if name == "zero" {
            return Ok(Potential::zero(&self.model));
        }
        Err(CliError::msg(format!(
            "no potential named {name:?} (available: {})",
            self.potentials.keys().cloned().collect::<Vec<_>>().join(", ")
        )))
    }

    /// Resolve the working pair: explicit flags win, then the experiment,
    /// then the conventional names "phi" (or zero) and "psi".
    pub fn resolve_pair(
        &self,
        flag_phi: Option<&str>,
        flag_psi: Option<&str>,
        experiment: Option<&RawExperiment>,
    ) -> Result<(Potential, Potential), CliError> {
        let phi_name = flag_phi
            .or(experiment.and_then(|e| e.phi.as_deref()))
            .unwrap_or(if self.potentials.contains_key("phi") { "phi" } else { "zero" });
        let psi_name = flag_psi
            .or(experiment.and_then(|e| e.psi.as_deref()))
            .unwrap_or("psi");
        Ok((self.potential(phi_name)?, self.potential(psi_name)?))
    }
}

/// Names appear in file headers and cache keys; keep them flat ASCII.
fn check_name(name: &str) -> Result<(), CliError> {
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(CliError::msg(format!(
            "name {name:?} must be non-empty ASCII [A-Za-z0-9._-]"
        )))
    }
}

/// SHA-256 over the canonical serialization: objects with sorted keys, no
/// whitespace, numbers normalized by the JSON round trip (`0.70` and `0.7`
/// hash identically; the serde_json value map is ordered, so key order in
/// the source never matters).
pub fn canonical_hash(value: &serde_json::Value) -> String {
    let canonical = serde_json::to_string(value).expect("canonical serialization");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_corpus_loads_and_hashes_stably() {
        for (name, text) in BUNDLED {
            let mf = ModelFile::from_text(text)
                .unwrap_or_else(|e| panic!("bundled model {name}: {e}"));
            assert_eq!(&mf.name, name, "file name field must match the bundle key");
            assert_eq!(mf.hash.len(), 64);
            let again = ModelFile::from_text(text).unwrap();
            assert_eq!(mf.hash, again.hash, "hashing must be deterministic");
            mf.model.require_primitive().unwrap_or_else(|e| {
                panic!("bundled model {name} must be primitive: {e}")
            });
        }
    }

    #[test]
    fn hash_ignores_formatting_but_not_content() {
        let (_, text) = BUNDLED[0];
        let spaced = text.replace(": ", ":   ");
        let a = ModelFile::from_text(text).unwrap();
        let b = ModelFile::from_text(&spaced).unwrap();
        assert_eq!(a.hash, b.hash, "whitespace must not change the hash");

        let changed = text.replace("\"p\": 0.7", "\"p\": 0.71");
        assert_ne!(changed, *text);
        let c = ModelFile::from_text(&changed).unwrap();
        assert_ne!(a.hash, c.hash, "content changes must change the hash");
    }

    #[test]
    fn dead_symbols_are_named() {
        let text = r#"{
            "format_version": 1, "name": "dead",
            "alphabet": ["a", "b"],
            "transitions": [[1, 1], [0, 0]]
        }"#;
        let err = ModelFile::from_text(text).unwrap_err().to_string();
        assert!(err.contains("dead symbol \"b\""), "got: {err}");
    }

    #[test]
    fn missing_word_entries_are_named() {
        let text = r#"{
            "format_version": 1, "name": "gap",
            "alphabet": ["a", "b"],
            "transitions": [[1, 1], [1, 1]],
            "potentials": { "psi": { "memory": 1, "values": { "a": "1" } } }
        }"#;
        let err = ModelFile::from_text(text).unwrap_err().to_string();
        assert!(
            err.contains("missing value") && err.contains('b'),
            "got: {err}"
        );
    }

    #[test]
    fn malformed_json_reports_line_and_column() {
        let err = ModelFile::from_text("{ \"format_version\": 1,\n  oops }")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2"), "got: {err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{
            "format_version": 1, "name": "x",
            "alphabet": ["a"], "transitions": [[1]],
            "surprise": true
        }"#;
        let err = ModelFile::from_text(text).unwrap_err().to_string();
        assert!(err.contains("surprise"), "got: {err}");
    }

    #[test]
    fn exact_literals_survive_into_scalars() {
        let mf = ModelFile::from_text(BUNDLED.iter().find(|(n, _)| *n == "golden-lattice").unwrap().1)
            .unwrap();
        let psi = mf.potential("psi").unwrap();
        let w = mf.model.parse_word("ab").unwrap();
        let v = psi.eval(&w).unwrap();
        assert!(!v.is_rational(), "ab value is the literal sqrt2");
        assert!((v.val - 2.0f64.sqrt()).abs() < 1e-15);
        let phi = mf.potential("phi").unwrap();
        let v = phi.eval(&mf.model.parse_word("aa").unwrap()).unwrap();
        assert!(v.is_rational());
        assert_eq!(v.canonical(), "-1/4");
    }
}
