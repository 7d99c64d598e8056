//! JSON checkpoints. Weights are written with 17 significant digits so a
//! save/load cycle reproduces every `f64` bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;
use thiserror::Error;

use super::{AdamState, HoleParams, ParamStore};
use crate::hole::Hole;
use crate::logic::{ClauseLibrary, LibraryConfig};

pub const CHECKPOINT_FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(#[from] serde_json::Error),
    #[error("checkpoint does not match: {0}")]
    Mismatch(String),
}

fn exact<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::{Error, SerializeSeq};
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        if !x.is_finite() {
            return Err(S::Error::custom(format!("non-finite weight {x}")));
        }
        let raw = RawValue::from_string(format!("{x:.16e}")).map_err(S::Error::custom)?;
        seq.serialize_element(&raw)?;
    }
    seq.end()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadState {
    #[serde(serialize_with = "exact")]
    pub weights: Vec<f64>,
    #[serde(serialize_with = "exact")]
    pub adam_m: Vec<f64>,
    #[serde(serialize_with = "exact")]
    pub adam_v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleCheckpoint {
    pub library: LibraryConfig,
    pub library_hash: String,
    /// Keyed by head atom text.
    pub heads: BTreeMap<String, HeadState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub env_name: String,
    pub seed: u64,
    pub episode: u64,
    pub update_step: u64,
    pub adam_t: u64,
    pub holes: BTreeMap<Hole, HoleCheckpoint>,
}

impl Checkpoint {
    pub fn capture(
        env_name: &str,
        seed: u64,
        episode: u64,
        params: &ParamStore,
        adam: &AdamState,
        libraries: &BTreeMap<Hole, ClauseLibrary>,
    ) -> Result<Self, CheckpointError> {
        let mut holes = BTreeMap::new();
        for (hole, p) in &params.holes {
            let lib = libraries
                .get(hole)
                .ok_or_else(|| CheckpointError::Mismatch(format!("no library for hole {hole}")))?;
            let m = adam.m.holes.get(hole);
            let v = adam.v.holes.get(hole);
            let mut heads = BTreeMap::new();
            for (i, head) in p.heads.iter().enumerate() {
                let zeros = vec![0.0; p.weights[i].len()];
                heads.insert(
                    head.to_string(),
                    HeadState {
                        weights: p.weights[i].clone(),
                        adam_m: m.map(|m| m[i].clone()).unwrap_or_else(|| zeros.clone()),
                        adam_v: v.map(|v| v[i].clone()).unwrap_or(zeros),
                    },
                );
            }
            holes.insert(
                *hole,
                HoleCheckpoint {
                    library: lib.config(),
                    library_hash: lib.hash(),
                    heads,
                },
            );
        }
        Ok(Checkpoint {
            format_version: CHECKPOINT_FORMAT,
            env_name: env_name.to_string(),
            seed,
            episode,
            update_step: params.step,
            adam_t: adam.t,
            holes,
        })
    }

    /// Rebuilds parameters and optimizer state. Every hole of `libraries`
    /// must be present with an identical library hash.
    pub fn restore(
        &self,
        libraries: &BTreeMap<Hole, ClauseLibrary>,
    ) -> Result<(ParamStore, AdamState), CheckpointError> {
        if self.format_version != CHECKPOINT_FORMAT {
            return Err(CheckpointError::Mismatch(format!(
                "format version {} (expected {CHECKPOINT_FORMAT})",
                self.format_version
            )));
        }
        let mut params = ParamStore {
            holes: BTreeMap::new(),
            step: self.update_step,
        };
        let mut adam = AdamState {
            t: self.adam_t,
            ..AdamState::default()
        };
        for (hole, lib) in libraries {
            let hc = self
                .holes
                .get(hole)
                .ok_or_else(|| CheckpointError::Mismatch(format!("hole {hole} missing")))?;
            let hash = lib.hash();
            if hc.library_hash != hash {
                return Err(CheckpointError::Mismatch(format!(
                    "hole {hole}: clause library hash {} but vocabulary gives {hash}",
                    hc.library_hash
                )));
            }
            let mut p = HoleParams::zeros(lib);
            let mut m = Vec::new();
            let mut v = Vec::new();
            for (i, head) in p.heads.iter().enumerate() {
                let hs = hc.heads.get(&head.to_string()).ok_or_else(|| {
                    CheckpointError::Mismatch(format!("hole {hole}: head {head} missing"))
                })?;
                let n = p.weights[i].len();
                if hs.weights.len() != n || hs.adam_m.len() != n || hs.adam_v.len() != n {
                    return Err(CheckpointError::Mismatch(format!(
                        "hole {hole}: head {head} has {} weights, library has {n}",
                        hs.weights.len()
                    )));
                }
                p.weights[i] = hs.weights.clone();
                m.push(hs.adam_m.clone());
                v.push(hs.adam_v.clone());
            }
            params.holes.insert(*hole, p);
            adam.m.holes.insert(*hole, m);
            adam.v.holes.insert(*hole, v);
        }
        Ok((params, adam))
    }

    pub fn to_json(&self) -> Result<String, CheckpointError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Writes to a sibling temporary file, then renames over `path`.
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let text = self.to_json()?;
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(text.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Checkpoint::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::{policy_update, AdamConfig, Gradients};
    use crate::logic::{build_base, enumerate_clauses, GroundAtom, Predicate};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn libs(extra: bool) -> BTreeMap<Hole, ClauseLibrary> {
        let mut preds = vec![
            Predicate::extensional("p", 0),
            Predicate::extensional("q", 0),
            Predicate::intensional("h", 0),
        ];
        if extra {
            preds.push(Predicate::extensional("r", 0));
        }
        let base = build_base(&preds, &[]).unwrap();
        let lib = enumerate_clauses(&base, &[GroundAtom::nullary("h")], LibraryConfig::default()).unwrap();
        BTreeMap::from([(Hole::Where, lib)])
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let libs = libs(false);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut params = ParamStore::init_uniform(libs.iter().map(|(h, l)| (*h, l)), &mut rng);
        let mut adam = AdamState::new(&params);
        let mut g = Gradients::zeros_like(&params);
        for w in g.holes.get_mut(&Hole::Where).unwrap()[0].iter_mut() {
            *w = rng.random_range(-1.0..1.0) * 1e-7;
        }
        policy_update(&mut params, &g, &AdamConfig::default(), &mut adam).unwrap();
        let ck = Checkpoint::capture("doorkey", 4, 17, &params, &adam, &libs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        let (p2, a2) = back.restore(&libs).unwrap();
        assert_eq!(p2, params);
        assert_eq!(a2, adam);
    }

    #[test]
    fn mismatched_library_is_refused() {
        let a = libs(false);
        let params = ParamStore::init_uniform(a.iter().map(|(h, l)| (*h, l)), &mut ChaCha8Rng::seed_from_u64(1));
        let ck = Checkpoint::capture("doorkey", 1, 0, &params, &AdamState::new(&params), &a).unwrap();
        assert!(matches!(ck.restore(&libs(true)), Err(CheckpointError::Mismatch(_))));
    }
}
