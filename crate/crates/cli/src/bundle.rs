//! On-disk share bundle: `manifest.json` plus one `party_<i>.json` per party.

use std::fs;
use std::path::Path;

use rcess::adversary::StrategyKind;
use rcess::hashing::GraphMode;
use rcess::scheme::PartyState;
use rcess::staircase::Level;
use rcess::{AdversaryBudget, Mode, Packet, SchemeParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecretFormat {
    Bytes,
    Elements,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelEntry {
    pub contacts: usize,
    pub width: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionEntry {
    pub parties: Vec<usize>,
    pub strategy: StrategyKind,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub n: usize,
    pub k: usize,
    pub z_ro: usize,
    pub z_wo: usize,
    pub z_rw: usize,
    pub mode: Mode,
    pub q: u64,
    pub v: usize,
    pub hash_graph: GraphMode,
    pub secret_format: SecretFormat,
    /// Meaningful secret elements (element mode); the rest is zero padding.
    pub secret_elements: usize,
    pub alpha: usize,
    pub levels: Vec<LevelEntry>,
    pub hash_edges: Vec<(usize, usize)>,
    /// Hash share element `m * |hash_edges| + e` belongs to column `m`, edge `e`.
    pub hash_order: String,
    /// Written by `corrupt` for test oracles; reconstruction ignores it.
    #[serde(default)]
    pub corruption_log: Vec<CorruptionEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyRecord {
    pub party: usize,
    /// `alpha` rows of `v` elements.
    pub payload: Vec<Vec<u64>>,
    pub hash_shares: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareBundle {
    pub manifest: Manifest,
    pub parties: Vec<PartyRecord>,
}

fn manifest_for(params: &SchemeParams, secret_format: SecretFormat, secret_elements: usize) -> Result<Manifest, CliError> {
    let sc = params.staircase()?;
    let b = params.budget();
    Ok(Manifest {
        format_version: FORMAT_VERSION,
        n: params.n(),
        k: params.k(),
        z_ro: b.read_only,
        z_wo: b.write_only,
        z_rw: b.read_write,
        mode: params.mode(),
        q: params.field().modulus(),
        v: params.v(),
        hash_graph: params.graph_mode(),
        secret_format,
        secret_elements,
        alpha: sc.alpha(),
        levels: sc.levels().iter().map(|l: &Level| LevelEntry { contacts: l.contacts, width: l.width }).collect(),
        hash_edges: params.hash_graph().map(|g| g.edges().to_vec()).unwrap_or_default(),
        hash_order: "column_major".into(),
        corruption_log: Vec::new(),
    })
}

impl ShareBundle {
    pub fn from_states(
        params: &SchemeParams,
        states: &[PartyState],
        secret_format: SecretFormat,
        secret_elements: usize,
    ) -> Result<Self, CliError> {
        Ok(ShareBundle {
            manifest: manifest_for(params, secret_format, secret_elements)?,
            parties: states.iter().map(record_of).collect(),
        })
    }

    /// Rebuilds the parameters and checks the stored derived fields against them.
    pub fn params(&self) -> Result<SchemeParams, CliError> {
        let m = &self.manifest;
        if m.format_version != FORMAT_VERSION {
            return Err(CliError::Param(format!("unsupported bundle format version {}", m.format_version)));
        }
        let params = SchemeParams::new(
            m.n,
            m.k,
            AdversaryBudget::new(m.z_ro, m.z_wo, m.z_rw),
            m.mode,
            m.q,
            m.v,
            m.hash_graph,
        )?;
        let mut expected = manifest_for(&params, m.secret_format, m.secret_elements)?;
        expected.corruption_log = m.corruption_log.clone();
        if expected != *m {
            return Err(CliError::Param("manifest derived fields disagree with its parameters".into()));
        }
        Ok(params)
    }

    pub fn states(&self, params: &SchemeParams) -> Result<Vec<PartyState>, CliError> {
        let m = &self.manifest;
        let hash_len = m.alpha * m.hash_edges.len();
        if self.parties.len() != m.n {
            return Err(CliError::Param(format!("bundle has {} party records, expected {}", self.parties.len(), m.n)));
        }
        self.parties
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let bad = |what: &str| CliError::Param(format!("party record {}: {what}", i + 1));
                if r.party != i + 1 {
                    return Err(bad("party id out of order"));
                }
                if r.payload.len() != m.alpha || r.payload.iter().any(|p| p.len() != m.v) {
                    return Err(bad("payload shape differs from manifest"));
                }
                if r.hash_shares.len() != hash_len {
                    return Err(bad("hash share count differs from manifest"));
                }
                let q = params.field().modulus();
                if r.payload.iter().flatten().chain(&r.hash_shares).any(|&x| x >= q) {
                    return Err(bad("element not below q"));
                }
                Ok(PartyState {
                    id: r.party,
                    payload: r.payload.iter().map(|p| Packet(p.clone())).collect(),
                    hash_shares: r.hash_shares.clone(),
                })
            })
            .collect()
    }

    pub fn set_states(&mut self, states: &[PartyState]) {
        self.parties = states.iter().map(record_of).collect();
    }

    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let manifest: Manifest = read_json(&dir.join("manifest.json"))?;
        let parties = (1..=manifest.n)
            .map(|i| read_json(&dir.join(format!("party_{i}.json"))))
            .collect::<Result<_, _>>()?;
        Ok(ShareBundle { manifest, parties })
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        write_json(&dir.join("manifest.json"), &self.manifest)?;
        for r in &self.parties {
            write_json(&dir.join(format!("party_{}.json", r.party)), r)?;
        }
        Ok(())
    }
}

fn record_of(s: &PartyState) -> PartyRecord {
    PartyRecord {
        party: s.id,
        payload: s.payload.iter().map(|p| p.0.clone()).collect(),
        hash_shares: s.hash_shares.clone(),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Param(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
