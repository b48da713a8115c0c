//! Protocol layer: parameter validation, capacity and cost formulas, the
//! dealer, and the reconstructor for both adversary models.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Packet};
use crate::hashing::{
    build_match_table, compute_hashes, detect_corrupt, recover_hashes, share_hashes, GraphMode,
    HashGraph, HashSelection,
};
use crate::staircase::{
    build_message_matrix, decode_erasure, decode_with_errors, encode, ColumnDecoder, StaircaseParams,
};

/// How many parties of each kind the adversary controls.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AdversaryBudget {
    pub read_only: usize,
    pub write_only: usize,
    pub read_write: usize,
}

impl AdversaryBudget {
    pub fn new(read_only: usize, write_only: usize, read_write: usize) -> Self {
        AdversaryBudget { read_only, write_only, read_write }
    }

    /// Parties whose content the adversary sees.
    pub fn z_r(&self) -> usize {
        self.read_only + self.read_write
    }

    /// Parties whose content the adversary can overwrite.
    pub fn z_w(&self) -> usize {
        self.write_only + self.read_write
    }

    pub fn total(&self) -> usize {
        self.read_only + self.write_only + self.read_write
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Writers do not see honest parties' shares; handled with pairwise hashes.
    LimitedKnowledge,
    /// Writers see everything; handled by error-correcting decoding.
    Omniscient,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::LimitedKnowledge => "limited-knowledge",
            Mode::Omniscient => "omniscient",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchemeParams {
    n: usize,
    k: usize,
    budget: AdversaryBudget,
    mode: Mode,
    field: Field,
    v: usize,
    graph_mode: GraphMode,
    /// Present only when hashes are stored (limited knowledge with `z_w > 0`).
    graph: Option<HashGraph>,
}

impl SchemeParams {
    pub fn new(
        n: usize,
        k: usize,
        budget: AdversaryBudget,
        mode: Mode,
        q: u64,
        v: usize,
        graph_mode: GraphMode,
    ) -> Result<Self> {
        let field = Field::new(q)?;
        if k == 0 || k > n {
            return Err(Error::param(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
        }
        if budget.z_r() >= k {
            return Err(Error::param(format!("need z_r < k, got z_r = {}, k = {k}", budget.z_r())));
        }
        if budget.total() > n {
            return Err(Error::param("adversary controls more parties than exist"));
        }
        if q <= n as u64 {
            return Err(Error::param(format!("need q >= n + 1, got q = {q}, n = {n}")));
        }
        if v == 0 {
            return Err(Error::param("packet width v must be positive"));
        }
        let graph = if mode == Mode::LimitedKnowledge && budget.z_w() > 0 {
            Some(HashGraph::build(n, graph_mode)?)
        } else {
            None
        };
        Ok(SchemeParams { n, k, budget, mode, field, v, graph_mode, graph })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn budget(&self) -> AdversaryBudget {
        self.budget
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn z_r(&self) -> usize {
        self.budget.z_r()
    }

    pub fn z_w(&self) -> usize {
        self.budget.z_w()
    }

    pub fn graph_mode(&self) -> GraphMode {
        self.graph_mode
    }

    pub fn hash_graph(&self) -> Option<&HashGraph> {
        self.graph.as_ref()
    }

    /// Right-hand side of the mode's feasibility inequality `k > rhs`.
    pub fn condition_bound(&self) -> usize {
        let b = self.budget;
        match self.mode {
            Mode::LimitedKnowledge => 2 * b.read_write + 2 * b.write_only + b.read_only,
            Mode::Omniscient => 3 * b.read_write + 2 * b.write_only + b.read_only,
        }
    }

    pub fn condition_holds(&self) -> bool {
        self.k > self.condition_bound()
    }

    /// The inequality a positive capacity needs, with the numbers substituted.
    pub fn condition_text(&self) -> String {
        let b = self.budget;
        let form = match self.mode {
            Mode::LimitedKnowledge => "k > 2z_rw + 2z_wo + z_ro",
            Mode::Omniscient => "k > 3z_rw + 2z_wo + z_ro",
        };
        format!(
            "{form} ({} > {}, with z_ro = {}, z_wo = {}, z_rw = {})",
            self.k,
            self.condition_bound(),
            b.read_only,
            b.write_only,
            b.read_write
        )
    }

    /// How many contacts the code must be able to absorb as corrupted or discarded.
    fn discarded(&self) -> usize {
        match self.mode {
            Mode::LimitedKnowledge => self.z_w(),
            Mode::Omniscient => 2 * self.z_w(),
        }
    }

    /// The Staircase code underneath. Fails when the mode condition does not hold.
    pub fn staircase(&self) -> Result<StaircaseParams> {
        if !self.condition_holds() {
            return Err(Error::NoSecretCapacity(format!(
                "parameters admit no secret: {} does not hold",
                self.condition_text()
            )));
        }
        let off = self.discarded();
        StaircaseParams::derive(self.n, self.k - off, self.z_r(), self.n - off)
    }

    /// Secret size in field elements; zero when the mode condition fails.
    pub fn capacity(&self) -> usize {
        self.staircase().map_or(0, |sc| sc.secret_len() * self.v)
    }

    fn check_contacts(&self, d: usize) -> Result<()> {
        if d < self.k || d > self.n {
            return Err(Error::param(format!("need k <= d <= n, got d = {d}")));
        }
        Ok(())
    }

    /// Packets each contacted party sends when `d` parties are contacted.
    pub fn download_columns(&self, d: usize) -> Result<usize> {
        self.check_contacts(d)?;
        let sc = self.staircase()?;
        Ok(sc.level_for(d - self.discarded())?.cumulative)
    }

    /// Total payload elements downloaded from `d` parties (0 at zero capacity).
    pub fn comm_cost(&self, d: usize) -> Result<usize> {
        self.check_contacts(d)?;
        if !self.condition_holds() {
            return Ok(0);
        }
        Ok(d * self.download_columns(d)? * self.v)
    }

    /// The hash elements a user contacting `parties` downloads.
    pub fn hash_selection(&self, parties: &[usize]) -> Result<Option<HashSelection>> {
        let Some(graph) = &self.graph else {
            return Ok(None);
        };
        let columns = self.download_columns(parties.len())?;
        Ok(Some(HashSelection::for_parties(graph, parties, columns)))
    }

    fn packets_from(&self, elements: &[u64]) -> Vec<Packet> {
        elements.chunks(self.v).map(|c| Packet(c.to_vec())).collect()
    }

    /// Deals `secret` (exactly `capacity()` elements) with fresh keys and hash masks.
    pub fn deal<R: Rng + ?Sized>(&self, secret: &[u64], rng: &mut R) -> Result<Vec<PartyState>> {
        let sc = self.staircase()?;
        let keys: Vec<u64> = (0..sc.key_len() * self.v).map(|_| self.field.random(rng)).collect();
        self.deal_with_keys(secret, &keys, rng)
    }

    /// Deals with caller-chosen keys (`key_len * v` elements); `rng` only feeds the hash masks.
    pub fn deal_with_keys<R: Rng + ?Sized>(
        &self,
        secret: &[u64],
        keys: &[u64],
        rng: &mut R,
    ) -> Result<Vec<PartyState>> {
        let sc = self.staircase()?;
        if secret.len() != self.capacity() {
            return Err(Error::param(format!(
                "secret has {} elements, capacity is {}",
                secret.len(),
                self.capacity()
            )));
        }
        if keys.len() != sc.key_len() * self.v {
            return Err(Error::param(format!(
                "got {} key elements, expected {}",
                keys.len(),
                sc.key_len() * self.v
            )));
        }
        if secret.iter().chain(keys).any(|&x| x >= self.field.modulus()) {
            return Err(Error::param("secret and key elements must be reduced mod q"));
        }
        let m = build_message_matrix(&sc, &self.packets_from(secret), &self.packets_from(keys))?;
        let payloads = encode(&self.field, &sc, &m)?.into_rows();
        let hash_shares = match &self.graph {
            Some(graph) => {
                let hashes = compute_hashes(&self.field, &payloads, graph)?;
                share_hashes(&self.field, &hashes, self.n, self.z_r(), rng)?.into_parties()
            }
            None => vec![Vec::new(); self.n],
        };
        Ok(payloads
            .into_iter()
            .zip(hash_shares)
            .enumerate()
            .map(|(i, (payload, hash_shares))| PartyState { id: i + 1, payload, hash_shares })
            .collect())
    }

    /// Reconstructs from one response per contacted party.
    pub fn reconstruct(&self, responses: &[Response]) -> Result<ReconstructionReport> {
        let d = responses.len();
        let columns = self.download_columns(d)?;
        let ids: Vec<usize> = responses.iter().map(|r| r.party).collect();
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != d || sorted.iter().any(|&i| i == 0 || i > self.n) {
            return Err(Error::param("responses must come from distinct parties in 1..=n"));
        }
        for r in responses {
            if r.payload.len() != columns || r.payload.iter().any(|p| p.width() != self.v) {
                return Err(Error::param(format!(
                    "party {} sent {} packets, expected {columns} of width {}",
                    r.party,
                    r.payload.len(),
                    self.v
                )));
            }
        }
        let selection = self.hash_selection(&ids)?;
        let expected_hash = selection.as_ref().map_or(0, HashSelection::len);
        if let Some(r) = responses.iter().find(|r| r.hash_shares.len() != expected_hash) {
            return Err(Error::param(format!(
                "party {} sent {} hash shares, expected {expected_hash}",
                r.party,
                r.hash_shares.len()
            )));
        }

        let mut report = ReconstructionReport {
            status: Status::Success,
            secret: None,
            removed: Vec::new(),
            payload_elements: responses.iter().map(|r| r.payload.len() * self.v).sum(),
            hash_elements: responses.iter().map(|r| r.hash_shares.len()).sum(),
            per_party_read: responses.iter().map(|r| (r.party, r.elements_read)).collect(),
            message: None,
        };
        let rows: Vec<(usize, &[Packet])> = responses.iter().map(|r| (r.party, r.payload.as_slice())).collect();
        let sc = self.staircase()?;

        let outcome = match (self.mode, selection) {
            (Mode::LimitedKnowledge, None) => decode_erasure(&self.field, &sc, &rows),
            (Mode::LimitedKnowledge, Some(selection)) => {
                self.decode_limited(&sc, &selection, responses, &rows, &mut report.removed)
            }
            (Mode::Omniscient, _) => {
                decode_with_errors(&self.field, &sc, &rows, self.z_w(), ColumnDecoder::default()).map(|dec| {
                    report.removed = dec.error_parties;
                    dec.secret
                })
            }
        };
        match outcome {
            Ok(packets) => {
                report.secret = Some(packets.into_iter().flat_map(|p| p.0).collect());
            }
            Err(
                e @ (Error::HashRecoveryFailure(_) | Error::DetectionAbort(_) | Error::DecodingFailure(_)),
            ) => {
                report.status = Status::DetectedAbort;
                report.message = Some(e.to_string());
            }
            Err(e) => {
                report.status = Status::Failure;
                report.message = Some(e.to_string());
            }
        }
        Ok(report)
    }

    fn decode_limited(
        &self,
        sc: &StaircaseParams,
        selection: &HashSelection,
        responses: &[Response],
        rows: &[(usize, &[Packet])],
        removed: &mut Vec<usize>,
    ) -> Result<Vec<Packet>> {
        let graph = self.graph.as_ref().expect("hash selection implies a graph");
        let shares: Vec<(usize, &[u64])> = responses.iter().map(|r| (r.party, r.hash_shares.as_slice())).collect();
        let verified = recover_hashes(&self.field, &shares, self.z_r(), self.z_w())?;
        let table = build_match_table(&self.field, graph, selection, &verified, rows)?;
        let detection = detect_corrupt(&table, self.z_w())?;
        *removed = detection.removed;
        let keep = rows.len() - self.z_w();
        let mut survivors: Vec<(usize, &[Packet])> =
            rows.iter().copied().filter(|(id, _)| detection.honest.contains(id)).collect();
        survivors.sort_by_key(|r| r.0);
        if survivors.len() < keep {
            return Err(Error::DetectionAbort(format!(
                "{} consistent parties, need {keep}",
                survivors.len()
            )));
        }
        survivors.truncate(keep);
        decode_erasure(&self.field, sc, &survivors)
    }
}

/// One party's stored data.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyState {
    pub id: usize,
    pub payload: Vec<Packet>,
    pub hash_shares: Vec<u64>,
}

impl PartyState {
    /// What this party sends to a user contacting `contacted` (which includes it).
    pub fn serve(&self, params: &SchemeParams, contacted: &[usize]) -> Result<Response> {
        if !contacted.contains(&self.id) {
            return Err(Error::param(format!("party {} is not in the contact set", self.id)));
        }
        let columns = params.download_columns(contacted.len())?;
        if self.payload.len() < columns {
            return Err(Error::param(format!("party {} stores fewer than {columns} packets", self.id)));
        }
        let payload = self.payload[..columns].to_vec();
        let hash_shares = match (params.hash_selection(contacted)?, params.hash_graph()) {
            (Some(sel), Some(graph)) => sel
                .element_indices(graph)
                .into_iter()
                .map(|i| {
                    self.hash_shares
                        .get(i)
                        .copied()
                        .ok_or_else(|| Error::param(format!("party {} is missing hash share {i}", self.id)))
                })
                .collect::<Result<_>>()?,
            _ => Vec::new(),
        };
        let elements_read = payload.iter().map(Packet::width).sum();
        Ok(Response { party: self.id, payload, hash_shares, elements_read })
    }
}

/// What a contacted party transmits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub party: usize,
    pub payload: Vec<Packet>,
    pub hash_shares: Vec<u64>,
    /// Payload elements the party read from storage to answer.
    pub elements_read: usize,
}

/// Serves every party in `contacted`, in order.
pub fn collect_responses(
    params: &SchemeParams,
    states: &[PartyState],
    contacted: &[usize],
) -> Result<Vec<Response>> {
    contacted
        .iter()
        .map(|&id| {
            states
                .iter()
                .find(|s| s.id == id)
                .ok_or_else(|| Error::param(format!("no state for party {id}")))?
                .serve(params, contacted)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Success,
    DetectedAbort,
    Failure,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub status: Status,
    pub secret: Option<Vec<u64>>,
    pub removed: Vec<usize>,
    pub payload_elements: usize,
    pub hash_elements: usize,
    pub per_party_read: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}
