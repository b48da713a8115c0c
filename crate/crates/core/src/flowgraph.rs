//! Flow-graph view of the storage system: dealer, parties split into an
//! input and output vertex, and users. Min-cuts bound what any scheme can
//! deliver; the converse accounting removes what the adversary spoils.

use std::collections::VecDeque;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheme::{AdversaryBudget, Mode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Vertex {
    Dealer,
    PartyIn(usize),
    PartyOut(usize),
    User(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowGraph {
    vertices: Vec<Vertex>,
    /// `(from, to, capacity)` by vertex index.
    edges: Vec<(usize, usize, u64)>,
    infinity: u64,
}

/// Builds the dealer/party/user graph. `users[j]` lists the parties user
/// `j + 1` contacts. Party edges carry `alpha_v`; user edges carry `beta`
/// when given, otherwise "infinite" capacity `n * alpha_v + 1`.
pub fn build_graph(n: usize, alpha_v: u64, users: &[Vec<usize>], beta: Option<u64>) -> Result<FlowGraph> {
    if n == 0 || alpha_v == 0 {
        return Err(Error::param("flow graph needs n >= 1 and alpha_v >= 1"));
    }
    if beta == Some(0) {
        return Err(Error::param("beta must be positive"));
    }
    for set in users {
        if set.is_empty() {
            return Err(Error::param("a user must contact at least one party"));
        }
        let mut s = set.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != set.len() || s.iter().any(|&i| i == 0 || i > n) {
            return Err(Error::param("contact sets must be distinct parties in 1..=n"));
        }
    }
    let infinity = n as u64 * alpha_v + 1;
    let mut vertices = vec![Vertex::Dealer];
    for i in 1..=n {
        vertices.push(Vertex::PartyIn(i));
        vertices.push(Vertex::PartyOut(i));
    }
    vertices.extend((1..=users.len()).map(Vertex::User));
    let mut edges = Vec::new();
    for i in 1..=n {
        edges.push((0, 2 * i - 1, infinity));
        edges.push((2 * i - 1, 2 * i, alpha_v));
    }
    for (j, set) in users.iter().enumerate() {
        for &i in set {
            edges.push((2 * i, 2 * n + 1 + j, beta.unwrap_or(infinity)));
        }
    }
    Ok(FlowGraph { vertices, edges, infinity })
}

impl FlowGraph {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize, u64)] {
        &self.edges
    }

    pub fn infinity(&self) -> u64 {
        self.infinity
    }

    pub fn index_of(&self, v: Vertex) -> Option<usize> {
        self.vertices.iter().position(|&x| x == v)
    }

    /// Same graph with vertex `i` moved to index `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<FlowGraph> {
        let mut check = perm.to_vec();
        check.sort_unstable();
        if check != (0..self.vertices.len()).collect::<Vec<_>>() {
            return Err(Error::param("not a permutation of the vertex indices"));
        }
        let mut vertices = self.vertices.clone();
        for (i, &p) in perm.iter().enumerate() {
            vertices[p] = self.vertices[i];
        }
        let edges = self.edges.iter().map(|&(a, b, c)| (perm[a], perm[b], c)).collect();
        Ok(FlowGraph { vertices, edges, infinity: self.infinity })
    }

    /// Maximum flow between two vertex indices (Edmonds-Karp), with the set
    /// of vertices still reachable from the source in the final residual graph.
    pub fn max_flow(&self, source: usize, sink: usize) -> Result<(u64, Vec<usize>)> {
        let nv = self.vertices.len();
        if source >= nv || sink >= nv || source == sink {
            return Err(Error::param("source and sink must be distinct vertices"));
        }
        // residual arcs: (to, capacity), paired as 2e / 2e+1
        let mut to = Vec::with_capacity(2 * self.edges.len());
        let mut cap = Vec::with_capacity(2 * self.edges.len());
        let mut adj = vec![Vec::new(); nv];
        for &(a, b, c) in &self.edges {
            adj[a].push(to.len());
            to.push(b);
            cap.push(c);
            adj[b].push(to.len());
            to.push(a);
            cap.push(0);
        }
        let mut flow = 0;
        loop {
            let mut via = vec![usize::MAX; nv];
            let mut seen = vec![false; nv];
            seen[source] = true;
            let mut queue = VecDeque::from([source]);
            while let Some(u) = queue.pop_front() {
                for &arc in &adj[u] {
                    let w = to[arc];
                    if !seen[w] && cap[arc] > 0 {
                        seen[w] = true;
                        via[w] = arc;
                        queue.push_back(w);
                    }
                }
            }
            if !seen[sink] {
                let reach = (0..nv).filter(|&v| seen[v]).collect();
                return Ok((flow, reach));
            }
            let mut push = u64::MAX;
            let mut v = sink;
            while v != source {
                let arc = via[v];
                push = push.min(cap[arc]);
                v = to[arc ^ 1];
            }
            let mut v = sink;
            while v != source {
                let arc = via[v];
                cap[arc] -= push;
                cap[arc ^ 1] += push;
                v = to[arc ^ 1];
            }
            flow += push;
        }
    }

    /// Min-cut value between the dealer and user `j` (1-based).
    pub fn min_cut(&self, user: usize) -> Result<u64> {
        let s = self.index_of(Vertex::Dealer).expect("dealer present");
        let t = self.index_of(Vertex::User(user)).ok_or_else(|| Error::param(format!("no user {user}")))?;
        Ok(self.max_flow(s, t)?.0)
    }

    /// Total capacity of edges leaving `sink_side` 's complement into `sink_side`.
    pub fn cut_value(&self, sink_side: &[Vertex]) -> u64 {
        let inside: Vec<bool> = self.vertices.iter().map(|v| sink_side.contains(v)).collect();
        self.edges
            .iter()
            .filter(|&&(a, b, _)| !inside[a] && inside[b])
            .map(|&(_, _, c)| c)
            .sum()
    }
}

/// Split of the `k` contacted parties in the converse cut.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutAccounting {
    /// Read-only parties.
    pub read: Vec<usize>,
    /// Write-only and read-write parties.
    pub write: Vec<usize>,
    /// Untouched parties.
    pub honest: Vec<usize>,
    /// Value of the cut separating the user's in-edges.
    pub cut: u64,
    /// Cut value left after discarding spoiled edges and the privacy share.
    pub usable: u64,
}

fn deductions(budget: AdversaryBudget, mode: Mode) -> usize {
    match mode {
        // written edges carry nothing reliable, read edges carry key material
        Mode::LimitedKnowledge => budget.z_w() + budget.z_r(),
        // additionally as many honest edges are needed to outvote the writers
        Mode::Omniscient => 2 * budget.z_w() + budget.z_r(),
    }
}

fn condition(k: usize, b: AdversaryBudget, mode: Mode) -> bool {
    k > match mode {
        Mode::LimitedKnowledge => 2 * b.read_write + 2 * b.write_only + b.read_only,
        Mode::Omniscient => 3 * b.read_write + 2 * b.write_only + b.read_only,
    }
}

/// Cut accounting for a user contacting parties `1..=k`, with readers first,
/// then writers, then honest parties.
pub fn cut_accounting(n: usize, k: usize, budget: AdversaryBudget, alpha_v: u64, mode: Mode) -> Result<CutAccounting> {
    if k == 0 || k > n || budget.total() > k {
        return Err(Error::param("need 1 <= k <= n and the adversary inside the k contacted parties"));
    }
    let contacted: Vec<usize> = (1..=k).collect();
    let g = build_graph(n, alpha_v, std::slice::from_ref(&contacted), None)?;
    let cut = g.min_cut(1)?;
    let (read, rest) = contacted.split_at(budget.read_only);
    let (write, honest) = rest.split_at(budget.z_w());
    let spoiled = deductions(budget, mode);
    let usable = if condition(k, budget, mode) {
        cut - spoiled as u64 * alpha_v
    } else {
        0
    };
    Ok(CutAccounting { read: read.to_vec(), write: write.to_vec(), honest: honest.to_vec(), cut, usable })
}

/// Upper bound on the secret size: the user's min-cut with spoiled and
/// privacy edges removed, or 0 when the mode's feasibility condition fails.
pub fn converse_bound(n: usize, k: usize, budget: AdversaryBudget, alpha_v: u64, mode: Mode) -> Result<u64> {
    Ok(cut_accounting(n, k, budget, alpha_v, mode)?.usable)
}

/// Lower bound on total download `d * beta` for a user contacting `d`
/// parties: of the `d beta` crossing the trivial cut, only
/// `(d - deductions) beta` is usable and must cover the secret.
pub fn download_bound(n: usize, k: usize, budget: AdversaryBudget, alpha_v: u64, mode: Mode, d: usize) -> Result<Ratio<u64>> {
    if d < k || d > n {
        return Err(Error::param(format!("need k <= d <= n, got d = {d}")));
    }
    let secret = converse_bound(n, k, budget, alpha_v, mode)?;
    let usable = (d - deductions(budget, mode)) as u64;
    Ok(Ratio::new(d as u64 * secret, usable))
}
