//! Pairwise inner-product hashes, their Shamir protection, verified recovery,
//! and the comparison-table detector that singles out corrupted parties.

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Packet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphMode {
    Complete,
    Sparse { seed: u64 },
}

/// Which party pairs carry a hash. Edges are `(i, j)` with `i < j`, 1-based,
/// sorted; the edge index is the position in that list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashGraph {
    n: usize,
    mode: GraphMode,
    edges: Vec<(usize, usize)>,
    /// Rejected sparse draws before a connected one was found.
    resamples: u32,
}

/// Edge probability for the sparse hash graph, `(ln n + ln ln n) / n`.
pub fn sparse_edge_probability(n: usize) -> f64 {
    let n = n as f64;
    (n.ln() + n.ln().ln()) / n
}

impl HashGraph {
    pub fn complete(n: usize) -> Self {
        let edges = (1..=n).flat_map(|i| (i + 1..=n).map(move |j| (i, j))).collect();
        HashGraph { n, mode: GraphMode::Complete, edges, resamples: 0 }
    }

    pub fn build(n: usize, mode: GraphMode) -> Result<Self> {
        match mode {
            GraphMode::Complete => Ok(Self::complete(n)),
            GraphMode::Sparse { seed } => build_sparse_graph(n, seed),
        }
    }

    /// Rebuilds a graph from a stored edge list (e.g. a bundle manifest).
    pub fn from_edges(n: usize, mode: GraphMode, edges: Vec<(usize, usize)>) -> Result<Self> {
        for w in edges.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::param("hash graph edges must be sorted and unique"));
            }
        }
        if edges.iter().any(|&(i, j)| i == 0 || i >= j || j > n) {
            return Err(Error::param("hash graph edge outside 1..=n or not ordered i < j"));
        }
        Ok(HashGraph { n, mode, edges, resamples: 0 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> GraphMode {
        self.mode
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn resamples(&self) -> u32 {
        self.resamples
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        let key = (a.min(b), a.max(b));
        self.edges.binary_search(&key).ok()
    }

    /// Indices of edges with both endpoints in `parties`.
    pub fn induced(&self, parties: &[usize]) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, (i, j))| parties.contains(i) && parties.contains(j))
            .map(|(e, _)| e)
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        let all: Vec<usize> = (1..=self.n).collect();
        components(&all, |a, b| self.edge_index(a, b).is_some())
            .first()
            .is_some_and(|c| c.len() == self.n)
    }
}

/// Connected components of `vertices` under `adjacent`, largest first
/// (ties broken by smallest member).
fn components(vertices: &[usize], adjacent: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut seen = vec![false; vertices.len()];
    let mut out = Vec::new();
    for start in 0..vertices.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![vertices[start]];
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for w in 0..vertices.len() {
                if !seen[w] && adjacent(vertices[u], vertices[w]) {
                    seen[w] = true;
                    comp.push(vertices[w]);
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    out
}

/// Draws a sparse hash graph: every vertex independently picks each other
/// vertex as a neighbour with probability `(ln n + ln ln n) / n`, and the
/// graph is the union of those picks. Draws are repeated with seed `seed + 1`,
/// `seed + 2`, ... until the graph is connected.
pub fn build_sparse_graph(n: usize, seed: u64) -> Result<HashGraph> {
    if n < 3 {
        return Err(Error::param(format!("sparse hash graph needs n >= 3, got {n}")));
    }
    let p = sparse_edge_probability(n);
    if p >= 1.0 {
        let mut g = HashGraph::complete(n);
        g.mode = GraphMode::Sparse { seed };
        return Ok(g);
    }
    for attempt in 0u32.. {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(u64::from(attempt)));
        let mut picked = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.random::<f64>() < p {
                    picked[i.min(j) * n + i.max(j)] = true;
                }
            }
        }
        let edges = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| picked[i * n + j])
            .map(|(i, j)| (i + 1, j + 1))
            .collect();
        let g = HashGraph { n, mode: GraphMode::Sparse { seed }, edges, resamples: attempt };
        if g.is_connected() {
            return Ok(g);
        }
    }
    unreachable!("attempt counter exhausted")
}

/// Hash values `h_m[e] = <w_{i,m}, w_{j,m}>` for every column `m` and edge
/// `e = {i, j}`, stored column-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairHashes {
    columns: usize,
    edges: usize,
    values: Vec<u64>,
}

impl PairHashes {
    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn edges(&self) -> usize {
        self.edges
    }

    pub fn get(&self, column: usize, edge: usize) -> u64 {
        self.values[column * self.edges + edge]
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }
}

/// `payloads[i - 1]` is party `i`'s share.
pub fn compute_hashes(field: &Field, payloads: &[Vec<Packet>], graph: &HashGraph) -> Result<PairHashes> {
    if payloads.len() != graph.n() {
        return Err(Error::param("payload count differs from hash graph size"));
    }
    let columns = payloads.first().map_or(0, Vec::len);
    let mut values = Vec::with_capacity(columns * graph.edge_count());
    for m in 0..columns {
        for &(i, j) in graph.edges() {
            values.push(field.dot(payloads[i - 1][m].as_slice(), payloads[j - 1][m].as_slice())?);
        }
    }
    Ok(PairHashes { columns, edges: graph.edge_count(), values })
}

/// Shamir shares of one element at points `1..=n`: constant term `secret`,
/// higher coefficients `masks`.
pub fn shamir_share(field: &Field, secret: u64, masks: &[u64], n: usize) -> Vec<u64> {
    let mut coeffs = Vec::with_capacity(masks.len() + 1);
    coeffs.push(secret);
    coeffs.extend_from_slice(masks);
    (1..=n as u64).map(|x| field.eval_poly(&coeffs, x)).collect()
}

/// Per-party hash shares, aligned with [`PairHashes`] element order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HashShareSet {
    shares: Vec<Vec<u64>>,
}

impl HashShareSet {
    pub fn party(&self, id: usize) -> &[u64] {
        &self.shares[id - 1]
    }

    pub fn into_parties(self) -> Vec<Vec<u64>> {
        self.shares
    }
}

/// Shares every hash element with threshold `z_r + 1`; any `z_r` shares of
/// an element are jointly uniform.
pub fn share_hashes<R: Rng + ?Sized>(
    field: &Field,
    hashes: &PairHashes,
    n: usize,
    z_r: usize,
    rng: &mut R,
) -> Result<HashShareSet> {
    if field.modulus() <= n as u64 {
        return Err(Error::param("hash sharing needs q >= n + 1"));
    }
    let mut shares = vec![Vec::with_capacity(hashes.values.len()); n];
    let mut masks = vec![0; z_r];
    for &h in &hashes.values {
        for m in &mut masks {
            *m = field.random(rng);
        }
        for (party, s) in shamir_share(field, h, &masks, n).into_iter().enumerate() {
            shares[party].push(s);
        }
    }
    Ok(HashShareSet { shares })
}

/// Recovers each hash element from `d` downloaded share vectors of which at
/// most `z_w` may be corrupted. Every `(z_r + 1)`-subset is interpolated; the
/// unique polynomial agreeing with at least `d - z_w` shares is accepted.
pub fn recover_hashes(field: &Field, shares: &[(usize, &[u64])], z_r: usize, z_w: usize) -> Result<Vec<u64>> {
    let d = shares.len();
    let k_h = z_r + 1;
    if d < z_r + z_w + 1 {
        return Err(Error::param(format!(
            "hash recovery needs d >= z_r + z_w + 1 = {}, got {d}",
            z_r + z_w + 1
        )));
    }
    let len = shares.first().map_or(0, |s| s.1.len());
    if shares.iter().any(|s| s.1.len() != len) {
        return Err(Error::param("hash share vectors differ in length"));
    }
    let points: Vec<u64> = shares.iter().map(|s| s.0 as u64).collect();
    let threshold = d - z_w;

    // For every k_h-subset: Lagrange weights to every contacted point and to 0.
    let mut bases = Vec::new();
    let mut subset: Vec<usize> = (0..k_h).collect();
    loop {
        let xs: Vec<u64> = subset.iter().map(|&i| points[i]).collect();
        let at_points = points
            .iter()
            .map(|&x| field.lagrange_basis(&xs, x))
            .collect::<Result<Vec<_>>>()?;
        let at_zero = field.lagrange_basis(&xs, 0)?;
        bases.push((subset.clone(), at_points, at_zero));
        let Some(pos) = (0..k_h).rev().find(|&i| subset[i] < d - k_h + i) else {
            break;
        };
        subset[pos] += 1;
        for i in pos + 1..k_h {
            subset[i] = subset[i - 1] + 1;
        }
    }

    let mut out = Vec::with_capacity(len);
    let mut evals = vec![0; d];
    for elem in 0..len {
        let ys: Vec<u64> = shares.iter().map(|s| s.1[elem]).collect();
        let mut accepted: Option<(Vec<u64>, u64)> = None;
        for (subset, at_points, at_zero) in &bases {
            let ys_sub: Vec<u64> = subset.iter().map(|&i| ys[i]).collect();
            let mut agree = 0;
            for (i, w) in at_points.iter().enumerate() {
                evals[i] = field.dot(w, &ys_sub)?;
                agree += usize::from(evals[i] == ys[i]);
            }
            if agree < threshold {
                continue;
            }
            match &accepted {
                Some((prev, _)) if *prev != evals => {
                    return Err(Error::HashRecoveryFailure(format!(
                        "element {elem}: two distinct candidates reach {threshold} agreements"
                    )));
                }
                Some(_) => {}
                None => accepted = Some((evals.clone(), field.dot(at_zero, &ys_sub)?)),
            }
        }
        match accepted {
            Some((_, value)) => out.push(value),
            None => {
                return Err(Error::HashRecoveryFailure(format!(
                    "element {elem}: no candidate reaches {threshold} agreements"
                )))
            }
        }
    }
    Ok(out)
}

/// The hash elements a user downloads: `columns` leading columns over the
/// listed graph edges, column-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HashSelection {
    pub columns: usize,
    pub edges: Vec<usize>,
}

impl HashSelection {
    /// Edges induced by `parties`, for the first `columns` columns.
    pub fn for_parties(graph: &HashGraph, parties: &[usize], columns: usize) -> Self {
        HashSelection { columns, edges: graph.induced(parties) }
    }

    pub fn len(&self) -> usize {
        self.columns * self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Positions of the selected elements inside a party's full hash share vector.
    pub fn element_indices(&self, graph: &HashGraph) -> Vec<usize> {
        let total = graph.edge_count();
        (0..self.columns)
            .flat_map(|m| self.edges.iter().map(move |&e| m * total + e))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Match,
    Mismatch,
    Untested,
}

/// Recomputed-vs-verified hash comparison over the contacted parties.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchTable {
    parties: Vec<usize>,
    entries: Vec<Vec<Comparison>>,
}

impl MatchTable {
    /// Builds a table directly from a comparison matrix (symmetric, diagonal `Match`).
    pub fn from_entries(parties: Vec<usize>, entries: Vec<Vec<Comparison>>) -> Result<Self> {
        let d = parties.len();
        if entries.len() != d || entries.iter().any(|r| r.len() != d) {
            return Err(Error::param("match table must be square over the contacted parties"));
        }
        for a in 0..d {
            for b in 0..d {
                if entries[a][b] != entries[b][a] {
                    return Err(Error::param("match table must be symmetric"));
                }
            }
        }
        Ok(MatchTable { parties, entries })
    }

    pub fn parties(&self) -> &[usize] {
        &self.parties
    }

    pub fn entry(&self, a: usize, b: usize) -> Comparison {
        self.entries[a][b]
    }

    pub fn mismatches(&self) -> usize {
        self.entries.iter().flatten().filter(|&&c| c == Comparison::Mismatch).count() / 2
    }
}

pub fn build_match_table(
    field: &Field,
    graph: &HashGraph,
    selection: &HashSelection,
    verified: &[u64],
    payloads: &[(usize, &[Packet])],
) -> Result<MatchTable> {
    if verified.len() != selection.len() {
        return Err(Error::param("verified hash count differs from selection"));
    }
    if payloads.iter().any(|(_, row)| row.len() < selection.columns) {
        return Err(Error::param("payload shorter than downloaded hash columns"));
    }
    let d = payloads.len();
    let stride = selection.edges.len();
    let mut entries = vec![vec![Comparison::Untested; d]; d];
    for a in 0..d {
        entries[a][a] = Comparison::Match;
        for b in a + 1..d {
            let (ia, ra) = payloads[a];
            let (ib, rb) = payloads[b];
            let Some(edge) = graph.edge_index(ia, ib) else {
                continue;
            };
            let Some(t) = selection.edges.iter().position(|&e| e == edge) else {
                continue;
            };
            let mut ok = true;
            for m in 0..selection.columns {
                if field.dot(ra[m].as_slice(), rb[m].as_slice())? != verified[m * stride + t] {
                    ok = false;
                    break;
                }
            }
            let c = if ok { Comparison::Match } else { Comparison::Mismatch };
            entries[a][b] = c;
            entries[b][a] = c;
        }
    }
    Ok(MatchTable { parties: payloads.iter().map(|p| p.0).collect(), entries })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub honest: Vec<usize>,
    pub removed: Vec<usize>,
}

/// Repeatedly drops the party with the most mismatches (lowest id on ties)
/// until the survivors agree, then keeps the largest component of matching
/// edges. Aborts if more than `z_w` parties had to go or the component is
/// smaller than `d - z_w`.
pub fn detect_corrupt(table: &MatchTable, z_w: usize) -> Result<Detection> {
    let d = table.parties.len();
    if d <= 2 * z_w {
        return Err(Error::param(format!(
            "detection needs more than 2 z_w = {} contacted parties, got {d}",
            2 * z_w
        )));
    }
    let mut alive = vec![true; d];
    let mut dropped = 0;
    loop {
        let counts: Vec<usize> = (0..d)
            .map(|a| {
                if !alive[a] {
                    return 0;
                }
                (0..d).filter(|&b| alive[b] && table.entries[a][b] == Comparison::Mismatch).count()
            })
            .collect();
        let max = *counts.iter().max().unwrap_or(&0);
        if max == 0 {
            break;
        }
        let worst = (0..d)
            .filter(|&a| counts[a] == max)
            .min_by_key(|&a| table.parties[a])
            .expect("some party attains the maximum");
        alive[worst] = false;
        dropped += 1;
        if dropped > z_w {
            return Err(Error::DetectionAbort(format!(
                "more than z_w = {z_w} parties disagree with the hashes"
            )));
        }
    }

    let survivors: Vec<usize> = (0..d).filter(|&a| alive[a]).collect();
    let comps = components(&survivors, |a, b| table.entries[a][b] == Comparison::Match);
    let best = comps.into_iter().next().unwrap_or_default();
    if best.len() < d - z_w {
        return Err(Error::DetectionAbort(format!(
            "largest consistent component has {} parties, need {}",
            best.len(),
            d - z_w
        )));
    }
    let honest: Vec<usize> = best.iter().map(|&a| table.parties[a]).collect();
    let mut removed: Vec<usize> =
        table.parties.iter().copied().filter(|p| !honest.contains(p)).collect();
    removed.sort_unstable();
    let mut honest = honest;
    honest.sort_unstable();
    Ok(Detection { honest, removed })
}

/// Stored hash elements per party over payload elements per party:
/// `alpha |E| / (alpha v)`.
pub fn hash_overhead(alpha: usize, v: usize, graph: &HashGraph) -> Ratio<u64> {
    Ratio::new((alpha * graph.edge_count()) as u64, (alpha * v) as u64)
}
