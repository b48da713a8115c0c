//! Universal Staircase codes.
//!
//! A Staircase code stores `alpha` packets per party. The message matrix is
//! split into column blocks, one per supported contact count `D_1 > ... > D_h`.
//! Block `j` has support on rows `1..D_j`; its top `D_j - Z` rows carry the
//! overflow of earlier columns (rows `D_j+1..D_{j-1}`), so a user contacting
//! `D_j` parties only needs the first `alpha_j` columns and can peel the
//! blocks back from `j` to `1`.
//!
//! Party `i` is assigned evaluation point `i`, and its share is row `i` of
//! `Vandermonde(1..N, N) * M`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{solve_general, solve_linear, vandermonde, Field, Matrix, Packet};

/// One block of the staircase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Level {
    /// Number of contacted parties this level serves (`D_j`).
    pub contacts: usize,
    /// Packets downloaded per party at this level (`alpha_j`).
    pub cumulative: usize,
    /// Columns belonging to this block (`gamma_j = alpha_j - alpha_{j-1}`).
    pub width: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaircaseParams {
    n: usize,
    k: usize,
    z: usize,
    d_max: usize,
    alpha: usize,
    levels: Vec<Level>,
}

/// What a message-matrix entry carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Zero,
    Secret(usize),
    Key(usize),
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

impl StaircaseParams {
    /// Derives the level structure for `N` shares, threshold `K`, privacy
    /// `Z` and largest contact count `D_max`.
    pub fn derive(n: usize, k: usize, z: usize, d_max: usize) -> Result<Self> {
        if k <= z {
            return Err(Error::NoSecretCapacity(format!(
                "reconstruction threshold K = {k} must exceed privacy threshold Z = {z}"
            )));
        }
        if d_max > n {
            return Err(Error::param(format!("D_max = {d_max} exceeds share count N = {n}")));
        }
        if d_max < k {
            return Err(Error::param(format!("D_max = {d_max} is below threshold K = {k}")));
        }
        let alpha = (k + 1..=d_max).map(|d| d - z).fold(1, lcm);
        let mut levels = Vec::with_capacity(d_max - k + 1);
        let mut prev = 0;
        for contacts in (k..=d_max).rev() {
            let cumulative = (k - z) * alpha / (contacts - z);
            debug_assert_eq!((k - z) * alpha % (contacts - z), 0);
            levels.push(Level { contacts, cumulative, width: cumulative - prev });
            prev = cumulative;
        }
        Ok(StaircaseParams { n, k, z, d_max, alpha, levels })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn z(&self) -> usize {
        self.z
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    /// Levels ordered from `D_max` (first, narrowest download) down to `K`.
    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn level_index(&self, contacts: usize) -> Option<usize> {
        self.levels.iter().position(|l| l.contacts == contacts)
    }

    pub fn level_for(&self, contacts: usize) -> Result<&Level> {
        self.level_index(contacts).map(|i| &self.levels[i]).ok_or_else(|| {
            Error::param(format!(
                "contact count {contacts} is not a supported level ({}..={})",
                self.k, self.d_max
            ))
        })
    }

    /// Number of secret packets: `(K - Z) * alpha`.
    pub fn secret_len(&self) -> usize {
        (self.k - self.z) * self.alpha
    }

    /// Number of key packets: `Z * alpha`.
    pub fn key_len(&self) -> usize {
        self.z * self.alpha
    }

    fn block_columns(&self, j: usize) -> std::ops::Range<usize> {
        let start = if j == 0 { 0 } else { self.levels[j - 1].cumulative };
        start..self.levels[j].cumulative
    }

    /// Overflow relocation for block `j >= 1`: pairs `(source, destination)`
    /// of `(row, column)` positions, both enumerated column-major.
    fn overflow_map(&self, j: usize) -> Vec<((usize, usize), (usize, usize))> {
        let (prev, cur) = (self.levels[j - 1], self.levels[j]);
        let sources = (0..prev.cumulative)
            .flat_map(|c| (cur.contacts..prev.contacts).map(move |r| (r, c)));
        let z = self.z;
        let dests = self
            .block_columns(j)
            .flat_map(|c| (0..cur.contacts - z).map(move |r| (r, c)));
        let pairs: Vec<_> = sources.zip(dests).collect();
        debug_assert_eq!(pairs.len(), prev.cumulative * (prev.contacts - cur.contacts));
        debug_assert_eq!(pairs.len(), (cur.contacts - self.z) * cur.width);
        pairs
    }

    /// The `N x alpha` staircase fill pattern.
    pub fn layout(&self) -> Vec<Vec<Slot>> {
        let mut grid = vec![vec![Slot::Zero; self.alpha]; self.n];
        let mut next_key = 0;
        let first = self.levels[0];
        let data_rows = first.contacts - self.z;
        for c in self.block_columns(0) {
            for r in 0..data_rows {
                grid[r][c] = Slot::Secret(c * data_rows + r);
            }
        }
        for j in 0..self.levels.len() {
            if j > 0 {
                for ((sr, sc), (dr, dc)) in self.overflow_map(j) {
                    grid[dr][dc] = grid[sr][sc];
                }
            }
            let contacts = self.levels[j].contacts;
            for c in self.block_columns(j) {
                for row in grid.iter_mut().take(contacts).skip(contacts - self.z) {
                    row[c] = Slot::Key(next_key);
                    next_key += 1;
                }
            }
        }
        debug_assert_eq!(next_key, self.key_len());
        grid
    }

    fn check_field(&self, field: &Field) -> Result<()> {
        if field.modulus() <= self.n as u64 {
            return Err(Error::param(format!(
                "field size q = {} must be at least N + 1 = {}",
                field.modulus(),
                self.n + 1
            )));
        }
        Ok(())
    }
}

/// `N x alpha` matrix of packets with the staircase fill.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageMatrix {
    rows: Vec<Vec<Packet>>,
}

impl MessageMatrix {
    pub fn get(&self, row: usize, col: usize) -> &Packet {
        &self.rows[row][col]
    }

    pub fn rows(&self) -> &[Vec<Packet>] {
        &self.rows
    }
}

/// Per-party shares: row `i - 1` belongs to party `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareMatrix {
    rows: Vec<Vec<Packet>>,
}

impl ShareMatrix {
    /// Share of party `id` (1-based).
    pub fn party(&self, id: usize) -> &[Packet] {
        &self.rows[id - 1]
    }

    pub fn rows(&self) -> &[Vec<Packet>] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<Vec<Packet>> {
        self.rows
    }
}

fn common_width(packets: &[Packet]) -> Result<usize> {
    let width = packets.first().map_or(0, Packet::width);
    if width == 0 || packets.iter().any(|p| p.width() != width) {
        return Err(Error::param("packets must share one positive width"));
    }
    Ok(width)
}

pub fn build_message_matrix(
    params: &StaircaseParams,
    secret: &[Packet],
    keys: &[Packet],
) -> Result<MessageMatrix> {
    if secret.len() != params.secret_len() {
        return Err(Error::param(format!(
            "secret has {} packets, expected {}",
            secret.len(),
            params.secret_len()
        )));
    }
    if keys.len() != params.key_len() {
        return Err(Error::param(format!(
            "got {} key packets, expected {}",
            keys.len(),
            params.key_len()
        )));
    }
    let width = common_width(secret)?;
    if keys.iter().any(|p| p.width() != width) {
        return Err(Error::param("key packets differ in width from secret packets"));
    }
    let rows = params
        .layout()
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|slot| match slot {
                    Slot::Zero => Packet::zeros(width),
                    Slot::Secret(t) => secret[t].clone(),
                    Slot::Key(t) => keys[t].clone(),
                })
                .collect()
        })
        .collect();
    Ok(MessageMatrix { rows })
}

pub fn encode(field: &Field, params: &StaircaseParams, m: &MessageMatrix) -> Result<ShareMatrix> {
    params.check_field(field)?;
    if m.rows.len() != params.n || m.rows.iter().any(|r| r.len() != params.alpha) {
        return Err(Error::param("message matrix shape does not match parameters"));
    }
    let width = m.rows[0][0].width();
    let rows = (1..=params.n as u64)
        .map(|point| {
            (0..params.alpha)
                .map(|c| {
                    let mut acc = Packet::zeros(width);
                    for r in (0..params.n).rev() {
                        acc.scale(field, point);
                        acc.add(field, &m.rows[r][c]);
                    }
                    acc
                })
                .collect()
        })
        .collect();
    Ok(ShareMatrix { rows })
}

/// Column solver for the erasure path: inverse of the contacted parties'
/// leading square Vandermonde block, computed once.
fn erasure_solver(field: &Field, points: &[u64]) -> Result<Matrix> {
    let d = points.len();
    let v = vandermonde(field, points, d)?;
    let unit: Vec<Packet> = (0..d)
        .map(|r| Packet((0..d).map(|l| u64::from(l == r)).collect()))
        .collect();
    let inv_rows = solve_linear(field, &v, &unit)?;
    Matrix::from_rows(inv_rows.into_iter().map(|p| p.0).collect())
}

struct Contacted<'a> {
    ids: Vec<usize>,
    points: Vec<u64>,
    rows: Vec<&'a [Packet]>,
    width: usize,
    level: usize,
}

fn validate_responses<'a>(
    field: &Field,
    params: &StaircaseParams,
    responses: &[(usize, &'a [Packet])],
    contacts: usize,
) -> Result<Contacted<'a>> {
    params.check_field(field)?;
    let level = params
        .level_index(contacts)
        .ok_or_else(|| params.level_for(contacts).unwrap_err())?;
    let columns = params.levels[level].cumulative;
    let mut ids = Vec::with_capacity(responses.len());
    let mut rows = Vec::with_capacity(responses.len());
    for &(id, row) in responses {
        if id == 0 || id > params.n {
            return Err(Error::param(format!("party id {id} outside 1..={}", params.n)));
        }
        if ids.contains(&id) {
            return Err(Error::param(format!("duplicate party id {id}")));
        }
        if row.len() != columns {
            return Err(Error::param(format!(
                "party {id} sent {} packets, level {contacts} needs {columns}",
                row.len()
            )));
        }
        ids.push(id);
        rows.push(row);
    }
    let all: Vec<Packet> = rows.iter().flat_map(|r| r.iter().cloned()).collect();
    let width = common_width(&all)?;
    let points = ids.iter().map(|&i| i as u64).collect();
    Ok(Contacted { ids, points, rows, width, level })
}

/// Runs the block cascade. `solve` receives the residual column (one packet
/// per contacted party) and returns the `D_j` unknown leading rows.
fn cascade(
    field: &Field,
    params: &StaircaseParams,
    input: &Contacted<'_>,
    mut solve: impl FnMut(usize, &[Packet]) -> Result<Vec<Packet>>,
) -> Result<Vec<Packet>> {
    let level = input.level;
    let unknown = params.levels[level].contacts;
    let columns = params.levels[level].cumulative;
    let mut known: Vec<Vec<Option<Packet>>> = vec![vec![None; columns]; params.n];
    // powers[i][r] = point_i^r
    let powers: Vec<Vec<u64>> = input
        .points
        .iter()
        .map(|&p| {
            let mut acc = 1;
            (0..params.n)
                .map(|_| {
                    let out = acc;
                    acc = field.mul(acc, p);
                    out
                })
                .collect()
        })
        .collect();

    for block in (0..=level).rev() {
        let support = params.levels[block].contacts;
        for c in params.block_columns(block) {
            let residual: Vec<Packet> = input
                .rows
                .iter()
                .zip(&powers)
                .map(|(row, pw)| {
                    let mut y = row[c].clone();
                    for r in unknown..support {
                        let v = known[r][c].as_ref().expect("overflow revealed by later block");
                        y.add_scaled(field, field.neg(pw[r]), v);
                    }
                    y
                })
                .collect();
            let solved = solve(c, &residual)?;
            for (r, x) in solved.into_iter().enumerate() {
                known[r][c] = Some(x);
            }
            for row in known.iter_mut().skip(support) {
                row[c] = Some(Packet::zeros(input.width));
            }
        }
        if block > 0 {
            for ((sr, sc), (dr, dc)) in params.overflow_map(block) {
                known[sr][sc] = known[dr][dc].clone();
            }
        }
    }

    let data_rows = params.levels[0].contacts - params.z;
    let mut secret = Vec::with_capacity(params.secret_len());
    for c in params.block_columns(0) {
        for row in known.iter().take(data_rows) {
            secret.push(row[c].clone().expect("block 1 fully decoded"));
        }
    }
    Ok(secret)
}

/// Reconstructs the secret packets from `D` honest responses, each carrying
/// the first `alpha_j` packets of that party's share, where `D = D_j`.
pub fn decode_erasure(
    field: &Field,
    params: &StaircaseParams,
    responses: &[(usize, &[Packet])],
) -> Result<Vec<Packet>> {
    let input = validate_responses(field, params, responses, responses.len())?;
    let inverse = erasure_solver(field, &input.points)?;
    cascade(field, params, &input, |_, residual| inverse.mul_packets(field, residual))
}

/// How each column is decoded on the error-correcting path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ColumnDecoder {
    #[default]
    BerlekampWelch,
    /// Interpolates every `D_j`-subset and keeps the codeword that agrees
    /// with at least `d - e` parties. Exponential; intended for `d <= 12`.
    Exhaustive,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErrorDecoding {
    pub secret: Vec<Packet>,
    /// Party ids found to disagree with the decoded codeword in some column.
    pub error_parties: Vec<usize>,
}

/// Reconstructs from `d = D_j + 2e` responses of which at most `e` may be
/// arbitrarily corrupted.
pub fn decode_with_errors(
    field: &Field,
    params: &StaircaseParams,
    responses: &[(usize, &[Packet])],
    e: usize,
    decoder: ColumnDecoder,
) -> Result<ErrorDecoding> {
    let d = responses.len();
    if d < 2 * e {
        return Err(Error::param(format!("{d} responses cannot absorb {e} errors")));
    }
    let input = validate_responses(field, params, responses, d - 2 * e)?;
    let unknown = d - 2 * e;
    let mut bad = vec![false; d];
    let secret = cascade(field, params, &input, |_, residual| {
        let (coeffs, errs) = match decoder {
            ColumnDecoder::BerlekampWelch => {
                berlekamp_welch_packets(field, &input.points, residual, unknown, e)?
            }
            ColumnDecoder::Exhaustive => exhaustive_column(field, &input.points, residual, unknown, e)?,
        };
        for i in errs {
            bad[i] = true;
        }
        if bad.iter().filter(|&&b| b).count() > e {
            return Err(Error::DecodingFailure(format!("more than {e} parties disagree")));
        }
        Ok(coeffs)
    })?;
    let error_parties = input.ids.iter().zip(&bad).filter(|(_, &b)| b).map(|(&i, _)| i).collect();
    Ok(ErrorDecoding { secret, error_parties })
}

/// Divides by a monic polynomial; returns `(quotient, remainder)`.
fn poly_divmod_monic(field: &Field, num: &[u64], den: &[u64]) -> (Vec<u64>, Vec<u64>) {
    let dd = den.len() - 1;
    debug_assert_eq!(den[dd], 1);
    let mut rem = num.to_vec();
    if num.len() <= dd {
        return (vec![], rem);
    }
    let mut quot = vec![0; num.len() - dd];
    for i in (0..quot.len()).rev() {
        let coef = rem[i + dd];
        quot[i] = coef;
        if coef != 0 {
            for (t, &dc) in den.iter().enumerate() {
                rem[i + t] = field.sub(rem[i + t], field.mul(coef, dc));
            }
        }
    }
    rem.truncate(dd);
    (quot, rem)
}

/// Berlekamp-Welch on one lane: finds `P` with `deg P < kk` agreeing with
/// all but at most `e` of the `(points[i], ys[i])`. Returns the coefficients
/// and the disagreeing indices.
pub fn berlekamp_welch(
    field: &Field,
    points: &[u64],
    ys: &[u64],
    kk: usize,
    e: usize,
) -> Result<(Vec<u64>, Vec<usize>)> {
    let d = points.len();
    if d < kk + 2 * e {
        return Err(Error::param(format!("{d} points cannot correct {e} errors at dimension {kk}")));
    }
    let fail = || Error::DecodingFailure(format!("no codeword within distance {e}"));
    let q_len = kk + e;
    let mut a = Matrix::zeros(d, q_len + e);
    let mut b = vec![0; d];
    for (i, (&x, &y)) in points.iter().zip(ys).enumerate() {
        let mut p = 1;
        for c in 0..q_len {
            a.set(i, c, p);
            if c < e {
                a.set(i, q_len + c, field.neg(field.mul(y, p)));
            }
            p = field.mul(p, x);
        }
        b[i] = field.mul(y, field.pow(x, e as u64));
    }
    let sol = solve_general(field, &a, &b, || 0).map_err(|_| fail())?;
    let q_poly = &sol[..q_len];
    let mut e_poly = sol[q_len..].to_vec();
    e_poly.push(1);
    let (p_poly, rem) = poly_divmod_monic(field, q_poly, &e_poly);
    if rem.iter().any(|&r| r != 0) {
        return Err(fail());
    }
    let mut coeffs = p_poly;
    coeffs.resize(kk, 0);
    let errors: Vec<usize> = (0..d).filter(|&i| field.eval_poly(&coeffs, points[i]) != ys[i]).collect();
    if errors.len() > e {
        return Err(fail());
    }
    Ok((coeffs, errors))
}

fn berlekamp_welch_packets(
    field: &Field,
    points: &[u64],
    residual: &[Packet],
    kk: usize,
    e: usize,
) -> Result<(Vec<Packet>, Vec<usize>)> {
    let width = residual[0].width();
    let mut out = vec![Packet::zeros(width); kk];
    let mut errors = Vec::new();
    for lane in 0..width {
        let ys: Vec<u64> = residual.iter().map(|p| p.0[lane]).collect();
        let (coeffs, errs) = berlekamp_welch(field, points, &ys, kk, e)?;
        for (r, c) in coeffs.into_iter().enumerate() {
            out[r].0[lane] = c;
        }
        for i in errs {
            if !errors.contains(&i) {
                errors.push(i);
            }
        }
    }
    if errors.len() > e {
        return Err(Error::DecodingFailure(format!("lanes disagree on more than {e} parties")));
    }
    errors.sort_unstable();
    Ok((out, errors))
}

fn exhaustive_column(
    field: &Field,
    points: &[u64],
    residual: &[Packet],
    kk: usize,
    e: usize,
) -> Result<(Vec<Packet>, Vec<usize>)> {
    let d = points.len();
    let mut subset: Vec<usize> = (0..kk).collect();
    loop {
        let pts: Vec<u64> = subset.iter().map(|&i| points[i]).collect();
        let v = vandermonde(field, &pts, kk)?;
        let rhs: Vec<Packet> = subset.iter().map(|&i| residual[i].clone()).collect();
        let coeffs = solve_linear(field, &v, &rhs)?;
        let full = vandermonde(field, points, kk)?.mul_packets(field, &coeffs)?;
        let errors: Vec<usize> = (0..d).filter(|&i| full[i] != residual[i]).collect();
        if errors.len() <= e {
            return Ok((coeffs, errors));
        }
        // next kk-subset of 0..d in lexicographic order
        let Some(pos) = (0..kk).rev().find(|&i| subset[i] < d - kk + i) else {
            return Err(Error::DecodingFailure(format!("no codeword within distance {e}")));
        };
        subset[pos] += 1;
        for i in pos + 1..kk {
            subset[i] = subset[i - 1] + 1;
        }
    }
}
