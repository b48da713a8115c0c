#![allow(dead_code)]

use rcess::staircase::Slot;

/// All `k`-subsets of `1..=n`, lexicographic.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..=n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    go(1, n, k, &mut cur, &mut out);
    out
}

pub fn pow_mod(mut b: u64, mut e: u64, q: u64) -> u64 {
    let mut r = 1;
    b %= q;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % q;
        }
        b = b * b % q;
        e >>= 1;
    }
    r
}

/// Rank over F_q by plain row reduction, independent of the library solver.
pub fn rank_mod(q: u64, mut m: Vec<Vec<u64>>) -> usize {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_multiple_of(q)) else { continue };
        m.swap(r, p);
        let inv = pow_mod(m[r][c], q - 2, q);
        for x in m[r].iter_mut() {
            *x = *x * inv % q;
        }
        for i in 0..rows {
            if i != r && m[i][c] != 0 {
                let f = m[i][c];
                for cc in 0..cols {
                    m[i][cc] = (m[i][cc] + (q - f) * m[r][cc]) % q;
                }
            }
        }
        r += 1;
        if r == rows {
            break;
        }
    }
    r
}

/// Share of party `x` by direct evaluation of `sum_r x^r M[r][c]`, scalars only.
pub fn oracle_share(q: u64, layout: &[Vec<Slot>], secret: &[u64], keys: &[u64], x: u64) -> Vec<u64> {
    let cols = layout[0].len();
    (0..cols)
        .map(|c| {
            layout.iter().enumerate().fold(0, |acc, (r, row)| {
                let m = match row[c] {
                    Slot::Zero => 0,
                    Slot::Secret(t) => secret[t],
                    Slot::Key(t) => keys[t],
                };
                (acc + pow_mod(x, r as u64, q) * m) % q
            })
        })
        .collect()
}

/// Coefficient matrix from key variables to the observations of `parties`.
pub fn key_observation_matrix(q: u64, layout: &[Vec<Slot>], keys: usize, parties: &[usize]) -> Vec<Vec<u64>> {
    let cols = layout[0].len();
    let mut out = Vec::new();
    for &p in parties {
        for c in 0..cols {
            let mut row = vec![0; keys];
            for (r, grid) in layout.iter().enumerate() {
                if let Slot::Key(t) = grid[c] {
                    row[t] = (row[t] + pow_mod(p as u64, r as u64, q)) % q;
                }
            }
            out.push(row);
        }
    }
    out
}
