//! Prime-field arithmetic over `F_q`, packets of field elements, and the
//! dense linear algebra (Vandermonde construction, elimination, rank) the
//! codes are built on.
//!
//! Elements are plain `u64` values kept reduced into `[0, q)`. The modulus is
//! capped at `2^31 - 1`, so every product of two reduced elements fits in a
//! `u64` before reduction.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A prime field `F_q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct Field {
    q: u64,
}

impl Field {
    pub const MAX_MODULUS: u64 = (1 << 31) - 1;

    pub fn new(q: u64) -> Result<Self> {
        if q < 3 {
            return Err(Error::param(format!("field modulus q = {q} must be at least 3")));
        }
        if q > Self::MAX_MODULUS {
            return Err(Error::param(format!("field modulus q = {q} exceeds 2^31 - 1")));
        }
        if !is_prime(q) {
            return Err(Error::param(format!("field modulus q = {q} is not prime")));
        }
        Ok(Field { q })
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.q
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        x % self.q
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        (a * b) % self.q
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.q;
        base %= self.q;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via the extended Euclidean algorithm.
    pub fn inv(&self, a: u64) -> Result<u64> {
        if a.is_multiple_of(self.q) {
            return Err(Error::DivisionByZero);
        }
        let (mut old_r, mut r) = (a as i64, self.q as i64);
        let (mut old_s, mut s) = (1i64, 0i64);
        while r != 0 {
            let quot = old_r / r;
            (old_r, r) = (r, old_r - quot * r);
            (old_s, s) = (s, old_s - quot * s);
        }
        Ok(old_s.rem_euclid(self.q as i64) as u64)
    }

    pub fn div(&self, a: u64, b: u64) -> Result<u64> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.random_range(0..self.q)
    }

    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.random_range(1..self.q)
    }

    pub fn random_packet<R: Rng + ?Sized>(&self, width: usize, rng: &mut R) -> Packet {
        Packet((0..width).map(|_| self.random(rng)).collect())
    }

    /// Evaluates `coeffs[0] + coeffs[1] x + ...` by Horner's rule.
    pub fn eval_poly(&self, coeffs: &[u64], x: u64) -> u64 {
        coeffs.iter().rev().fold(0, |acc, &c| self.add(self.mul(acc, x), c))
    }

    /// Inner product of two equal-length element sequences.
    pub fn dot(&self, a: &[u64], b: &[u64]) -> Result<u64> {
        if a.len() != b.len() {
            return Err(Error::param(format!(
                "dot product length mismatch: {} vs {}",
                a.len(),
                b.len()
            )));
        }
        Ok(a.iter().zip(b).fold(0, |acc, (&x, &y)| self.add(acc, self.mul(x, y))))
    }

    /// Lagrange basis coefficients `L_l(at)` for the interpolation nodes `xs`,
    /// so that `p(at) = sum_l y_l * L_l(at)` for every `p` of degree `< xs.len()`.
    pub fn lagrange_basis(&self, xs: &[u64], at: u64) -> Result<Vec<u64>> {
        let mut out = Vec::with_capacity(xs.len());
        for (l, &xl) in xs.iter().enumerate() {
            let mut num = 1;
            let mut den = 1;
            for (m, &xm) in xs.iter().enumerate() {
                if m == l {
                    continue;
                }
                num = self.mul(num, self.sub(at, xm));
                den = self.mul(den, self.sub(xl, xm));
            }
            out.push(self.div(num, den)?);
        }
        Ok(out)
    }
}

impl TryFrom<u64> for Field {
    type Error = Error;

    fn try_from(q: u64) -> Result<Self> {
        Field::new(q)
    }
}

impl From<Field> for u64 {
    fn from(f: Field) -> u64 {
        f.q
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}", self.q)
    }
}

fn is_prime(q: u64) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= q {
        if q.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// A fixed-width vector of field elements; the unit of share payloads and
/// of pairwise hashing.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Packet(pub Vec<u64>);

impl Packet {
    pub fn zeros(width: usize) -> Self {
        Packet(vec![0; width])
    }

    pub fn width(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    /// `self += c * other`, lane by lane.
    pub fn add_scaled(&mut self, field: &Field, c: u64, other: &Packet) {
        debug_assert_eq!(self.width(), other.width());
        if c == 0 {
            return;
        }
        for (a, &b) in self.0.iter_mut().zip(&other.0) {
            *a = field.add(*a, field.mul(c, b));
        }
    }

    pub fn add(&mut self, field: &Field, other: &Packet) {
        for (a, &b) in self.0.iter_mut().zip(&other.0) {
            *a = field.add(*a, b);
        }
    }

    pub fn scale(&mut self, field: &Field, c: u64) {
        for a in &mut self.0 {
            *a = field.mul(*a, c);
        }
    }
}

impl From<Vec<u64>> for Packet {
    fn from(v: Vec<u64>) -> Self {
        Packet(v)
    }
}

/// Inner product over the flattened element sequences of two packet vectors.
pub fn dot_packets(field: &Field, a: &[Packet], b: &[Packet]) -> Result<u64> {
    let fa: Vec<u64> = a.iter().flat_map(|p| p.0.iter().copied()).collect();
    let fb: Vec<u64> = b.iter().flat_map(|p| p.0.iter().copied()).collect();
    field.dot(&fa, &fb)
}

/// Dense row-major matrix over a prime field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::param("ragged matrix rows"));
        }
        Ok(Matrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Keeps the listed rows and the leading `cols` columns.
    pub fn submatrix(&self, rows: &[usize], cols: usize) -> Matrix {
        let mut out = Matrix::zeros(rows.len(), cols);
        for (i, &r) in rows.iter().enumerate() {
            for c in 0..cols {
                out.set(i, c, self.get(r, c));
            }
        }
        out
    }

    pub fn mul_vec(&self, field: &Field, x: &[u64]) -> Result<Vec<u64>> {
        if x.len() != self.cols {
            return Err(Error::param("matrix/vector dimension mismatch"));
        }
        Ok((0..self.rows).map(|r| field.dot(self.row(r), x).expect("lengths checked")).collect())
    }

    /// `A * x` where each entry of `x` is a packet; applied lane-wise.
    pub fn mul_packets(&self, field: &Field, x: &[Packet]) -> Result<Vec<Packet>> {
        if x.len() != self.cols {
            return Err(Error::param("matrix/packet dimension mismatch"));
        }
        let width = x.first().map_or(0, Packet::width);
        Ok((0..self.rows)
            .map(|r| {
                let mut acc = Packet::zeros(width);
                for (c, p) in x.iter().enumerate() {
                    acc.add_scaled(field, self.get(r, c), p);
                }
                acc
            })
            .collect())
    }
}

/// Vandermonde matrix with entry `(i, c) = points[i]^c` for `c < width`.
pub fn vandermonde(field: &Field, points: &[u64], width: usize) -> Result<Matrix> {
    if width == 0 {
        return Err(Error::param("vandermonde width must be positive"));
    }
    if points.len() as u64 > field.modulus() - 1 {
        return Err(Error::param("more evaluation points than nonzero field elements"));
    }
    for (i, &p) in points.iter().enumerate() {
        if p == 0 || p >= field.modulus() {
            return Err(Error::param(format!("evaluation point {p} must be a nonzero element")));
        }
        if points[..i].contains(&p) {
            return Err(Error::param(format!("duplicate evaluation point {p}")));
        }
    }
    let mut m = Matrix::zeros(points.len(), width);
    for (i, &p) in points.iter().enumerate() {
        let mut acc = 1;
        for c in 0..width {
            m.set(i, c, acc);
            acc = field.mul(acc, p);
        }
    }
    Ok(m)
}

/// Solves the square system `A x = b` lane-wise over packet right-hand sides.
pub fn solve_linear(field: &Field, a: &Matrix, b: &[Packet]) -> Result<Vec<Packet>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::param("solve_linear needs a square matrix"));
    }
    if b.len() != n {
        return Err(Error::param("right-hand side length differs from matrix rows"));
    }
    let width = b.first().map_or(0, Packet::width);
    if b.iter().any(|p| p.width() != width) {
        return Err(Error::param("right-hand side packets have different widths"));
    }

    let mut m = a.clone();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n).find(|&r| m.get(r, col) != 0).ok_or(Error::SingularSystem)?;
        if pivot != col {
            for c in 0..n {
                let (x, y) = (m.get(col, c), m.get(pivot, c));
                m.set(col, c, y);
                m.set(pivot, c, x);
            }
            rhs.swap(col, pivot);
        }
        let inv = field.inv(m.get(col, col))?;
        for c in col..n {
            m.set(col, c, field.mul(m.get(col, c), inv));
        }
        rhs[col].scale(field, inv);
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = m.get(r, col);
            if factor == 0 {
                continue;
            }
            let neg = field.neg(factor);
            for c in col..n {
                let v = field.add(m.get(r, c), field.mul(neg, m.get(col, c)));
                m.set(r, c, v);
            }
            let pivot_row = rhs[col].clone();
            rhs[r].add_scaled(field, neg, &pivot_row);
        }
    }
    Ok(rhs)
}

/// Solves a possibly rectangular system `A x = b`, choosing each free
/// variable with `free()`. Fails with [`Error::InconsistentSystem`] when no
/// solution exists.
pub fn solve_general(
    field: &Field,
    a: &Matrix,
    b: &[u64],
    mut free: impl FnMut() -> u64,
) -> Result<Vec<u64>> {
    if b.len() != a.rows() {
        return Err(Error::param("right-hand side length differs from matrix rows"));
    }
    let (rows, cols) = (a.rows(), a.cols());
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| m.get(i, c) != 0) else {
            continue;
        };
        if p != r {
            for cc in 0..cols {
                let (x, y) = (m.get(r, cc), m.get(p, cc));
                m.set(r, cc, y);
                m.set(p, cc, x);
            }
            rhs.swap(r, p);
        }
        let inv = field.inv(m.get(r, c))?;
        for cc in 0..cols {
            m.set(r, cc, field.mul(m.get(r, cc), inv));
        }
        rhs[r] = field.mul(rhs[r], inv);
        for i in 0..rows {
            if i == r || m.get(i, c) == 0 {
                continue;
            }
            let neg = field.neg(m.get(i, c));
            for cc in 0..cols {
                let v = field.add(m.get(i, cc), field.mul(neg, m.get(r, cc)));
                m.set(i, cc, v);
            }
            rhs[i] = field.add(rhs[i], field.mul(neg, rhs[r]));
        }
        pivots.push(c);
        r += 1;
    }
    if rhs[r..].iter().any(|&x| x != 0) {
        return Err(Error::InconsistentSystem);
    }

    let mut x = vec![0; cols];
    let mut is_pivot = vec![false; cols];
    for &c in &pivots {
        is_pivot[c] = true;
    }
    for c in 0..cols {
        if !is_pivot[c] {
            x[c] = field.reduce(free());
        }
    }
    for (row, &c) in pivots.iter().enumerate() {
        let mut v = rhs[row];
        for cc in 0..cols {
            if cc != c && !is_pivot[cc] {
                v = field.sub(v, field.mul(m.get(row, cc), x[cc]));
            }
        }
        x[c] = v;
    }
    Ok(x)
}

/// Rank over `F_q` by Gaussian elimination.
pub fn rank(field: &Field, a: &Matrix) -> usize {
    let mut m = a.clone();
    let (rows, cols) = (m.rows(), m.cols());
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| m.get(i, c) != 0) else {
            continue;
        };
        if p != r {
            for cc in 0..cols {
                let (x, y) = (m.get(r, cc), m.get(p, cc));
                m.set(r, cc, y);
                m.set(p, cc, x);
            }
        }
        let inv = field.inv(m.get(r, c)).expect("pivot is nonzero");
        for i in r + 1..rows {
            let factor = field.mul(m.get(i, c), inv);
            if factor == 0 {
                continue;
            }
            for cc in c..cols {
                let v = field.sub(m.get(i, cc), field.mul(factor, m.get(r, cc)));
                m.set(i, cc, v);
            }
        }
        r += 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f(q: u64) -> Field {
        Field::new(q).unwrap()
    }

    fn scalars(xs: &[u64]) -> Vec<Packet> {
        xs.iter().map(|&x| Packet(vec![x])).collect()
    }

    #[test]
    fn small_field_ops() {
        let f5 = f(5);
        assert_eq!(f5.mul(4, 4), 1);
        assert_eq!(f5.inv(3).unwrap(), 2);
        assert_eq!(f5.add(3, 4), 2);
        assert_eq!(f5.sub(1, 3), 3);
        assert_eq!(f5.neg(2), 3);
        assert_eq!(f5.inv(0), Err(Error::DivisionByZero));
        assert_eq!(Error::DivisionByZero.to_string(), "division by zero in field");
    }

    #[test]
    fn rejects_bad_moduli() {
        assert!(Field::new(2).is_err());
        assert!(Field::new(9).is_err());
        assert!(Field::new(1 << 31).is_err());
        assert!(Field::new(Field::MAX_MODULUS).is_ok());
    }

    #[test]
    fn inverse_exhaustive_small_primes() {
        for q in [3u64, 5, 7, 11, 13, 101, 257] {
            let fq = f(q);
            for a in 1..q {
                assert_eq!(fq.mul(a, fq.inv(a).unwrap()), 1, "q={q} a={a}");
            }
        }
    }

    #[test]
    fn vandermonde_rows() {
        let f5 = f(5);
        let v = vandermonde(&f5, &[1, 2, 3, 4], 3).unwrap();
        assert_eq!(v.row(1), &[1, 2, 4]);
        let v = vandermonde(&f5, &[1, 2, 3, 4], 4).unwrap();
        // 3^c mod 5 = 1, 3, 9 = 4, 27 = 2
        assert_eq!(v.row(2), &[1, 3, 4, 2]);
        assert_eq!(vandermonde(&f5, &[1], 1).unwrap(), Matrix::identity(1));
        assert!(vandermonde(&f5, &[1, 1], 2).is_err());
        assert!(vandermonde(&f5, &[0, 1], 2).is_err());
    }

    #[test]
    fn vandermonde_leading_square_blocks_are_full_rank() {
        for q in [5u64, 7, 11, 13] {
            let fq = f(q);
            let m = (q - 1).min(8) as usize;
            let points: Vec<u64> = (1..=m as u64).collect();
            let v = vandermonde(&fq, &points, m).unwrap();
            // every subset of rows against the leading s columns
            for mask in 1u32..(1 << m) {
                let rows: Vec<usize> = (0..m).filter(|&i| mask >> i & 1 == 1).collect();
                let s = rows.len();
                assert_eq!(rank(&fq, &v.submatrix(&rows, s)), s);
            }
        }
    }

    #[test]
    fn solve_identity_and_small_system() {
        let f5 = f(5);
        let b = scalars(&[3, 1, 4]);
        assert_eq!(solve_linear(&f5, &Matrix::identity(3), &b).unwrap(), b);

        // brute force over all 25 candidates for vandermonde((1,2),2) x = (3,0)
        let a = vandermonde(&f5, &[1, 2], 2).unwrap();
        let mut found = vec![];
        for x0 in 0..5 {
            for x1 in 0..5 {
                if a.mul_vec(&f5, &[x0, x1]).unwrap() == vec![3, 0] {
                    found.push((x0, x1));
                }
            }
        }
        assert_eq!(found, vec![(1, 2)]);
        let x = solve_linear(&f5, &a, &scalars(&[3, 0])).unwrap();
        assert_eq!(x, scalars(&[1, 2]));
    }

    #[test]
    fn singular_system_reported() {
        let f5 = f(5);
        let a = Matrix::from_rows(vec![vec![1, 2], vec![1, 2]]).unwrap();
        assert_eq!(solve_linear(&f5, &a, &scalars(&[1, 1])), Err(Error::SingularSystem));
        assert_eq!(Error::SingularSystem.to_string(), "singular system");
    }

    #[test]
    fn dot_examples() {
        assert_eq!(f(5).dot(&[1, 2, 3], &[4, 0, 1]).unwrap(), 2);
        assert_eq!(f(5).dot(&[1, 2, 3], &[0, 0, 0]).unwrap(), 0);
        assert_eq!(f(7).dot(&[1, 1, 1, 1], &[1, 2, 3, 4]).unwrap(), 3);
        assert!(f(7).dot(&[1], &[1, 2]).is_err());
        let a = vec![Packet(vec![1, 2]), Packet(vec![3])];
        let b = vec![Packet(vec![4]), Packet(vec![0, 1])];
        assert_eq!(dot_packets(&f(5), &a, &b).unwrap(), 2);
    }

    #[test]
    fn rank_examples() {
        let f5 = f(5);
        assert_eq!(rank(&f5, &Matrix::identity(4)), 4);
        assert_eq!(rank(&f5, &Matrix::zeros(3, 4)), 0);
        assert_eq!(rank(&f5, &vandermonde(&f5, &[1, 2, 3], 3).unwrap()), 3);
    }

    #[test]
    fn general_solver_handles_free_variables() {
        let f7 = f(7);
        // x0 + x1 = 3, x2 free
        let a = Matrix::from_rows(vec![vec![1, 1, 0]]).unwrap();
        let x = solve_general(&f7, &a, &[3], || 5).unwrap();
        assert_eq!(a.mul_vec(&f7, &x).unwrap(), vec![3]);
        assert_eq!(x[1], 5);
        assert_eq!(x[2], 5);
        let a = Matrix::from_rows(vec![vec![1, 1], vec![2, 2]]).unwrap();
        assert_eq!(solve_general(&f7, &a, &[1, 1], || 0), Err(Error::InconsistentSystem));
    }

    #[test]
    fn lagrange_basis_reconstructs_polynomial() {
        let f11 = f(11);
        let coeffs = [4u64, 7, 2];
        let xs = [1u64, 5, 9];
        let ys: Vec<u64> = xs.iter().map(|&x| f11.eval_poly(&coeffs, x)).collect();
        for at in 0..11 {
            let basis = f11.lagrange_basis(&xs, at).unwrap();
            assert_eq!(f11.dot(&basis, &ys).unwrap(), f11.eval_poly(&coeffs, at));
        }
    }

    proptest! {
        #[test]
        fn mul_inverse_sampled(a in 1u64..Field::MAX_MODULUS) {
            let fq = Field::new(Field::MAX_MODULUS).unwrap();
            prop_assert_eq!(fq.mul(a, fq.inv(a).unwrap()), 1);
        }

        #[test]
        fn solve_round_trip(seed in any::<u64>(), n in 1usize..7, q in prop::sample::select(vec![11u64, 13, 101, 65537])) {
            let fq = Field::new(q).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut a = Matrix::zeros(n, n);
            for r in 0..n {
                for c in 0..n {
                    a.set(r, c, fq.random(&mut rng));
                }
            }
            prop_assume!(rank(&fq, &a) == n);
            let x: Vec<Packet> = (0..n).map(|_| fq.random_packet(3, &mut rng)).collect();
            let b = a.mul_packets(&fq, &x).unwrap();
            prop_assert_eq!(solve_linear(&fq, &a, &b).unwrap(), x);
        }
    }
}
