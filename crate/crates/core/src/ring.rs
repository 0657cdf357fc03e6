//! Exact linear algebra over residue rings `Z_k`.
//!
//! Gaussian elimination breaks down over `Z_k` when `k` is composite because
//! pivots may be zero divisors. The Howell normal form fixes this: it is an
//! echelon basis whose rows are normalized so that the form is unique for a
//! given row span, and which contains enough rows that every span element can
//! be reduced greedily. That last property is what makes membership tests and
//! canonical coordinates work.

use std::fmt;
use std::ops::{Add, Mul, Neg};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RingError {
    #[error("invalid ring: modulus {0} must be at least 2")]
    InvalidModulus(u64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix must have at least one row and one column")]
    Empty,
}

/// A residue `value mod modulus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RingScalar {
    value: u64,
    modulus: u64,
}

impl RingScalar {
    pub fn new(value: i64, modulus: u64) -> Result<Self, RingError> {
        if modulus < 2 {
            return Err(RingError::InvalidModulus(modulus));
        }
        Ok(Self {
            value: reduce_signed(value as i128, modulus),
            modulus,
        })
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn modulus(self) -> u64 {
        self.modulus
    }

    /// Multiplicative inverse, if the residue is a unit.
    pub fn inverse(self) -> Option<Self> {
        let (g, s, _) = ext_gcd(self.value as i128, self.modulus as i128);
        (g == 1).then(|| Self {
            value: reduce_signed(s, self.modulus),
            modulus: self.modulus,
        })
    }

    fn check(self, other: Self) {
        assert_eq!(
            self.modulus, other.modulus,
            "mixed moduli in ring arithmetic"
        );
    }
}

impl Add for RingScalar {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.check(rhs);
        Self {
            value: add_mod(self.value, rhs.value, self.modulus),
            modulus: self.modulus,
        }
    }
}

impl Mul for RingScalar {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.check(rhs);
        Self {
            value: mul_mod(self.value, rhs.value, self.modulus),
            modulus: self.modulus,
        }
    }
}

impl Neg for RingScalar {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            value: (self.modulus - self.value) % self.modulus,
            modulus: self.modulus,
        }
    }
}

impl fmt::Display for RingScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod {})", self.value, self.modulus)
    }
}

/// Dense row-major matrix over `Z_k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct RingMatrix {
    rows: usize,
    cols: usize,
    modulus: u64,
    entries: Vec<u64>,
}

impl RingMatrix {
    /// Builds a matrix from signed rows; every entry is reduced into `[0, modulus)`.
    pub fn from_rows<R: AsRef<[i64]>>(rows: &[R], modulus: u64) -> Result<Self, RingError> {
        if modulus < 2 {
            return Err(RingError::InvalidModulus(modulus));
        }
        let cols = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or(RingError::Empty)?;
        if cols == 0 {
            return Err(RingError::Empty);
        }
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(RingError::Shape(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            entries.extend(row.iter().map(|&e| reduce_signed(e as i128, modulus)));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            modulus,
            entries,
        })
    }

    pub(crate) fn from_residue_rows(rows: Vec<Vec<u64>>, cols: usize, modulus: u64) -> Self {
        let n = rows.len();
        let entries = rows
            .into_iter()
            .flat_map(|r| r.into_iter().map(|e| e % modulus))
            .collect();
        Self {
            rows: n,
            cols,
            modulus,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.entries[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_vecs(&self) -> Vec<Vec<u64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&e| e == 0)
    }

    fn check_vector(&self, v: &[u64]) -> Result<(), RingError> {
        if v.len() != self.cols {
            return Err(RingError::Shape(format!(
                "vector of length {} against matrix with {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok(())
    }
}

impl fmt::Display for RingMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            writeln!(f, "{:?}", self.row(r))?;
        }
        write!(f, "(mod {})", self.modulus)
    }
}

/// A matrix in Howell normal form together with its pivot structure.
///
/// Row `i` has its leading nonzero entry `pivots[i].1` in column `pivots[i].0`,
/// and every pivot is a positive divisor of the modulus.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HowellBasis {
    matrix: RingMatrix,
    pivots: Vec<(usize, u64)>,
}

impl HowellBasis {
    pub fn new(m: &RingMatrix) -> Result<Self, RingError> {
        let rows = howell_rows(m)?;
        Ok(Self::from_howell_rows(rows, m.cols, m.modulus))
    }

    fn from_howell_rows(rows: Vec<Vec<u64>>, cols: usize, modulus: u64) -> Self {
        let pivots = rows
            .iter()
            .map(|r| {
                let c = r
                    .iter()
                    .position(|&e| e != 0)
                    .expect("howell rows are nonzero");
                (c, r[c])
            })
            .collect();
        Self {
            matrix: RingMatrix::from_residue_rows(rows, cols, modulus),
            pivots,
        }
    }

    pub fn matrix(&self) -> &RingMatrix {
        &self.matrix
    }

    pub fn modulus(&self) -> u64 {
        self.matrix.modulus
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols
    }

    /// Number of nonzero basis rows.
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn pivots(&self) -> &[(usize, u64)] {
        &self.pivots
    }

    /// Additive order of each row modulo the span of the rows below it.
    pub fn row_orders(&self) -> Vec<u64> {
        self.pivots
            .iter()
            .map(|&(_, p)| self.modulus() / p)
            .collect()
    }

    /// Number of vectors in the row span.
    pub fn span_size(&self) -> u128 {
        self.row_orders().iter().map(|&o| o as u128).product()
    }

    /// Canonical coordinates of `v`: the unique `c` with `c_i` in `[0, row_orders[i])`
    /// and `v = sum c_i * row_i`, or `None` when `v` is outside the span.
    pub fn coordinates(&self, v: &[u64]) -> Result<Option<Vec<u64>>, RingError> {
        self.matrix.check_vector(v)?;
        let k = self.modulus();
        let mut residual: Vec<u64> = v.iter().map(|&e| e % k).collect();
        let mut coords = Vec::with_capacity(self.rank());
        let mut col = 0;
        for (i, &(pc, p)) in self.pivots.iter().enumerate() {
            if residual[col..pc].iter().any(|&e| e != 0) {
                return Ok(None);
            }
            let lead = residual[pc];
            if !lead.is_multiple_of(p) {
                return Ok(None);
            }
            let c = lead / p;
            if c != 0 {
                let row = self.matrix.row(i);
                for (r, &h) in residual.iter_mut().zip(row) {
                    *r = sub_mod(*r, mul_mod(c, h, k), k);
                }
            }
            coords.push(c);
            col = pc + 1;
        }
        if residual.iter().any(|&e| e != 0) {
            return Ok(None);
        }
        Ok(Some(coords))
    }

    pub fn contains(&self, v: &[u64]) -> Result<bool, RingError> {
        Ok(self.coordinates(v)?.is_some())
    }

    /// Span element with the given coordinates (coordinates are taken mod the modulus).
    pub fn combine(&self, coords: &[u64]) -> Vec<u64> {
        let k = self.modulus();
        let mut out = vec![0u64; self.cols()];
        for (i, &c) in coords.iter().enumerate().take(self.rank()) {
            for (o, &h) in out.iter_mut().zip(self.matrix.row(i)) {
                *o = add_mod(*o, mul_mod(c % k, h, k), k);
            }
        }
        out
    }

    /// Iterates every element of the span exactly once, in coordinate order.
    pub fn elements(&self) -> impl Iterator<Item = Vec<u64>> + '_ {
        let orders = self.row_orders();
        let total = self.span_size();
        (0..total).map(move |mut idx| {
            let mut coords = vec![0u64; orders.len()];
            for (c, &o) in coords.iter_mut().zip(&orders).rev() {
                *c = (idx % o as u128) as u64;
                idx /= o as u128;
            }
            self.combine(&coords)
        })
    }
}

/// Howell normal form of `m`: same row span, zero rows dropped.
pub fn howell_form(m: &RingMatrix) -> Result<RingMatrix, RingError> {
    let rows = howell_rows(m)?;
    Ok(RingMatrix::from_residue_rows(rows, m.cols, m.modulus))
}

/// True iff `v` is a `Z_k`-linear combination of the rows of `basis`.
pub fn span_contains(basis: &RingMatrix, v: &[u64]) -> Result<bool, RingError> {
    basis.check_vector(v)?;
    HowellBasis::new(basis)?.contains(v)
}

/// Coefficients `c` (one per row of `basis`) with `c * basis = v (mod k)`, if any.
///
/// Solutions differ by elements of the left kernel of `basis`; the returned
/// one is reduced against the Howell form of that kernel, so it is the
/// canonical representative of its coset.
pub fn solve_combination(basis: &RingMatrix, v: &[u64]) -> Result<Option<Vec<u64>>, RingError> {
    basis.check_vector(v)?;
    let (k, cols, r) = (basis.modulus, basis.cols, basis.rows);
    // Howell form of [A | I]: rows led in the A block give a Howell basis of
    // the row span together with the combinations producing them; rows led in
    // the I block form a Howell basis of the left kernel.
    let augmented: Vec<Vec<u64>> = (0..r)
        .map(|i| {
            basis
                .row(i)
                .iter()
                .copied()
                .chain((0..r).map(|j| u64::from(i == j)))
                .collect()
        })
        .collect();
    let aug = RingMatrix::from_residue_rows(augmented, cols + r, k);
    let rows = howell_rows(&aug)?;
    let (span_rows, kernel_rows): (Vec<_>, Vec<_>) = rows
        .into_iter()
        .partition(|row| row[..cols].iter().any(|&e| e != 0));

    let howell = HowellBasis::from_howell_rows(
        span_rows.iter().map(|row| row[..cols].to_vec()).collect(),
        cols,
        k,
    );
    let Some(coords) = howell.coordinates(v)? else {
        return Ok(None);
    };
    let mut out = vec![0u64; r];
    for (c, row) in coords.iter().zip(&span_rows) {
        for (o, &u) in out.iter_mut().zip(&row[cols..]) {
            *o = add_mod(*o, mul_mod(*c, u, k), k);
        }
    }
    for row in &kernel_rows {
        let t = &row[cols..];
        let pc = t
            .iter()
            .position(|&e| e != 0)
            .expect("kernel rows are nonzero");
        let q = out[pc] / t[pc];
        if q != 0 {
            for (o, &u) in out.iter_mut().zip(t) {
                *o = sub_mod(*o, mul_mod(q, u, k), k);
            }
        }
    }
    Ok(Some(out))
}

/// Core elimination; returns the nonzero Howell rows.
fn howell_rows(m: &RingMatrix) -> Result<Vec<Vec<u64>>, RingError> {
    let k = m.modulus;
    if k < 2 {
        return Err(RingError::InvalidModulus(k));
    }
    if m.cols == 0 {
        return Err(RingError::Empty);
    }
    let mut rows = m.row_vecs();

    let mut r = 0;
    for j in 0..m.cols {
        let Some(first) = (r..rows.len()).find(|&i| rows[i][j] != 0) else {
            continue;
        };
        rows.swap(r, first);
        for i in r + 1..rows.len() {
            if rows[i][j] == 0 {
                continue;
            }
            let a = rows[r][j] as i128;
            let b = rows[i][j] as i128;
            let (g, s, t) = ext_gcd(a, b);
            let (ag, bg) = (a / g, b / g);
            // [s t; b/g -a/g] has determinant -1, so the span is unchanged.
            combine_rows(&mut rows, r, i, [s, t, bg, -ag], k);
        }

        let lead = rows[r][j];
        let unit = normalizing_unit(lead, k);
        if unit != 1 {
            scale_row(&mut rows[r], unit, k);
        }
        let pivot = rows[r][j];
        debug_assert_eq!(k % pivot, 0);

        for i in 0..r {
            let q = rows[i][j] / pivot;
            if q != 0 {
                axpy_row(&mut rows, i, r, k - q % k, k);
            }
        }

        // Annihilator row: (k / pivot) * row vanishes in column j but may carry
        // information in later columns that the echelon rows alone would miss.
        let ann = k / pivot;
        if ann != k {
            let new_row: Vec<u64> = rows[r].iter().map(|&e| mul_mod(e, ann, k)).collect();
            if new_row.iter().any(|&e| e != 0) {
                rows.push(new_row);
            }
        }
        r += 1;
    }
    debug_assert!(rows[r..].iter().all(|row| row.iter().all(|&e| e == 0)));
    rows.truncate(r);
    Ok(rows)
}

/// A unit `u` with `u * a = gcd(a, k) (mod k)`.
fn normalizing_unit(a: u64, k: u64) -> u64 {
    let g = gcd(a, k);
    let (a1, k1) = (a / g, k / g);
    if k1 == 1 {
        return 1;
    }
    let (_, inv, _) = ext_gcd(a1 as i128, k1 as i128);
    let base = reduce_signed(inv, k1);
    // Lift base mod k1 to a unit mod k.
    let mut u = base;
    while gcd(u, k) != 1 {
        u += k1;
    }
    u % k
}

fn combine_rows(rows: &mut [Vec<u64>], r: usize, i: usize, coef: [i128; 4], k: u64) {
    let [s, t, u, v] = coef.map(|c| reduce_signed(c, k));
    for c in 0..rows[r].len() {
        let (x, y) = (rows[r][c], rows[i][c]);
        rows[r][c] = add_mod(mul_mod(s, x, k), mul_mod(t, y, k), k);
        rows[i][c] = add_mod(mul_mod(u, x, k), mul_mod(v, y, k), k);
    }
}

fn scale_row(row: &mut [u64], s: u64, k: u64) {
    for e in row.iter_mut() {
        *e = mul_mod(*e, s, k);
    }
}

/// `rows[dst] += s * rows[src]`.
fn axpy_row(rows: &mut [Vec<u64>], dst: usize, src: usize, s: u64, k: u64) {
    for c in 0..rows[dst].len() {
        rows[dst][c] = add_mod(rows[dst][c], mul_mod(s, rows[src][c], k), k);
    }
}

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Returns `(g, s, t)` with `g = gcd(a, b) = s*a + t*b`, `g >= 0`.
fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i128, 0i128);
    let (mut old_t, mut t) = (0i128, 1i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    if old_r < 0 {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

pub(crate) fn reduce_signed(x: i128, k: u64) -> u64 {
    x.rem_euclid(k as i128) as u64
}

fn add_mod(a: u64, b: u64, k: u64) -> u64 {
    ((a as u128 + b as u128) % k as u128) as u64
}

fn sub_mod(a: u64, b: u64, k: u64) -> u64 {
    add_mod(a, k - b % k, k)
}

fn mul_mod(a: u64, b: u64, k: u64) -> u64 {
    ((a as u128 * b as u128) % k as u128) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    /// Brute-force span: additive closure of the rows.
    fn brute_span(rows: &[Vec<u64>], k: u64, cols: usize) -> HashSet<Vec<u64>> {
        let mut span = HashSet::from([vec![0u64; cols]]);
        let mut frontier = vec![vec![0u64; cols]];
        while let Some(v) = frontier.pop() {
            for r in rows {
                let w: Vec<u64> = v.iter().zip(r).map(|(&a, &b)| (a + b) % k).collect();
                if span.insert(w.clone()) {
                    frontier.push(w);
                }
            }
        }
        span
    }

    #[test]
    fn qutrit_permuted_t_rows_span_sum_zero_lattice() {
        let m = RingMatrix::from_rows(&[[0, 1, 8], [1, 0, 8], [1, 8, 0]], 9).unwrap();
        let h = howell_form(&m).unwrap();
        assert_eq!(h.rows(), 2);
        let span = brute_span(&h.row_vecs(), 9, 3);
        let sum_zero: HashSet<Vec<u64>> = (0..729u64)
            .map(|i| vec![i / 81, (i / 9) % 9, i % 9])
            .filter(|v| v.iter().sum::<u64>() % 9 == 0)
            .collect();
        assert_eq!(sum_zero.len(), 81);
        assert_eq!(span, sum_zero);
        assert_eq!(span, brute_span(&m.row_vecs(), 9, 3));
    }

    #[test]
    fn already_canonical_inputs() {
        let id = RingMatrix::from_rows(&[[1, 0], [0, 1]], 4).unwrap();
        assert_eq!(howell_form(&id).unwrap(), id);
        let two = RingMatrix::from_rows(&[[2]], 4).unwrap();
        assert_eq!(howell_form(&two).unwrap(), two);
    }

    #[test]
    fn zero_divisor_pivot_gets_annihilator_row() {
        let m = RingMatrix::from_rows(&[[2, 1]], 4).unwrap();
        let h = howell_form(&m).unwrap();
        assert_eq!(h.row_vecs(), vec![vec![2, 1], vec![0, 2]]);
    }

    #[test]
    fn invalid_modulus_and_shape() {
        assert_eq!(
            RingMatrix::from_rows(&[[1]], 1),
            Err(RingError::InvalidModulus(1))
        );
        assert!(matches!(
            RingMatrix::from_rows(&[vec![1, 2], vec![1]], 5),
            Err(RingError::Shape(_))
        ));
        let m = RingMatrix::from_rows(&[[1, 2]], 5).unwrap();
        assert!(matches!(span_contains(&m, &[1]), Err(RingError::Shape(_))));
    }

    #[test]
    fn membership_in_sum_zero_lattice() {
        let m = RingMatrix::from_rows(&[[0, 1, 8], [1, 0, 8], [1, 8, 0]], 9).unwrap();
        let brute = brute_span(&m.row_vecs(), 9, 3);
        assert!(span_contains(&m, &[5, 2, 2]).unwrap());
        assert!(brute.contains(&vec![5, 2, 2]));
        assert!(!span_contains(&m, &[1, 0, 0]).unwrap());
        assert!(!brute.contains(&vec![1, 0, 0]));
        assert!(span_contains(&m, &[0, 0, 0]).unwrap());
    }

    #[test]
    fn solve_combination_examples() {
        let basis = RingMatrix::from_rows(&[[2, 5, 2], [3, 3, 3]], 9).unwrap();
        assert_eq!(
            solve_combination(&basis, &[2, 5, 2]).unwrap(),
            Some(vec![1, 0])
        );

        let c = solve_combination(&basis, &[6, 6, 6]).unwrap().unwrap();
        assert_eq!(c, vec![0, 2]);
        let back: Vec<u64> = (0..3)
            .map(|j| (c[0] * basis.get(0, j) + c[1] * basis.get(1, j)) % 9)
            .collect();
        assert_eq!(back, vec![6, 6, 6]);

        // Brute force over all 81 coefficient pairs agrees that (5,2,2) is unreachable.
        let reachable = (0..81u64).any(|i| {
            let (a, b) = (i / 9, i % 9);
            (0..3).all(|j| (a * basis.get(0, j) + b * basis.get(1, j)) % 9 == [5, 2, 2][j])
        });
        assert!(!reachable);
        assert_eq!(solve_combination(&basis, &[5, 2, 2]).unwrap(), None);
    }

    #[test]
    fn coordinates_are_canonical() {
        let m = RingMatrix::from_rows(&[[2, 5, 2], [3, 3, 3]], 9).unwrap();
        let hb = HowellBasis::new(&m).unwrap();
        let elems: Vec<_> = hb.elements().collect();
        assert_eq!(elems.len() as u128, hb.span_size());
        assert_eq!(elems.iter().collect::<HashSet<_>>().len(), elems.len());
        assert_eq!(hb.span_size(), 9);
        for e in &elems {
            let c = hb.coordinates(e).unwrap().unwrap();
            assert_eq!(&hb.combine(&c), e);
            for (ci, o) in c.iter().zip(hb.row_orders()) {
                assert!(*ci < o);
            }
        }
    }

    #[test]
    fn scalar_arithmetic() {
        let a = RingScalar::new(7, 9).unwrap();
        let b = RingScalar::new(-4, 9).unwrap();
        assert_eq!(b.value(), 5);
        assert_eq!((a + b).value(), 3);
        assert_eq!((a * b).value(), 8);
        assert_eq!((-a).value(), 2);
        assert_eq!(a.inverse().unwrap().value(), 4);
        assert!(RingScalar::new(3, 9).unwrap().inverse().is_none());
    }

    #[test]
    fn normalizing_unit_hits_divisor() {
        for k in [2u64, 4, 8, 9, 12, 30] {
            for a in 1..k {
                let u = normalizing_unit(a, k);
                assert_eq!(gcd(u, k), 1);
                assert_eq!(mul_mod(u, a, k), gcd(a, k));
            }
        }
    }
}
