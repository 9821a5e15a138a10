//! Small dense matrices over the crate's ring types.

use crate::error::{Error, Result};
use crate::laurent::LaurentSeries;
use crate::padic::PAdic;

/// Ring operations shared by coefficients, series and Tate series.
pub trait Ring: Clone {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn add_r(&self, other: &Self) -> Result<Self>;
    fn sub_r(&self, other: &Self) -> Result<Self>;
    fn mul_r(&self, other: &Self) -> Result<Self>;
    fn is_zero_r(&self) -> bool;
}

impl Ring for PAdic {
    fn zero_like(&self) -> Self {
        PAdic::exact_zero(*self.config())
    }
    fn one_like(&self) -> Self {
        PAdic::one(*self.config())
    }
    fn add_r(&self, other: &Self) -> Result<Self> {
        same_cfg(self, other)?;
        Ok(self + other)
    }
    fn sub_r(&self, other: &Self) -> Result<Self> {
        same_cfg(self, other)?;
        Ok(self - other)
    }
    fn mul_r(&self, other: &Self) -> Result<Self> {
        same_cfg(self, other)?;
        Ok(self * other)
    }
    fn is_zero_r(&self) -> bool {
        self.is_zero()
    }
}

fn same_cfg(a: &PAdic, b: &PAdic) -> Result<()> {
    if a.config() != b.config() {
        return Err(Error::ConfigMismatch);
    }
    Ok(())
}

impl Ring for LaurentSeries {
    fn zero_like(&self) -> Self {
        LaurentSeries::zero(*self.config(), self.tag(), crate::padic::EXACT)
    }
    fn one_like(&self) -> Self {
        LaurentSeries::one(*self.config(), self.tag(), crate::padic::EXACT)
    }
    fn add_r(&self, other: &Self) -> Result<Self> {
        self.add(other)
    }
    fn sub_r(&self, other: &Self) -> Result<Self> {
        self.sub(other)
    }
    fn mul_r(&self, other: &Self) -> Result<Self> {
        self.mul(other)
    }
    fn is_zero_r(&self) -> bool {
        self.is_zero()
    }
}

#[derive(Clone, Debug)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Ring> Mat<T> {
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged matrix rows".into()));
        }
        Ok(Mat { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn try_from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Result<T>) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j)?);
            }
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize, template: &T) -> Self {
        Self::from_fn(rows, cols, |_, _| template.zero_like())
    }

    pub fn identity(n: usize, template: &T) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { template.one_like() } else { template.zero_like() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn entries(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn map<U: Ring>(&self, mut f: impl FnMut(&T) -> Result<U>) -> Result<Mat<U>> {
        let data = self.data.iter().map(&mut f).collect::<Result<Vec<_>>>()?;
        Ok(Mat { rows: self.rows, cols: self.cols, data })
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} against {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a.add_r(b)).collect::<Result<_>>()?;
        Ok(Mat { rows: self.rows, cols: self.cols, data })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a.sub_r(b)).collect::<Result<_>>()?;
        Ok(Mat { rows: self.rows, cols: self.cols, data })
    }

    pub fn neg(&self) -> Result<Self> {
        self.map(|a| a.zero_like().sub_r(a))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let template = self.data.first().or(other.data.first());
        let Some(template) = template else {
            return Ok(Mat { rows: self.rows, cols: other.cols, data: vec![] });
        };
        Self::try_from_fn(self.rows, other.cols, |i, j| {
            let mut acc = template.zero_like();
            for k in 0..self.cols {
                acc = acc.add_r(&self.get(i, k).mul_r(other.get(k, j))?)?;
            }
            Ok(acc)
        })
    }

    pub fn mul_vec(&self, v: &[T]) -> Result<Vec<T>> {
        let col = Mat { rows: v.len(), cols: 1, data: v.to_vec() };
        Ok(self.mul(&col)?.data)
    }

    pub fn scale(&self, c: &T) -> Result<Self> {
        self.map(|a| c.mul_r(a))
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self.get(rows[i], cols[j]).clone())
    }

    /// `[[a, b], [c, d]]` assembled from blocks.
    pub fn block(a: &Self, b: &Self, c: &Self, d: &Self) -> Result<Self> {
        if a.rows != b.rows || c.rows != d.rows || a.cols != c.cols || b.cols != d.cols {
            return Err(Error::DimensionMismatch("block shapes do not fit".into()));
        }
        let (r, cl) = (a.rows + c.rows, a.cols + b.cols);
        Ok(Self::from_fn(r, cl, |i, j| match (i < a.rows, j < a.cols) {
            (true, true) => a.get(i, j).clone(),
            (true, false) => b.get(i, j - a.cols).clone(),
            (false, true) => c.get(i - a.rows, j).clone(),
            (false, false) => d.get(i - a.rows, j - a.cols).clone(),
        }))
    }

    /// Determinant; cost grows like n 2^n, which is fine at the ranks used here.
    pub fn det(&self) -> Result<T> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch("determinant of a non-square matrix".into()));
        }
        let n = self.rows;
        if n == 0 {
            return Err(Error::DimensionMismatch("determinant of an empty matrix".into()));
        }
        let idx: Vec<usize> = (0..n).collect();
        det_rec(self, &idx, &idx)
    }

    pub fn minor(&self, rows: &[usize], cols: &[usize]) -> Result<T> {
        det_rec(self, rows, cols)
    }

    /// All k x k minors, indexed by (row subset, column subset) in lexicographic order.
    pub fn compound(&self, k: usize) -> Result<Vec<T>> {
        let rs = subsets(self.rows, k);
        let cs = subsets(self.cols, k);
        let mut out = Vec::with_capacity(rs.len() * cs.len());
        for r in &rs {
            for c in &cs {
                out.push(det_rec(self, r, c)?);
            }
        }
        Ok(out)
    }

    /// Adjugate matrix, so that `self * adj = det * I`.
    pub fn adjugate(&self) -> Result<Self> {
        let n = self.rows;
        if !self.is_square() || n == 0 {
            return Err(Error::DimensionMismatch("adjugate needs a non-empty square matrix".into()));
        }
        if n == 1 {
            return Ok(Self::identity(1, &self.data[0]));
        }
        Self::try_from_fn(n, n, |i, j| {
            let rows: Vec<usize> = (0..n).filter(|&r| r != j).collect();
            let cols: Vec<usize> = (0..n).filter(|&c| c != i).collect();
            let m = det_rec(self, &rows, &cols)?;
            if (i + j) % 2 == 0 {
                Ok(m)
            } else {
                m.zero_like().sub_r(&m)
            }
        })
    }

    /// Inverse through the adjugate, given a way to invert the determinant.
    pub fn inverse_with(&self, inv: impl Fn(&T) -> Result<T>) -> Result<Self> {
        let d = self.det()?;
        let dinv = inv(&d)?;
        self.adjugate()?.scale(&dinv)
    }

    pub fn is_upper_triangular(&self) -> bool {
        (0..self.rows).all(|i| (0..self.cols.min(i)).all(|j| self.get(i, j).is_zero_r()))
    }

    pub fn is_lower_triangular(&self) -> bool {
        self.transpose().is_upper_triangular()
    }
}

/// Determinant of the submatrix on `rows` x `cols` by dynamic programming over column subsets.
fn det_rec<T: Ring>(m: &Mat<T>, rows: &[usize], cols: &[usize]) -> Result<T> {
    let k = rows.len();
    if k == 0 || k != cols.len() {
        return Err(Error::DimensionMismatch("minor needs matching non-empty index sets".into()));
    }
    if k == 1 {
        return Ok(m.get(rows[0], cols[0]).clone());
    }
    // partial[mask] = signed sum over injections of the first |mask| rows onto mask
    let mut partial: Vec<Option<T>> = vec![None; 1 << k];
    let template = m.get(rows[0], cols[0]);
    partial[0] = Some(template.one_like());
    for mask in 0usize..(1 << k) {
        let Some(acc) = partial[mask].take() else { continue };
        let r = mask.count_ones() as usize;
        if r == k {
            partial[mask] = Some(acc);
            continue;
        }
        for c in 0..k {
            if mask & (1 << c) != 0 {
                continue;
            }
            let entry = m.get(rows[r], cols[c]);
            if entry.is_zero_r() {
                continue;
            }
            let term = acc.mul_r(entry)?;
            let inversions = (mask >> (c + 1)).count_ones();
            let next = mask | (1 << c);
            partial[next] = Some(match (partial[next].take(), inversions % 2 == 0) {
                (None, true) => term,
                (None, false) => term.zero_like().sub_r(&term)?,
                (Some(a), true) => a.add_r(&term)?,
                (Some(a), false) => a.sub_r(&term)?,
            });
        }
    }
    Ok(partial[(1 << k) - 1].take().unwrap_or_else(|| template.zero_like()))
}

/// k-element subsets of 0..n in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::{RingConfig, EXACT};

    fn int_mat(c: RingConfig, rows: &[&[i64]]) -> Mat<PAdic> {
        Mat::from_rows(rows.iter().map(|r| r.iter().map(|&v| PAdic::from_int(c, v, EXACT)).collect()).collect())
            .unwrap()
    }

    #[test]
    fn determinant_and_adjugate() {
        let c = RingConfig::unramified(7, 10).unwrap();
        let m = int_mat(c, &[&[2, 1, 0], &[1, 3, 1], &[0, 1, 4]]);
        assert_eq!(m.det().unwrap(), PAdic::from_int(c, 18, EXACT));
        let prod = m.mul(&m.adjugate().unwrap()).unwrap();
        let expect = Mat::identity(3, &prod.data[0]).scale(&PAdic::from_int(c, 18, EXACT)).unwrap();
        for (a, b) in prod.entries().zip(expect.entries()) {
            assert_eq!(a, b);
        }
        let inv = m.inverse_with(|d| d.inv()).unwrap();
        let id = m.mul(&inv).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(id.get(i, j), &PAdic::from_int(c, (i == j) as i64, EXACT));
            }
        }
    }

    #[test]
    fn compound_counts_and_values() {
        let c = RingConfig::unramified(5, 8).unwrap();
        let m = int_mat(c, &[&[1, 2, 3], &[4, 5, 6], &[7, 8, 10]]);
        assert_eq!(m.compound(2).unwrap().len(), 9);
        assert_eq!(m.compound(3).unwrap()[0], m.det().unwrap());
        assert_eq!(m.minor(&[0, 1], &[0, 1]).unwrap(), PAdic::from_int(c, -3, EXACT));
        assert_eq!(subsets(4, 2).len(), 6);
    }

    #[test]
    fn block_assembly() {
        let c = RingConfig::unramified(3, 4).unwrap();
        let a = int_mat(c, &[&[1]]);
        let b = int_mat(c, &[&[2, 3]]);
        let cc = int_mat(c, &[&[0], &[0]]);
        let d = int_mat(c, &[&[4, 5], &[6, 7]]);
        let m = Mat::block(&a, &b, &cc, &d).unwrap();
        assert_eq!((m.rows(), m.cols()), (3, 3));
        assert_eq!(m.get(2, 2), &PAdic::from_int(c, 7, EXACT));
        assert!(!m.is_upper_triangular());
        assert!(Mat::block(&a, &d, &cc, &b).is_err());
    }
}
