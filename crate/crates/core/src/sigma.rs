//! Frobenius modules over truncated series rings.
//!
//! A module of rank n is stored through the matrix A of its sigma-linear map
//! on a fixed basis, so that F(v) = A * sigma(v).

use num_rational::Rational64;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::laurent::{LaurentSeries, RingTag, SigmaAction};
use crate::matrix::{Mat, Ring};
use crate::padic::{PAdic, Prec, RingConfig, EXACT};

/// Largest rank for which compound-matrix slope estimates are computed.
pub const MAX_COMPOUND_RANK: usize = 6;

#[derive(Clone, Debug)]
pub struct SigmaModule {
    frob: Mat<LaurentSeries>,
    connection: Option<Mat<LaurentSeries>>,
    action: SigmaAction,
}

/// Applies sigma entrywise.
pub fn sigma_mat(m: &Mat<LaurentSeries>, act: &SigmaAction) -> Result<Mat<LaurentSeries>> {
    m.map(|x| act.apply(x))
}

/// Smallest p-adic valuation among the entries, `None` if all vanish at precision.
pub fn mat_v_p(m: &Mat<LaurentSeries>) -> Option<Rational64> {
    m.entries().filter_map(|x| x.v_p()).min()
}

/// Inverse of a square series matrix whose determinant has a dominant monomial.
pub fn invert(m: &Mat<LaurentSeries>) -> Result<Mat<LaurentSeries>> {
    m.inverse_with(|d| {
        if d.is_zero() {
            return Err(Error::NotInvertibleAtPrecision("determinant vanishes at precision".into()));
        }
        match d.tag().overconvergence() {
            Some(r) => d.clone().with_tag(RingTag::Robba(r))?.inv(),
            None => d.inv(),
        }
    })
}

impl SigmaModule {
    pub fn new(frob: Mat<LaurentSeries>, action: SigmaAction) -> Result<Self> {
        if !frob.is_square() || frob.rows() == 0 {
            return Err(Error::DimensionMismatch("Frobenius matrix must be square and non-empty".into()));
        }
        let det = frob.det()?;
        if det.v_p().is_none() {
            return Err(Error::NotInvertibleAtPrecision("Frobenius determinant vanishes at precision".into()));
        }
        Ok(SigmaModule { frob, connection: None, action })
    }

    pub fn with_connection(mut self, g: Mat<LaurentSeries>) -> Result<Self> {
        if g.rows() != self.rank() || g.cols() != self.rank() {
            return Err(Error::DimensionMismatch("connection matrix must match the rank".into()));
        }
        self.connection = Some(g);
        Ok(self)
    }

    pub fn rank(&self) -> usize {
        self.frob.rows()
    }

    pub fn frobenius(&self) -> &Mat<LaurentSeries> {
        &self.frob
    }

    pub fn connection(&self) -> Option<&Mat<LaurentSeries>> {
        self.connection.as_ref()
    }

    pub fn action(&self) -> &SigmaAction {
        &self.action
    }

    pub fn config(&self) -> RingConfig {
        *self.frob.get(0, 0).config()
    }

    /// F(v) = A sigma(v).
    pub fn apply(&self, v: &[LaurentSeries]) -> Result<Vec<LaurentSeries>> {
        if v.len() != self.rank() {
            return Err(Error::DimensionMismatch("vector length differs from the rank".into()));
        }
        let sv = v.iter().map(|x| self.action.apply(x)).collect::<Result<Vec<_>>>()?;
        self.frob.mul_vec(&sv)
    }

    /// The module M(l): Frobenius multiplied by q^l.
    pub fn tate_twist(&self, l: i64) -> Result<Self> {
        let cfg = self.config();
        let q = PAdic::from_int(cfg, cfg.q(), EXACT);
        let factor = if l >= 0 { q.pow(l as u64) } else { q.pow(l.unsigned_abs()).inv()? };
        let frob = self.frob.map(|x| {
            let x = match x.tag().overconvergence() {
                Some(r) if l < 0 => x.clone().with_tag(RingTag::Robba(r))?,
                _ => x.clone(),
            };
            x.scale(&factor)
        })?;
        Ok(SigmaModule { frob, connection: self.connection.clone(), action: self.action.clone() })
    }

    /// Hom(M1, M2)(l): Frobenius acts on n2 x n1 matrices X by q^l A2 sigma(X) A1^-1.
    ///
    /// Basis order: E_ab at index a * n1 + b.
    pub fn hom_module(m1: &SigmaModule, m2: &SigmaModule, l: i64) -> Result<Self> {
        let (n1, n2) = (m1.rank(), m2.rank());
        let a1_inv = invert(&m1.frob)?;
        let a2 = &m2.frob;
        let n = n1 * n2;
        let entries = Mat::try_from_fn(n, n, |row, col| {
            let (c, d) = (row / n1, row % n1);
            let (a, b) = (col / n1, col % n1);
            a2.get(c, a).mul(a1_inv.get(b, d))
        })?;
        let hom = SigmaModule { frob: entries, connection: None, action: m1.action.clone() };
        if l == 0 {
            Ok(hom)
        } else {
            hom.tate_twist(l)
        }
    }

    /// Checks F v = lambda v modulo pi^(N - guard).
    pub fn eigenvector_check(&self, v: &[LaurentSeries], lambda: &PAdic) -> Result<bool> {
        let fv = self.apply(v)?;
        let target = self.config().check_prec();
        for (a, b) in fv.iter().zip(v) {
            let diff = a.sub(&b.scale(lambda)?)?;
            if diff.val_pi() < target {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Compatibility A' + G A = (d sigma(u)/du) A sigma(G) modulo pi^(N - guard).
    pub fn check_nabla_compat(&self) -> Result<bool> {
        let g = self
            .connection
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("module has no connection".into()))?;
        let a = &self.frob;
        let tag = a.get(0, 0).tag();
        let a_prime = a.map(|x| Ok(x.derive()))?;
        let lhs = a_prime.add(&g.mul(a)?)?;
        let dsu = self.action.image_of_u(self.config(), tag)?.derive();
        let rhs = a.mul(&sigma_mat(g, &self.action)?)?.map(|x| dsu.mul(x))?;
        let diff = lhs.sub(&rhs)?;
        let target = self.config().check_prec();
        let ok = diff.entries().all(|x| x.val_pi() >= target);
        Ok(ok)
    }

    /// Iterated product A sigma(A) ... sigma^(n-1)(A).
    pub fn twisted_power(&self, n: usize) -> Result<Mat<LaurentSeries>> {
        let mut acc = self.frob.clone();
        let mut cur = self.frob.clone();
        for _ in 1..n {
            cur = sigma_mat(&cur, &self.action)?;
            acc = acc.mul(&cur)?;
        }
        Ok(acc)
    }

    pub fn newton_slopes(&self, depth: usize) -> Result<NewtonEstimate> {
        if depth == 0 {
            return Err(Error::InvalidConfig("Newton slope depth must be at least 1".into()));
        }
        let n = self.rank();
        let exact = self.triangular_slopes();
        if n > MAX_COMPOUND_RANK && exact.is_none() {
            return Err(Error::Unsupported(format!("compound estimates need rank at most {MAX_COMPOUND_RANK}")));
        }
        let mut log = Vec::with_capacity(depth);
        let mut acc = self.frob.clone();
        let mut cur = self.frob.clone();
        for d in 1..=depth {
            if d > 1 {
                cur = sigma_mat(&cur, &self.action)?;
                acc = acc.mul(&cur)?;
            }
            if n > MAX_COMPOUND_RANK {
                continue;
            }
            let mut sums = Vec::with_capacity(n);
            for k in 1..=n {
                let v = compound_valuation(&acc, k)?;
                sums.push(v / Rational64::from_integer(d as i64));
            }
            log.push(sums);
        }
        let partial_sums = match &exact {
            Some(slopes) => {
                let mut acc = Rational64::zero();
                slopes
                    .iter()
                    .map(|s| {
                        acc += *s;
                        acc
                    })
                    .collect()
            }
            None => log.last().cloned().unwrap_or_default(),
        };
        Ok(NewtonEstimate { partial_sums, depth, exact: exact.is_some(), log })
    }

    /// Slopes read from the diagonal when A is triangular with constant diagonal in O.
    fn triangular_slopes(&self) -> Option<Vec<Rational64>> {
        if !(self.frob.is_upper_triangular() || self.frob.is_lower_triangular()) {
            return None;
        }
        let mut out = Vec::new();
        for i in 0..self.rank() {
            let x = self.frob.get(i, i);
            let mut terms = x.terms();
            let (e, c) = terms.next()?;
            if e != 0 || terms.next().is_some() || !x.is_closed() || !c.is_integral() {
                return None;
            }
            out.push(c.v_p()?);
        }
        out.sort();
        Some(out)
    }

    /// Basis of {v in O^n : A v = v} when A is constant and sigma is trivial on O.
    pub fn fixed_vectors_constant(&self) -> Result<Vec<Vec<PAdic>>> {
        let cfg = self.config();
        let a = self.frob.map(|x| {
            let mut t = x.terms();
            match (t.next(), t.next()) {
                (None, _) => Ok(PAdic::exact_zero(cfg)),
                (Some((0, c)), None) if c.is_integral() => Ok(c.clone()),
                _ => Err(Error::InvalidConfig("fixed vectors need a constant Frobenius matrix over O".into())),
            }
        })?;
        let m = a.sub(&Mat::identity(self.rank(), &PAdic::one(cfg)))?;
        Ok(kernel_basis(&m, cfg.prec))
    }
}

/// Minimum valuation (in v_p units) over the k x k minors.
fn compound_valuation(m: &Mat<LaurentSeries>, k: usize) -> Result<Rational64> {
    let minors = m.compound(k)?;
    let cfg = *m.get(0, 0).config();
    let attained = minors.iter().filter_map(|x| x.v_p()).min();
    let floor = minors.iter().filter(|x| x.v_p().is_none()).map(|x| x.prec()).min();
    match (attained, floor) {
        (Some(v), Some(f)) if f < EXACT && cfg.pi_to_vp(f) < v => Err(Error::PrecisionExhausted(format!(
            "a {k}x{k} minor vanishes at precision below the attained valuation"
        ))),
        (Some(v), _) => Ok(v),
        (None, _) => Err(Error::PrecisionExhausted(format!("all {k}x{k} minors vanish at precision"))),
    }
}

/// Free basis of the kernel of a matrix over O, by Smith-style elimination modulo pi^prec.
pub fn kernel_basis(m: &Mat<PAdic>, prec: Prec) -> Vec<Vec<PAdic>> {
    let (rows, cols) = (m.rows(), m.cols());
    let mut work = m.clone();
    let one = PAdic::one(*m.get(0, 0).config());
    let mut right = Mat::identity(cols, &one);
    let trunc = |x: &PAdic| x.truncate_abs(prec);
    let mut pivots = 0;
    while pivots < rows.min(cols) {
        // entry of least valuation in the remaining block
        let mut best: Option<(i64, usize, usize)> = None;
        for i in pivots..rows {
            for j in pivots..cols {
                if let Some(v) = trunc(work.get(i, j)).val_pi() {
                    if best.is_none_or(|b| v < b.0) {
                        best = Some((v, i, j));
                    }
                }
            }
        }
        let Some((_, pi, pj)) = best else { break };
        swap_rows(&mut work, pivots, pi);
        swap_cols(&mut work, pivots, pj);
        swap_cols(&mut right, pivots, pj);
        let piv = work.get(pivots, pivots).clone();
        for i in 0..rows {
            if i != pivots {
                let f = work.get(i, pivots).div(&piv).expect("pivot divides");
                for j in 0..cols {
                    let v = work.get(i, j) - &(&f * work.get(pivots, j));
                    work.set(i, j, v);
                }
            }
        }
        for j in 0..cols {
            if j != pivots {
                let f = work.get(pivots, j).div(&piv).expect("pivot divides");
                for i in 0..rows {
                    let v = work.get(i, j) - &(&f * work.get(i, pivots));
                    work.set(i, j, v);
                }
                for i in 0..cols {
                    let v = right.get(i, j) - &(&f * right.get(i, pivots));
                    right.set(i, j, v);
                }
            }
        }
        pivots += 1;
    }
    (pivots..cols).map(|j| right.col(j).iter().map(trunc).collect()).collect()
}

fn swap_rows<T: Ring>(m: &mut Mat<T>, a: usize, b: usize) {
    if a == b {
        return;
    }
    for j in 0..m.cols() {
        let (x, y) = (m.get(a, j).clone(), m.get(b, j).clone());
        m.set(a, j, y);
        m.set(b, j, x);
    }
}

fn swap_cols<T: Ring>(m: &mut Mat<T>, a: usize, b: usize) {
    if a == b {
        return;
    }
    for i in 0..m.rows() {
        let (x, y) = (m.get(i, a).clone(), m.get(i, b).clone());
        m.set(i, a, y);
        m.set(i, b, x);
    }
}

/// Estimates of the partial sums s_k of the k smallest generic slopes.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonEstimate {
    /// s_1, ..., s_n, in v_p units.
    pub partial_sums: Vec<Rational64>,
    pub depth: usize,
    /// Whether the sums are certified exact rather than estimated.
    pub exact: bool,
    /// Compound-matrix estimates at each depth 1..=depth; empty above rank 6.
    pub log: Vec<Vec<Rational64>>,
}

impl NewtonEstimate {
    /// Individual slopes, as successive differences of the partial sums.
    pub fn slopes(&self) -> Vec<Rational64> {
        let mut prev = Rational64::zero();
        self.partial_sums
            .iter()
            .map(|s| {
                let d = *s - prev;
                prev = *s;
                d
            })
            .collect()
    }

    /// Whether each partial-sum estimate moved monotonically across depths.
    pub fn monotone(&self) -> Vec<bool> {
        let k = self.partial_sums.len();
        (0..k)
            .map(|i| {
                let seq: Vec<_> = self.log.iter().map(|s| s[i]).collect();
                seq.windows(2).all(|w| w[0] <= w[1]) || seq.windows(2).all(|w| w[0] >= w[1])
            })
            .collect()
    }
}
