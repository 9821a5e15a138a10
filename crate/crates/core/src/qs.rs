//! Unimodular tuples over K<t_1..t_n>_rho and their reduction to (1, 0, ..., 0).
//!
//! A reduction produces an invertible matrix M with M f = e_1 together with
//! its inverse and the list of moves that built it. Everything is checked by
//! multiplication at Gauss valuation (N - guard)/e.

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::padic::{PAdic, RingConfig};
use crate::tate::{div_rem_monic, tj_inverse, tj_transform, weierstrass_prepare, Monomial, TateSeries, TjMode};

pub const MAX_QS_VARS: usize = 3;
pub const MAX_QS_ENTRIES: usize = 5;
/// Degree cap used for the working copies during a reduction.
pub const WORK_CAP: u32 = 256;
const MOVE_BUDGET: usize = 2000;
const DEFAULT_TJ_MAX: u32 = 4;

/// Entries f_1..f_m with a Bezout witness g, sum g_i f_i = 1.
#[derive(Clone, Debug)]
pub struct UnimodularTuple {
    entries: Vec<TateSeries>,
    witness: Vec<TateSeries>,
}

impl UnimodularTuple {
    /// Checks the witness before accepting the tuple.
    pub fn new(entries: Vec<TateSeries>, witness: Vec<TateSeries>) -> Result<Self> {
        if !verify_unimodular(&entries, &witness)? {
            return Err(Error::VerificationFailed("sum g_i f_i is not 1 at the check precision".into()));
        }
        Ok(UnimodularTuple { entries, witness })
    }

    /// In at most one variable the witness is computed by the reduction itself.
    pub fn with_computed_witness(entries: Vec<TateSeries>) -> Result<Self> {
        check_shape(&entries)?;
        if entries[0].n() > 1 {
            return Err(Error::Unsupported("a witness is required in two or more variables".into()));
        }
        let (m, _, _) = Reducer::new(DEFAULT_TJ_MAX).run(&entries, None, None)?;
        let witness = m.row(0);
        Self::new(entries, witness)
    }

    pub fn entries(&self) -> &[TateSeries] {
        &self.entries
    }

    pub fn witness(&self) -> &[TateSeries] {
        &self.witness
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn config(&self) -> &RingConfig {
        self.entries[0].config()
    }
}

fn check_shape(f: &[TateSeries]) -> Result<()> {
    let first = f.first().ok_or_else(|| Error::DimensionMismatch("empty tuple".into()))?;
    for x in f {
        if x.config() != first.config() {
            return Err(Error::ConfigMismatch);
        }
        if x.radius() != first.radius() {
            return Err(Error::DimensionMismatch("entries live on different polydiscs".into()));
        }
    }
    Ok(())
}

fn check_val(cfg: &RingConfig) -> Rational64 {
    cfg.pi_to_vp(cfg.check_prec())
}

/// Whether x is certified to vanish modulo Gauss valuation v.
fn certified_zero(x: &TateSeries, v: Rational64) -> bool {
    x.gauss_valuation().map_or(true, |g| g >= v) && x.prec().is_none_or(|p| p >= v)
}

fn dot(a: &[TateSeries], b: &[TateSeries]) -> Result<TateSeries> {
    let mut acc = a[0].zero_like();
    for (x, y) in a.iter().zip(b) {
        acc = acc.add(&x.mul(y)?)?;
    }
    Ok(acc)
}

fn one_like(x: &TateSeries) -> TateSeries {
    x.constant_like(PAdic::one(*x.config()))
}

/// True iff sum g_i f_i = 1 modulo pi^(N - guard).
pub fn verify_unimodular(f: &[TateSeries], g: &[TateSeries]) -> Result<bool> {
    check_shape(f)?;
    if f.len() != g.len() {
        return Err(Error::DimensionMismatch("witness length differs from the tuple".into()));
    }
    let all: Vec<TateSeries> = f.iter().chain(g).cloned().collect();
    check_shape(&all)?;
    let s = dot(g, f)?.sub(&one_like(&f[0]))?;
    Ok(certified_zero(&s, check_val(f[0].config())))
}

/// One step of a reduction, acting on the current tuple.
#[derive(Clone, Debug)]
pub enum Move {
    /// row `target` += factor * row `source`
    Elem { target: usize, source: usize, factor: TateSeries },
    Swap { a: usize, b: usize },
    /// row multiplied by the inverse of a unit
    Unit { row: usize, unit: TateSeries },
    /// rows (a, b) multiplied by [[g_a, g_b], [-f_b, f_a]]
    Bezout { a: usize, b: usize },
    /// moves up to the matching exit act on T_j(f)
    TjEnter { j: u32 },
    TjExit { j: u32 },
}

impl Move {
    pub fn kind(&self) -> &'static str {
        match self {
            Move::Elem { .. } | Move::Swap { .. } => "elem",
            Move::Unit { .. } => "weier",
            Move::Bezout { .. } => "bezout",
            Move::TjEnter { .. } | Move::TjExit { .. } => "tj",
        }
    }

    fn remap(self, idx: &[usize]) -> Move {
        match self {
            Move::Elem { target, source, factor } => Move::Elem { target: idx[target], source: idx[source], factor },
            Move::Swap { a, b } => Move::Swap { a: idx[a], b: idx[b] },
            Move::Unit { row, unit } => Move::Unit { row: idx[row], unit },
            Move::Bezout { a, b } => Move::Bezout { a: idx[a], b: idx[b] },
            other => other,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReductionCertificate {
    pub f: Vec<TateSeries>,
    pub witness: Option<Vec<TateSeries>>,
    pub m: Mat<TateSeries>,
    pub m_inv: Mat<TateSeries>,
    pub moves: Vec<Move>,
    pub verified: bool,
    /// Gauss valuation to which M f = e_1 and M M_inv = I were checked.
    pub checked_to: Rational64,
}

/// Independent check of M f = e_1 and M M_inv = I modulo Gauss valuation (N - guard)/e.
pub fn verify_reduction(f: &[TateSeries], m: &Mat<TateSeries>, m_inv: &Mat<TateSeries>) -> Result<bool> {
    check_shape(f)?;
    let n = f.len();
    if m.rows() != n || m.cols() != n || m_inv.rows() != n || m_inv.cols() != n {
        return Err(Error::DimensionMismatch("certificate matrices must be m x m".into()));
    }
    let v = check_val(f[0].config());
    let one = one_like(&f[0]);
    let mf = m.mul_vec(f)?;
    for (i, x) in mf.iter().enumerate() {
        let d = if i == 0 { x.sub(&one)? } else { x.clone() };
        if !certified_zero(&d, v) {
            return Ok(false);
        }
    }
    let prod = m.mul(m_inv)?;
    for i in 0..n {
        for j in 0..n {
            let x = prod.get(i, j);
            let d = if i == j { x.sub(&one)? } else { x.clone() };
            if !certified_zero(&d, v) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Term order for top reduction: smaller weight first, then larger total
/// degree, then larger exponents read from t_n down to t_1.
fn lead(f: &TateSeries) -> Option<(Monomial, PAdic)> {
    let radius = f.radius();
    let n = f.n();
    let key = |m: &Monomial, c: &PAdic| {
        let w = c.v_p().expect("stored terms are nonzero") + radius.weight(m);
        let deg: u32 = m.iter().map(|e| *e as u32).sum();
        let mut rev = [0u16; crate::tate::MAX_VARS];
        for k in 0..n {
            rev[k] = m[n - 1 - k];
        }
        (w, std::cmp::Reverse(deg), std::cmp::Reverse(rev))
    };
    f.terms().min_by(|a, b| key(a.0, a.1).cmp(&key(b.0, b.1))).map(|(m, c)| (*m, c.clone()))
}

fn divides(a: &Monomial, b: &Monomial) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

fn quotient(b: &Monomial, a: &Monomial) -> Monomial {
    let mut q = *b;
    for (slot, x) in q.iter_mut().zip(a) {
        *slot -= x;
    }
    q
}

/// (largest total degree, number of terms)
fn series_size(x: &TateSeries) -> (u64, u64) {
    let deg = x.terms().map(|(m, _)| m.iter().map(|e| *e as u64).sum::<u64>()).max().unwrap_or(0);
    (deg, x.num_terms() as u64)
}

/// The quotient q collected by top-reducing x by y, or None if the leading
/// monomial of y does not divide that of x.
fn top_quotient(x: &TateSeries, y: &TateSeries) -> Result<Option<TateSeries>> {
    let (my, cy) = lead(y).expect("nonzero divisor");
    let cy_inv = cy.inv()?;
    let mut cur = x.clone();
    let mut q = x.zero_like();
    for _ in 0..MOVE_BUDGET {
        let Some((mx, cx)) = lead(&cur) else { break };
        if !divides(&my, &mx) {
            break;
        }
        let shift = quotient(&mx, &my);
        let c = &cx * &cy_inv;
        cur = cur.sub(&y.mul_term(&c, &shift)?)?;
        q = q.add(&one_like(&cur).mul_term(&c, &shift)?)?;
    }
    Ok(if q.is_zero() { None } else { Some(q) })
}

/// Tuple, witness and transformation matrices of a reduction in progress.
struct Work {
    f: Vec<TateSeries>,
    g: Option<Vec<TateSeries>>,
    m: Mat<TateSeries>,
    minv: Mat<TateSeries>,
    moves: Vec<Move>,
}

impl Work {
    fn new(f: Vec<TateSeries>, g: Option<Vec<TateSeries>>) -> Self {
        let m = Mat::identity(f.len(), &one_like(&f[0]));
        Work { minv: m.clone(), m, f, g, moves: Vec::new() }
    }

    fn len(&self) -> usize {
        self.f.len()
    }

    /// row t += c * row s
    fn elem(&mut self, t: usize, s: usize, c: TateSeries) -> Result<()> {
        if c.is_zero() {
            return Ok(());
        }
        self.f[t] = self.f[t].add(&c.mul(&self.f[s])?)?;
        for j in 0..self.len() {
            let v = self.m.get(t, j).add(&c.mul(self.m.get(s, j))?)?;
            self.m.set(t, j, v);
            let w = self.minv.get(j, s).sub(&c.mul(self.minv.get(j, t))?)?;
            self.minv.set(j, s, w);
        }
        if let Some(g) = &mut self.g {
            g[s] = g[s].sub(&c.mul(&g[t])?)?;
        }
        self.moves.push(Move::Elem { target: t, source: s, factor: c });
        Ok(())
    }

    fn swap(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        self.f.swap(a, b);
        let n = self.len();
        for j in 0..n {
            let (x, y) = (self.m.get(a, j).clone(), self.m.get(b, j).clone());
            self.m.set(a, j, y);
            self.m.set(b, j, x);
            let (x, y) = (self.minv.get(j, a).clone(), self.minv.get(j, b).clone());
            self.minv.set(j, a, y);
            self.minv.set(j, b, x);
        }
        if let Some(g) = &mut self.g {
            g.swap(a, b);
        }
        self.moves.push(Move::Swap { a, b });
    }

    /// Divides row r by the unit u.
    fn unit(&mut self, r: usize, u: TateSeries) -> Result<()> {
        let inv = u.inv_unit()?;
        self.f[r] = self.f[r].mul(&inv)?;
        for j in 0..self.len() {
            let v = self.m.get(r, j).mul(&inv)?;
            self.m.set(r, j, v);
            let w = self.minv.get(j, r).mul(&u)?;
            self.minv.set(j, r, w);
        }
        if let Some(g) = &mut self.g {
            g[r] = g[r].mul(&u)?;
        }
        self.moves.push(Move::Unit { row: r, unit: u });
        Ok(())
    }

    fn bezout(&mut self, a: usize, b: usize) -> Result<()> {
        let g = self.g.as_ref().ok_or_else(|| Error::Unsupported("pair step needs a witness".into()))?;
        let (ga, gb) = (g[a].clone(), g[b].clone());
        let (fa, fb) = (self.f[a].clone(), self.f[b].clone());
        let n = self.len();
        for j in 0..n {
            let (ra, rb) = (self.m.get(a, j).clone(), self.m.get(b, j).clone());
            self.m.set(a, j, ga.mul(&ra)?.add(&gb.mul(&rb)?)?);
            self.m.set(b, j, fa.mul(&rb)?.sub(&fb.mul(&ra)?)?);
            let (ca, cb) = (self.minv.get(j, a).clone(), self.minv.get(j, b).clone());
            self.minv.set(j, a, ca.mul(&fa)?.add(&cb.mul(&fb)?)?);
            self.minv.set(j, b, cb.mul(&ga)?.sub(&ca.mul(&gb)?)?);
        }
        let s = ga.mul(&fa)?.add(&gb.mul(&fb)?)?;
        self.f[a] = s.clone();
        self.f[b] = fa.zero_like();
        let g = self.g.as_mut().expect("checked above");
        g[a] = s;
        g[b] = fa.zero_like();
        self.moves.push(Move::Bezout { a, b });
        Ok(())
    }

    /// Rows `idx` multiplied by `sub` (with inverse `sub_inv`).
    fn apply_block(&mut self, idx: &[usize], sub: &Mat<TateSeries>, sub_inv: &Mat<TateSeries>) -> Result<()> {
        let n = self.len();
        let fs: Vec<TateSeries> = idx.iter().map(|&i| self.f[i].clone()).collect();
        let new_f = sub.mul_vec(&fs)?;
        for (a, &i) in idx.iter().enumerate() {
            self.f[i] = new_f[a].clone();
        }
        let mut new_m = self.m.clone();
        let mut new_minv = self.minv.clone();
        for (a, &i) in idx.iter().enumerate() {
            for j in 0..n {
                let mut acc = self.f[0].zero_like();
                let mut acc_inv = self.f[0].zero_like();
                for (b, &k) in idx.iter().enumerate() {
                    acc = acc.add(&sub.get(a, b).mul(self.m.get(k, j))?)?;
                    acc_inv = acc_inv.add(&self.minv.get(j, k).mul(sub_inv.get(b, a))?)?;
                }
                new_m.set(i, j, acc);
                new_minv.set(j, i, acc_inv);
            }
        }
        self.m = new_m;
        self.minv = new_minv;
        if let Some(g) = &mut self.g {
            let gs: Vec<TateSeries> = idx.iter().map(|&i| g[i].clone()).collect();
            for (a, &i) in idx.iter().enumerate() {
                let col: Vec<TateSeries> = (0..idx.len()).map(|b| sub_inv.get(b, a).clone()).collect();
                g[i] = dot(&gs, &col)?;
            }
        }
        Ok(())
    }

    /// f_0 is a unit: scale it to 1 and clear the other rows.
    fn finish(&mut self) -> Result<()> {
        let u = self.f[0].clone();
        if !u.sub(&one_like(&u))?.is_zero() {
            self.unit(0, u)?;
        }
        for i in 1..self.len() {
            if !self.f[i].is_zero() {
                let c = self.f[i].neg();
                self.elem(i, 0, c)?;
            }
        }
        Ok(())
    }

    /// Applies the top reduction, on either the tuple or the witness side,
    /// that lowers the total size of both the most. Returns false if none does.
    fn best_reduction(&mut self) -> Result<bool> {
        let m = self.len();
        let before = self.size();
        let mut best: Option<((u64, u64), usize, usize, TateSeries)> = None;
        let sides: &[bool] = if self.g.is_some() { &[true, false] } else { &[true] };
        for &on_f in sides {
            let vecs = if on_f { &self.f } else { self.g.as_ref().expect("witness side") };
            for i in 0..m {
                for k in 0..m {
                    if i == k || vecs[k].is_zero() || vecs[i].is_zero() {
                        continue;
                    }
                    let Some(q) = top_quotient(&vecs[i], &vecs[k])? else { continue };
                    // tuple side: f_i -= q f_k, g_k += q g_i; witness side: g_i -= q g_k, f_k += q f_i
                    let (t, s_, c) = if on_f { (i, k, q.neg()) } else { (k, i, q) };
                    let after = self.size_after(t, s_, &c)?;
                    if after < before && best.as_ref().is_none_or(|b| after < b.0) {
                        best = Some((after, t, s_, c));
                    }
                }
            }
        }
        match best {
            Some((_, t, s_, c)) => {
                self.elem(t, s_, c)?;
                Ok(true)
            }
            None => Ok(false),
        }
    }

    fn size(&self) -> (u64, u64) {
        let mut acc = (0, 0);
        for x in self.f.iter().chain(self.g.iter().flatten()) {
            let s = series_size(x);
            acc = (acc.0 + s.0, acc.1 + s.1);
        }
        acc
    }

    /// Size after row t += c row s.
    fn size_after(&self, t: usize, s: usize, c: &TateSeries) -> Result<(u64, u64)> {
        let (mut d, mut n) = self.size();
        let ft = self.f[t].add(&c.mul(&self.f[s])?)?;
        let (a, b) = (series_size(&self.f[t]), series_size(&ft));
        d = d + b.0 - a.0;
        n = n + b.1 - a.1;
        if let Some(g) = &self.g {
            let gs = g[s].sub(&c.mul(&g[t])?)?;
            let (a, b) = (series_size(&g[s]), series_size(&gs));
            d = d + b.0 - a.0;
            n = n + b.1 - a.1;
        }
        Ok((d, n))
    }

    /// A unit witness entry g_k turns f_k into the unit 1/g_k.
    fn use_unit_witness(&mut self, k: usize) -> Result<()> {
        let g = self.g.clone().expect("witness present");
        let inv = g[k].inv_unit()?;
        for j in 0..self.len() {
            if j != k && !g[j].is_zero() {
                self.elem(k, j, g[j].mul(&inv)?)?;
            }
        }
        Ok(())
    }

    /// Division with remainder in `var` by an entry with a unit leading coefficient.
    fn euclid_step(&mut self, var: usize) -> Result<bool> {
        let mut best: Option<(u32, usize)> = None;
        for (k, x) in self.f.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            let (d, c) = x.leading_term(var)?;
            if c.is_unit() && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, k));
            }
        }
        let Some((d, k)) = best else { return Ok(false) };
        let targets: Vec<usize> =
            (0..self.len()).filter(|&i| i != k && !self.f[i].is_zero() && self.f[i].degree_in(var) >= d).collect();
        if targets.is_empty() {
            return Ok(false);
        }
        let prep = weierstrass_prepare(&self.f[k], var)?;
        for i in targets {
            let (quo, _) = div_rem_monic(&self.f[i], &prep.poly, var, d)?;
            let c = quo.mul(&prep.unit_inv)?.neg();
            self.elem(i, k, c)?;
        }
        Ok(true)
    }
}

/// Drives the reduction; moves are collected in local row indices.
struct Reducer {
    tj_max: u32,
    spent: usize,
}

impl Reducer {
    fn new(tj_max: u32) -> Self {
        Reducer { tj_max, spent: 0 }
    }

    /// Lifts to working precision 2N, reduces, and reads the result back.
    fn run(
        &mut self,
        f: &[TateSeries],
        g: Option<&[TateSeries]>,
        poly_var: Option<usize>,
    ) -> Result<(Mat<TateSeries>, Mat<TateSeries>, Vec<Move>)> {
        check_shape(f)?;
        let cfg = *f[0].config();
        if f[0].n() > MAX_QS_VARS || f.len() > MAX_QS_ENTRIES {
            return Err(Error::Unsupported(format!(
                "reduction is limited to {MAX_QS_VARS} variables and {MAX_QS_ENTRIES} entries"
            )));
        }
        let work_cfg = cfg.with_prec(2 * cfg.prec);
        let lift = |x: &TateSeries| -> Result<TateSeries> { x.lift_exact().with_config(work_cfg)?.with_cap(WORK_CAP) };
        let fw = f.iter().map(lift).collect::<Result<Vec<_>>>()?;
        let gw = g.map(|g| g.iter().map(lift).collect::<Result<Vec<_>>>()).transpose()?;
        let (m, minv, moves) = match poly_var {
            None => self.solve(fw, gw, 2)?,
            Some(var) if var < f[0].n() => self.poly_solve(fw, gw, var, 2)?,
            Some(var) => return Err(Error::DimensionMismatch(format!("no variable t{}", var + 1))),
        };
        let back = |x: &TateSeries| -> Result<TateSeries> { x.with_config(cfg) };
        let moves = moves
            .into_iter()
            .map(|mv| {
                Ok(match mv {
                    Move::Elem { target, source, factor } => Move::Elem { target, source, factor: back(&factor)? },
                    Move::Unit { row, unit } => Move::Unit { row, unit: back(&unit)? },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((m.map(back)?, minv.map(back)?, moves))
    }

    fn solve(
        &mut self,
        f: Vec<TateSeries>,
        g: Option<Vec<TateSeries>>,
        tj_depth: u32,
    ) -> Result<(Mat<TateSeries>, Mat<TateSeries>, Vec<Move>)> {
        let mut w = Work::new(f, g);
        let n = w.f[0].n();
        loop {
            self.spent += 1;
            if self.spent > MOVE_BUDGET {
                return Err(Error::DegreeStuck("move budget exhausted".into()));
            }
            if let Some(k) = w.f.iter().position(|x| x.is_unit()) {
                w.swap(0, k);
                w.finish()?;
                return Ok((w.m, w.minv, w.moves));
            }
            if let Some(k) = w.g.as_ref().and_then(|g| g.iter().position(|x| x.is_unit())) {
                w.use_unit_witness(k)?;
                continue;
            }
            if w.len() == 1 {
                return Err(Error::NotAUnit);
            }
            if let Some(k) = w.f.iter().position(|x| x.is_zero()) {
                let last = w.len() - 1;
                w.swap(k, last);
                let idx: Vec<usize> = (0..last).collect();
                let fs = w.f[..last].to_vec();
                let gs = w.g.as_ref().map(|g| g[..last].to_vec());
                let (sm, sminv, moves) = self.solve(fs, gs, tj_depth)?;
                w.apply_block(&idx, &sm, &sminv)?;
                w.moves.extend(moves.into_iter().map(|mv| mv.remap(&idx)));
                return Ok((w.m, w.minv, w.moves));
            }
            if let Some(k) = w.g.as_ref().and_then(|g| g.iter().position(|x| x.is_zero())) {
                // the other entries are unimodular on their own
                let last = w.len() - 1;
                w.swap(k, last);
                let idx: Vec<usize> = (0..last).collect();
                let fs = w.f[..last].to_vec();
                let gs = w.g.as_ref().map(|g| g[..last].to_vec());
                let (sm, sminv, moves) = self.solve(fs, gs, tj_depth)?;
                w.apply_block(&idx, &sm, &sminv)?;
                w.moves.extend(moves.into_iter().map(|mv| mv.remap(&idx)));
                w.finish()?;
                return Ok((w.m, w.minv, w.moves));
            }
            if w.len() == 2 && w.g.is_some() {
                w.bezout(0, 1)?;
                continue;
            }
            if w.best_reduction()? {
                continue;
            }
            break;
        }
        // normalise with T_j, then divide by a Weierstrass polynomial in t_n
        let var = n - 1;
        let j_max = if n >= 2 && tj_depth > 0 { self.tj_max } else { 0 };
        let mode = TjMode::field_for(&w.f[0])?;
        let mut last_err = Error::DegreeStuck("no entry can be reduced further".into());
        for j in 0..=j_max {
            let attempt = (|| -> Result<_> {
                if j == 0 {
                    return self.poly_solve(w.f.clone(), w.g.clone(), var, tj_depth);
                }
                let tf = w.f.iter().map(|x| tj_transform(x, j, &mode)).collect::<Result<Vec<_>>>()?;
                let tg = match &w.g {
                    Some(g) => Some(g.iter().map(|x| tj_transform(x, j, &mode)).collect::<Result<Vec<_>>>()?),
                    None => None,
                };
                let (sm, sminv, moves) = self.poly_solve(tf, tg, var, tj_depth - 1)?;
                let back = |x: &TateSeries| tj_inverse(x, j, &mode);
                Ok((sm.map(back)?, sminv.map(back)?, moves))
            })();
            match attempt {
                Ok((sm, sminv, moves)) => {
                    let idx: Vec<usize> = (0..w.len()).collect();
                    w.apply_block(&idx, &sm, &sminv)?;
                    if j > 0 {
                        w.moves.push(Move::TjEnter { j });
                    }
                    w.moves.extend(moves);
                    if j > 0 {
                        w.moves.push(Move::TjExit { j });
                    }
                    return Ok((w.m, w.minv, w.moves));
                }
                Err(e) => last_err = e,
            }
        }
        Err(last_err)
    }

    /// Euclidean division in `var` by entries with a unit leading coefficient.
    /// Once every other entry is free of `var`, they are reduced over the
    /// smaller algebra and the pivot is cleared.
    fn poly_solve(
        &mut self,
        f: Vec<TateSeries>,
        g: Option<Vec<TateSeries>>,
        var: usize,
        tj_depth: u32,
    ) -> Result<(Mat<TateSeries>, Mat<TateSeries>, Vec<Move>)> {
        let mut w = Work::new(f, g);
        if !w.f.iter().any(|x| x.leading_term(var).is_ok_and(|(_, c)| c.is_unit())) {
            return Err(Error::NoUnitLeadingEntry);
        }
        loop {
            self.spent += 1;
            if self.spent > MOVE_BUDGET {
                return Err(Error::DegreeStuck("move budget exhausted".into()));
            }
            if let Some(k) = w.f.iter().position(|x| x.is_unit()) {
                w.swap(0, k);
                w.finish()?;
                return Ok((w.m, w.minv, w.moves));
            }
            if w.euclid_step(var)? {
                continue;
            }
            let (k, _) = w
                .f
                .iter()
                .enumerate()
                .filter_map(|(k, x)| x.leading_term(var).ok().filter(|(_, c)| c.is_unit()).map(|(d, _)| (k, d)))
                .min_by_key(|(_, d)| *d)
                .ok_or(Error::NoUnitLeadingEntry)?;
            let others: Vec<usize> = (0..w.len()).filter(|&i| i != k).collect();
            if others.iter().any(|&i| w.f[i].degree_in(var) > 0) {
                return Err(Error::DegreeStuck(format!("entries still involve t{} without a unit leading coefficient", var + 1)));
            }
            let g = w.g.clone().ok_or_else(|| Error::Unsupported("the descent step needs a witness".into()))?;
            // sum over i != k of (g_i mod P) f_i = 1 with f_i free of var; keep the constant coefficient
            let prep = weierstrass_prepare(&w.f[k], var)?;
            let sub_g = others
                .iter()
                .map(|&i| {
                    let (_, r) = div_rem_monic(&g[i], &prep.poly, var, prep.degree)?;
                    Ok(r.coefficient_in(var, 0))
                })
                .collect::<Result<Vec<_>>>()?;
            let sub_f: Vec<TateSeries> = others.iter().map(|&i| w.f[i].clone()).collect();
            let (sm, sminv, moves) = self.solve(sub_f, Some(sub_g), tj_depth)?;
            w.apply_block(&others, &sm, &sminv)?;
            w.moves.extend(moves.into_iter().map(|mv| mv.remap(&others)));
            let one_at = others[0];
            let c = w.f[k].neg();
            w.elem(k, one_at, c)?;
            w.swap(0, one_at);
            w.finish()?;
            return Ok((w.m, w.minv, w.moves));
        }
    }
}

fn certificate(
    f: &[TateSeries],
    witness: Option<Vec<TateSeries>>,
    tj_max: u32,
    poly_var: Option<usize>,
) -> Result<ReductionCertificate> {
    let (m, m_inv, moves) = Reducer::new(tj_max).run(f, witness.as_deref(), poly_var)?;
    let verified = verify_reduction(f, &m, &m_inv)?;
    if !verified {
        return Err(Error::VerificationFailed(format!(
            "M f = e_1 or M M_inv = I fails modulo pi^{}; retry at N' = {}",
            f[0].config().check_prec(),
            2 * f[0].config().prec
        )));
    }
    Ok(ReductionCertificate {
        f: f.to_vec(),
        witness,
        m,
        m_inv,
        moves,
        verified,
        checked_to: check_val(f[0].config()),
    })
}

/// Reduces f to (1, 0, ..., 0); the certificate is re-verified before it is returned.
pub fn unimodular_reduce(f: &UnimodularTuple) -> Result<ReductionCertificate> {
    unimodular_reduce_with(f, DEFAULT_TJ_MAX)
}

pub fn unimodular_reduce_with(f: &UnimodularTuple, tj_max: u32) -> Result<ReductionCertificate> {
    certificate(&f.entries, Some(f.witness.clone()), tj_max, None)
}

/// Division by a tuple entry with a unit leading coefficient in `var`, down to
/// entries free of `var`, which are then reduced over the remaining variables.
pub fn poly_reduce(f: &UnimodularTuple, var: usize) -> Result<ReductionCertificate> {
    certificate(&f.entries, Some(f.witness.clone()), DEFAULT_TJ_MAX, Some(var))
}

/// An invertible matrix with first column f: the inverse of the reduction matrix.
pub fn complete_to_square(f: &UnimodularTuple) -> Result<Mat<TateSeries>> {
    Ok(unimodular_reduce(f)?.m_inv)
}

/// Free basis of {v : u . v = 0} for a unimodular row u.
#[derive(Clone, Debug)]
pub struct KernelBasis {
    pub vectors: Vec<Vec<TateSeries>>,
    /// u M' = e_1^T; its columns 2..m are the basis
    pub completion: Mat<TateSeries>,
    pub completion_inv: Mat<TateSeries>,
}

/// Reduces u as a column, so M u = e_1 and M' = M^T satisfies u M' = e_1^T.
pub fn kernel_free_basis(u: &UnimodularTuple) -> Result<KernelBasis> {
    let cert = unimodular_reduce(u)?;
    let completion = cert.m.transpose();
    let completion_inv = cert.m_inv.transpose();
    let vectors = (1..u.len()).map(|k| completion.col(k)).collect();
    Ok(KernelBasis { vectors, completion, completion_inv })
}

/// Checks u . v = 0 for every basis vector and that the completion is invertible.
pub fn verify_kernel_basis(u: &[TateSeries], basis: &KernelBasis) -> Result<bool> {
    check_shape(u)?;
    let v = check_val(u[0].config());
    for vec in &basis.vectors {
        if vec.len() != u.len() {
            return Err(Error::DimensionMismatch("basis vector length differs from u".into()));
        }
        if !certified_zero(&dot(u, vec)?, v) {
            return Ok(false);
        }
    }
    verify_reduction(u, &basis.completion.transpose(), &basis.completion_inv.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::EXACT;
    use crate::random::{elementary_row, elementary_tuple, rng, unit_radius};
    use crate::tate::PolyRadius;

    fn cfg() -> RingConfig {
        RingConfig::unramified(5, 12).unwrap()
    }

    fn poly(n: usize, terms: &[(&[u32], i64)]) -> TateSeries {
        TateSeries::from_ints(cfg(), unit_radius(n), terms).unwrap()
    }

    fn is_const(x: &TateSeries, c: i64) -> bool {
        let v = check_val(x.config());
        let d = x.sub(&x.constant_like(PAdic::from_int(*x.config(), c, EXACT))).unwrap();
        certified_zero(&d, v)
    }

    #[test]
    fn verify_unimodular_examples() {
        let (one, zero) = (poly(1, &[(&[0], 1)]), poly(1, &[]));
        assert!(verify_unimodular(&[one.clone(), zero.clone()], &[one.clone(), zero.clone()]).unwrap());
        let t = poly(1, &[(&[1], 1)]);
        let p = poly(1, &[(&[0], 5)]);
        let inv_p = p.constant_like(PAdic::from_int(cfg(), 5, EXACT).inv().unwrap());
        assert!(verify_unimodular(&[t.clone(), p], &[zero.clone(), inv_p]).unwrap());
        let t2 = poly(1, &[(&[2], 1)]);
        // sum g_i f_i vanishes at t = 0
        for g in [[one.clone(), one.clone()], [poly(1, &[(&[0], 3), (&[1], 7)]), one.clone()]] {
            assert!(!verify_unimodular(&[t.clone(), t2.clone()], &g).unwrap());
        }
        assert!(UnimodularTuple::new(vec![t.clone(), t2], vec![one.clone(), one]).is_err());
    }

    #[test]
    fn identity_tuple_needs_no_moves() {
        let f = vec![poly(2, &[(&[0, 0], 1)]), poly(2, &[]), poly(2, &[])];
        let tup = UnimodularTuple::new(f.clone(), f).unwrap();
        let cert = unimodular_reduce(&tup).unwrap();
        assert!(cert.verified);
        for i in 0..3 {
            for j in 0..3 {
                assert!(is_const(cert.m.get(i, j), (i == j) as i64));
            }
        }
        let sq = complete_to_square(&tup).unwrap();
        assert!(is_const(sq.get(0, 0), 1) && is_const(sq.get(1, 0), 0));
    }

    #[test]
    fn unit_entry_gives_inverse_row() {
        // (t, p): M contains the row (0, 1/p)
        let f = vec![poly(1, &[(&[1], 1)]), poly(1, &[(&[0], 5)])];
        let tup = UnimodularTuple::with_computed_witness(f).unwrap();
        let cert = unimodular_reduce(&tup).unwrap();
        let inv_p = PAdic::from_int(cfg(), 5, EXACT).inv().unwrap();
        let row_found = (0..2).any(|i| {
            cert.m.get(i, 0).is_zero() && {
                let d = cert.m.get(i, 1).sub(&cert.m.get(i, 1).constant_like(inv_p.clone())).unwrap();
                d.is_zero()
            }
        });
        assert!(row_found);
        assert!(cert.verified);
    }

    #[test]
    fn poly_reduce_examples() {
        // (1, h): one elementary move
        let h = poly(2, &[(&[1, 2], 3), (&[0, 1], 1)]);
        let tup = UnimodularTuple::new(vec![poly(2, &[(&[0, 0], 1)]), h], vec![poly(2, &[(&[0, 0], 1)]), poly(2, &[])]).unwrap();
        let cert = poly_reduce(&tup, 1).unwrap();
        assert_eq!(cert.moves.iter().filter(|m| matches!(m, Move::Elem { .. })).count(), 1);

        // (t, 1 + t) with witness (-1, 1)
        let f = vec![poly(1, &[(&[1], 1)]), poly(1, &[(&[0], 1), (&[1], 1)])];
        let g = vec![poly(1, &[(&[0], -1)]), poly(1, &[(&[0], 1)])];
        let tup = UnimodularTuple::new(f.clone(), g).unwrap();
        let cert = poly_reduce(&tup, 0).unwrap();
        assert!(verify_reduction(&f, &cert.m, &cert.m_inv).unwrap());
        // the oracle: row 1 of M is (1 + t, -t) up to sign, M is a product of 2x2 elementary matrices
        let det = cert.m.get(0, 0).mul(cert.m.get(1, 1)).unwrap().sub(&cert.m.get(0, 1).mul(cert.m.get(1, 0)).unwrap()).unwrap();
        assert!(is_const(&det, 1) || is_const(&det, -1));

        // (t^2 + 1, t): Euclid gives 1 * (t^2 + 1) - t * t = 1
        let f = vec![poly(1, &[(&[2], 1), (&[0], 1)]), poly(1, &[(&[1], 1)])];
        let g = vec![poly(1, &[(&[0], 1)]), poly(1, &[(&[1], -1)])];
        let tup = UnimodularTuple::new(f.clone(), g).unwrap();
        let cert = poly_reduce(&tup, 0).unwrap();
        assert!(cert.verified && verify_reduction(&f, &cert.m, &cert.m_inv).unwrap());
        let computed = UnimodularTuple::with_computed_witness(f).unwrap();
        assert!(verify_unimodular(computed.entries(), computed.witness()).unwrap());
    }

    #[test]
    fn poly_reduce_descends_to_fewer_variables() {
        // f_1 = t2 + t1 is monic in t2; the remainders (1 - t1 t2) mod f_1 and t1 are free of t2
        let f1 = poly(2, &[(&[0, 1], 1), (&[1, 0], 1)]);
        let f2 = poly(2, &[(&[0, 0], 1), (&[1, 1], -1)]);
        let f3 = poly(2, &[(&[1, 0], 1)]);
        // 0 * f1 + 1 * f2 + t2 * f3 = 1
        let g = vec![poly(2, &[]), poly(2, &[(&[0, 0], 1)]), poly(2, &[(&[0, 1], 1)])];
        let tup = UnimodularTuple::new(vec![f1, f2, f3], g).unwrap();
        let cert = poly_reduce(&tup, 1).unwrap();
        assert!(cert.verified);
    }

    #[test]
    fn poly_reduce_requires_a_unit_leading_entry() {
        let f = vec![poly(2, &[(&[1, 1], 1), (&[0, 0], 5)]), poly(2, &[(&[1, 0], 1)])];
        let inv5 = PAdic::from_int(cfg(), 5, EXACT).inv().unwrap();
        let g = vec![f[0].constant_like(inv5.clone()), poly(2, &[(&[0, 1], -1)]).scale(&inv5).unwrap()];
        let tup = UnimodularTuple::new(f, g).unwrap();
        assert!(matches!(poly_reduce(&tup, 1), Err(Error::NoUnitLeadingEntry)));
        assert!(unimodular_reduce(&tup).unwrap().verified);
    }

    #[test]
    fn random_round_trips() {
        let c = cfg();
        let mut r = rng(11);
        for n in 1..=3 {
            let radius = unit_radius(n);
            for i in 0..25 {
                let m = 2 + i % 4;
                let tup = elementary_tuple(&mut r, c, &radius, m, 6, 4).unwrap();
                let cert = unimodular_reduce(&tup).unwrap();
                assert!(cert.verified);
                assert!(verify_reduction(tup.entries(), &cert.m, &cert.m_inv).unwrap());
                // the completion has first column f and a unit determinant
                let sq = &cert.m_inv;
                for (k, x) in tup.entries().iter().enumerate() {
                    assert!(x.eq_to(sq.get(k, 0), check_val(&c)).unwrap());
                }
                if m <= 3 {
                    let det = sq.det().unwrap();
                    assert!(det.is_unit(), "det {det}");
                }
            }
        }
    }

    #[test]
    fn kernel_basis_examples() {
        let one = poly(2, &[(&[0, 0], 1)]);
        let zero = poly(2, &[]);
        let u = UnimodularTuple::new(vec![one.clone(), zero.clone(), zero.clone()], vec![one.clone(), zero.clone(), zero.clone()]).unwrap();
        let kb = kernel_free_basis(&u).unwrap();
        assert_eq!(kb.vectors.len(), 2);
        for (k, v) in kb.vectors.iter().enumerate() {
            for (j, x) in v.iter().enumerate() {
                assert!(is_const(x, (j == k + 1) as i64));
            }
        }
        let unit = poly(2, &[(&[0, 0], 2), (&[1, 0], 5)]);
        let u = UnimodularTuple::new(vec![unit.clone()], vec![unit.inv_unit().unwrap()]).unwrap();
        assert!(kernel_free_basis(&u).unwrap().vectors.is_empty());

        let mut r = rng(5);
        let radius = PolyRadius::unit(2).unwrap();
        for _ in 0..10 {
            let u = elementary_row(&mut r, cfg(), &radius, 4, 6, 4).unwrap();
            let kb = kernel_free_basis(&u).unwrap();
            assert_eq!(kb.vectors.len(), 3);
            assert!(verify_kernel_basis(u.entries(), &kb).unwrap());
        }
    }

    #[test]
    fn witness_survives_every_move() {
        let mut r = rng(3);
        let radius = unit_radius(2);
        let tup = elementary_tuple(&mut r, cfg(), &radius, 4, 6, 4).unwrap();
        let cert = unimodular_reduce(&tup).unwrap();
        // replay: the transported witness g M^-1 still certifies M f
        let mf = cert.m.mul_vec(tup.entries()).unwrap();
        let gt = cert.m_inv.transpose().mul_vec(tup.witness()).unwrap();
        assert!(verify_unimodular(&mf, &gt).unwrap());
    }

    #[test]
    fn caps_are_enforced() {
        let f: Vec<TateSeries> = (0..6).map(|_| poly(1, &[(&[0], 1)])).collect();
        let mut g = vec![poly(1, &[]); 6];
        g[0] = poly(1, &[(&[0], 1)]);
        let tup = UnimodularTuple::new(f, g).unwrap();
        assert!(matches!(unimodular_reduce(&tup), Err(Error::Unsupported(_))));
    }
}
