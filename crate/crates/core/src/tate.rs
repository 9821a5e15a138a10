//! Truncated power series over K converging on a closed polydisc.
//!
//! A series is known modulo the set of series of Gauss valuation at least
//! `prec`, so terms whose weight v_p(c_I) + sum_k i_k e_k reaches `prec` are
//! dropped. `prec = None` marks an exact series.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Rational64;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::matrix::Ring;
use crate::padic::{PAdic, RingConfig, EXACT};

pub const MAX_VARS: usize = 6;
pub const DEFAULT_DEGREE_CAP: u32 = 64;

/// Exponent vector; entries past the variable count stay zero.
pub type Monomial = [u16; MAX_VARS];

/// Log-radii e_k, meaning rho_k = p^(-e_k).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyRadius {
    logs: Vec<Rational64>,
}

impl PolyRadius {
    pub fn new(logs: Vec<Rational64>) -> Result<Self> {
        if logs.is_empty() || logs.len() > MAX_VARS {
            return Err(Error::InvalidConfig(format!("between 1 and {MAX_VARS} variables are supported")));
        }
        Ok(PolyRadius { logs })
    }

    /// All radii equal to 1.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(vec![Rational64::zero(); n])
    }

    pub fn n(&self) -> usize {
        self.logs.len()
    }

    pub fn log(&self, k: usize) -> Rational64 {
        self.logs[k]
    }

    pub fn logs(&self) -> &[Rational64] {
        &self.logs
    }

    pub fn weight(&self, mono: &Monomial) -> Rational64 {
        self.logs.iter().zip(mono).map(|(e, i)| *e * Rational64::from_integer(*i as i64)).sum()
    }

    pub fn scaled(&self, lambda: Rational64) -> Self {
        PolyRadius { logs: self.logs.iter().map(|e| *e * lambda).collect() }
    }
}

#[derive(Clone, Debug)]
pub struct TateSeries {
    cfg: RingConfig,
    radius: PolyRadius,
    cap: u32,
    prec: Option<Rational64>,
    terms: BTreeMap<Monomial, PAdic>,
}

fn prec_min(a: Option<Rational64>, b: Option<Rational64>) -> Option<Rational64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn prec_plus(a: Option<Rational64>, b: Option<Rational64>) -> Option<Rational64> {
    Some(a? + b?)
}

pub fn mono(exps: &[u32]) -> Result<Monomial> {
    if exps.len() > MAX_VARS {
        return Err(Error::InvalidConfig("too many variables".into()));
    }
    let mut m = [0u16; MAX_VARS];
    for (slot, e) in m.iter_mut().zip(exps) {
        *slot = u16::try_from(*e).map_err(|_| Error::WindowOverflow(format!("exponent {e}")))?;
    }
    Ok(m)
}

impl TateSeries {
    pub fn new(
        cfg: RingConfig,
        radius: PolyRadius,
        cap: u32,
        prec: Option<Rational64>,
        terms: Vec<(Monomial, PAdic)>,
    ) -> Result<Self> {
        let mut map: BTreeMap<Monomial, PAdic> = BTreeMap::new();
        for (m, c) in terms {
            if *c.config() != cfg {
                return Err(Error::ConfigMismatch);
            }
            if m[radius.n()..].iter().any(|e| *e != 0) {
                return Err(Error::DimensionMismatch("exponent for a variable that does not exist".into()));
            }
            let v = match map.remove(&m) {
                Some(a) => &a + &c,
                None => c,
            };
            map.insert(m, v);
        }
        let mut s = TateSeries { cfg, radius, cap, prec, terms: map };
        s.normalize()?;
        Ok(s)
    }

    /// Series with the default cap and Gauss precision N/e.
    pub fn from_terms(cfg: RingConfig, radius: PolyRadius, terms: Vec<(Monomial, PAdic)>) -> Result<Self> {
        let prec = Some(cfg.pi_to_vp(cfg.prec));
        Self::new(cfg, radius, DEFAULT_DEGREE_CAP, prec, terms)
    }

    /// Integer coefficients: `(exponents, value)`.
    pub fn from_ints(cfg: RingConfig, radius: PolyRadius, terms: &[(&[u32], i64)]) -> Result<Self> {
        let t = terms
            .iter()
            .map(|(e, v)| Ok((mono(e)?, PAdic::from_int(cfg, *v, EXACT))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_terms(cfg, radius, t)
    }

    pub fn zero_like(&self) -> Self {
        TateSeries { cfg: self.cfg, radius: self.radius.clone(), cap: self.cap, prec: None, terms: BTreeMap::new() }
    }

    pub fn constant_like(&self, c: PAdic) -> Self {
        let mut s = self.zero_like();
        if !c.is_zero() {
            s.terms.insert([0; MAX_VARS], c);
        }
        s.normalize().expect("constants fit any cap");
        s
    }

    /// The variable t_k with the same ring data.
    pub fn var_like(&self, k: usize) -> Self {
        let mut m = [0u16; MAX_VARS];
        m[k] = 1;
        let mut s = self.zero_like();
        s.terms.insert(m, PAdic::one(self.cfg));
        s
    }

    fn normalize(&mut self) -> Result<()> {
        let e = self.cfg.e as i64;
        for (m, c) in &self.terms {
            if !c.is_exact() {
                let bound = self.cfg.pi_to_vp(c.abs_prec()) + self.radius.weight(m);
                self.prec = prec_min(self.prec, Some(bound));
            }
        }
        let prec = self.prec;
        let radius = &self.radius;
        let mut out = BTreeMap::new();
        for (m, c) in std::mem::take(&mut self.terms) {
            let c = match prec {
                Some(p) => {
                    let room = (p - radius.weight(&m)) * Rational64::from_integer(e);
                    c.truncate_abs(room.ceil().to_integer())
                }
                None => c,
            };
            if !c.is_zero() {
                out.insert(m, c);
            }
        }
        if let Some((m, _)) = out.iter().find(|(m, _)| m.iter().any(|x| *x as u32 > self.cap)) {
            return Err(Error::WindowOverflow(format!("monomial {:?} exceeds the degree cap {}", &m[..self.radius.n()], self.cap)));
        }
        self.terms = out;
        Ok(())
    }

    pub fn config(&self) -> &RingConfig {
        &self.cfg
    }

    pub fn radius(&self) -> &PolyRadius {
        &self.radius
    }

    pub fn n(&self) -> usize {
        self.radius.n()
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn prec(&self) -> Option<Rational64> {
        self.prec
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &PAdic)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn with_prec(&self, prec: Option<Rational64>) -> Result<Self> {
        let mut s = self.clone();
        s.prec = prec_min(s.prec, prec);
        s.normalize()?;
        Ok(s)
    }

    /// Treats the stored coefficients as exact.
    pub fn lift_exact(&self) -> Self {
        let mut s = self.clone();
        s.prec = None;
        for c in s.terms.values_mut() {
            *c = c.lift_abs(EXACT);
        }
        s
    }

    /// Re-reads the coefficients in a configuration that differs only in N or guard.
    pub fn with_config(&self, cfg: RingConfig) -> Result<Self> {
        let mut s = self.clone();
        s.cfg = cfg;
        for c in s.terms.values_mut() {
            *c = c.with_config(cfg)?;
        }
        Ok(s)
    }

    /// Product with the single term c * x^shift.
    pub fn mul_term(&self, c: &PAdic, shift: &Monomial) -> Result<Self> {
        if c.is_zero() {
            let mut z = self.zero_like();
            z.prec = prec_plus(self.prec, Some(self.cfg.pi_to_vp(c.abs_prec()) + self.radius.weight(shift)));
            return Ok(z);
        }
        let mut s = self.clone();
        s.terms = self
            .terms
            .iter()
            .map(|(m, a)| {
                let mut k = *m;
                for (slot, e) in k.iter_mut().zip(shift) {
                    *slot = slot.checked_add(*e).ok_or_else(|| Error::WindowOverflow("exponent overflow".into()))?;
                }
                Ok((k, a * c))
            })
            .collect::<Result<_>>()?;
        let w = c.v_p().expect("nonzero") + self.radius.weight(shift);
        s.prec = self.prec.map(|p| p + w);
        if !c.is_exact() {
            let g = self.gauss_or_prec();
            let bound = g.map(|g| g + self.radius.weight(shift) + self.cfg.pi_to_vp(c.abs_prec()));
            s.prec = prec_min(s.prec, bound);
        }
        s.normalize()?;
        Ok(s)
    }

    pub fn with_cap(&self, cap: u32) -> Result<Self> {
        let mut s = self.clone();
        s.cap = cap;
        s.normalize()?;
        Ok(s)
    }

    /// Same series read over another polyradius.
    pub fn with_radius(&self, radius: PolyRadius) -> Result<Self> {
        if radius.n() != self.n() {
            return Err(Error::DimensionMismatch("radius has the wrong number of variables".into()));
        }
        let mut s = self.clone();
        s.radius = radius;
        s.normalize()?;
        Ok(s)
    }

    fn term_weight(&self, m: &Monomial, c: &PAdic) -> Rational64 {
        c.v_p().expect("stored terms are nonzero") + self.radius.weight(m)
    }

    /// min_I (v_p(c_I) + sum_k i_k e_k); the Gauss norm is p^(-value).
    pub fn gauss_valuation(&self) -> Result<Rational64> {
        self.terms.iter().map(|(m, c)| self.term_weight(m, c)).min().ok_or(Error::ZeroAtPrecision)
    }

    /// Gauss valuation, or the precision for a series that vanishes at precision.
    fn gauss_or_prec(&self) -> Option<Rational64> {
        match self.gauss_valuation() {
            Ok(v) => Some(v),
            Err(_) => self.prec,
        }
    }

    fn check(&self, other: &TateSeries) -> Result<()> {
        if self.cfg != other.cfg {
            return Err(Error::ConfigMismatch);
        }
        if self.radius != other.radius {
            return Err(Error::DimensionMismatch("operands live on different polydiscs".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &TateSeries) -> Result<Self> {
        self.check(other)?;
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            let v = match terms.remove(m) {
                Some(a) => &a + c,
                None => c.clone(),
            };
            terms.insert(*m, v);
        }
        let mut s = TateSeries {
            cfg: self.cfg,
            radius: self.radius.clone(),
            cap: self.cap.max(other.cap),
            prec: prec_min(self.prec, other.prec),
            terms,
        };
        s.normalize()?;
        Ok(s)
    }

    pub fn neg(&self) -> Self {
        let mut s = self.clone();
        for c in s.terms.values_mut() {
            *c = -&*c;
        }
        s
    }

    pub fn sub(&self, other: &TateSeries) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &TateSeries) -> Result<Self> {
        self.check(other)?;
        let prec = prec_min(
            prec_plus(self.prec, other.gauss_or_prec()),
            prec_plus(other.prec, self.gauss_or_prec()),
        );
        let n = self.n();
        let mut terms: BTreeMap<Monomial, PAdic> = BTreeMap::new();
        for (ma, a) in &self.terms {
            let wa = self.term_weight(ma, a);
            for (mb, b) in &other.terms {
                if let Some(p) = prec {
                    if wa + other.term_weight(mb, b) >= p {
                        continue;
                    }
                }
                let mut m = [0u16; MAX_VARS];
                for k in 0..n {
                    m[k] = ma[k].checked_add(mb[k]).ok_or_else(|| Error::WindowOverflow("exponent overflow".into()))?;
                }
                let t = a * b;
                let v = match terms.remove(&m) {
                    Some(acc) => &acc + &t,
                    None => t,
                };
                terms.insert(m, v);
            }
        }
        let mut s = TateSeries { cfg: self.cfg, radius: self.radius.clone(), cap: self.cap.max(other.cap), prec, terms };
        s.normalize()?;
        Ok(s)
    }

    pub fn scale(&self, c: &PAdic) -> Result<Self> {
        self.mul(&self.constant_like(c.clone()))
    }

    pub fn pow(&self, k: u32) -> Result<Self> {
        let mut acc = self.constant_like(PAdic::one(self.cfg));
        for _ in 0..k {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    pub fn constant_term(&self) -> PAdic {
        self.terms.get(&[0; MAX_VARS]).cloned().unwrap_or_else(|| PAdic::exact_zero(self.cfg))
    }

    /// Whether the series is a unit: its constant term strictly dominates every other term.
    pub fn is_unit(&self) -> bool {
        let c0 = self.constant_term();
        let Some(v0) = c0.v_p() else { return false };
        self.terms.iter().all(|(m, c)| m.iter().all(|e| *e == 0) || self.term_weight(m, c) > v0)
    }

    /// Inverse of a unit by the geometric series in (f / c_0 - 1).
    pub fn inv_unit(&self) -> Result<Self> {
        if !self.is_unit() {
            return Err(Error::NotAUnit);
        }
        let c0 = self.constant_term();
        let c0_inv = c0.inv()?;
        let v0 = c0.v_p().expect("unit constant term");
        // 1/f is known to Gauss precision P - 2 v0; an exact f is inverted to N/e
        let out_prec = match self.prec {
            Some(p) => p - v0 - v0,
            None => self.cfg.pi_to_vp(self.cfg.prec),
        };
        let bound = Some(out_prec + v0);
        let one = self.constant_like(PAdic::one(self.cfg));
        let minus = one.sub(&self.scale(&c0_inv)?)?;
        let mut sum = one.clone();
        let mut term = one;
        loop {
            term = term.mul(&minus)?.with_prec(bound)?;
            if term.is_zero() {
                break;
            }
            sum = sum.add(&term)?;
        }
        sum.with_prec(bound)?.scale(&c0_inv)?.with_prec(Some(out_prec))
    }

    /// Largest exponent of `var` among the stored terms.
    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|m| m[var] as u32).max().unwrap_or(0)
    }

    /// Coefficient of var^deg, as a series with var exponent zero.
    pub fn coefficient_in(&self, var: usize, deg: u32) -> Self {
        let mut s = self.zero_like();
        s.prec = self.prec.map(|p| p - self.radius.log(var) * Rational64::from_integer(deg as i64));
        for (m, c) in &self.terms {
            if m[var] as u32 == deg {
                let mut k = *m;
                k[var] = 0;
                s.terms.insert(k, c.clone());
            }
        }
        s
    }

    /// Multiplication by var^k.
    pub fn shift_var(&self, var: usize, k: u32) -> Result<Self> {
        let mut s = self.clone();
        s.terms = self
            .terms
            .iter()
            .map(|(m, c)| {
                let mut m = *m;
                m[var] = m[var]
                    .checked_add(k as u16)
                    .ok_or_else(|| Error::WindowOverflow("exponent overflow".into()))?;
                Ok((m, c.clone()))
            })
            .collect::<Result<_>>()?;
        s.prec = self.prec.map(|p| p + self.radius.log(var) * Rational64::from_integer(k as i64));
        s.normalize()?;
        Ok(s)
    }

    /// (j, c_j) with j the largest var-degree whose term attains the Gauss norm of f
    /// viewed as a series in var over the remaining variables.
    pub fn leading_term(&self, var: usize) -> Result<(u32, TateSeries)> {
        let g = self.gauss_valuation()?;
        let j = self
            .terms
            .iter()
            .filter(|(m, c)| self.term_weight(m, c) == g)
            .map(|(m, _)| m[var] as u32)
            .max()
            .expect("gauss valuation is attained");
        Ok((j, self.coefficient_in(var, j)))
    }

    pub fn degree(&self, var: usize) -> Result<u32> {
        Ok(self.leading_term(var)?.0)
    }

    /// Ring map sending t_k to images[k].
    pub fn substitute(&self, images: &[TateSeries]) -> Result<Self> {
        if images.len() != self.n() {
            return Err(Error::DimensionMismatch("one image per variable is needed".into()));
        }
        let target = &images[0];
        let mut acc = target.zero_like();
        acc.prec = self.prec;
        let mut powers: Vec<Vec<TateSeries>> =
            images.iter().map(|img| vec![img.constant_like(PAdic::one(self.cfg))]).collect();
        for (m, c) in &self.terms {
            let mut t = target.constant_like(c.clone());
            for k in 0..self.n() {
                let e = m[k] as usize;
                while powers[k].len() <= e {
                    let next = powers[k].last().expect("seeded").mul(&images[k])?;
                    powers[k].push(next);
                }
                if e > 0 {
                    t = t.mul(&powers[k][e])?;
                }
            }
            acc = acc.add(&t)?;
        }
        Ok(acc)
    }

    /// Congruence modulo Gauss valuation `v`.
    pub fn eq_to(&self, other: &TateSeries, v: Rational64) -> Result<bool> {
        let d = self.sub(other)?;
        Ok(d.gauss_valuation().map_or(true, |g| g >= v))
    }
}

impl Ring for TateSeries {
    fn zero_like(&self) -> Self {
        TateSeries::zero_like(self)
    }
    fn one_like(&self) -> Self {
        self.constant_like(PAdic::one(self.cfg))
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

impl fmt::Display for TateSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for (v, e) in m[..self.n()].iter().enumerate() {
                if *e > 0 {
                    write!(f, "t{}^{}", v + 1, e)?;
                }
            }
        }
        Ok(())
    }
}

/// Result of a Weierstrass preparation f = unit * poly.
#[derive(Clone, Debug)]
pub struct Preparation {
    pub unit: TateSeries,
    pub unit_inv: TateSeries,
    /// Monic in the distinguished variable, of degree `degree`.
    pub poly: TateSeries,
    pub degree: u32,
    /// Gauss valuation of f - unit * poly (precision bound if it vanishes).
    pub residual_val: Rational64,
    pub steps: usize,
}

/// Division with remainder by a polynomial monic in `var` of degree `deg`.
pub fn div_rem_monic(f: &TateSeries, monic: &TateSeries, var: usize, deg: u32) -> Result<(TateSeries, TateSeries)> {
    let mut rem = f.clone();
    let mut quo = f.zero_like();
    let lower = monic.sub(&monic.coefficient_in(var, deg).shift_var(var, deg)?)?;
    loop {
        let top = rem.degree_in(var);
        if rem.is_zero() || top < deg {
            break;
        }
        // h = (terms of rem of var-degree >= deg) / var^deg
        let mut h = rem.zero_like();
        h.prec = rem.prec;
        let mut keep = rem.zero_like();
        keep.prec = rem.prec;
        for (m, c) in rem.terms() {
            if m[var] as u32 >= deg {
                let mut k = *m;
                k[var] -= deg as u16;
                h.terms.insert(k, c.clone());
            } else {
                keep.terms.insert(*m, c.clone());
            }
        }
        h.prec = rem.prec.map(|p| p - rem.radius.log(var) * Rational64::from_integer(deg as i64));
        h.normalize()?;
        quo = quo.add(&h)?;
        rem = keep.sub(&h.mul(&lower)?)?;
    }
    Ok((quo, rem))
}

/// Factors f = u P with u a unit and P monic in `var` of degree deg(f), by
/// successive approximation P_(k+1) = P_k + R_k from the division f/c = Q_k P_k + R_k.
pub fn weierstrass_prepare(f: &TateSeries, var: usize) -> Result<Preparation> {
    let (j, lead) = f.leading_term(var)?;
    if !lead.is_unit() {
        return Err(Error::LeadingCoeffNotUnit(format!("coefficient of degree {j} is not a unit of the base")));
    }
    let lead_inv = lead.inv_unit()?;
    let normalized = f.mul(&lead_inv)?;
    let cfg = f.cfg;
    let target = normalized.prec.unwrap_or(cfg.pi_to_vp(cfg.prec)) - cfg.pi_to_vp(cfg.guard);
    let mut poly = normalized.zero_like();
    for (m, c) in normalized.terms() {
        if (m[var] as u32) < j {
            poly.terms.insert(*m, c.clone());
        }
    }
    let mut top = [0u16; MAX_VARS];
    top[var] = j as u16;
    poly.terms.insert(top, PAdic::one(f.cfg));
    poly.normalize()?;

    let mut last: Option<Rational64> = None;
    let mut steps = 0;
    loop {
        let (quo, rem) = div_rem_monic(&normalized, &poly, var, j)?;
        steps += 1;
        let done = rem.gauss_valuation().map_or(true, |v| v >= target);
        if done {
            let unit = quo.mul(&lead)?;
            let unit_inv = quo.inv_unit()?.mul(&lead_inv)?;
            let residual = f.sub(&unit.mul(&poly)?)?;
            let residual_val = residual.gauss_or_prec().unwrap_or_else(|| Rational64::from_integer(f.cfg.prec));
            return Ok(Preparation { unit, unit_inv, poly, degree: j, residual_val, steps });
        }
        let v = rem.gauss_valuation()?;
        if last.is_some_and(|l| v <= l) || steps > 4 * (f.cfg.prec as usize + 4) {
            return Err(Error::NoContraction(format!("Weierstrass residual stalled at valuation {v}")));
        }
        last = Some(v);
        poly = poly.add(&rem)?;
    }
}

/// How the normalizing automorphism T_j moves the first n - 1 variables.
#[derive(Clone, Debug)]
pub enum TjMode {
    /// t_i -> t_i + (unit * t_n^m)^(j^(n-i)) with |unit| rho_n^m = 1.
    Field { unit: PAdic, m: u32 },
    /// t_i -> t_i + t_n^(m j^(n-i)), radii rescaled to rho^lambda.
    Ring { m: u32 },
}

/// The smallest m >= 1 and u = pi^(-m e_n e) with |u| rho_n^m = 1.
pub fn calibrate(cfg: RingConfig, radius: &PolyRadius) -> Result<(PAdic, u32)> {
    let last = radius.log(radius.n() - 1) * Rational64::from_integer(cfg.e as i64);
    let m = *last.denom();
    let shift = -(last * Rational64::from_integer(m)).to_integer();
    let m = u32::try_from(m).map_err(|_| Error::BadCalibration("radius denominator too large".into()))?;
    let unit = PAdic::one(cfg).shift(shift);
    Ok((unit, m))
}

impl TjMode {
    pub fn field_for(f: &TateSeries) -> Result<Self> {
        let (unit, m) = calibrate(f.cfg, &f.radius)?;
        Ok(TjMode::Field { unit, m })
    }

    fn validate(&self, radius: &PolyRadius) -> Result<()> {
        match self {
            TjMode::Field { unit, m } => {
                let v = unit.v_p().ok_or_else(|| Error::BadCalibration("unit is zero".into()))?;
                if v + radius.log(radius.n() - 1) * Rational64::from_integer(*m as i64) != Rational64::zero() {
                    return Err(Error::BadCalibration("|u| rho_n^m differs from 1".into()));
                }
                Ok(())
            }
            TjMode::Ring { .. } => {
                if radius.logs().iter().any(|e| !e.is_negative()) {
                    return Err(Error::InvalidConfig("ring mode needs every radius above 1".into()));
                }
                Ok(())
            }
        }
    }

    fn images(&self, f: &TateSeries, j: u32, sign: i64) -> Result<Vec<TateSeries>> {
        let n = f.n();
        let last = f.var_like(n - 1);
        let mut out = Vec::with_capacity(n);
        for i in 0..n - 1 {
            let power = j
                .checked_pow((n - 1 - i) as u32)
                .ok_or_else(|| Error::WindowOverflow("T_j exponent overflow".into()))?;
            let shift = match self {
                TjMode::Field { unit, m } => {
                    let base = last.pow(*m)?.scale(unit)?;
                    base.pow(power)?
                }
                TjMode::Ring { m } => last.pow(m * power)?,
            };
            let shift = if sign < 0 { shift.neg() } else { shift };
            out.push(f.var_like(i).add(&shift)?);
        }
        out.push(last);
        Ok(out)
    }
}

/// Applies T_j (j = 0 is the identity).
pub fn tj_transform(f: &TateSeries, j: u32, mode: &TjMode) -> Result<TateSeries> {
    mode.validate(&f.radius)?;
    if j == 0 || f.n() == 1 {
        return Ok(f.clone());
    }
    f.substitute(&mode.images(f, j, 1)?)
}

/// Applies the inverse of T_j.
pub fn tj_inverse(f: &TateSeries, j: u32, mode: &TjMode) -> Result<TateSeries> {
    mode.validate(&f.radius)?;
    if j == 0 || f.n() == 1 {
        return Ok(f.clone());
    }
    f.substitute(&mode.images(f, j, -1)?)
}

/// Ring-mode T_j with the radius rescaled by the largest lambda = 1/2^k, k <= 10,
/// that makes the t_n-leading coefficient a unit. Returns the image and lambda.
pub fn tj_transform_ring(f: &TateSeries, j: u32, m: u32) -> Result<(TateSeries, Rational64)> {
    let mode = TjMode::Ring { m };
    mode.validate(&f.radius)?;
    let n = f.n();
    let image = if j == 0 { f.clone() } else { f.substitute(&mode.images(f, j, 1)?)? };
    let mut lambda = Rational64::one();
    for _ in 0..=10 {
        let g = image.with_radius(f.radius.scaled(lambda))?;
        if let Ok((_, lead)) = g.leading_term(n - 1) {
            if lead.is_unit() {
                return Ok((g, lambda));
            }
        }
        lambda /= Rational64::from_integer(2);
    }
    Err(Error::LeadingCoeffNotUnit("no dyadic rescaling down to 1/2^10 gives a unit".into()))
}

/// Smallest j <= j_max with T_j(f) having a unit t_n-leading coefficient.
pub fn tj_find(f: &TateSeries, j_max: u32, mode: &TjMode) -> Result<(u32, TateSeries)> {
    let n = f.n();
    for j in 0..=j_max {
        let g = match tj_transform(f, j, mode) {
            Ok(g) => g,
            Err(Error::WindowOverflow(_)) => break,
            Err(e) => return Err(e),
        };
        let (_, lead) = g.leading_term(n - 1)?;
        if lead.is_unit() {
            return Ok((j, g));
        }
    }
    Err(Error::JMaxExceeded(j_max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(p: u64, n: i64) -> RingConfig {
        RingConfig::unramified(p, n).unwrap()
    }

    fn rad(logs: &[(i64, i64)]) -> PolyRadius {
        PolyRadius::new(logs.iter().map(|&(a, b)| Rational64::new(a, b)).collect()).unwrap()
    }

    fn q(a: i64, b: i64) -> Rational64 {
        Rational64::new(a, b)
    }

    #[test]
    fn gauss_examples() {
        let c = cfg(5, 12);
        let one = TateSeries::from_ints(c, rad(&[(0, 1)]), &[(&[0], 1)]).unwrap();
        assert_eq!(one.gauss_valuation().unwrap(), q(0, 1));
        let f = TateSeries::from_ints(c, rad(&[(1, 2)]), &[(&[0], 5), (&[1], 1)]).unwrap();
        assert_eq!(f.gauss_valuation().unwrap(), q(1, 2));
        let g = TateSeries::from_ints(c, rad(&[(-1, 2)]), &[(&[2], 5)]).unwrap();
        assert_eq!(g.gauss_valuation().unwrap(), q(0, 1));
        assert!(matches!(one.zero_like().gauss_valuation(), Err(Error::ZeroAtPrecision)));
    }

    #[test]
    fn leading_term_examples() {
        let c = cfg(3, 12);
        let f = TateSeries::from_ints(c, rad(&[(0, 1)]), &[(&[1], 1), (&[3], 3)]).unwrap();
        let (j, lead) = f.leading_term(0).unwrap();
        assert_eq!(j, 1);
        assert_eq!(lead.constant_term(), PAdic::one(c));
        let g = TateSeries::from_ints(c, rad(&[(0, 1)]), &[(&[1], 1), (&[2], 1)]).unwrap();
        assert_eq!(g.leading_term(0).unwrap().0, 2);
        let h = TateSeries::from_ints(c, rad(&[(1, 1)]), &[(&[0], 3), (&[1], 1)]).unwrap();
        assert_eq!(h.leading_term(0).unwrap().0, 1);
    }

    #[test]
    fn weierstrass_examples() {
        let c = cfg(5, 12);
        let r = rad(&[(0, 1)]);
        let poly = TateSeries::from_ints(c, r.clone(), &[(&[0], 5), (&[1], 1), (&[2], 1)]).unwrap();
        let prep = weierstrass_prepare(&poly, 0).unwrap();
        assert_eq!(prep.degree, 2);
        assert!(prep.unit.eq_to(&poly.constant_like(PAdic::one(c)), q(10, 1)).unwrap());

        let f = TateSeries::from_ints(c, r.clone(), &[(&[1], 1), (&[2], 5)]).unwrap();
        let prep = weierstrass_prepare(&f, 0).unwrap();
        assert_eq!(prep.degree, 1);
        let expect_unit = TateSeries::from_ints(c, r.clone(), &[(&[0], 1), (&[1], 5)]).unwrap();
        assert!(prep.unit.eq_to(&expect_unit, q(10, 1)).unwrap());
        assert!(prep.poly.eq_to(&f.var_like(0), q(10, 1)).unwrap());
        assert!(f.eq_to(&prep.unit.mul(&prep.poly).unwrap(), q(10, 1)).unwrap());
        let id = prep.unit.mul(&prep.unit_inv).unwrap();
        assert!(id.eq_to(&f.constant_like(PAdic::one(c)), q(10, 1)).unwrap());

        let g = TateSeries::from_ints(c, r, &[(&[0], 25), (&[1], 5), (&[2], 1), (&[3], 5), (&[5], 25)]).unwrap();
        let prep = weierstrass_prepare(&g, 0).unwrap();
        assert_eq!(prep.degree, 2);
        assert!(prep.residual_val >= q(10, 1));
        assert!(g.eq_to(&prep.unit.mul(&prep.poly).unwrap(), q(10, 1)).unwrap());
    }

    #[test]
    fn weierstrass_rejects_non_unit_leading_coefficient() {
        let c = cfg(5, 8);
        let r = rad(&[(0, 1), (0, 1)]);
        // leading coefficient in t2 is t1, not a unit of K<t1>
        let f = TateSeries::from_ints(c, r, &[(&[1, 1], 1), (&[0, 0], 5)]).unwrap();
        assert!(matches!(weierstrass_prepare(&f, 1), Err(Error::LeadingCoeffNotUnit(_))));
    }

    #[test]
    fn tj_examples() {
        let c = cfg(3, 12);
        let r = rad(&[(0, 1), (1, 1)]);
        let mode = TjMode::field_for(&TateSeries::from_ints(c, r.clone(), &[]).unwrap()).unwrap();
        let TjMode::Field { unit, m } = &mode else { panic!("field mode expected") };
        assert_eq!((unit.v_p().unwrap(), *m), (q(-1, 1), 1));
        let t2 = TateSeries::from_ints(c, r.clone(), &[(&[0, 1], 1)]).unwrap();
        for j in 0..4 {
            assert!(tj_transform(&t2, j, &mode).unwrap().eq_to(&t2, q(12, 1)).unwrap());
        }
        let t1 = TateSeries::from_ints(c, r.clone(), &[(&[1, 0], 1)]).unwrap();
        for j in 1..4u32 {
            let g = tj_transform(&t1, j, &mode).unwrap();
            let (deg, lead) = g.leading_term(1).unwrap();
            assert_eq!(deg, j);
            assert_eq!(lead.constant_term().v_p().unwrap(), q(-(j as i64), 1));
            assert!(lead.is_unit());
        }
        let (j, _) = tj_find(&t1, 16, &mode).unwrap();
        assert_eq!(j, 1);
        let t1t2 = TateSeries::from_ints(c, r.clone(), &[(&[1, 1], 1)]).unwrap();
        let (j, g) = tj_find(&t1t2, 16, &mode).unwrap();
        assert!(j >= 1 && g.leading_term(1).unwrap().1.is_unit());
        let unit_lead = TateSeries::from_ints(c, r, &[(&[0, 1], 1), (&[1, 0], 9)]).unwrap();
        assert_eq!(tj_find(&unit_lead, 16, &mode).unwrap().0, 0);
        assert!(matches!(tj_find(&t1, 0, &mode), Err(Error::JMaxExceeded(0))));
    }

    #[test]
    fn tj_ring_mode_reports_lambda() {
        let c = cfg(3, 12);
        let r = rad(&[(-1, 1), (-1, 1)]);
        let f = TateSeries::from_ints(c, r, &[(&[1, 0], 1)]).unwrap();
        let (g, lambda) = tj_transform_ring(&f, 2, 1).unwrap();
        assert!(g.leading_term(1).unwrap().1.is_unit());
        assert_eq!(lambda, q(1, 1));
        assert_eq!(g.radius().log(0), q(-1, 1));
        let bad = TateSeries::from_ints(c, rad(&[(0, 1), (-1, 1)]), &[(&[1, 0], 1)]).unwrap();
        assert!(tj_transform_ring(&bad, 1, 1).is_err());
    }

    #[test]
    fn bad_calibration_is_rejected() {
        let c = cfg(3, 12);
        let f = TateSeries::from_ints(c, rad(&[(0, 1), (1, 1)]), &[(&[1, 0], 1)]).unwrap();
        let mode = TjMode::Field { unit: PAdic::one(c), m: 1 };
        assert!(matches!(tj_transform(&f, 1, &mode), Err(Error::BadCalibration(_))));
    }

    #[test]
    fn unit_inverse() {
        let c = cfg(5, 10);
        let r = rad(&[(0, 1), (1, 2)]);
        let f = TateSeries::from_ints(c, r, &[(&[0, 0], 3), (&[1, 0], 5), (&[0, 2], 2)]).unwrap();
        assert!(f.is_unit());
        let g = f.inv_unit().unwrap();
        assert!(f.mul(&g).unwrap().eq_to(&f.constant_like(PAdic::one(c)), q(10, 1)).unwrap());
        let t = f.var_like(0);
        assert!(matches!(t.inv_unit(), Err(Error::NotAUnit)));
    }

    #[test]
    fn degree_cap_overflows() {
        let c = cfg(3, 10);
        let f = TateSeries::from_ints(c, rad(&[(0, 1)]), &[(&[40], 1)]).unwrap();
        assert!(matches!(f.mul(&f), Err(Error::WindowOverflow(_))));
    }

    fn arb_poly(n: usize, deg: u32) -> impl Strategy<Value = Vec<(Vec<u32>, i64)>> {
        prop::collection::vec((prop::collection::vec(0..=deg, n), -20i64..20), 1..6)
    }

    fn build(c: RingConfig, r: &PolyRadius, t: &[(Vec<u32>, i64)]) -> TateSeries {
        let terms = t.iter().map(|(e, v)| (mono(e).unwrap(), PAdic::from_int(c, *v, EXACT))).collect();
        TateSeries::from_terms(c, r.clone(), terms).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(60))]

        #[test]
        fn gauss_valuation_is_multiplicative(a in arb_poly(1, 6), b in arb_poly(1, 6), which in 0usize..3) {
            let c = cfg(5, 40);
            let r = [rad(&[(0, 1)]), rad(&[(1, 2)]), rad(&[(-1, 2)])][which].clone();
            let (f, g) = (build(c, &r, &a), build(c, &r, &b));
            prop_assume!(!f.is_zero() && !g.is_zero());
            let fg = f.mul(&g).unwrap();
            prop_assert_eq!(fg.gauss_valuation().unwrap(), f.gauss_valuation().unwrap() + g.gauss_valuation().unwrap());
            prop_assert_eq!(fg.degree(0).unwrap(), f.degree(0).unwrap() + g.degree(0).unwrap());
            // |L(fg) - L(f)L(g)| < |L(fg)|
            let (jf, lf) = f.leading_term(0).unwrap();
            let (jg, lg) = g.leading_term(0).unwrap();
            let (jfg, lfg) = fg.leading_term(0).unwrap();
            let prod = lf.shift_var(0, jf).unwrap().mul(&lg.shift_var(0, jg).unwrap()).unwrap();
            let diff = lfg.shift_var(0, jfg).unwrap().sub(&prod).unwrap();
            if let Ok(v) = diff.gauss_valuation() {
                prop_assert!(v > fg.gauss_valuation().unwrap());
            }
        }

        #[test]
        fn tj_is_a_ring_map_with_inverse(a in arb_poly(2, 3), b in arb_poly(2, 3), j in 1u32..4) {
            let c = cfg(3, 16);
            let r = rad(&[(0, 1), (1, 1)]);
            let (f, g) = (build(c, &r, &a), build(c, &r, &b));
            let mode = TjMode::field_for(&f).unwrap();
            let lhs = tj_transform(&f.mul(&g).unwrap(), j, &mode).unwrap();
            let rhs = tj_transform(&f, j, &mode).unwrap().mul(&tj_transform(&g, j, &mode).unwrap()).unwrap();
            prop_assert!(lhs.eq_to(&rhs, q(16, 1) - q(2 * j as i64 * 3, 1)).unwrap());
            let back = tj_inverse(&tj_transform(&f, j, &mode).unwrap(), j, &mode).unwrap();
            prop_assert!(back.eq_to(&f, q(16, 1) - q(2 * j as i64 * 3, 1)).unwrap());
        }

        #[test]
        fn weierstrass_random(coeffs in prop::collection::vec(-30i64..30, 1..10), j in 0usize..6) {
            let c = cfg(3, 12);
            let r = rad(&[(0, 1)]);
            // unit coefficient at degree j, multiples of p elsewhere above j
            let mut terms: Vec<(Vec<u32>, i64)> = vec![(vec![j as u32], 1)];
            for (k, v) in coeffs.iter().enumerate() {
                let deg = k as u32;
                if deg == j as u32 { continue; }
                let v = if deg > j as u32 { 3 * v } else { *v };
                terms.push((vec![deg], v));
            }
            // the inverse unit needs degree about 12 times deg(f)
            let f = build(c, &r, &terms).with_cap(256).unwrap();
            let prep = weierstrass_prepare(&f, 0).unwrap();
            prop_assert_eq!(prep.degree, f.degree(0).unwrap());
            prop_assert!(prep.residual_val >= q(10, 1));
            prop_assert!(f.eq_to(&prep.unit.mul(&prep.poly).unwrap(), q(10, 1)).unwrap());
        }
    }
}
