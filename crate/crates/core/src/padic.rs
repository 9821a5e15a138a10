//! Elements of O and K = O[1/pi] with explicit precision.
//!
//! O is modelled as Z_p[pi] / (pi^e - p) with residue field F_p. An element is
//! either a zero known modulo pi^abs, or `pi^val * unit` where the unit is known
//! modulo pi^rel (capped relative precision). Either precision may be [`EXACT`].
//!
//! A unit of O is stored through its e coordinates `a_0 + a_1 pi + ... + a_{e-1} pi^{e-1}`
//! with each `a_i` an integer.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::Rational64;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// pi-adic precision, counted in powers of the uniformizer.
pub type Prec = i64;

/// Sentinel precision for exactly known values.
pub const EXACT: Prec = i64::MAX / 4;

/// Default number of guard digits carried by internal computations.
pub const DEFAULT_GUARD: Prec = 2;

/// Environment variable that overrides the guard digit count.
pub const GUARD_ENV: &str = "ROBBA_KIT_GUARD_DIGITS";

pub fn prec_add(a: Prec, b: Prec) -> Prec {
    if a >= EXACT || b >= EXACT {
        EXACT
    } else {
        (a + b).min(EXACT)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RingConfig {
    pub p: u64,
    /// q = p^f
    pub f: u32,
    /// ramification index, pi^e = p
    pub e: u32,
    /// default working precision N, in powers of pi
    pub prec: Prec,
    pub guard: Prec,
}

impl RingConfig {
    pub fn new(p: u64, f: u32, e: u32, prec: Prec) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::InvalidConfig(format!("p = {p} is not prime")));
        }
        if f == 0 || e == 0 {
            return Err(Error::InvalidConfig("f and e must be at least 1".into()));
        }
        if prec < 1 {
            return Err(Error::InvalidConfig("precision must be at least 1".into()));
        }
        Ok(RingConfig { p, f, e, prec, guard: DEFAULT_GUARD })
    }

    pub fn unramified(p: u64, prec: Prec) -> Result<Self> {
        Self::new(p, 1, 1, prec)
    }

    pub fn with_guard(mut self, guard: Prec) -> Self {
        self.guard = guard.max(0);
        self
    }

    pub fn with_prec(mut self, prec: Prec) -> Self {
        self.prec = prec;
        self
    }

    /// Reads [`GUARD_ENV`]; unparsable values are ignored.
    pub fn guard_from_env(self) -> Self {
        match std::env::var(GUARD_ENV).ok().and_then(|s| s.trim().parse::<Prec>().ok()) {
            Some(g) => self.with_guard(g),
            None => self,
        }
    }

    pub fn q(&self) -> BigInt {
        BigInt::from(self.p).pow(self.f)
    }

    /// Converts a count of pi powers into v_p units.
    pub fn pi_to_vp(&self, k: i64) -> Rational64 {
        Rational64::new(k, self.e as i64)
    }

    /// Smallest count of pi powers whose v_p is at least `r`.
    pub fn vp_to_pi_ceil(&self, r: Rational64) -> i64 {
        (r * Rational64::from_integer(self.e as i64)).ceil().to_integer()
    }

    /// Precision at which certificates are checked: N - guard.
    pub fn check_prec(&self) -> Prec {
        self.prec - self.guard
    }
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

thread_local! {
    static POW_CACHE: RefCell<HashMap<(u64, i64), BigInt>> = RefCell::new(HashMap::new());
}

pub(crate) fn ppow(p: u64, n: i64) -> BigInt {
    debug_assert!(n >= 0);
    if n <= 0 {
        return BigInt::one();
    }
    POW_CACHE.with(|c| {
        c.borrow_mut()
            .entry((p, n))
            .or_insert_with(|| BigInt::from(p).pow(n as u32))
            .clone()
    })
}

/// p-adic valuation of a nonzero integer.
pub(crate) fn vp_int(n: &BigInt, p: u64) -> i64 {
    debug_assert!(!n.is_zero());
    let p = BigInt::from(p);
    let mut n = n.clone();
    let mut v = 0;
    loop {
        let (q, r) = n.div_rem(&p);
        if !r.is_zero() {
            return v;
        }
        n = q;
        v += 1;
    }
}

// Coordinate arithmetic in Z_p[pi]/(pi^e - p).
mod coords {
    use super::*;

    pub(super) fn digits(k: Prec, i: usize, e: u32) -> i64 {
        let k = k - i as i64;
        if k <= 0 {
            0
        } else {
            (k + e as i64 - 1) / e as i64
        }
    }

    pub(super) fn reduce(c: &mut [BigInt], k: Prec, cfg: &RingConfig) {
        if k >= EXACT / 2 {
            return;
        }
        for (i, a) in c.iter_mut().enumerate() {
            let m = digits(k, i, cfg.e);
            if m == 0 {
                a.set_zero();
            } else {
                *a = a.mod_floor(&ppow(cfg.p, m));
            }
        }
    }

    pub(super) fn mul(a: &[BigInt], b: &[BigInt], cfg: &RingConfig) -> Vec<BigInt> {
        let e = cfg.e as usize;
        if e == 1 {
            return vec![&a[0] * &b[0]];
        }
        let mut out = vec![BigInt::zero(); e];
        let p = BigInt::from(cfg.p);
        for (i, x) in a.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.iter().enumerate() {
                let t = x * y;
                if i + j < e {
                    out[i + j] += t;
                } else {
                    out[i + j - e] += t * &p;
                }
            }
        }
        out
    }

    pub(super) fn val(c: &[BigInt], cfg: &RingConfig) -> Option<i64> {
        c.iter()
            .enumerate()
            .filter(|(_, a)| !a.is_zero())
            .map(|(i, a)| cfg.e as i64 * vp_int(a, cfg.p) + i as i64)
            .min()
    }

    pub(super) fn shift_down(c: &[BigInt], v: i64, cfg: &RingConfig) -> Vec<BigInt> {
        let e = cfg.e as i64;
        let (s, t) = (v.div_euclid(e), v.rem_euclid(e));
        let ps = ppow(cfg.p, s);
        let mut out: Vec<BigInt> = c.iter().map(|a| a / &ps).collect();
        let p = BigInt::from(cfg.p);
        for _ in 0..t {
            let a0 = out.remove(0);
            out.push(a0 / &p);
        }
        out
    }

    pub(super) fn shift_up(c: &[BigInt], v: i64, cfg: &RingConfig) -> Vec<BigInt> {
        let e = cfg.e as i64;
        let (s, t) = (v.div_euclid(e), v.rem_euclid(e));
        let ps = ppow(cfg.p, s);
        let mut out: Vec<BigInt> = c.iter().map(|a| a * &ps).collect();
        let p = BigInt::from(cfg.p);
        for _ in 0..t {
            let last = out.pop().unwrap();
            out.insert(0, last * &p);
        }
        out
    }

    pub(super) fn inverse_unit(a: &[BigInt], r: Prec, cfg: &RingConfig) -> Vec<BigInt> {
        debug_assert!(r < EXACT);
        if cfg.e == 1 {
            let m = ppow(cfg.p, r.max(1));
            let g = a[0].extended_gcd(&m);
            return vec![g.x.mod_floor(&m)];
        }
        let p = BigInt::from(cfg.p);
        let g = a[0].mod_floor(&p).extended_gcd(&p);
        let mut x = vec![BigInt::zero(); cfg.e as usize];
        x[0] = g.x.mod_floor(&p);
        let mut k: Prec = 1;
        while k < r {
            k = (2 * k).min(r);
            let ax = mul(a, &x, cfg);
            let mut corr: Vec<BigInt> = ax.into_iter().map(|t| -t).collect();
            corr[0] += 2;
            x = mul(&x, &corr, cfg);
            reduce(&mut x, k, cfg);
        }
        reduce(&mut x, r, cfg);
        x
    }
}

/// Reported valuation: exact, or only bounded below by the precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Valuation {
    Exact(Rational64),
    AtLeast(Rational64),
}

impl Valuation {
    pub fn exact(&self) -> Option<Rational64> {
        match self {
            Valuation::Exact(v) => Some(*v),
            Valuation::AtLeast(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
enum Repr {
    Zero { abs: Prec },
    Nonzero { val: i64, unit: Vec<BigInt>, rel: Prec },
}

/// An element of K = O[1/pi]; integral elements are the elements of O.
#[derive(Clone, Debug)]
pub struct PAdic {
    cfg: RingConfig,
    repr: Repr,
}

impl PAdic {
    pub fn zero(cfg: RingConfig, abs: Prec) -> Self {
        PAdic { cfg, repr: Repr::Zero { abs } }
    }

    pub fn exact_zero(cfg: RingConfig) -> Self {
        Self::zero(cfg, EXACT)
    }

    pub fn one(cfg: RingConfig) -> Self {
        Self::from_int(cfg, 1, EXACT)
    }

    pub fn pi(cfg: RingConfig) -> Self {
        Self::one(cfg).shift(1)
    }

    /// The integer `n` known modulo pi^abs.
    pub fn from_int(cfg: RingConfig, n: impl Into<BigInt>, abs: Prec) -> Self {
        let mut c = vec![BigInt::zero(); cfg.e as usize];
        c[0] = n.into();
        Self::from_raw(cfg, 0, c, abs)
    }

    /// `num / den` with both integers; errors if `den` is zero.
    pub fn from_ratio(cfg: RingConfig, num: i64, den: i64, abs: Prec) -> Result<Self> {
        let d = Self::from_int(cfg, den, abs);
        Ok(&Self::from_int(cfg, num, abs) * &d.inv()?)
    }

    /// `sum_i c_i pi^i` known modulo pi^abs.
    pub fn from_coords(cfg: RingConfig, c: Vec<BigInt>, abs: Prec) -> Result<Self> {
        if c.len() != cfg.e as usize {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coordinates, got {}",
                cfg.e,
                c.len()
            )));
        }
        Ok(Self::from_raw(cfg, 0, c, abs))
    }

    /// pi^base * c, known modulo pi^abs.
    fn from_raw(cfg: RingConfig, base: i64, c: Vec<BigInt>, abs: Prec) -> Self {
        let mut c = c;
        if abs < EXACT {
            coords::reduce(&mut c, abs - base, &cfg);
        }
        match coords::val(&c, &cfg) {
            Some(w) if abs >= EXACT || base + w < abs => {
                let rel = if abs >= EXACT { EXACT } else { abs - base - w };
                let mut unit = coords::shift_down(&c, w, &cfg);
                coords::reduce(&mut unit, rel, &cfg);
                PAdic { cfg, repr: Repr::Nonzero { val: base + w, unit, rel } }
            }
            _ => PAdic::zero(cfg, abs),
        }
    }

    pub fn config(&self) -> &RingConfig {
        &self.cfg
    }

    /// The same element read in a configuration that differs only in N or guard.
    pub fn with_config(&self, cfg: RingConfig) -> Result<PAdic> {
        if (cfg.p, cfg.f, cfg.e) != (self.cfg.p, self.cfg.f, self.cfg.e) {
            return Err(Error::ConfigMismatch);
        }
        Ok(PAdic { cfg, repr: self.repr.clone() })
    }

    /// True when the element is indistinguishable from zero.
    pub fn is_zero(&self) -> bool {
        matches!(self.repr, Repr::Zero { .. })
    }

    pub fn is_exact(&self) -> bool {
        self.abs_prec() >= EXACT
    }

    pub fn abs_prec(&self) -> Prec {
        match &self.repr {
            Repr::Zero { abs } => *abs,
            Repr::Nonzero { val, rel, .. } => prec_add(*val, *rel),
        }
    }

    pub fn rel_prec(&self) -> Prec {
        match &self.repr {
            Repr::Zero { .. } => 0,
            Repr::Nonzero { rel, .. } => *rel,
        }
    }

    /// pi-adic valuation, `None` for zero at precision.
    pub fn val_pi(&self) -> Option<i64> {
        match &self.repr {
            Repr::Zero { .. } => None,
            Repr::Nonzero { val, .. } => Some(*val),
        }
    }

    /// pi-adic valuation, or the absolute precision when indistinguishable from zero.
    pub fn val_or_prec(&self) -> Prec {
        self.val_pi().unwrap_or_else(|| self.abs_prec())
    }

    pub fn valuation(&self) -> Valuation {
        match &self.repr {
            Repr::Zero { abs } => Valuation::AtLeast(if *abs >= EXACT {
                Rational64::from_integer(EXACT)
            } else {
                self.cfg.pi_to_vp(*abs)
            }),
            Repr::Nonzero { val, .. } => Valuation::Exact(self.cfg.pi_to_vp(*val)),
        }
    }

    /// v_p, normalised so that v_p(p) = 1.
    pub fn v_p(&self) -> Option<Rational64> {
        self.val_pi().map(|v| self.cfg.pi_to_vp(v))
    }

    pub fn is_integral(&self) -> bool {
        match &self.repr {
            Repr::Zero { .. } => true,
            Repr::Nonzero { val, .. } => *val >= 0,
        }
    }

    /// True for units of O.
    pub fn is_unit(&self) -> bool {
        self.val_pi() == Some(0)
    }

    /// Residue modulo pi as an element of F_p (integral elements only).
    pub fn residue(&self) -> u64 {
        match &self.repr {
            Repr::Nonzero { val: 0, unit, .. } => unit[0].mod_floor(&BigInt::from(self.cfg.p)).to_u64().unwrap(),
            _ => 0,
        }
    }

    fn check_cfg(&self, other: &PAdic) {
        assert_eq!(self.cfg, other.cfg, "p-adic operands with different ring configurations");
    }

    /// Absolute coordinates pi^(val - base) * unit, for a common base valuation.
    fn coords_at(&self, base: i64) -> Vec<BigInt> {
        match &self.repr {
            Repr::Zero { .. } => vec![BigInt::zero(); self.cfg.e as usize],
            Repr::Nonzero { val, unit, .. } => coords::shift_up(unit, val - base, &self.cfg),
        }
    }

    /// `(c, k)` with self = (sum_i c_i pi^i) / pi^k and k >= 0 as small as possible.
    pub fn numerator(&self) -> (Vec<BigInt>, i64) {
        let k = self.val_pi().map_or(0, |v| (-v).max(0));
        (self.coords_at(-k), k)
    }

    pub fn add_ref(&self, other: &PAdic) -> PAdic {
        self.check_cfg(other);
        let abs = self.abs_prec().min(other.abs_prec());
        let base = match (self.val_pi(), other.val_pi()) {
            (None, None) => return PAdic::zero(self.cfg, abs),
            (Some(a), None) | (None, Some(a)) => a,
            (Some(a), Some(b)) => a.min(b),
        };
        let (x, y) = (self.coords_at(base), other.coords_at(base));
        let sum: Vec<BigInt> = x.into_iter().zip(y).map(|(a, b)| a + b).collect();
        Self::from_raw(self.cfg, base, sum, abs)
    }

    pub fn neg_ref(&self) -> PAdic {
        match &self.repr {
            Repr::Zero { .. } => self.clone(),
            Repr::Nonzero { val, unit, rel } => {
                let mut u: Vec<BigInt> = unit.iter().map(|a| -a).collect();
                coords::reduce(&mut u, *rel, &self.cfg);
                PAdic { cfg: self.cfg, repr: Repr::Nonzero { val: *val, unit: u, rel: *rel } }
            }
        }
    }

    pub fn sub_ref(&self, other: &PAdic) -> PAdic {
        self.add_ref(&other.neg_ref())
    }

    pub fn mul_ref(&self, other: &PAdic) -> PAdic {
        self.check_cfg(other);
        match (&self.repr, &other.repr) {
            (Repr::Zero { abs: a }, Repr::Zero { abs: b }) => PAdic::zero(self.cfg, prec_add(*a, *b)),
            (Repr::Zero { abs }, Repr::Nonzero { val, .. }) | (Repr::Nonzero { val, .. }, Repr::Zero { abs }) => {
                PAdic::zero(self.cfg, prec_add(*abs, *val))
            }
            (Repr::Nonzero { val: v1, unit: u1, rel: r1 }, Repr::Nonzero { val: v2, unit: u2, rel: r2 }) => {
                let rel = (*r1).min(*r2);
                let mut u = coords::mul(u1, u2, &self.cfg);
                coords::reduce(&mut u, rel, &self.cfg);
                PAdic { cfg: self.cfg, repr: Repr::Nonzero { val: v1 + v2, unit: u, rel } }
            }
        }
    }

    /// Multiplication by pi^k (k may be negative); no precision is lost.
    pub fn shift(&self, k: i64) -> PAdic {
        match &self.repr {
            Repr::Zero { abs } => PAdic::zero(self.cfg, prec_add(*abs, k)),
            Repr::Nonzero { val, unit, rel } => {
                PAdic { cfg: self.cfg, repr: Repr::Nonzero { val: val + k, unit: unit.clone(), rel: *rel } }
            }
        }
    }

    fn unit_is_pm_one(unit: &[BigInt]) -> bool {
        unit[0].abs().is_one() && unit[1..].iter().all(Zero::is_zero)
    }

    /// Field inverse in K. Exact non-trivial units are inverted to
    /// relative precision N + guard of the configuration.
    pub fn inv(&self) -> Result<PAdic> {
        match &self.repr {
            Repr::Zero { abs } => Err(Error::PrecisionExhausted(format!(
                "cannot invert an element indistinguishable from 0 mod pi^{abs}"
            ))),
            Repr::Nonzero { val, unit, rel } => {
                if *rel >= EXACT && Self::unit_is_pm_one(unit) {
                    return Ok(PAdic {
                        cfg: self.cfg,
                        repr: Repr::Nonzero { val: -val, unit: unit.clone(), rel: EXACT },
                    });
                }
                let r = if self.is_exact() { self.cfg.prec + self.cfg.guard } else { *rel };
                let u = coords::inverse_unit(unit, r, &self.cfg);
                Ok(PAdic { cfg: self.cfg, repr: Repr::Nonzero { val: -val, unit: u, rel: r } })
            }
        }
    }

    /// Inverse inside O; fails with `NotAUnit` unless the valuation is 0.
    pub fn inv_unit(&self) -> Result<PAdic> {
        match self.val_pi() {
            Some(0) => self.inv(),
            Some(_) => Err(Error::NotAUnit),
            None => Err(Error::PrecisionExhausted("unit test on zero".into())),
        }
    }

    pub fn div(&self, other: &PAdic) -> Result<PAdic> {
        Ok(self * &other.inv()?)
    }

    pub fn pow(&self, mut n: u64) -> PAdic {
        let mut acc = PAdic::one(self.cfg);
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                acc = &acc * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Forgets digits so that the absolute precision is at most `abs`.
    pub fn truncate_abs(&self, abs: Prec) -> PAdic {
        match &self.repr {
            Repr::Zero { abs: a } => PAdic::zero(self.cfg, (*a).min(abs)),
            Repr::Nonzero { val, unit, rel } => {
                if *val >= abs {
                    return PAdic::zero(self.cfg, abs);
                }
                let r = (*rel).min(abs - val);
                let mut u = unit.clone();
                coords::reduce(&mut u, r, &self.cfg);
                PAdic { cfg: self.cfg, repr: Repr::Nonzero { val: *val, unit: u, rel: r } }
            }
        }
    }

    /// Treats the stored representative as known modulo pi^abs (abs may exceed
    /// the current precision). Used to lift inputs to a working precision.
    pub fn lift_abs(&self, abs: Prec) -> PAdic {
        match &self.repr {
            Repr::Zero { .. } => PAdic::zero(self.cfg, abs),
            Repr::Nonzero { val, unit, .. } => {
                if *val >= abs {
                    return PAdic::zero(self.cfg, abs);
                }
                let rel = if abs >= EXACT { EXACT } else { abs - val };
                PAdic { cfg: self.cfg, repr: Repr::Nonzero { val: *val, unit: unit.clone(), rel } }
            }
        }
    }

    /// Coordinates of the integral element reduced modulo pi^n.
    pub fn coords_mod(&self, n: Prec) -> Result<Vec<BigInt>> {
        if !self.is_integral() {
            return Err(Error::NotAUnit);
        }
        let mut c = self.coords_at(0);
        coords::reduce(&mut c, n, &self.cfg);
        Ok(c)
    }

    /// Packed integer representative in [0, p^(ceil(n/e) e)) of an integral
    /// element modulo pi^n: coordinate i is weighted by p^(ceil(n/e) i).
    pub fn to_packed(&self, n: Prec) -> Result<BigInt> {
        let c = self.coords_mod(n)?;
        let m = (n + self.cfg.e as i64 - 1) / self.cfg.e as i64;
        let block = ppow(self.cfg.p, m);
        let mut acc = BigInt::zero();
        for a in c.iter().rev() {
            acc = acc * &block + a;
        }
        Ok(acc)
    }

    pub fn from_packed(cfg: RingConfig, packed: &BigInt, n: Prec) -> Result<PAdic> {
        if packed.is_negative() {
            return Err(Error::Parse("packed representative must be nonnegative".into()));
        }
        let m = (n + cfg.e as i64 - 1) / cfg.e as i64;
        let block = ppow(cfg.p, m);
        let mut rest = packed.clone();
        let mut c = Vec::with_capacity(cfg.e as usize);
        for _ in 0..cfg.e {
            let (q, r) = rest.div_rem(&block);
            c.push(r);
            rest = q;
        }
        if !rest.is_zero() {
            return Err(Error::Parse(format!("packed value out of range for N = {n}")));
        }
        Self::from_coords(cfg, c, n)
    }

    /// The Frobenius lift sigma_0 on O. With residue field F_p and pi^sigma = pi
    /// this is the identity; it is the single place a nontrivial lift would go.
    pub fn sigma0(&self) -> PAdic {
        self.clone()
    }

    /// sigma = sigma_0^f on O.
    pub fn sigma(&self) -> PAdic {
        let mut x = self.clone();
        for _ in 0..self.cfg.f {
            x = x.sigma0();
        }
        x
    }
}

/// Teichmüller lift of `a` in F_p, modulo pi^n: the fixed point of x -> x^p
/// congruent to `a`.
pub fn teichmuller(cfg: RingConfig, a: u64, n: Prec) -> Result<PAdic> {
    if a >= cfg.p {
        return Err(Error::InvalidConfig(format!("residue {a} not in [0, {})", cfg.p)));
    }
    let mut x = PAdic::from_int(cfg, a, n);
    // Each step gains at least one digit.
    for _ in 0..=n.max(1) {
        let y = x.pow(cfg.p);
        if (&y - &x).is_zero() {
            return Ok(y);
        }
        x = y;
    }
    Ok(x)
}

impl PartialEq for PAdic {
    /// Congruence at the joint precision of the operands.
    fn eq(&self, other: &PAdic) -> bool {
        self.cfg == other.cfg && (self - other).is_zero()
    }
}

impl fmt::Display for PAdic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pi = if self.cfg.e == 1 { "p" } else { "pi" };
        match &self.repr {
            Repr::Zero { abs } if *abs >= EXACT => write!(f, "0"),
            Repr::Zero { abs } => write!(f, "O({pi}^{abs})"),
            Repr::Nonzero { val, unit, rel } => {
                let u = if self.cfg.e == 1 {
                    unit[0].to_string()
                } else {
                    format!("{:?}", unit.iter().map(|a| a.to_string()).collect::<Vec<_>>())
                };
                if *rel >= EXACT {
                    write!(f, "{u}*{pi}^{val}")
                } else {
                    write!(f, "{u}*{pi}^{val} + O({pi}^{})", val + rel)
                }
            }
        }
    }
}

macro_rules! forward_binop {
    ($tr:ident, $m:ident, $imp:ident) => {
        impl $tr<&PAdic> for &PAdic {
            type Output = PAdic;
            fn $m(self, rhs: &PAdic) -> PAdic {
                self.$imp(rhs)
            }
        }
        impl $tr<PAdic> for PAdic {
            type Output = PAdic;
            fn $m(self, rhs: PAdic) -> PAdic {
                (&self).$imp(&rhs)
            }
        }
        impl $tr<&PAdic> for PAdic {
            type Output = PAdic;
            fn $m(self, rhs: &PAdic) -> PAdic {
                (&self).$imp(rhs)
            }
        }
    };
}

forward_binop!(Add, add, add_ref);
forward_binop!(Sub, sub, sub_ref);
forward_binop!(Mul, mul, mul_ref);

impl Neg for &PAdic {
    type Output = PAdic;
    fn neg(self) -> PAdic {
        self.neg_ref()
    }
}

impl Neg for PAdic {
    type Output = PAdic;
    fn neg(self) -> PAdic {
        self.neg_ref()
    }
}
