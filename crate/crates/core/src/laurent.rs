//! Truncated bidirectional series `sum_i x_i u^i` over O (or K, for the Robba ring).
//!
//! A series is known modulo pi^prec on a window `[lo, hi]` of exponents. Each
//! side of the window is either closed (every coefficient beyond it vanishes
//! modulo pi^prec) or open (coefficients beyond it are unknown). Queries that
//! would need an unknown coefficient fail with `UncertifiedWindow`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::padic::{prec_add, PAdic, Prec, RingConfig, EXACT};

/// Largest |exponent| any series may carry unless configured otherwise.
pub const DEFAULT_MAX_EXPONENT: i64 = 1 << 40;

const NEG_INF: i128 = -(1 << 100);
const POS_INF: i128 = 1 << 100;

/// Which ring a series is claimed to live in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RingTag {
    Gamma,
    /// Gamma_r for the given overconvergence parameter r > 0.
    GammaCon(Rational64),
    /// Robba ring elements over the annulus of parameter r; coefficients in K.
    Robba(Rational64),
}

impl RingTag {
    pub fn combine(self, other: RingTag) -> Result<RingTag> {
        use RingTag::*;
        match (self, other) {
            (Gamma, Gamma) | (Gamma, GammaCon(_)) | (GammaCon(_), Gamma) => Ok(Gamma),
            (GammaCon(r), GammaCon(s)) => Ok(GammaCon(r.min(s))),
            (Robba(r), GammaCon(s)) | (GammaCon(s), Robba(r)) | (Robba(r), Robba(s)) => Ok(Robba(r.min(s))),
            (Gamma, Robba(_)) | (Robba(_), Gamma) => Err(Error::IncompatibleTags(
                "Gamma elements cannot be combined with Robba-ring elements".into(),
            )),
        }
    }

    pub fn overconvergence(&self) -> Option<Rational64> {
        match self {
            RingTag::Gamma => None,
            RingTag::GammaCon(r) | RingTag::Robba(r) => Some(*r),
        }
    }

    pub fn allows_denominators(&self) -> bool {
        matches!(self, RingTag::Robba(_))
    }

    /// The tag of sigma(x) when x carries this tag: r becomes r / q.
    pub fn after_sigma(self, q: i64) -> RingTag {
        match self {
            RingTag::Gamma => RingTag::Gamma,
            RingTag::GammaCon(r) => RingTag::GammaCon(shrink_radius(r, q)),
            RingTag::Robba(r) => RingTag::Robba(shrink_radius(r, q)),
        }
    }
}

/// Floor for overconvergence parameters, keeping all w_r arithmetic inside i64.
pub const MIN_RADIUS_LOG2: u32 = 40;

/// r / q, saturated at 2^-40. Truncated series are Laurent polynomials, so they
/// lie in every Gamma_r and the saturated parameter is still a valid certificate.
pub fn shrink_radius(r: Rational64, q: i64) -> Rational64 {
    let floor = Rational64::new(1, 1 << MIN_RADIUS_LOG2);
    let den = r.denom().checked_mul(q).filter(|d| *d <= 1 << MIN_RADIUS_LOG2);
    match den {
        Some(d) => Rational64::new(*r.numer(), d).max(floor),
        None => floor,
    }
}

#[derive(Clone, Debug)]
pub struct LaurentSeries {
    cfg: RingConfig,
    tag: RingTag,
    terms: BTreeMap<i64, PAdic>,
    lo: i64,
    hi: i64,
    open_lo: bool,
    open_hi: bool,
    prec: Prec,
}

impl LaurentSeries {
    /// Closed-window series from its nonzero terms.
    pub fn from_terms(cfg: RingConfig, tag: RingTag, prec: Prec, terms: Vec<(i64, PAdic)>) -> Result<Self> {
        let lo = terms.iter().map(|t| t.0).min().unwrap_or(0);
        let hi = terms.iter().map(|t| t.0).max().unwrap_or(0);
        Self::new(cfg, tag, prec, (lo, hi), (false, false), terms)
    }

    pub fn new(
        cfg: RingConfig,
        tag: RingTag,
        prec: Prec,
        window: (i64, i64),
        open: (bool, bool),
        terms: Vec<(i64, PAdic)>,
    ) -> Result<Self> {
        let (lo, hi) = window;
        if lo > hi {
            return Err(Error::WindowEmpty);
        }
        if let Some(r) = tag.overconvergence() {
            if r <= Rational64::zero() {
                return Err(Error::InvalidConfig("overconvergence parameter must be positive".into()));
            }
        }
        let mut map: BTreeMap<i64, PAdic> = BTreeMap::new();
        for (i, c) in terms {
            if *c.config() != cfg {
                return Err(Error::ConfigMismatch);
            }
            if i < lo || i > hi {
                return Err(Error::UncertifiedWindow(format!("term u^{i} outside window [{lo}, {hi}]")));
            }
            if !tag.allows_denominators() && !c.is_integral() {
                return Err(Error::IncompatibleTags(format!(
                    "coefficient of u^{i} is not integral; use the Robba tag"
                )));
            }
            let acc = match map.remove(&i) {
                Some(a) => &a + &c,
                None => c,
            };
            map.insert(i, acc);
        }
        let mut s = LaurentSeries { cfg, tag, terms: map, lo, hi, open_lo: open.0, open_hi: open.1, prec };
        s.normalize();
        Ok(s)
    }

    pub fn zero(cfg: RingConfig, tag: RingTag, prec: Prec) -> Self {
        LaurentSeries { cfg, tag, terms: BTreeMap::new(), lo: 0, hi: 0, open_lo: false, open_hi: false, prec }
    }

    pub fn monomial(cfg: RingConfig, tag: RingTag, prec: Prec, c: PAdic, i: i64) -> Result<Self> {
        Self::from_terms(cfg, tag, prec, vec![(i, c)])
    }

    pub fn constant(cfg: RingConfig, tag: RingTag, prec: Prec, c: PAdic) -> Result<Self> {
        Self::monomial(cfg, tag, prec, c, 0)
    }

    pub fn one(cfg: RingConfig, tag: RingTag, prec: Prec) -> Self {
        Self::constant(cfg, tag, prec, PAdic::one(cfg)).expect("1 is integral")
    }

    /// The variable u.
    pub fn u(cfg: RingConfig, tag: RingTag, prec: Prec) -> Self {
        Self::monomial(cfg, tag, prec, PAdic::one(cfg), 1).expect("u is integral")
    }

    /// Convenience constructor from integer coefficients.
    pub fn from_ints(cfg: RingConfig, tag: RingTag, prec: Prec, terms: &[(i64, i64)]) -> Result<Self> {
        let t = terms.iter().map(|&(i, c)| (i, PAdic::from_int(cfg, c, EXACT))).collect();
        Self::from_terms(cfg, tag, prec, t)
    }

    fn normalize(&mut self) {
        let prec = self.prec;
        let mut out = BTreeMap::new();
        for (i, c) in std::mem::take(&mut self.terms) {
            if i < self.lo || i > self.hi {
                continue;
            }
            let c = if prec < EXACT { c.truncate_abs(prec) } else { c };
            if !c.is_zero() {
                out.insert(i, c);
            }
        }
        self.terms = out;
        // an exact series stays exact only if its coefficients are
        if self.prec >= EXACT {
            if let Some(m) = self.terms.values().map(|c| c.abs_prec()).min() {
                self.prec = self.prec.min(m);
            }
        }
    }

    pub fn config(&self) -> &RingConfig {
        &self.cfg
    }

    pub fn tag(&self) -> RingTag {
        self.tag
    }

    pub fn with_tag(mut self, tag: RingTag) -> Result<Self> {
        if !tag.allows_denominators() && self.terms.values().any(|c| !c.is_integral()) {
            return Err(Error::IncompatibleTags("series has non-integral coefficients".into()));
        }
        self.tag = tag;
        Ok(self)
    }

    pub fn prec(&self) -> Prec {
        self.prec
    }

    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    pub fn open(&self) -> (bool, bool) {
        (self.open_lo, self.open_hi)
    }

    pub fn is_closed(&self) -> bool {
        !self.open_lo && !self.open_hi
    }

    /// Nonzero terms, in increasing exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (i64, &PAdic)> {
        self.terms.iter().map(|(i, c)| (*i, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Indistinguishable from zero on a closed window.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.is_closed()
    }

    /// Coefficient of u^i; errors outside the certified region.
    pub fn coeff(&self, i: i64) -> Result<PAdic> {
        if (self.open_lo && i < self.lo) || (self.open_hi && i > self.hi) {
            return Err(Error::UncertifiedWindow(format!("u^{i} lies beyond an open window side")));
        }
        Ok(self.terms.get(&i).cloned().unwrap_or_else(|| PAdic::zero(self.cfg, self.prec)))
    }

    /// Minimum pi-adic valuation of the stored coefficients, capped by the precision.
    pub fn val_pi(&self) -> Prec {
        self.terms.values().filter_map(|c| c.val_pi()).min().unwrap_or(self.prec).min(self.prec)
    }

    /// Gamma-valuation v_p(x) = min_i v_p(x_i); `None` if x vanishes at precision.
    pub fn v_p(&self) -> Option<Rational64> {
        self.terms.values().filter_map(|c| c.val_pi()).min().map(|v| self.cfg.pi_to_vp(v))
    }

    fn check(&self, other: &LaurentSeries) -> Result<RingTag> {
        if self.cfg != other.cfg {
            return Err(Error::ConfigMismatch);
        }
        self.tag.combine(other.tag)
    }

    fn support_bounds(&self) -> (i128, i128) {
        (
            if self.open_lo { NEG_INF } else { self.lo as i128 },
            if self.open_hi { POS_INF } else { self.hi as i128 },
        )
    }

    fn cert_bounds(&self) -> (i128, i128) {
        (
            if self.open_lo { self.lo as i128 } else { NEG_INF },
            if self.open_hi { self.hi as i128 } else { POS_INF },
        )
    }

    fn build(
        cfg: RingConfig,
        tag: RingTag,
        prec: Prec,
        sup: (i128, i128),
        cert: (i128, i128),
        terms: BTreeMap<i64, PAdic>,
    ) -> Result<Self> {
        let lim = DEFAULT_MAX_EXPONENT as i128;
        let (mut lo, mut open_lo) = if cert.0 > sup.0 { (cert.0, true) } else { (sup.0, false) };
        let (mut hi, mut open_hi) = if cert.1 < sup.1 { (cert.1, true) } else { (sup.1, false) };
        if lo < -lim {
            lo = -lim;
            open_lo = true;
        }
        if hi > lim {
            hi = lim;
            open_hi = true;
        }
        if terms.is_empty() && !open_lo && !open_hi && lo > hi {
            return Ok(Self::zero(cfg, tag, prec));
        }
        if lo > hi {
            return Err(Error::WindowEmpty);
        }
        let mut s = LaurentSeries { cfg, tag, terms, lo: lo as i64, hi: hi as i64, open_lo, open_hi, prec };
        s.normalize();
        Ok(s)
    }

    pub fn add(&self, other: &LaurentSeries) -> Result<Self> {
        let tag = self.check(other)?;
        let prec = self.prec.min(other.prec);
        let (sa, sb) = (self.support_bounds(), other.support_bounds());
        let (ca, cb) = (self.cert_bounds(), other.cert_bounds());
        let mut terms = self.terms.clone();
        for (i, c) in &other.terms {
            let v = match terms.remove(i) {
                Some(a) => &a + c,
                None => c.clone(),
            };
            terms.insert(*i, v);
        }
        let sup = (sa.0.min(sb.0), sa.1.max(sb.1));
        let sup = if self.is_zero() { sb } else if other.is_zero() { sa } else { sup };
        Self::build(self.cfg, tag, prec, sup, (ca.0.max(cb.0), ca.1.min(cb.1)), terms)
    }

    pub fn neg(&self) -> Self {
        let mut s = self.clone();
        for c in s.terms.values_mut() {
            *c = -&*c;
        }
        s
    }

    pub fn sub(&self, other: &LaurentSeries) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &LaurentSeries) -> Result<Self> {
        let tag = self.check(other)?;
        let prec = prec_add(self.prec, other.val_pi()).min(prec_add(other.prec, self.val_pi()));
        let (lx, ux) = self.support_bounds();
        let (ly, uy) = other.support_bounds();
        let (clx, cux) = self.cert_bounds();
        let (cly, cuy) = other.cert_bounds();
        let lower = |cl: i128, u: i128| if cl == NEG_INF { NEG_INF } else { cl.saturating_add(u) };
        let upper = |cu: i128, l: i128| if cu == POS_INF { POS_INF } else { cu.saturating_add(l) };
        let cert = (lower(clx, uy).max(lower(cly, ux)), upper(cux, ly).min(upper(cuy, lx)));
        let sup = if self.is_zero() || other.is_zero() {
            (1, 0)
        } else {
            (lx.saturating_add(ly).max(NEG_INF), ux.saturating_add(uy).min(POS_INF))
        };
        let mut terms: BTreeMap<i64, PAdic> = BTreeMap::new();
        for (i, a) in &self.terms {
            for (j, b) in &other.terms {
                let k = i + j;
                let t = a * b;
                let v = match terms.remove(&k) {
                    Some(acc) => &acc + &t,
                    None => t,
                };
                terms.insert(k, v);
            }
        }
        let cert = (cert.0.max(NEG_INF), cert.1.min(POS_INF));
        Self::build(self.cfg, tag, prec, sup, cert, terms)
    }

    pub fn scale(&self, c: &PAdic) -> Result<Self> {
        if *c.config() != self.cfg {
            return Err(Error::ConfigMismatch);
        }
        let mut s = self.clone();
        s.prec = prec_add(self.prec, c.val_or_prec()).min(prec_add(c.abs_prec(), self.val_pi()));
        for v in s.terms.values_mut() {
            *v = &*v * c;
        }
        if !s.tag.allows_denominators() && s.terms.values().any(|v| !v.is_integral()) {
            return Err(Error::IncompatibleTags("scaling produced non-integral coefficients".into()));
        }
        s.normalize();
        Ok(s)
    }

    /// Multiplication by u^k.
    pub fn shift_u(&self, k: i64) -> Self {
        let mut s = self.clone();
        s.terms = self.terms.iter().map(|(i, c)| (i + k, c.clone())).collect();
        s.lo += k;
        s.hi += k;
        s
    }

    pub fn pow(&self, n: u32) -> Result<Self> {
        let mut acc = Self::one(self.cfg, self.tag, EXACT);
        for _ in 0..n {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Forgets digits beyond pi^prec.
    pub fn truncate(&self, prec: Prec) -> Self {
        let mut s = self.clone();
        s.prec = s.prec.min(prec);
        s.normalize();
        s
    }

    /// Treats the stored digits as exact up to pi^prec; the inverse of `truncate`.
    pub fn lift(&self, prec: Prec) -> Self {
        let mut s = self.clone();
        if prec > s.prec {
            s.prec = prec;
            for c in s.terms.values_mut() {
                *c = c.lift_abs(prec);
            }
        }
        s
    }

    /// Congruence modulo pi^k on the common certified region.
    pub fn eq_mod(&self, other: &LaurentSeries, k: Prec) -> Result<bool> {
        let d = self.sub(other)?;
        Ok(d.val_pi() >= k)
    }
}

impl fmt::Display for LaurentSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            write!(f, "0")?;
        }
        for (n, (i, c)) in self.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})u^{i}")?;
        }
        write!(f, "  [window {}{}, {}{}]", if self.open_lo { "(" } else { "[" }, self.lo, self.hi, if self.open_hi { ")" } else { "]" })
    }
}

pub(crate) fn bigint_to_i64(n: &BigInt) -> Result<i64> {
    n.to_i64().ok_or_else(|| Error::WindowOverflow("integer does not fit in i64".into()))
}

impl LaurentSeries {
    /// Precision bound in v_p units.
    pub fn prec_vp(&self) -> Rational64 {
        if self.prec >= EXACT {
            Rational64::from_integer(i64::MAX / 8)
        } else {
            self.cfg.pi_to_vp(self.prec)
        }
    }

    /// Smallest exponent j with v_p(x_j) <= n; `None` stands for +infinity.
    pub fn vn_naive(&self, n: Rational64) -> Result<Option<i64>> {
        if n >= self.prec_vp() {
            return Err(Error::PrecisionExhausted(format!(
                "v_n needs n = {n} below the precision {}",
                self.prec_vp()
            )));
        }
        if self.open_lo {
            return Err(Error::UncertifiedWindow("v_n needs the window closed on the left".into()));
        }
        let found = self
            .terms
            .iter()
            .find(|(_, c)| c.v_p().is_some_and(|v| v <= n))
            .map(|(i, _)| *i);
        if found.is_none() && self.open_hi {
            return Err(Error::UncertifiedWindow("no qualifying exponent inside an open window".into()));
        }
        Ok(found)
    }

    /// w_r(x) = min_n (r v_n(x) + n), scanning n over (1/e)Z below the precision.
    pub fn wr(&self, r: Rational64) -> Result<Rational64> {
        if r <= Rational64::zero() {
            return Err(Error::InvalidConfig("w_r needs r > 0".into()));
        }
        match self.tag.overconvergence() {
            None => {
                return Err(Error::IncompatibleTags("w_r needs an overconvergent tag".into()));
            }
            Some(r0) if r > r0 => {
                return Err(Error::IncompatibleTags(format!("r = {r} exceeds the certified parameter {r0}")));
            }
            _ => {}
        }
        if self.terms.is_empty() {
            return Err(Error::ZeroAtPrecision);
        }
        let vmin = self.terms.values().filter_map(|c| c.val_pi()).min().unwrap_or(self.prec);
        let top = if self.prec >= EXACT {
            self.terms.values().filter_map(|c| c.val_pi()).max().unwrap_or(vmin)
        } else {
            self.prec - 1
        };
        let mut best: Option<Rational64> = None;
        for k in vmin..=top {
            let n = self.cfg.pi_to_vp(k);
            if let Some(j) = self.vn_naive(n)? {
                let cand = r * Rational64::from_integer(j) + n;
                best = Some(best.map_or(cand, |b| b.min(cand)));
            }
        }
        best.ok_or(Error::ZeroAtPrecision)
    }

    /// Formal derivative d/du.
    pub fn derive(&self) -> Self {
        let mut s = self.clone();
        s.terms = self
            .terms
            .iter()
            .map(|(i, c)| (i - 1, c * &PAdic::from_int(self.cfg, *i, EXACT)))
            .collect();
        s.lo -= 1;
        s.hi -= 1;
        s.normalize();
        s
    }

    /// Inverse of a series with a single coefficient of minimal valuation.
    pub fn inv(&self) -> Result<Self> {
        if !self.is_closed() {
            return Err(Error::Unsupported("inverse of a series with an open window".into()));
        }
        let v = self
            .terms
            .values()
            .filter_map(|c| c.val_pi())
            .min()
            .ok_or_else(|| Error::NotInvertibleAtPrecision("series is zero".into()))?;
        let dominant: Vec<(i64, &PAdic)> =
            self.terms.iter().filter(|(_, c)| c.val_pi() == Some(v)).map(|(i, c)| (*i, c)).collect();
        if dominant.len() != 1 {
            return Err(Error::NotInvertibleAtPrecision(format!(
                "{} coefficients share the minimal valuation",
                dominant.len()
            )));
        }
        if v != 0 && !self.tag.allows_denominators() {
            return Err(Error::NotInvertibleAtPrecision("dominant coefficient is not a unit of O".into()));
        }
        let (m, c) = (dominant[0].0, dominant[0].1.clone());
        let c_inv = c.inv()?;
        let work_tag = RingTag::Robba(self.tag.overconvergence().unwrap_or(Rational64::from_integer(1)));
        let norm = self.clone().with_tag(work_tag)?.scale(&c_inv)?.shift_u(-m);
        let one = Self::one(self.cfg, work_tag, EXACT);
        let y = norm.sub(&one)?;
        let rel = norm.prec;
        let mut sum = one.clone();
        let mut term = one;
        let minus_y = y.neg();
        loop {
            term = term.mul(&minus_y)?.truncate(rel);
            if term.terms.is_empty() {
                break;
            }
            sum = sum.add(&term)?;
        }
        let sum = sum.truncate(rel);
        let out = sum.scale(&c_inv)?.shift_u(-m);
        let tag = match self.tag {
            RingTag::Gamma => RingTag::Gamma,
            RingTag::GammaCon(r) | RingTag::Robba(r) => {
                // the geometric series converges for w_r only where the tail is small
                let mut r_ok = r;
                for (j, c) in y.terms() {
                    if j < 0 {
                        let vj = c.v_p().unwrap_or_default();
                        let bound = vj / Rational64::from_integer(-j);
                        if r_ok >= bound {
                            r_ok = bound / Rational64::from_integer(2);
                        }
                    }
                }
                if matches!(self.tag, RingTag::GammaCon(_)) {
                    RingTag::GammaCon(r_ok)
                } else {
                    RingTag::Robba(r_ok)
                }
            }
        };
        let mut out = out;
        out.tag = tag;
        Ok(out)
    }
}

/// The Frobenius lift on series: coefficients by sigma_0, and u by a fixed image.
#[derive(Clone, Debug)]
pub struct SigmaAction {
    /// `None` means u maps to u^q.
    image: Option<LaurentSeries>,
    max_exponent: i64,
}

impl Default for SigmaAction {
    fn default() -> Self {
        SigmaAction { image: None, max_exponent: DEFAULT_MAX_EXPONENT }
    }
}

impl SigmaAction {
    pub fn standard() -> Self {
        Self::default()
    }

    /// A lift with u mapped to `image`, which must reduce to u^q modulo pi.
    pub fn with_image(image: LaurentSeries) -> Result<Self> {
        if !image.is_closed() {
            return Err(Error::Unsupported("sigma(u) must have a closed window".into()));
        }
        let q = bigint_to_i64(&image.cfg.q())?;
        let uq = LaurentSeries::monomial(image.cfg, image.tag, EXACT, PAdic::one(image.cfg), q)?;
        if !image.eq_mod(&uq, 1)? {
            return Err(Error::InvalidConfig("sigma(u) must reduce to u^q modulo pi".into()));
        }
        Ok(SigmaAction { image: Some(image), max_exponent: DEFAULT_MAX_EXPONENT })
    }

    pub fn with_max_exponent(mut self, max: i64) -> Self {
        self.max_exponent = max;
        self
    }

    pub fn max_exponent(&self) -> i64 {
        self.max_exponent
    }

    pub fn is_standard(&self) -> bool {
        self.image.is_none()
    }

    /// sigma(u) as a series.
    pub fn image_of_u(&self, cfg: RingConfig, tag: RingTag) -> Result<LaurentSeries> {
        match &self.image {
            Some(z) => Ok(z.clone()),
            None => LaurentSeries::monomial(cfg, tag, EXACT, PAdic::one(cfg), bigint_to_i64(&cfg.q())?),
        }
    }

    pub fn apply(&self, x: &LaurentSeries) -> Result<LaurentSeries> {
        let q = bigint_to_i64(&x.cfg.q())?;
        let tag = x.tag.after_sigma(q);
        let Some(image) = &self.image else {
            let scale = |i: i64| -> Result<i64> {
                i.checked_mul(q)
                    .filter(|v| v.abs() <= self.max_exponent)
                    .ok_or_else(|| Error::WindowOverflow(format!("sigma sends u^{i} beyond the exponent cap")))
            };
            let terms = x.terms.iter().map(|(i, c)| Ok((scale(*i)?, c.sigma0()))).collect::<Result<_>>()?;
            let mut s = LaurentSeries {
                cfg: x.cfg,
                tag,
                terms,
                lo: scale(x.lo)?,
                hi: scale(x.hi)?,
                open_lo: x.open_lo,
                open_hi: x.open_hi,
                prec: x.prec,
            };
            s.normalize();
            return Ok(s);
        };
        if !x.is_closed() {
            return Err(Error::Unsupported("general sigma lifts need a closed window".into()));
        }
        let image = image.clone().with_tag(image.tag.combine(tag)?)?;
        let mut acc = LaurentSeries::zero(x.cfg, tag, x.prec);
        let mut pos = LaurentSeries::one(x.cfg, tag, EXACT);
        let mut k = 0;
        for (i, c) in x.terms.range(0..) {
            while k < *i {
                pos = pos.mul(&image)?.truncate(x.prec);
                k += 1;
            }
            acc = acc.add(&pos.scale(&c.sigma0())?)?;
        }
        if x.terms.range(..0).next().is_some() {
            let inv = image.inv()?;
            let mut neg = LaurentSeries::one(x.cfg, tag, EXACT);
            let mut k = 0;
            for (i, c) in x.terms.range(..0).rev() {
                while k < -*i {
                    neg = neg.mul(&inv)?.truncate(x.prec);
                    k += 1;
                }
                acc = acc.add(&neg.scale(&c.sigma0())?)?;
            }
        }
        acc.truncate(x.prec).with_tag(tag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(p: u64, e: u32, n: Prec) -> RingConfig {
        RingConfig::new(p, 1, e, n).unwrap()
    }

    fn con(r: (i64, i64)) -> RingTag {
        RingTag::GammaCon(Rational64::new(r.0, r.1))
    }

    fn series(c: RingConfig, tag: RingTag, terms: &[(i64, i64)]) -> LaurentSeries {
        LaurentSeries::from_ints(c, tag, c.prec, terms).unwrap()
    }

    fn pi_series(c: RingConfig, tag: RingTag, terms: &[(i64, i64, i64)]) -> LaurentSeries {
        // (exponent, integer, power of pi)
        let t = terms
            .iter()
            .map(|&(i, a, k)| (i, PAdic::from_int(c, a, EXACT).shift(k)))
            .collect();
        LaurentSeries::from_terms(c, tag, c.prec, t).unwrap()
    }

    /// Coefficientwise convolution computed from plain integer arithmetic modulo p^N.
    fn convolve(x: &[(i64, i64)], y: &[(i64, i64)], modulus: i128) -> BTreeMap<i64, i128> {
        let mut out = BTreeMap::new();
        for &(i, a) in x {
            for &(j, b) in y {
                *out.entry(i + j).or_insert(0i128) += a as i128 * b as i128;
            }
        }
        out.into_iter()
            .map(|(k, v)| (k, v.rem_euclid(modulus)))
            .filter(|(_, v)| *v != 0)
            .collect()
    }

    #[test]
    fn u_times_inverse_is_one() {
        let c = cfg(5, 1, 10);
        let u = LaurentSeries::u(c, RingTag::Gamma, 10);
        let prod = u.mul(&u.inv().unwrap()).unwrap();
        assert!(prod.eq_mod(&LaurentSeries::one(c, RingTag::Gamma, 10), 10).unwrap());
        assert_eq!(prod.num_terms(), 1);
    }

    #[test]
    fn difference_of_squares() {
        let c = cfg(3, 2, 12);
        let tag = RingTag::Gamma;
        let a = pi_series(c, tag, &[(0, 1, 0), (1, 1, 1)]);
        let b = pi_series(c, tag, &[(0, 1, 0), (1, -1, 1)]);
        let expect = pi_series(c, tag, &[(0, 1, 0), (2, -1, 2)]);
        assert!(a.mul(&b).unwrap().eq_mod(&expect, 12).unwrap());
    }

    #[test]
    fn vn_examples() {
        let c = cfg(7, 1, 8);
        let x = series(c, con((1, 2)), &[(-2, 1), (5, 7)]);
        assert_eq!(x.vn_naive(Rational64::from_integer(0)).unwrap(), Some(-2));
        assert_eq!(x.vn_naive(Rational64::from_integer(1)).unwrap(), Some(-2));
        let y = series(c, con((1, 2)), &[(5, 7)]);
        assert_eq!(y.vn_naive(Rational64::from_integer(0)).unwrap(), None);
        assert_eq!(y.vn_naive(Rational64::from_integer(1)).unwrap(), Some(5));
        let p = series(c, con((1, 2)), &[(0, 7)]);
        assert_eq!(p.vn_naive(Rational64::from_integer(0)).unwrap(), None);
        assert!(matches!(p.vn_naive(Rational64::from_integer(8)), Err(Error::PrecisionExhausted(_))));
    }

    #[test]
    fn vn_open_left_is_uncertified() {
        let c = cfg(5, 1, 6);
        let terms = vec![(0, PAdic::one(c))];
        let x = LaurentSeries::new(c, con((1, 1)), 6, (-3, 4), (true, false), terms).unwrap();
        assert!(matches!(x.vn_naive(Rational64::from_integer(0)), Err(Error::UncertifiedWindow(_))));
        assert!(matches!(x.coeff(-4), Err(Error::UncertifiedWindow(_))));
        assert!(x.coeff(-3).unwrap().is_zero());
    }

    #[test]
    fn wr_examples() {
        let c = cfg(5, 1, 6);
        let r = Rational64::new(1, 3);
        for m in [1i64, 4, 9] {
            let x = series(c, con((1, 1)), &[(-m, 1)]);
            assert_eq!(x.wr(r).unwrap(), -r * Rational64::from_integer(m));
        }
        let p = series(c, con((1, 1)), &[(0, 5)]);
        for r in [Rational64::new(1, 7), Rational64::new(1, 2), Rational64::from_integer(1)] {
            assert_eq!(p.wr(r).unwrap(), Rational64::from_integer(1));
        }
        assert!(matches!(p.wr(Rational64::from_integer(2)), Err(Error::IncompatibleTags(_))));
        let g = series(c, RingTag::Gamma, &[(0, 5)]);
        assert!(g.wr(r).is_err());
    }

    #[test]
    fn wr_ramified_steps() {
        // v_p(pi) = 1/2, so pi u^{-3} has w_r = 1/2 - 3r
        let c = cfg(3, 2, 8);
        let x = pi_series(c, con((1, 1)), &[(-3, 1, 1), (2, 1, 0)]);
        let r = Rational64::new(1, 10);
        assert_eq!(x.wr(r).unwrap(), Rational64::new(1, 2) - Rational64::new(3, 10));
    }

    #[test]
    fn sigma_examples() {
        let c = cfg(3, 1, 6);
        let act = SigmaAction::standard();
        let x = series(c, con((1, 1)), &[(2, 1)]);
        let s = act.apply(&x).unwrap();
        assert_eq!(s.terms().map(|(i, _)| i).collect::<Vec<_>>(), vec![6]);
        assert_eq!(s.tag(), con((1, 3)));
        let p = series(c, con((1, 1)), &[(0, 3)]);
        assert!(act.apply(&p).unwrap().eq_mod(&p, 6).unwrap());
        let capped = SigmaAction::standard().with_max_exponent(100);
        let big = series(c, con((1, 1)), &[(40, 1)]);
        assert!(matches!(capped.apply(&big), Err(Error::WindowOverflow(_))));
    }

    #[test]
    fn sigma_with_general_image() {
        let c = cfg(3, 1, 6);
        let tag = con((1, 4));
        let image = series(c, tag, &[(3, 1), (1, 3)]);
        let act = SigmaAction::with_image(image.clone()).unwrap();
        let x = series(c, tag, &[(2, 1), (-1, 1)]);
        let s = act.apply(&x).unwrap();
        let expect = image.mul(&image).unwrap().add(&image.inv().unwrap()).unwrap();
        assert!(s.eq_mod(&expect, 6).unwrap());
        assert!(SigmaAction::with_image(series(c, tag, &[(2, 1)])).is_err());
    }

    #[test]
    fn derivative_examples() {
        let c = cfg(5, 1, 6);
        for j in [-3i64, 1, 4, 7] {
            let d = series(c, RingTag::Robba(Rational64::new(1, 1)), &[(j, 1)]).derive();
            let expect = series(c, RingTag::Robba(Rational64::new(1, 1)), &[(j - 1, j)]);
            assert!(d.eq_mod(&expect, 6).unwrap());
        }
        assert!(series(c, RingTag::Gamma, &[(0, 17)]).derive().is_zero());
        // d(sigma(u)) = q u^{q-1}
        let su = SigmaAction::standard().apply(&LaurentSeries::u(c, con((1, 1)), 6)).unwrap();
        let expect = series(c, con((1, 1)), &[(4, 5)]);
        assert!(su.derive().eq_mod(&expect, 6).unwrap());
    }

    #[test]
    fn inverse_requires_dominant_term() {
        let c = cfg(5, 1, 6);
        let x = series(c, RingTag::Gamma, &[(0, 1), (3, 1)]);
        assert!(matches!(x.inv(), Err(Error::NotInvertibleAtPrecision(_))));
        let y = series(c, RingTag::Gamma, &[(0, 1), (3, 5), (-2, 25)]);
        let prod = y.mul(&y.inv().unwrap()).unwrap();
        assert!(prod.eq_mod(&LaurentSeries::one(c, RingTag::Gamma, 6), 6).unwrap());
    }

    #[test]
    fn product_window_is_conservative() {
        let c = cfg(5, 1, 6);
        let tag = con((1, 1));
        let x = LaurentSeries::new(c, tag, 6, (0, 10), (false, true), vec![(0, PAdic::one(c))]).unwrap();
        let y = series(c, tag, &[(0, 1), (3, 1)]);
        let prod = x.mul(&y).unwrap();
        assert_eq!(prod.window(), (0, 10));
        assert_eq!(prod.open(), (false, true));
        let z = LaurentSeries::new(c, tag, 6, (-5, 5), (true, true), vec![]).unwrap();
        assert!(matches!(z.mul(&x), Err(Error::WindowEmpty)));
    }

    fn arb_terms(lo: i64, hi: i64) -> impl Strategy<Value = Vec<(i64, i64)>> {
        prop::collection::vec((lo..=hi, -40i64..40), 1..6)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn mul_matches_convolution(x in arb_terms(-6, 6), y in arb_terms(-6, 6)) {
            let c = cfg(3, 1, 5);
            let tag = RingTag::Robba(Rational64::new(1, 1));
            let prod = series(c, tag, &x).mul(&series(c, tag, &y)).unwrap();
            let oracle = convolve(&x, &y, 243);
            let got: BTreeMap<i64, i128> = prod
                .terms()
                .map(|(i, a)| (i, a.to_packed(5).unwrap().try_into().unwrap()))
                .collect();
            prop_assert_eq!(got, oracle);
        }

        #[test]
        fn wr_is_a_valuation(
            x in arb_terms(-5, 5),
            y in arb_terms(-5, 5),
            r in (1i64..6, 1i64..12),
        ) {
            let c = cfg(5, 1, 30);
            let tag = con((8, 1));
            let (xs, ys) = (series(c, tag, &x), series(c, tag, &y));
            prop_assume!(!xs.terms.is_empty() && !ys.terms.is_empty());
            let r = Rational64::new(r.0, r.1);
            // direct oracle: min_j (r j + v_p(x_j))
            let direct = |s: &LaurentSeries| {
                s.terms().map(|(j, a)| r * Rational64::from_integer(j) + a.v_p().unwrap()).min().unwrap()
            };
            prop_assert_eq!(xs.wr(r).unwrap(), direct(&xs));
            prop_assert_eq!(xs.mul(&ys).unwrap().wr(r).unwrap(), xs.wr(r).unwrap() + ys.wr(r).unwrap());
            let sum = xs.add(&ys).unwrap();
            if !sum.terms.is_empty() {
                prop_assert!(sum.wr(r).unwrap() >= xs.wr(r).unwrap().min(ys.wr(r).unwrap()));
            }
        }

        #[test]
        fn sigma_is_multiplicative_and_lifts_frobenius(x in arb_terms(-4, 4), y in arb_terms(-4, 4)) {
            let c = cfg(3, 1, 6);
            let tag = con((1, 1));
            let act = SigmaAction::standard();
            let (xs, ys) = (series(c, tag, &x), series(c, tag, &y));
            let lhs = act.apply(&xs.mul(&ys).unwrap()).unwrap();
            let rhs = act.apply(&xs).unwrap().mul(&act.apply(&ys).unwrap()).unwrap();
            prop_assert!(lhs.eq_mod(&rhs, 6).unwrap());
            prop_assert!(act.apply(&xs).unwrap().eq_mod(&xs.pow(3).unwrap(), 1).unwrap());
        }

        #[test]
        fn leibniz_rule(x in arb_terms(-5, 5), y in arb_terms(-5, 5), k in -20i64..20) {
            let c = cfg(5, 1, 6);
            let tag = RingTag::Robba(Rational64::new(1, 1));
            let (xs, ys) = (series(c, tag, &x), series(c, tag, &y));
            let lhs = xs.mul(&ys).unwrap().derive();
            let rhs = xs.mul(&ys.derive()).unwrap().add(&ys.mul(&xs.derive()).unwrap()).unwrap();
            prop_assert!(lhs.eq_mod(&rhs, 6).unwrap());
            let kc = PAdic::from_int(c, k, EXACT);
            prop_assert!(xs.scale(&kc).unwrap().derive().eq_mod(&xs.derive().scale(&kc).unwrap(), 6).unwrap());
        }
    }
}
