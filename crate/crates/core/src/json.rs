//! JSON wire formats.
//!
//! Coefficients travel as strings: an integer numerator (or `c0,c1,...,c_{e-1}`
//! coordinates in the basis 1, pi, ..., pi^(e-1) when e > 1), an optional
//! `/pi^k` denominator, and an optional ` + O(pi^a)` when the coefficient is
//! known to less than the precision of the enclosing object.

use num_bigint::BigInt;
use num_rational::Rational64;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::laurent::{LaurentSeries, RingTag, SigmaAction};
use crate::matrix::{Mat, Ring};
use crate::padic::{PAdic, Prec, RingConfig, EXACT};
use crate::qs::{KernelBasis, Move, ReductionCertificate};
use crate::sigma::NewtonEstimate;
use crate::solve::{SplitCertificate, TwistedSolution};
use crate::tate::{mono, PolyRadius, TateSeries};

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

pub fn parse(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))
}

pub fn rational(r: Rational64) -> Value {
    json!([r.numer(), r.denom()])
}

pub fn rational_from(v: &Value) -> Result<Rational64> {
    match v {
        Value::Array(a) if a.len() == 2 => {
            let num = a[0].as_i64().ok_or_else(|| parse_err("rational numerator must be an integer"))?;
            let den = a[1].as_i64().ok_or_else(|| parse_err("rational denominator must be an integer"))?;
            if den == 0 {
                return Err(parse_err("zero denominator"));
            }
            Ok(Rational64::new(num, den))
        }
        Value::Number(n) => n.as_i64().map(Rational64::from_integer).ok_or_else(|| parse_err("expected an integer")),
        Value::String(s) => parse_rational_str(s),
        _ => Err(parse_err("expected [num, den]")),
    }
}

/// `a/b` or `a`.
pub fn parse_rational_str(s: &str) -> Result<Rational64> {
    let bad = || parse_err(format!("bad rational {s:?}"));
    match s.split_once('/') {
        Some((a, b)) => {
            let a: i64 = a.trim().parse().map_err(|_| bad())?;
            let b: i64 = b.trim().parse().map_err(|_| bad())?;
            if b == 0 {
                return Err(bad());
            }
            Ok(Rational64::new(a, b))
        }
        None => Ok(Rational64::from_integer(s.trim().parse().map_err(|_| bad())?)),
    }
}

/// Optional precision: `null` stands for exact.
fn prec_json(p: Prec) -> Value {
    if p >= EXACT {
        Value::Null
    } else {
        json!(p)
    }
}

fn prec_from(v: Option<&Value>) -> Result<Prec> {
    match v {
        None | Some(Value::Null) => Ok(EXACT),
        Some(x) => {
            let n = x.as_i64().ok_or_else(|| parse_err("N must be an integer or null"))?;
            if n < 1 {
                return Err(Error::InvalidConfig("N must be at least 1".into()));
            }
            Ok(n)
        }
    }
}

fn field<'a>(obj: &'a Value, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| parse_err(format!("missing field {key:?}")))
}

fn array<'a>(v: &'a Value, what: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| parse_err(format!("{what} must be an array")))
}

fn int(v: &Value, what: &str) -> Result<i64> {
    v.as_i64().ok_or_else(|| parse_err(format!("{what} must be an integer")))
}

fn numerator_string(c: &[BigInt]) -> String {
    if c.len() == 1 {
        c[0].to_string()
    } else {
        c.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
    }
}

/// Coefficient string; `context` is the precision the reader will assume by default.
pub fn coeff_string(x: &PAdic, context: Prec) -> String {
    let (c, k) = x.numerator();
    let mut s = numerator_string(&c);
    if k > 0 {
        s.push_str(&format!("/pi^{k}"));
    }
    if x.abs_prec() < context.min(EXACT) {
        s.push_str(&format!(" + O(pi^{})", x.abs_prec()));
    }
    s
}

fn parse_numerator(cfg: RingConfig, s: &str) -> Result<Vec<BigInt>> {
    let bad = || parse_err(format!("bad coefficient {s:?}"));
    let parts: Vec<BigInt> = s.split(',').map(|t| t.trim().parse::<BigInt>().map_err(|_| bad())).collect::<Result<_>>()?;
    if parts.len() == 1 {
        let mut c = vec![BigInt::from(0); cfg.e as usize];
        c[0] = parts[0].clone();
        Ok(c)
    } else if parts.len() == cfg.e as usize {
        Ok(parts)
    } else {
        Err(parse_err(format!("coefficient {s:?} needs 1 or e = {} coordinates", cfg.e)))
    }
}

fn parse_pi_power(s: &str, what: &str) -> Result<i64> {
    let t = s.trim();
    let k = t.strip_prefix("pi^").unwrap_or(t);
    if t == "pi" {
        return Ok(1);
    }
    k.parse().map_err(|_| parse_err(format!("bad {what} {s:?}")))
}

/// Parses a coefficient string, defaulting to absolute precision `context`.
pub fn coeff_from_str(cfg: RingConfig, s: &str, context: Prec) -> Result<PAdic> {
    let (body, abs) = match s.split_once('+') {
        Some((b, tail)) if tail.trim_start().starts_with("O(") => {
            let inner = tail.trim().strip_prefix("O(").and_then(|t| t.strip_suffix(')'));
            let inner = inner.ok_or_else(|| parse_err(format!("bad precision term in {s:?}")))?;
            (b, parse_pi_power(inner, "precision")?)
        }
        _ => (s, context),
    };
    let (num, k) = match body.split_once('/') {
        Some((a, d)) => (a, parse_pi_power(d, "denominator")?),
        None => (body, 0),
    };
    if k < 0 {
        return Err(parse_err("denominator power must be nonnegative"));
    }
    let c = parse_numerator(cfg, num)?;
    let abs_num = if abs >= EXACT { EXACT } else { abs + k };
    Ok(PAdic::from_coords(cfg, c, abs_num)?.shift(-k))
}

pub fn tag_json(tag: RingTag) -> (Value, Value) {
    match tag {
        RingTag::Gamma => (json!("Gamma"), Value::Null),
        RingTag::GammaCon(r) => (json!("GammaCon"), rational(r)),
        RingTag::Robba(r) => (json!("Robba"), rational(r)),
    }
}

pub fn tag_from(name: &str, r: Option<&Value>) -> Result<RingTag> {
    let radius = || -> Result<Rational64> {
        let r = r.filter(|v| !v.is_null()).ok_or_else(|| parse_err(format!("tag {name} needs \"r\"")))?;
        rational_from(r)
    };
    match name {
        "Gamma" => Ok(RingTag::Gamma),
        "GammaCon" => Ok(RingTag::GammaCon(radius()?)),
        "Robba" => Ok(RingTag::Robba(radius()?)),
        other => Err(parse_err(format!("unknown ring tag {other:?}"))),
    }
}

pub fn laurent_json(x: &LaurentSeries) -> Value {
    let (tag, r) = tag_json(x.tag());
    let (lo, hi) = x.window();
    let terms: Vec<Value> = x.terms().map(|(i, c)| json!([i, coeff_string(c, x.prec())])).collect();
    let mut obj = json!({
        "tag": tag,
        "r": r,
        "N": prec_json(x.prec()),
        "window": [lo, hi],
        "terms": terms,
    });
    let open = x.open();
    if open.0 || open.1 {
        obj["open"] = json!([open.0, open.1]);
    }
    obj
}

pub fn laurent_from(cfg: RingConfig, v: &Value) -> Result<LaurentSeries> {
    let tag_name = field(v, "tag")?.as_str().ok_or_else(|| parse_err("tag must be a string"))?;
    let tag = tag_from(tag_name, v.get("r"))?;
    let prec = prec_from(v.get("N"))?;
    let mut terms = Vec::new();
    for t in array(field(v, "terms")?, "terms")? {
        let pair = array(t, "term")?;
        if pair.len() != 2 {
            return Err(parse_err("a term is [exponent, \"coefficient\"]"));
        }
        let i = int(&pair[0], "exponent")?;
        let s = pair[1].as_str().ok_or_else(|| parse_err("coefficients are strings"))?;
        terms.push((i, coeff_from_str(cfg, s, prec)?));
    }
    let window = match v.get("window") {
        Some(w) => {
            let w = array(w, "window")?;
            if w.len() != 2 {
                return Err(parse_err("window is [lo, hi]"));
            }
            (int(&w[0], "window bound")?, int(&w[1], "window bound")?)
        }
        None => {
            let lo = terms.iter().map(|t| t.0).min().unwrap_or(0);
            let hi = terms.iter().map(|t| t.0).max().unwrap_or(0);
            (lo, hi)
        }
    };
    let open = match v.get("open") {
        Some(o) => {
            let o = array(o, "open")?;
            if o.len() != 2 {
                return Err(parse_err("open is [bool, bool]"));
            }
            let b = |x: &Value| x.as_bool().ok_or_else(|| parse_err("open flags are booleans"));
            (b(&o[0])?, b(&o[1])?)
        }
        None => (false, false),
    };
    LaurentSeries::new(cfg, tag, prec, window, open, terms)
}

/// Optional Gauss precision in v_p units: `null` is exact.
fn gauss_prec_json(p: Option<Rational64>) -> Value {
    p.map_or(Value::Null, rational)
}

pub fn tate_json(f: &TateSeries) -> Value {
    let n = f.n();
    let abs = f.prec().map_or(EXACT, |v| f.config().vp_to_pi_ceil(v));
    let terms: Vec<Value> = f
        .terms()
        .map(|(m, c)| {
            let (num, k) = c.numerator();
            let mut s = numerator_string(&num);
            if c.abs_prec() < abs.min(EXACT) {
                s.push_str(&format!(" + O(pi^{})", c.abs_prec() + k));
            }
            json!([m[..n].to_vec(), s, k.to_string()])
        })
        .collect();
    json!({
        "n": n,
        "radius": f.radius().logs().iter().map(|r| rational(*r)).collect::<Vec<_>>(),
        "N": gauss_prec_json(f.prec()),
        "cap": f.cap(),
        "terms": terms,
    })
}

pub fn tate_from(cfg: RingConfig, v: &Value) -> Result<TateSeries> {
    let n = int(field(v, "n")?, "n")?;
    let logs = match v.get("radius") {
        Some(r) => array(r, "radius")?.iter().map(rational_from).collect::<Result<Vec<_>>>()?,
        None => vec![Rational64::from_integer(0); n.max(0) as usize],
    };
    if logs.len() as i64 != n {
        return Err(Error::DimensionMismatch(format!("{} radii for {n} variables", logs.len())));
    }
    let radius = PolyRadius::new(logs)?;
    let prec = match v.get("N") {
        None => Some(cfg.pi_to_vp(cfg.prec)),
        Some(Value::Null) => None,
        Some(x) => Some(rational_from(x)?),
    };
    let cap = match v.get("cap") {
        Some(c) => u32::try_from(int(c, "cap")?).map_err(|_| parse_err("cap must be nonnegative"))?,
        None => crate::tate::DEFAULT_DEGREE_CAP,
    };
    let mut terms = Vec::new();
    for t in array(field(v, "terms")?, "terms")? {
        let t = array(t, "term")?;
        if t.len() != 2 && t.len() != 3 {
            return Err(parse_err("a term is [[exponents], \"numerator\", \"pi-power denominator\"]"));
        }
        let exps = array(&t[0], "exponents")?
            .iter()
            .map(|e| u32::try_from(int(e, "exponent")?).map_err(|_| parse_err("exponents are nonnegative")))
            .collect::<Result<Vec<u32>>>()?;
        if exps.len() as i64 != n {
            return Err(Error::DimensionMismatch(format!("exponent tuple of length {} for n = {n}", exps.len())));
        }
        let num = t[1].as_str().ok_or_else(|| parse_err("coefficient numerators are strings"))?;
        let k = match t.get(2) {
            None => 0,
            Some(Value::String(s)) => parse_pi_power(s, "denominator")?,
            Some(x) => int(x, "denominator")?,
        };
        if k < 0 {
            return Err(parse_err("denominator power must be nonnegative"));
        }
        // any O(pi^a) suffix refers to the numerator
        let c = coeff_from_str(cfg, num, EXACT)?.shift(-k);
        terms.push((mono(&exps)?, c));
    }
    TateSeries::new(cfg, radius, cap, prec, terms)
}

pub fn matrix_json<T: Ring>(m: &Mat<T>, entry: impl Fn(&T) -> Value) -> Value {
    Value::Array(m.to_rows().iter().map(|r| Value::Array(r.iter().map(&entry).collect())).collect())
}

pub fn matrix_from<T: Ring>(v: &Value, entry: impl Fn(&Value) -> Result<T>) -> Result<Mat<T>> {
    let rows = array(v, "matrix")?
        .iter()
        .map(|r| array(r, "matrix row")?.iter().map(&entry).collect::<Result<Vec<T>>>())
        .collect::<Result<Vec<_>>>()?;
    Mat::from_rows(rows)
}

pub fn laurent_matrix_from(cfg: RingConfig, v: &Value) -> Result<Mat<LaurentSeries>> {
    matrix_from(v, |e| laurent_from(cfg, e))
}

pub fn laurent_matrix_json(m: &Mat<LaurentSeries>) -> Value {
    matrix_json(m, laurent_json)
}

pub fn tate_matrix_json(m: &Mat<TateSeries>) -> Value {
    matrix_json(m, tate_json)
}

pub fn tate_matrix_from(cfg: RingConfig, v: &Value) -> Result<Mat<TateSeries>> {
    matrix_from(v, |e| tate_from(cfg, e))
}

pub fn tate_vec_json(v: &[TateSeries]) -> Value {
    Value::Array(v.iter().map(tate_json).collect())
}

pub fn tate_vec_from(cfg: RingConfig, v: &Value) -> Result<Vec<TateSeries>> {
    array(v, "tuple")?.iter().map(|e| tate_from(cfg, e)).collect()
}

/// `null`, `"standard"` or a series giving the image of u.
pub fn sigma_from(cfg: RingConfig, v: Option<&Value>) -> Result<SigmaAction> {
    match v {
        None | Some(Value::Null) => Ok(SigmaAction::standard()),
        Some(Value::String(s)) if s == "standard" => Ok(SigmaAction::standard()),
        Some(x) => SigmaAction::with_image(laurent_from(cfg, x)?),
    }
}

pub fn newton_json(est: &NewtonEstimate) -> Value {
    let sums: Vec<Value> =
        est.partial_sums.iter().enumerate().map(|(k, s)| json!([k + 1, s.numer(), s.denom()])).collect();
    json!({"partial_sums": sums, "exact": est.exact, "depth": est.depth})
}

pub fn twisted_json(sol: &TwistedSolution) -> Value {
    let mut obj = json!({
        "y": laurent_json(&sol.y),
        "terms": sol.terms,
        "residual_val": prec_json(sol.residual_val),
        "forward_backward_agree": sol.forward_backward_agree,
    });
    if let Some(rep) = &sol.overconvergence {
        obj["overconvergence"] = json!({
            "r_in": rational(rep.r_in),
            "w_in": rational(rep.w_in),
            "r_out": rational(rep.r_out),
            "w_out": rational(rep.w_out),
            "bound": rational(rep.bound),
            "certified": rep.certified(),
        });
    }
    obj
}

pub fn split_json(cert: &SplitCertificate) -> Value {
    json!({
        "X": laurent_matrix_json(&cert.x),
        "residual_val": prec_json(cert.residual_val),
        "iterations": cert.iterations,
        "conjugation_ok": cert.conjugation_ok,
        "contraction": {"block": cert.contraction.0, "gain": cert.contraction.1},
        "denominator": cert.denominator,
        "checked_to": cert.checked_to,
    })
}

pub fn move_json(mv: &Move) -> Value {
    let mut obj = match mv {
        Move::Elem { target, source, factor } => {
            json!({"op": "add", "target": target, "source": source, "factor": tate_json(factor)})
        }
        Move::Swap { a, b } => json!({"op": "swap", "rows": [a, b]}),
        Move::Unit { row, unit } => json!({"op": "unit", "row": row, "unit": tate_json(unit)}),
        Move::Bezout { a, b } => json!({"op": "block", "rows": [a, b]}),
        Move::TjEnter { j } => json!({"op": "enter", "j": j}),
        Move::TjExit { j } => json!({"op": "exit", "j": j}),
    };
    obj["kind"] = json!(mv.kind());
    obj
}

pub fn reduction_json(cert: &ReductionCertificate) -> Value {
    json!({
        "f": tate_vec_json(&cert.f),
        "witness": cert.witness.as_ref().map_or(Value::Null, |w| tate_vec_json(w)),
        "M": tate_matrix_json(&cert.m),
        "M_inv": tate_matrix_json(&cert.m_inv),
        "moves": cert.moves.iter().map(move_json).collect::<Vec<_>>(),
        "verified": cert.verified,
        "checked_to": rational(cert.checked_to),
    })
}

pub fn kernel_json(u: &[TateSeries], kb: &KernelBasis, verified: bool) -> Value {
    json!({
        "u": tate_vec_json(u),
        "basis": kb.vectors.iter().map(|v| tate_vec_json(v)).collect::<Vec<_>>(),
        "completion": tate_matrix_json(&kb.completion),
        "completion_inv": tate_matrix_json(&kb.completion_inv),
        "verified": verified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(p: u64, e: u32) -> RingConfig {
        RingConfig::new(p, 1, e, 8).unwrap()
    }

    #[test]
    fn coefficient_strings_round_trip() {
        let c = cfg(5, 1);
        for s in ["0", "7", "-3", "3/pi^2", "11 + O(pi^4)", "2/pi + O(pi^3)"] {
            let x = coeff_from_str(c, s, EXACT).unwrap();
            let back = coeff_from_str(c, &coeff_string(&x, EXACT), EXACT).unwrap();
            assert!((&x - &back).is_zero(), "{s}");
            assert_eq!(x.abs_prec(), back.abs_prec(), "{s}");
        }
        let x = coeff_from_str(c, "3/pi^2", EXACT).unwrap();
        assert_eq!(x.val_pi(), Some(-2));
        let y = coeff_from_str(c, "2/pi + O(pi^3)", EXACT).unwrap();
        assert_eq!(y.abs_prec(), 3);
    }

    #[test]
    fn ramified_coordinates() {
        let c = cfg(3, 2);
        let x = coeff_from_str(c, "1,1", EXACT).unwrap();
        assert!((&x - &(&PAdic::one(c) + &PAdic::pi(c))).is_zero());
        assert_eq!(coeff_string(&PAdic::pi(c), EXACT), "0,1");
        assert!(coeff_from_str(c, "1,2,3", EXACT).is_err());
        assert!(coeff_from_str(c, "x", EXACT).is_err());
    }

    #[test]
    fn laurent_round_trip() {
        let c = cfg(5, 1);
        let text = r#"{"tag":"GammaCon","r":[1,2],"N":8,"window":[-4,3],"terms":[[-4,"1"],[0,"5"],[2,"-1"]]}"#;
        let x = laurent_from(c, &parse(text).unwrap()).unwrap();
        assert_eq!(x.window(), (-4, 3));
        assert_eq!(x.wr(Rational64::new(1, 2)).unwrap(), Rational64::from_integer(-2));
        let y = laurent_from(c, &laurent_json(&x)).unwrap();
        assert!(x.eq_mod(&y, 8).unwrap());
        assert_eq!(laurent_json(&x), laurent_json(&y));
    }

    #[test]
    fn robba_denominators_and_open_windows() {
        let c = cfg(3, 1);
        let text = r#"{"tag":"Robba","r":[1,1],"N":6,"window":[0,5],"open":[false,true],"terms":[[1,"2/pi^3"]]}"#;
        let x = laurent_from(c, &parse(text).unwrap()).unwrap();
        assert_eq!(x.open(), (false, true));
        assert_eq!(laurent_json(&x)["terms"][0][1], json!("2/pi^3"));
        let bad = r#"{"tag":"GammaCon","r":[1,1],"N":6,"terms":[[1,"2/pi^3"]]}"#;
        assert!(laurent_from(c, &parse(bad).unwrap()).is_err());
        assert!(laurent_from(c, &parse(r#"{"tag":"Other","terms":[]}"#).unwrap()).is_err());
    }

    #[test]
    fn tate_round_trip() {
        let c = cfg(5, 1);
        let text = r#"{"n":2,"radius":[[0,1],[1,2]],"N":[8,1],"cap":32,"terms":[[[0,0],"1","0"],[[1,2],"3","1"]]}"#;
        let f = tate_from(c, &parse(text).unwrap()).unwrap();
        assert_eq!(f.n(), 2);
        assert_eq!(f.cap(), 32);
        assert_eq!(f.num_terms(), 2);
        let g = tate_from(c, &tate_json(&f)).unwrap();
        assert!(f.eq_to(&g, Rational64::from_integer(8)).unwrap());
        assert_eq!(tate_json(&f), tate_json(&g));
        assert!(tate_from(c, &parse(r#"{"n":2,"terms":[[[1],"1","0"]]}"#).unwrap()).is_err());
    }

    #[test]
    fn newton_format() {
        let est = NewtonEstimate {
            partial_sums: vec![Rational64::new(1, 2), Rational64::from_integer(1)],
            depth: 2,
            exact: true,
            log: vec![],
        };
        assert_eq!(newton_json(&est), json!({"partial_sums": [[1, 1, 2], [2, 1, 1]], "exact": true, "depth": 2}));
    }

    #[test]
    fn malformed_input_is_a_parse_error() {
        assert!(matches!(parse("{"), Err(Error::Parse(_))));
        assert!(matches!(rational_from(&json!([1, 0])), Err(Error::Parse(_))));
        assert_eq!(parse_rational_str("-3/4").unwrap(), Rational64::new(-3, 4));
    }
}
