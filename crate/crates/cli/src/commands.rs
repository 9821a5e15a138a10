use robba_core::json::{self as wire, parse_rational_str};
use robba_core::laurent::{LaurentSeries, SigmaAction};
use robba_core::qs::{self, KernelBasis, UnimodularTuple};
use robba_core::sigma::SigmaModule;
use robba_core::solve::{self, verify_split};
use robba_core::suites;
use robba_core::tate::{self, TateSeries, TjMode};
use robba_core::{Error, Result, RingConfig};
use serde_json::{json, Value};

use crate::{EvalOp, Global, QsOp, SolveOp};

/// JSON result and whether the command counts as a success.
type Outcome = Result<(Value, bool)>;

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| Error::Parse(format!("missing field {key:?}")))
}

/// Fills in "radius" and "cap" from the command line where a Tate series leaves them out.
fn tate_defaults(g: &Global, v: &Value) -> Result<Value> {
    let mut v = v.clone();
    if let Value::Object(obj) = &mut v {
        if !obj.contains_key("radius") && !g.radius.is_empty() {
            let r: Vec<Value> = g.radius()?.into_iter().map(wire::rational).collect();
            obj.insert("radius".into(), Value::Array(r));
        }
        if let (false, Some(cap)) = (obj.contains_key("cap"), g.cap) {
            obj.insert("cap".into(), json!(cap));
        }
    }
    Ok(v)
}

fn tate(g: &Global, cfg: RingConfig, v: &Value) -> Result<TateSeries> {
    wire::tate_from(cfg, &tate_defaults(g, v)?)
}

fn tate_vec(g: &Global, cfg: RingConfig, v: &Value) -> Result<Vec<TateSeries>> {
    v.as_array()
        .ok_or_else(|| Error::Parse("expected an array of Tate series".into()))?
        .iter()
        .map(|e| tate(g, cfg, e))
        .collect()
}

fn tate_matrix(g: &Global, cfg: RingConfig, v: &Value) -> Result<robba_core::Mat<TateSeries>> {
    wire::matrix_from(v, |e| tate(g, cfg, e))
}

/// Either a bare series or {"x": series, "sigma": ...}.
fn series_and_sigma(cfg: RingConfig, v: &Value) -> Result<(LaurentSeries, SigmaAction)> {
    match v.get("x") {
        Some(x) => Ok((wire::laurent_from(cfg, x)?, wire::sigma_from(cfg, v.get("sigma"))?)),
        None => Ok((wire::laurent_from(cfg, v)?, SigmaAction::standard())),
    }
}

pub fn eval(g: &Global, op: &EvalOp) -> Outcome {
    let cfg = g.config()?;
    let input = g.read_input()?;
    let out = match op {
        EvalOp::Wr { r } => {
            let (x, _) = series_and_sigma(cfg, &input)?;
            json!({"w_r": wire::rational(x.wr(parse_rational_str(r)?)?)})
        }
        EvalOp::Vn { n } => {
            let (x, _) = series_and_sigma(cfg, &input)?;
            json!({"v_n": x.vn_naive(parse_rational_str(n)?)?})
        }
        EvalOp::Derive => {
            let (x, _) = series_and_sigma(cfg, &input)?;
            json!({"derivative": wire::laurent_json(&x.derive())})
        }
        EvalOp::Sigma => {
            let (x, act) = series_and_sigma(cfg, &input)?;
            json!({"sigma": wire::laurent_json(&act.apply(&x)?)})
        }
        EvalOp::Gauss => {
            let f = tate(g, cfg, &input)?;
            json!({"v": wire::rational(f.gauss_valuation()?)})
        }
        EvalOp::Leading { var } => {
            let f = tate(g, cfg, &input)?;
            let var = var.unwrap_or(f.n() - 1);
            check_var(&f, var)?;
            let (j, c) = f.leading_term(var)?;
            json!({"var": var, "degree": j, "coefficient": wire::tate_json(&c)})
        }
    };
    Ok((out, true))
}

fn check_var(f: &TateSeries, var: usize) -> Result<()> {
    if var >= f.n() {
        return Err(Error::InvalidConfig(format!("variable {var} out of range for n = {}", f.n())));
    }
    Ok(())
}

pub fn slopes(g: &Global, depth: usize) -> Outcome {
    let cfg = g.config()?;
    let input = g.read_input()?;
    let (frob, act) = match input.get("frobenius") {
        Some(m) => (wire::laurent_matrix_from(cfg, m)?, wire::sigma_from(cfg, input.get("sigma"))?),
        None => (wire::laurent_matrix_from(cfg, &input)?, SigmaAction::standard()),
    };
    let est = SigmaModule::new(frob, act)?.newton_slopes(depth)?;
    let mut out = wire::newton_json(&est);
    out["slopes"] = Value::Array(est.slopes().into_iter().map(wire::rational).collect());
    Ok((out, true))
}

pub fn solve(g: &Global, op: &SolveOp) -> Outcome {
    let mut cfg = g.config()?;
    let input = g.read_input()?;
    if let Some(n) = input.get("N").filter(|v| !v.is_null()) {
        let n = n.as_i64().filter(|n| *n >= 1).ok_or_else(|| Error::Parse("N must be a positive integer".into()))?;
        cfg = cfg.with_prec(n);
    }
    let act = wire::sigma_from(cfg, input.get("sigma"))?;
    match op {
        SolveOp::Twisted => {
            let lambda = lambda_from(cfg, &input)?;
            let x = wire::laurent_from(cfg, field(&input, "x")?)?;
            let sol = solve::solve_twisted(&lambda, &x, &act)?;
            Ok((wire::twisted_json(&sol), true))
        }
        SolveOp::Split => {
            let a = wire::laurent_matrix_from(cfg, field(&input, "A")?)?;
            let b = wire::laurent_matrix_from(cfg, field(&input, "B")?)?;
            let d = wire::laurent_matrix_from(cfg, field(&input, "D")?)?;
            let cert = solve::split_extension(&a, &b, &d, &act, g.kmax)?;
            Ok((wire::split_json(&cert), true))
        }
    }
}

fn lambda_from(cfg: RingConfig, input: &Value) -> Result<robba_core::PAdic> {
    let s = field(input, "lambda")?.as_str().ok_or_else(|| Error::Parse("lambda is a coefficient string".into()))?;
    wire::coeff_from_str(cfg, s, robba_core::EXACT)
}

/// {"f": [...], "witness": [...]} or a bare array (witness computed, one variable at most).
fn tuple(g: &Global, cfg: RingConfig, input: &Value) -> Result<UnimodularTuple> {
    match input {
        Value::Array(_) => UnimodularTuple::with_computed_witness(tate_vec(g, cfg, input)?),
        _ => {
            let f = input.get("f").or_else(|| input.get("u")).ok_or_else(|| Error::Parse("missing field \"f\"".into()))?;
            let f = tate_vec(g, cfg, f)?;
            match input.get("witness").filter(|w| !w.is_null()) {
                Some(w) => UnimodularTuple::new(f, tate_vec(g, cfg, w)?),
                None => UnimodularTuple::with_computed_witness(f),
            }
        }
    }
}

pub fn qs(g: &Global, op: &QsOp) -> Outcome {
    let cfg = g.config()?;
    let input = g.read_input()?;
    let out = match op {
        QsOp::Prepare { var } => {
            let f = tate(g, cfg, &input)?;
            let var = var.unwrap_or(f.n() - 1);
            check_var(&f, var)?;
            let prep = tate::weierstrass_prepare(&f, var)?;
            json!({
                "unit": wire::tate_json(&prep.unit),
                "unit_inv": wire::tate_json(&prep.unit_inv),
                "P": wire::tate_json(&prep.poly),
                "degree": prep.degree,
                "residual_val": wire::rational(prep.residual_val),
                "steps": prep.steps,
            })
        }
        QsOp::Tj { j, ring: true } => {
            let f = tate(g, cfg, &input)?;
            let (_, m) = tate::calibrate(cfg, f.radius())?;
            let j = j.unwrap_or(1);
            let (image, lambda) = tate::tj_transform_ring(&f, j, m)?;
            json!({"j": j, "m": m, "image": wire::tate_json(&image), "lambda": wire::rational(lambda)})
        }
        QsOp::Tj { j, ring: false } => {
            let f = tate(g, cfg, &input)?;
            let mode = TjMode::field_for(&f)?;
            let (j, image) = match j {
                Some(j) => (*j, tate::tj_transform(&f, *j, &mode)?),
                None => tate::tj_find(&f, g.jmax.unwrap_or(8), &mode)?,
            };
            let (unit, m) = match &mode {
                TjMode::Field { unit, m } => (wire::coeff_string(unit, robba_core::EXACT), *m),
                TjMode::Ring { m } => ("1".to_string(), *m),
            };
            let lead_unit = image.leading_term(image.n() - 1).map(|(_, c)| c.is_unit()).unwrap_or(false);
            json!({"j": j, "image": wire::tate_json(&image), "unit": unit, "m": m, "leading_unit": lead_unit})
        }
        QsOp::Reduce => {
            let tup = tuple(g, cfg, &input)?;
            let cert = match g.jmax {
                Some(j) => qs::unimodular_reduce_with(&tup, j)?,
                None => qs::unimodular_reduce(&tup)?,
            };
            wire::reduction_json(&cert)
        }
        QsOp::Complete => {
            let tup = tuple(g, cfg, &input)?;
            let cert = qs::unimodular_reduce(&tup)?;
            json!({
                "f": wire::tate_vec_json(tup.entries()),
                "completion": wire::tate_matrix_json(&cert.m_inv),
                "completion_inv": wire::tate_matrix_json(&cert.m),
                "verified": cert.verified,
            })
        }
        QsOp::Kernel => {
            let tup = tuple(g, cfg, &input)?;
            let kb = qs::kernel_free_basis(&tup)?;
            let ok = qs::verify_kernel_basis(tup.entries(), &kb)?;
            wire::kernel_json(tup.entries(), &kb, ok)
        }
    };
    Ok((out, true))
}

/// Dispatches on the keys present in the certificate.
pub fn verify(g: &Global) -> Outcome {
    let mut cfg = g.config()?;
    let input = g.read_input()?;
    let has = |k: &str| input.get(k).is_some();
    let (kind, ok, extra) = if has("M") && has("M_inv") && has("f") {
        let f = tate_vec(g, cfg, &input["f"])?;
        let m = tate_matrix(g, cfg, &input["M"])?;
        let m_inv = tate_matrix(g, cfg, &input["M_inv"])?;
        ("reduction", qs::verify_reduction(&f, &m, &m_inv)?, Value::Null)
    } else if has("completion") && has("completion_inv") && has("f") {
        let f = tate_vec(g, cfg, &input["f"])?;
        let c = tate_matrix(g, cfg, &input["completion"])?;
        let c_inv = tate_matrix(g, cfg, &input["completion_inv"])?;
        let first = c.col(0);
        let col_ok = first.len() == f.len() && first.iter().zip(&f).all(|(a, b)| a.sub(b).is_ok_and(|d| d.is_zero()));
        ("completion", col_ok && qs::verify_reduction(&f, &c_inv, &c)?, Value::Null)
    } else if has("basis") && has("u") {
        let u = tate_vec(g, cfg, &input["u"])?;
        let vectors = input["basis"]
            .as_array()
            .ok_or_else(|| Error::Parse("basis must be an array".into()))?
            .iter()
            .map(|v| tate_vec(g, cfg, v))
            .collect::<Result<Vec<_>>>()?;
        let completion = tate_matrix(g, cfg, field(&input, "completion")?)?;
        let completion_inv = tate_matrix(g, cfg, field(&input, "completion_inv")?)?;
        let kb = KernelBasis { vectors, completion, completion_inv };
        ("kernel", qs::verify_kernel_basis(&u, &kb)?, Value::Null)
    } else if has("X") && has("A") && has("B") && has("D") {
        if let Some(n) = input.get("N").and_then(|v| v.as_i64()).filter(|n| *n >= 1) {
            cfg = cfg.with_prec(n);
        }
        let act = wire::sigma_from(cfg, input.get("sigma"))?;
        let m = |k: &str| wire::laurent_matrix_from(cfg, &input[k]);
        let (a, b, d, x) = (m("A")?, m("B")?, m("D")?, m("X")?);
        let (res, conj) = verify_split(&a, &b, &d, &x, &act)?;
        let n = cfg.prec - cfg.guard;
        ("split", res >= n && conj, json!({"residual_val": res, "conjugation_ok": conj}))
    } else if has("y") && has("x") && has("lambda") {
        let act = wire::sigma_from(cfg, input.get("sigma"))?;
        let lambda = lambda_from(cfg, &input)?;
        let x = wire::laurent_from(cfg, &input["x"])?;
        let y = wire::laurent_from(cfg, &input["y"])?;
        let n = x.prec().min(cfg.prec);
        let residual = act.apply(&y)?.scale(&lambda)?.sub(&y)?.sub(&x)?;
        let res = residual.val_pi();
        ("twisted", res >= n, json!({"residual_val": res}))
    } else {
        return Err(Error::Parse("unrecognized certificate".into()));
    };
    let mut out = json!({"kind": kind, "verified": ok});
    if let Value::Object(extra) = extra {
        for (k, v) in extra {
            out[k] = v;
        }
    }
    Ok((out, ok))
}

pub fn selftest(g: &Global) -> (Value, bool) {
    let seed = g.seed;
    let (twisted, over) = suites::twisted(seed, 40);
    let mut reports = vec![suites::valuation_laws(seed, 100), twisted, over, suites::split(seed, 10), suites::newton()];
    reports.push(suites::weierstrass(seed, 40));
    reports.push(suites::degree_additivity(seed, 60));
    reports.extend((1..=3).map(|n| suites::quillen_suslin(seed, n, 10)));
    for r in &reports {
        eprintln!("{}: {} cases, {} failures, {:.2}s", r.name, r.cases, r.failures, r.seconds);
    }
    let all = reports.iter().all(|r| r.passed());
    let list: Vec<Value> = reports
        .iter()
        .map(|r| json!({"name": r.name, "cases": r.cases, "failures": r.failures, "first_failure": r.first_failure}))
        .collect();
    (json!({"seed": seed, "suites": list, "all_pass": all}), all)
}

