//! Seeded randomized round-trip suites, shared by the acceptance target and
//! the `selftest` command.

use std::time::Instant;

use num_rational::Rational64;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::laurent::{LaurentSeries, RingTag, SigmaAction};
use crate::matrix::Mat;
use crate::padic::{PAdic, RingConfig, EXACT};
use crate::qs::{kernel_free_basis, unimodular_reduce, verify_kernel_basis, verify_reduction};
use crate::random::{elementary_row, elementary_tuple, random_poly, rng, unit_radius};
use crate::sigma::SigmaModule;
use crate::solve::{solve_twisted, split_extension, verify_split};
use crate::tate::{mono, weierstrass_prepare, PolyRadius, TateSeries};

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
    pub seconds: f64,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        SuiteReport { name: name.into(), cases: 0, failures: 0, first_failure: None, seconds: 0.0 }
    }

    fn record(&mut self, case: usize, outcome: Result<std::result::Result<(), String>>) {
        self.cases += 1;
        let msg = match outcome {
            Ok(Ok(())) => return,
            Ok(Err(m)) => m,
            Err(e) => format!("{}: {e}", e.name()),
        };
        self.failures += 1;
        if self.first_failure.is_none() {
            self.first_failure = Some(format!("case {case}: {msg}"));
        }
    }

    fn timed(mut self, start: Instant) -> Self {
        self.seconds = start.elapsed().as_secs_f64();
        self
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn q(n: i64) -> Rational64 {
    Rational64::from_integer(n)
}

/// Random integer with p-adic valuation exactly `v`.
fn scaled_unit(rng: &mut impl Rng, p: i64, v: u32, bound: i64) -> i64 {
    let mut u = 0;
    while u == 0 || u % p == 0 {
        u = rng.gen_range(-bound..=bound);
    }
    u * p.pow(v)
}

fn random_laurent(
    rng: &mut impl Rng,
    cfg: RingConfig,
    tag: RingTag,
    window: (i64, i64),
    max_terms: usize,
    max_val: u32,
) -> Result<LaurentSeries> {
    let p = cfg.p as i64;
    let count = rng.gen_range(1..=max_terms);
    let terms = (0..count)
        .map(|_| {
            let i = rng.gen_range(window.0..=window.1);
            let v = rng.gen_range(0..=max_val);
            (i, PAdic::from_int(cfg, scaled_unit(rng, p, v, 4 * p), cfg.prec))
        })
        .collect();
    LaurentSeries::new(cfg, tag, cfg.prec, window, (false, false), terms)
}

/// w_r(xy) = w_r(x) + w_r(y) and w_r(x + y) >= min on random pairs.
pub fn valuation_laws(seed: u64, count: usize) -> SuiteReport {
    let start = Instant::now();
    let mut report = SuiteReport::new("valuation-laws");
    let mut rng = rng(seed);
    let cfg = RingConfig::unramified(5, 12).expect("valid config");
    let radii = [Rational64::new(1, 4), Rational64::new(1, 2), q(1)];
    for case in 0..count {
        let r = *radii.choose(&mut rng).expect("nonempty");
        let outcome = (|| {
            let tag = RingTag::GammaCon(r);
            let x = random_laurent(&mut rng, cfg, tag, (-20, 20), 6, 3)?;
            let y = random_laurent(&mut rng, cfg, tag, (-20, 20), 6, 3)?;
            if x.is_zero() || y.is_zero() {
                return Ok(Ok(()));
            }
            let (wx, wy) = (x.wr(r)?, y.wr(r)?);
            let wxy = x.mul(&y)?.wr(r)?;
            let sum = x.add(&y)?;
            let sum_ok = sum.is_zero() || sum.wr(r)? >= wx.min(wy);
            Ok(check(wxy == wx + wy && sum_ok, || {
                format!("r = {r}: w(xy) = {wxy}, w(x) + w(y) = {}, sum law {sum_ok}", wx + wy)
            }))
        })();
        report.record(case, outcome);
    }
    report.timed(start)
}

/// Returns the twisted-solver report and the overconvergence report on the same corpus.
pub fn twisted(seed: u64, count: usize) -> (SuiteReport, SuiteReport) {
    let start = Instant::now();
    let mut report = SuiteReport::new("twisted-solver");
    let mut over = SuiteReport::new("overconvergence");
    let mut rng = rng(seed);
    let cfg = RingConfig::unramified(5, 12).expect("valid config");
    let act = SigmaAction::standard();
    let tag = RingTag::GammaCon(Rational64::new(1, 2));
    for case in 0..count {
        let v = rng.gen_range(1..=2);
        let lambda = PAdic::from_int(cfg, scaled_unit(&mut rng, 5, v, 20), EXACT);
        let x = random_laurent(&mut rng, cfg, tag, (-6, 6), 5, 2);
        let solved = x.and_then(|x| Ok((solve_twisted(&lambda, &x, &act)?, x)));
        match solved {
            Ok((sol, x)) => {
                report.record(
                    case,
                    Ok(check(sol.residual_val >= 12 && sol.forward_backward_agree, || {
                        format!("residual {} agree {}", sol.residual_val, sol.forward_backward_agree)
                    })),
                );
                let w_in = if x.is_zero() { None } else { x.wr(Rational64::new(1, 2)).ok() };
                if w_in.is_some() {
                    let outcome = match &sol.overconvergence {
                        Some(rep) => check(rep.certified(), || {
                            format!("w_r'(y) = {} below the bound {} at r' = {}", rep.w_out, rep.bound, rep.r_out)
                        }),
                        None => Err("no overconvergence report".into()),
                    };
                    over.record(case, Ok(outcome));
                }
            }
            Err(e) => report.record(case, Err(e)),
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    report.seconds = elapsed;
    over.seconds = elapsed;
    (report, over)
}

fn constant(cfg: RingConfig, tag: RingTag, c: i64) -> Result<LaurentSeries> {
    LaurentSeries::constant(cfg, tag, cfg.prec, PAdic::from_int(cfg, c, EXACT))
}

/// Upper triangular block with diagonal valuations `vals` and short Laurent entries above it.
fn triangular(rng: &mut impl Rng, cfg: RingConfig, tag: RingTag, vals: &[u32]) -> Result<Mat<LaurentSeries>> {
    let p = cfg.p as i64;
    let n = vals.len();
    Mat::try_from_fn(n, n, |i, j| {
        if i == j {
            constant(cfg, tag, scaled_unit(rng, p, vals[i], 2))
        } else if i < j {
            random_laurent(rng, cfg, tag, (-2, 2), 2, 1)
        } else {
            Ok(LaurentSeries::zero(cfg, tag, cfg.prec))
        }
    })
}

/// Block data with min slope(A) - max slope(D) >= 1; both split identities must
/// hold mod pi^(N-2), and the case v(A) - v(D) = -1 must be rejected.
pub fn split(seed: u64, count: usize) -> SuiteReport {
    let start = Instant::now();
    let mut report = SuiteReport::new("split");
    let mut rng = rng(seed);
    let cfg = RingConfig::unramified(3, 12).expect("valid config");
    let act = SigmaAction::standard();
    let tag = RingTag::GammaCon(Rational64::new(1, 2));
    for case in 0..count {
        let outcome = (|| {
            let (n1, n2) = (rng.gen_range(1..=2), rng.gen_range(1..=2));
            let d_vals: Vec<u32> = (0..n2).map(|_| rng.gen_range(0..=1)).collect();
            let floor = d_vals.iter().max().expect("n2 >= 1") + 1;
            let a_vals: Vec<u32> = (0..n1).map(|_| rng.gen_range(floor..=floor + 1)).collect();
            let a = triangular(&mut rng, cfg, tag, &a_vals)?;
            let d = triangular(&mut rng, cfg, tag, &d_vals)?;
            let b = Mat::try_from_fn(n1, n2, |_, _| random_laurent(&mut rng, cfg, tag, (-3, 3), 3, 1))?;
            let cert = split_extension(&a, &b, &d, &act, None)?;
            let (res, conj) = verify_split(&a, &b, &d, &cert.x, &act)?;
            Ok(check(res >= 10 && conj && cert.conjugation_ok, || format!("residual {res}, conjugation {conj}")))
        })();
        report.record(case, outcome);
    }
    let rejected = (|| {
        let one = Mat::from_rows(vec![vec![constant(cfg, tag, 1)?]])?;
        let d = Mat::from_rows(vec![vec![constant(cfg, tag, 3)?]])?;
        match split_extension(&one, &one, &d, &act, None) {
            Err(Error::NoContraction(_)) => Ok(Ok(())),
            Err(e) => Err(e),
            Ok(_) => Ok(Err("v(A) - v(D) = -1 was not rejected".into())),
        }
    })();
    report.record(count, rejected);
    report.timed(start)
}

/// Fixed Newton-slope cases with exact expected values.
pub fn newton() -> SuiteReport {
    let start = Instant::now();
    let mut report = SuiteReport::new("newton-slopes");
    let cfg = RingConfig::unramified(3, 40).expect("valid config");
    let tag = RingTag::GammaCon(Rational64::new(1, 2));
    let module = |rows: Vec<Vec<LaurentSeries>>| SigmaModule::new(Mat::from_rows(rows)?, SigmaAction::standard());
    let k = |c: i64| constant(cfg, tag, c);
    let half = Rational64::new(1, 2);

    let outcome = (|| {
        let est = module(vec![vec![k(1)?, k(0)?], vec![k(0)?, k(3)?]])?.newton_slopes(4)?;
        Ok(check(est.exact && est.slopes() == vec![q(0), q(1)], || format!("diag(1, p): {:?}", est.slopes())))
    })();
    report.record(0, outcome);

    let outcome = (|| {
        let m = module(vec![vec![k(0)?, k(3)?], vec![k(1)?, k(0)?]])?;
        let square = m.twisted_power(2)?;
        let scalar = square.get(0, 0).eq_mod(&k(3)?, 40)? && square.get(1, 1).eq_mod(&k(3)?, 40)?;
        let est = m.newton_slopes(2)?;
        Ok(check(scalar && est.slopes() == vec![half, half], || format!("[[0, p], [1, 0]]: {:?}", est.slopes())))
    })();
    report.record(1, outcome);

    let outcome = (|| {
        let off = LaurentSeries::from_ints(cfg, tag, cfg.prec, &[(-1, 1), (2, 2)])?;
        let est = module(vec![vec![k(9)?, off], vec![k(0)?, k(3)?]])?.newton_slopes(8)?;
        let det_ok = est.log.len() == 8 && est.log.iter().all(|s| s[1] == q(3));
        Ok(check(est.exact && est.slopes() == vec![q(1), q(2)] && det_ok, || {
            format!("triangular diag(p^2, p): {:?}, log {:?}", est.slopes(), est.log)
        }))
    })();
    report.record(2, outcome);
    report.timed(start)
}

/// Unit-leading univariate polynomial of degree `deg` for the log-radius `log_radius`.
fn unit_leading(rng: &mut impl Rng, cfg: RingConfig, log_radius: Rational64, deg: u32) -> Result<TateSeries> {
    let p = cfg.p as i64;
    let mut terms = vec![(mono(&[deg])?, PAdic::from_int(cfg, scaled_unit(rng, p, 0, p - 1), EXACT))];
    for i in 0..deg {
        if rng.gen_bool(0.3) {
            continue;
        }
        // |b_i| rho^i <= rho^deg, so deg stays the distinguished degree
        let need = (log_radius * q((deg - i) as i64)).ceil().to_integer().max(0) as u32;
        let extra = rng.gen_range(0..=1);
        let c = scaled_unit(rng, p, need + extra, 3 * p);
        terms.push((mono(&[i])?, PAdic::from_int(cfg, c, EXACT)));
    }
    let radius = PolyRadius::new(vec![log_radius])?;
    TateSeries::from_terms(cfg, radius, terms)?.with_cap(16 * (deg + 1))
}

/// f = u P with P distinguished of degree deg f and u a unit, residual >= N - 2.
pub fn weierstrass(seed: u64, count: usize) -> SuiteReport {
    let start = Instant::now();
    let mut report = SuiteReport::new("weierstrass");
    let mut rng = rng(seed);
    let cfg = RingConfig::unramified(3, 12).expect("valid config");
    let logs = [q(0), Rational64::new(1, 2), Rational64::new(-1, 2)];
    for case in 0..count {
        let log_radius = *logs.choose(&mut rng).expect("nonempty");
        let deg = rng.gen_range(0..=12);
        let outcome = (|| {
            let f = unit_leading(&mut rng, cfg, log_radius, deg)?;
            let prep = weierstrass_prepare(&f, 0)?;
            let residual = f.sub(&prep.unit.mul(&prep.poly)?)?;
            let res_ok = residual.is_zero() || residual.gauss_valuation()? >= q(10);
            let degree_ok = prep.degree == f.degree(0)? && prep.poly.degree_in(0) == deg && deg == f.degree_in(0);
            // |b_i| rho^i < |b_0| for the unit, |c_i| rho^i <= rho^deg for P
            let unit_ok = prep.unit.is_unit();
            let top = log_radius * q(deg as i64);
            let poly_ok = prep.poly.terms().all(|(m, c)| {
                c.v_p().is_none_or(|v| v + log_radius * q(m[0] as i64) >= top)
            });
            Ok(check(res_ok && degree_ok && unit_ok && poly_ok, || {
                format!("rho log {log_radius}, deg {deg}: residual {res_ok} degree {degree_ok} unit {unit_ok} poly {poly_ok}")
            }))
        })();
        report.record(case, outcome);
    }
    report.timed(start)
}

/// deg(fg) = deg f + deg g and |L(fg) - L(f) L(g)| < |L(fg)| in the last variable.
pub fn degree_additivity(seed: u64, count: usize) -> SuiteReport {
    let start = Instant::now();
    let mut report = SuiteReport::new("degree-additivity");
    let mut rng = rng(seed);
    let cfg = RingConfig::unramified(5, 40).expect("valid config");
    let logs = [q(0), Rational64::new(1, 2), Rational64::new(-1, 2), q(1)];
    for case in 0..count {
        let n = rng.gen_range(1..=3);
        let outcome = (|| {
            let radius = PolyRadius::new((0..n).map(|_| *logs.choose(&mut rng).expect("nonempty")).collect())?;
            let f = random_poly(&mut rng, cfg, &radius, 5, 5, 30)?;
            let g = random_poly(&mut rng, cfg, &radius, 5, 5, 30)?;
            if f.is_zero() || g.is_zero() {
                return Ok(Ok(()));
            }
            let var = n - 1;
            let fg = f.mul(&g)?;
            let (jf, lf) = f.leading_term(var)?;
            let (jg, lg) = g.leading_term(var)?;
            let (jfg, lfg) = fg.leading_term(var)?;
            let lead_prod = lf.shift_var(var, jf)?.mul(&lg.shift_var(var, jg)?)?;
            let diff = lfg.shift_var(var, jfg)?.sub(&lead_prod)?;
            let norm = fg.gauss_valuation()?;
            let ineq = diff.is_zero() || diff.gauss_valuation()? > norm;
            Ok(check(jfg == jf + jg && ineq, || format!("deg {jfg} vs {jf} + {jg}, inequality {ineq}")))
        })();
        report.record(case, outcome);
    }
    report.timed(start)
}

/// Tuples E e_1 in n variables: reduce, check both identities, then check the
/// kernel basis of a row built the same way.
pub fn quillen_suslin(seed: u64, n: usize, count: usize) -> SuiteReport {
    let start = Instant::now();
    let mut report = SuiteReport::new(&format!("quillen-suslin-n{n}"));
    let mut rng = rng(seed ^ (n as u64) << 32);
    let cfg = RingConfig::unramified(3, 12).expect("valid config");
    let radius = unit_radius(n);
    for case in 0..count {
        let m = rng.gen_range(2..=4);
        let outcome = (|| {
            let tup = elementary_tuple(&mut rng, cfg, &radius, m, 6, 4)?;
            let cert = unimodular_reduce(&tup)?;
            let reduced = cert.verified && verify_reduction(tup.entries(), &cert.m, &cert.m_inv)?;
            let row = elementary_row(&mut rng, cfg, &radius, m, 6, 4)?;
            let kb = kernel_free_basis(&row)?;
            let kernel = kb.vectors.len() == m - 1 && verify_kernel_basis(row.entries(), &kb)?;
            Ok(check(reduced && kernel, || format!("m = {m}: reduction {reduced}, kernel {kernel}")))
        })();
        report.record(case, outcome);
    }
    report.timed(start)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_runs_pass() {
        assert!(valuation_laws(1, 20).passed());
        let (tw, over) = twisted(1, 10);
        assert!(tw.passed(), "{:?}", tw.first_failure);
        assert!(over.passed(), "{:?}", over.first_failure);
        let sp = split(1, 4);
        assert!(sp.passed(), "{:?}", sp.first_failure);
        assert!(newton().passed(), "{:?}", newton().first_failure);
        let w = weierstrass(1, 10);
        assert!(w.passed(), "{:?}", w.first_failure);
        assert!(degree_additivity(1, 20).passed());
        let qs = quillen_suslin(1, 2, 5);
        assert!(qs.passed(), "{:?}", qs.first_failure);
    }

    #[test]
    fn failures_are_counted() {
        let mut r = SuiteReport::new("x");
        r.record(0, Ok(Ok(())));
        r.record(1, Ok(Err("bad".into())));
        r.record(2, Err(Error::NotAUnit));
        assert_eq!((r.cases, r.failures), (3, 2));
        assert_eq!(r.first_failure.as_deref(), Some("case 1: bad"));
        assert!(!r.passed());
    }
}
