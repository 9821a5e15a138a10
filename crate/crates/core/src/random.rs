//! Seeded generators for test data.

use num_rational::Rational64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::matrix::Mat;
use crate::padic::{PAdic, RingConfig, EXACT};
use crate::qs::UnimodularTuple;
use crate::tate::{mono, PolyRadius, TateSeries, DEFAULT_DEGREE_CAP};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random exact polynomial with at most `max_terms` terms of total degree <= `max_deg`
/// and coefficients in [-bound, bound].
pub fn random_poly(
    rng: &mut impl Rng,
    cfg: RingConfig,
    radius: &PolyRadius,
    max_deg: u32,
    max_terms: usize,
    bound: i64,
) -> Result<TateSeries> {
    let n = radius.n();
    let count = rng.gen_range(1..=max_terms);
    let mut terms = Vec::with_capacity(count);
    for _ in 0..count {
        let total = rng.gen_range(0..=max_deg);
        let mut exps = vec![0u32; n];
        for _ in 0..total {
            exps[rng.gen_range(0..n)] += 1;
        }
        let mut c = 0;
        while c == 0 {
            c = rng.gen_range(-bound..=bound);
        }
        terms.push((mono(&exps)?, PAdic::from_int(cfg, c, EXACT)));
    }
    TateSeries::new(cfg, radius.clone(), DEFAULT_DEGREE_CAP, None, terms)
}

/// Unit-radius polydisc in n variables.
pub fn unit_radius(n: usize) -> PolyRadius {
    PolyRadius::new(vec![Rational64::from_integer(0); n]).expect("n is positive")
}

/// A product E of `moves` elementary matrices I + h e_(ab) with random h,
/// together with its exact inverse.
pub fn elementary_product(
    rng: &mut impl Rng,
    cfg: RingConfig,
    radius: &PolyRadius,
    m: usize,
    moves: usize,
    max_deg: u32,
) -> Result<(Mat<TateSeries>, Mat<TateSeries>)> {
    let one = TateSeries::from_ints(cfg, radius.clone(), &[(&[], 1)])?.with_prec(None)?;
    let one = one.lift_exact();
    let mut e = Mat::identity(m, &one);
    let mut e_inv = e.clone();
    let rows: Vec<usize> = (0..m).collect();
    for _ in 0..moves {
        let pick: Vec<usize> = rows.choose_multiple(rng, 2).copied().collect();
        let (a, b) = (pick[0], pick[1]);
        let h = random_poly(rng, cfg, radius, max_deg, 3, 2)?;
        let mut step = Mat::identity(m, &one);
        step.set(a, b, h.clone());
        let mut step_inv = Mat::identity(m, &one);
        step_inv.set(a, b, h.neg());
        e = e.mul(&step)?;
        e_inv = step_inv.mul(&e_inv)?;
    }
    Ok((e, e_inv))
}

/// f = E e_1 with witness the first row of E^-1.
pub fn elementary_tuple(
    rng: &mut impl Rng,
    cfg: RingConfig,
    radius: &PolyRadius,
    m: usize,
    max_moves: usize,
    max_deg: u32,
) -> Result<UnimodularTuple> {
    let moves = rng.gen_range(1..=max_moves);
    let (e, e_inv) = elementary_product(rng, cfg, radius, m, moves, max_deg)?;
    UnimodularTuple::new(e.col(0), e_inv.row(0))
}

/// u = e_1^T E as a row, with witness the first column of E^-1.
pub fn elementary_row(
    rng: &mut impl Rng,
    cfg: RingConfig,
    radius: &PolyRadius,
    m: usize,
    max_moves: usize,
    max_deg: u32,
) -> Result<UnimodularTuple> {
    let moves = rng.gen_range(1..=max_moves);
    let (e, e_inv) = elementary_product(rng, cfg, radius, m, moves, max_deg)?;
    UnimodularTuple::new(e.row(0), e_inv.col(0))
}
