#![allow(dead_code)]

use fisher_brl::generate::MarketGenerator;
use fisher_brl::{Market, PriceVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded random market with `1..=max_n` goods, `1..=max_m` buyers and
/// `ρ ∈ [0.1, 0.9]`.
pub fn random_market(seed: u64, max_n: usize, max_m: usize) -> Market {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05ee_d0f3_a7e7);
    let n = rng.gen_range(1..=max_n);
    let m = rng.gen_range(1..=max_m);
    let rho = rng.gen_range(0.1..0.9);
    let sparsity = if rng.gen_bool(0.5) { 0.0 } else { 0.3 };
    MarketGenerator::new(n, m, rho, seed)
        .with_sparsity(sparsity)
        .generate()
        .expect("generator parameters are valid")
}

/// Like [`random_market`] but with at least `min_n` goods.
pub fn random_market_min(seed: u64, min_n: usize, max_n: usize, max_m: usize) -> Market {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    let n = rng.gen_range(min_n..=max_n);
    let m = rng.gen_range(1..=max_m);
    let rho = rng.gen_range(0.1..0.9);
    MarketGenerator::new(n, m, rho, seed)
        .with_sparsity(if rng.gen_bool(0.5) { 0.0 } else { 0.3 })
        .generate()
        .unwrap()
}

/// Log-uniform point of the market's price box.
pub fn box_point(market: &Market, rng: &mut ChaCha8Rng) -> PriceVector {
    let b = market.price_bounds();
    let (lo, hi) = (b.p_min.ln(), b.p_max.ln());
    PriceVector::new(
        (0..market.num_goods())
            .map(|_| b.clamp((lo + rng.gen::<f64>() * (hi - lo)).exp()))
            .collect(),
    )
    .unwrap()
}

/// Direct-formula demand: `(b_i/p_j) (c_ij/p_j)^ε / Σ_k (c_ik/p_k)^ε` with
/// plain powers, no log-domain tricks.
pub fn naive_demand(market: &Market, p: &[f64]) -> Vec<Vec<f64>> {
    let eps = market.epsilon();
    market
        .coefficients()
        .iter()
        .zip(market.budgets())
        .map(|(row, &b)| {
            let den: f64 = row
                .iter()
                .zip(p)
                .filter(|(c, _)| **c > 0.0)
                .map(|(c, pk)| (c / pk).powf(eps))
                .sum();
            row.iter()
                .zip(p)
                .map(|(&c, &pj)| if c > 0.0 { b / pj * (c / pj).powf(eps) / den } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Best response by plain bisection on `α - spending(α)` with direct powers,
/// over `[tiny, Σ b]`.
pub fn naive_best_response(market: &Market, p: &[f64], j: usize) -> f64 {
    let gap = |alpha: f64| {
        let mut q = p.to_vec();
        q[j] = alpha;
        let x = naive_demand(market, &q);
        alpha - alpha * x.iter().map(|row| row[j]).sum::<f64>()
    };
    let mut lo = 1e-12;
    let mut hi = market.budgets().iter().sum::<f64>();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
