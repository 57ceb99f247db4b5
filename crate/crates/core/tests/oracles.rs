mod common;

use common::{box_point, naive_best_response, naive_demand, random_market, random_market_min};
use fisher_brl::best_response::best_response;
use fisher_brl::{thompson, Market, PriceVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn demand_matches_direct_formula() {
    for seed in 0..100 {
        let market = random_market(seed, 8, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = box_point(&market, &mut rng);
        let fast = market.demand(&p).unwrap();
        let slow = naive_demand(&market, p.as_slice());
        for (row_fast, row_slow) in fast.quantities.iter().zip(&slow) {
            for (a, b) in row_fast.iter().zip(row_slow) {
                assert!((a - b).abs() <= 1e-11 * b.abs().max(1.0), "seed {seed}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn best_response_matches_bisection() {
    for seed in 0..100 {
        let market = random_market_min(seed, 2, 6, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 50);
        let p = box_point(&market, &mut rng);
        for j in 0..market.num_goods() {
            let fast = best_response(&market, &p, j).unwrap().price;
            let slow = naive_best_response(&market, p.as_slice(), j);
            assert!((fast - slow).abs() <= 1e-9 * slow, "seed {seed} good {j}: {fast} vs {slow}");
        }
    }
}

#[test]
fn two_good_single_buyer_closed_form() {
    // Same-coefficient single buyer with ε = 1 at p_k = 1: α² + α - 1 = 0.
    let market = Market::new(vec![1.0], vec![vec![1.0, 1.0]], 0.5).unwrap();
    let p = PriceVector::new(vec![1.0, 1.0]).unwrap();
    let root = (5.0_f64.sqrt() - 1.0) / 2.0;
    assert!((best_response(&market, &p, 0).unwrap().price - root).abs() < 1e-12);
    assert!((naive_best_response(&market, p.as_slice(), 0) - root).abs() < 1e-12);
}

fn market_strategy() -> impl Strategy<Value = (Market, PriceVector)> {
    (1usize..6, 1usize..6, 0.05f64..0.95, any::<u64>()).prop_map(|(n, m, rho, seed)| {
        let market = fisher_brl::generate::MarketGenerator::new(n, m, rho, seed).generate().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = box_point(&market, &mut rng);
        (market, p)
    })
}

proptest! {
    #[test]
    fn buyers_spend_their_budgets((market, p) in market_strategy()) {
        let x = market.demand(&p).unwrap();
        for (i, &b) in market.budgets().iter().enumerate() {
            prop_assert!((x.spending(i, &p) - b).abs() <= 1e-10 * b);
        }
    }

    #[test]
    fn own_price_raise_lowers_demand((market, p) in market_strategy(), bump in 1.01f64..5.0) {
        for j in 0..market.num_goods() {
            let before = market.good_demand(&p, j).unwrap();
            let after = market.good_demand(&p.with_price(j, p[j] * bump).unwrap(), j).unwrap();
            prop_assert!(after < before);
        }
    }

    #[test]
    fn other_price_raise_keeps_demand((market, p) in market_strategy(), bump in 1.01f64..5.0) {
        let n = market.num_goods();
        for j in 0..n {
            for k in (0..n).filter(|&k| k != j) {
                let before = market.good_demand(&p, j).unwrap();
                let after = market.good_demand(&p.with_price(k, p[k] * bump).unwrap(), j).unwrap();
                prop_assert!(after >= before * (1.0 - 1e-14));
            }
        }
    }

    #[test]
    fn thompson_is_scale_invariant(v in prop::collection::vec(-4.0f64..4.0, 1..8), s in -3.0f64..3.0) {
        let p = PriceVector::new(v.iter().map(|x| x.exp()).collect()).unwrap();
        let q = PriceVector::new(v.iter().rev().map(|x| x.exp()).collect()).unwrap();
        let d = thompson(&p, &q).unwrap();
        let ds = thompson(&p.scaled(s.exp()).unwrap(), &q.scaled(s.exp()).unwrap()).unwrap();
        prop_assert!((d - ds).abs() <= 1e-12);
        prop_assert!((thompson(&p, &p.scaled(s.exp()).unwrap()).unwrap() - s.abs()).abs() <= 1e-12);
    }
}
