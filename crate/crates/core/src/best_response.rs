//! Seller best responses.
//!
//! With weak gross substitutes a seller's revenue is maximised exactly at
//! the price that clears its good, so the best response of seller `j` to
//! prices `p` is the unique root in `α` of the clearing gap
//!
//! ```text
//! g(α, p) = α - Σ_i b_i (c_ij/α)^ε / (Σ_{k≠j} (c_ik/p_k)^ε + (c_ij/α)^ε)
//! ```
//!
//! `g` is strictly increasing in `α`, negative at `p_min` (for `p` in the
//! price box) and non-negative at `p_max = Σ b_i`, so a bracketing solver
//! always converges. Newton steps are taken only when they stay inside
//! the current bracket and shrink fast enough; otherwise the bracket is
//! bisected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{Market, PriceVector};

/// Iteration cap for one best-response solve. Hitting it means a bug.
pub const MAX_ITERATIONS: usize = 200;

/// Relative bracket width / step size at which a solve stops.
const REL_TOL: f64 = 4.0 * f64::EPSILON;

/// Maximum number of halvings when `p` lies below the price box and the
/// lower bracket has to be pushed under `p_min`.
const MAX_BRACKET_EXPANSIONS: usize = 1100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    /// `F_j(p)`.
    pub price: f64,
    /// `|g(price, p)|` at the returned price.
    pub residual: f64,
    pub iterations: usize,
}

/// `g(α, p)`: `α` minus the total spending on good `j` at that price.
pub fn clearing_gap(market: &Market, p: &PriceVector, j: usize, alpha: f64) -> Result<f64> {
    let spending = market.good_spending(p, j, alpha)?;
    Ok(alpha - spending)
}

/// Seller `j`'s profit-maximising price against the other entries of `p`.
/// `p[j]` itself is never read.
pub fn best_response(market: &Market, p: &PriceVector, j: usize) -> Result<BestResponse> {
    let curve = market.spending_curve(p, j)?;
    let gap = |alpha: f64| -> Result<(f64, f64)> {
        let (spending, slope) = curve.at(alpha)?;
        Ok((alpha - spending, 1.0 - slope))
    };
    let bounds = market.price_bounds();

    let mut hi = bounds.p_max;
    let (g_hi, _) = gap(hi)?;
    if g_hi == 0.0 {
        return Ok(BestResponse {
            price: hi,
            residual: 0.0,
            iterations: 0,
        });
    }
    let mut lo = bounds.p_min;
    let mut expansions = 0;
    let mut g_lo = gap(lo)?.0;
    while g_lo > 0.0 {
        expansions += 1;
        if expansions > MAX_BRACKET_EXPANSIONS {
            return Err(Error::Solver(format!(
                "could not bracket the best response of good {j} from below"
            )));
        }
        hi = lo;
        lo *= 0.5;
        g_lo = gap(lo)?.0;
    }
    if g_lo == 0.0 {
        return Ok(BestResponse {
            price: lo,
            residual: 0.0,
            iterations: 0,
        });
    }

    let mut x = (lo * hi).sqrt();
    let mut last_step = hi - lo;
    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > MAX_ITERATIONS {
            return Err(Error::Solver(format!(
                "best response of good {j} did not converge in {MAX_ITERATIONS} iterations \
                 (bracket [{lo}, {hi}])"
            )));
        }
        let (g, slope) = gap(x)?;
        if g == 0.0 {
            break;
        }
        if g < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= REL_TOL * hi {
            x = if g < 0.0 { hi } else { lo };
            break;
        }
        let newton = x - g / slope;
        let next = if newton > lo && newton < hi && (newton - x).abs() <= 0.5 * last_step {
            newton
        } else {
            0.5 * (lo + hi)
        };
        last_step = (next - x).abs();
        x = next;
        if last_step <= REL_TOL * x {
            break;
        }
    }

    // Inside the box the root provably lies in it as well; this only removes
    // rounding at the boundary.
    if bounds.contains(p) {
        x = bounds.clamp(x);
    }
    let residual = gap(x)?.0.abs();
    Ok(BestResponse {
        price: x,
        residual,
        iterations,
    })
}

/// Every seller best-responds to the same input vector `p`.
pub fn best_response_all(market: &Market, p: &PriceVector) -> Result<PriceVector> {
    let prices = (0..market.num_goods())
        .map(|j| best_response(market, p, j).map(|r| r.price))
        .collect::<Result<Vec<_>>>()?;
    PriceVector::new(prices)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> PriceVector {
        PriceVector::new(v.to_vec()).unwrap()
    }

    fn symmetric_pair() -> Market {
        Market::new(vec![1.0], vec![vec![1.0, 1.0]], 0.5).unwrap()
    }

    const GOLDEN: f64 = 0.618_033_988_749_894_9;

    #[test]
    fn gap_examples() {
        let single = Market::new(vec![4.0], vec![vec![1.0]], 0.5).unwrap();
        assert_eq!(clearing_gap(&single, &pv(&[1.0]), 0, 4.0).unwrap(), 0.0);

        let m = symmetric_pair();
        let g = clearing_gap(&m, &pv(&[1.0, 1.0]), 0, 1.0).unwrap();
        assert!((g - 0.5).abs() < 1e-15);
        // p'^2 + p' - 1 = 0
        let root = (5.0_f64.sqrt() - 1.0) / 2.0;
        assert!(clearing_gap(&m, &pv(&[1.0, 1.0]), 0, root).unwrap().abs() < 1e-15);
        assert!(clearing_gap(&m, &pv(&[1.0, 1.0]), 0, 0.0).is_err());
    }

    #[test]
    fn single_good_takes_total_budget() {
        let single = Market::new(vec![4.0], vec![vec![1.0]], 0.5).unwrap();
        for p in [0.1, 4.0, 9.0] {
            assert_eq!(best_response(&single, &pv(&[p]), 0).unwrap().price, 4.0);
        }
    }

    #[test]
    fn symmetric_pair_closed_form() {
        let r = best_response(&symmetric_pair(), &pv(&[1.0, 1.0]), 0).unwrap();
        assert!((r.price - GOLDEN).abs() < 1e-15, "{}", r.price);
        assert!(r.residual < 1e-15);
        assert!(r.iterations <= MAX_ITERATIONS);

        let all = best_response_all(&symmetric_pair(), &pv(&[1.0, 1.0])).unwrap();
        assert!((all[0] - GOLDEN).abs() < 1e-15);
        assert_eq!(all[0], all[1]);
    }

    #[test]
    fn own_price_is_ignored() {
        let m = symmetric_pair();
        let a = best_response(&m, &pv(&[1.0, 1.0]), 0).unwrap();
        let b = best_response(&m, &pv(&[0.01, 1.0]), 0).unwrap();
        assert_eq!(a.price, b.price);
    }

    #[test]
    fn monotone_spot_check() {
        let m = symmetric_pair();
        let low = best_response(&m, &pv(&[1.0, 1.0]), 0).unwrap().price;
        let high = best_response(&m, &pv(&[1.0, 2.0]), 0).unwrap().price;
        assert!(high >= low);
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let m = symmetric_pair();
        let p = pv(&[0.5, 0.5]);
        let f = best_response_all(&m, &p).unwrap();
        assert!((f[0] - 0.5).abs() < 1e-15 && (f[1] - 0.5).abs() < 1e-15);
        // p* sits on p_min here, so the clamp keeps it inside the box.
        assert!(m.price_bounds().contains(&f));
    }

    #[test]
    fn prices_below_the_box_are_bracketed() {
        let m = Market::new(vec![1.0, 1.0], vec![vec![1.0, 2.0], vec![3.0, 0.5]], 0.5).unwrap();
        let tiny = pv(&[1e-6, 1e-6]);
        let r = best_response(&m, &tiny, 0).unwrap();
        assert!(r.price < m.price_bounds().p_min);
        let demand = m.good_demand(&tiny.with_price(0, r.price).unwrap(), 0).unwrap();
        assert!((demand - 1.0).abs() < 1e-10);
    }
}
