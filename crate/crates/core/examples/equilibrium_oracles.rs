// Equilibrium by fixed-point iteration, cross-checked with tâtonnement,
// plus the Thompson metric and its comparison with sup and Euclidean norms.

use fisher_brl::analysis::{metric_bounds_check, solve_equilibrium, tatonnement_oracle, AnalysisReport};
use fisher_brl::generate::MarketGenerator;
use fisher_brl::{thompson, Market, PriceVector};

fn main() -> fisher_brl::Result<()> {
    let market = MarketGenerator::new(6, 8, 0.4, 21).with_sparsity(0.3).generate()?;
    let fixed = solve_equilibrium(&market, 1e-12)?;
    let tat = tatonnement_oracle(&market, 0.1, 1e-11)?;
    println!("fixed point: {} ({} iterations)", fixed.prices, fixed.iterations);
    println!("tatonnement: {} ({} iterations)", tat.prices, tat.iterations);
    println!("Thompson gap {:.3e}", thompson(&fixed.prices, &tat.prices)?);

    let report = AnalysisReport::new(&market, &fixed);
    println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));

    // Identical buyers and goods: every price is m b / n.
    let symmetric = Market::new(vec![1.5; 3], vec![vec![2.0; 4]; 3], 0.5)?;
    println!("symmetric market p* = {}", solve_equilibrium(&symmetric, 1e-12)?.prices);

    let bounds = market.price_bounds();
    let p = PriceVector::uniform(6, bounds.p_min)?;
    let q = PriceVector::uniform(6, bounds.p_max)?;
    println!(
        "d(p_min, p_max) = {:.4}, norm bounds hold: {}",
        thompson(&p, &q)?,
        metric_bounds_check(&p, &q, bounds.p_min, bounds.p_max)
    );
    Ok(())
}
