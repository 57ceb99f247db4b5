// A seller's best response: the own price at which its good exactly clears.

use fisher_brl::best_response::{best_response, best_response_all, clearing_gap};
use fisher_brl::{Market, PriceVector};

fn main() -> fisher_brl::Result<()> {
    // One buyer, two identical goods, epsilon = 1: the best response at
    // p = (1, 1) solves a^2 + a - 1 = 0.
    let market = Market::new(vec![1.0], vec![vec![1.0, 1.0]], 0.5)?;
    let p = PriceVector::new(vec![1.0, 1.0])?;
    let br = best_response(&market, &p, 0)?;
    println!(
        "best response {:.15} (closed form {:.15}) after {} iterations",
        br.price,
        (5.0_f64.sqrt() - 1.0) / 2.0,
        br.iterations
    );
    println!("clearing gap at the root: {:e}", clearing_gap(&market, &p, 0, br.price)?);

    let market = Market::new(
        vec![1.0, 2.0, 0.5],
        vec![vec![4.0, 1.0, 0.0], vec![1.0, 2.0, 3.0], vec![0.5, 0.0, 5.0]],
        0.7,
    )?;
    let mut p = PriceVector::uniform(3, 1.0)?;
    for step in 1..=5 {
        p = best_response_all(&market, &p)?;
        println!("step {step}: p = {p}, residual {:.3e}", market.clearing_residual(&p)?);
    }
    Ok(())
}
