// CES demand, budget exhaustion and the spending curve of one good.

use fisher_brl::{Market, PriceVector};

fn main() -> fisher_brl::Result<()> {
    let market = Market::new(
        vec![1.0, 2.0, 0.5],
        vec![vec![4.0, 1.0, 0.0], vec![1.0, 2.0, 3.0], vec![0.5, 0.0, 5.0]],
        0.5,
    )?;
    let p = PriceVector::new(vec![1.2, 0.8, 1.5])?;
    let x = market.demand(&p)?;

    println!("rho = {}, epsilon = {}", market.rho(), market.epsilon());
    for i in 0..market.num_buyers() {
        println!(
            "buyer {i}: x = {:?}, spends {:.12} of budget {}, utility {:.6}",
            x.quantities[i],
            x.spending(i, &p),
            market.budgets()[i],
            market.utility(&x, i)?
        );
    }
    for j in 0..market.num_goods() {
        println!("good {j}: demand {:.6}", x.good_total(j));
    }
    println!("clearing residual {:.6}", market.clearing_residual(&p)?);

    let bounds = market.price_bounds();
    println!("price box [{:.6}, {:.6}]", bounds.p_min, bounds.p_max);
    println!("spending on good 0 as its price rises:");
    for k in 0..6 {
        let alpha = bounds.p_min * (bounds.p_max / bounds.p_min).powf(k as f64 / 5.0);
        println!("  alpha = {alpha:.4}  spending = {:.6}", market.good_spending(&p, 0, alpha)?);
    }
    Ok(())
}
