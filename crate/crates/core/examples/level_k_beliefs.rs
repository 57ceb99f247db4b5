// Level-k and hand-built mental models and the BRL updates they induce.

use std::collections::BTreeMap;
use std::sync::Arc;

use fisher_brl::beliefs::{believed_prices, brl_update, level_k_children, ChildModels, DEFAULT_MAX_DEPTH};
use fisher_brl::{BeliefProfile, Market, MentalModel, PriceVector};

fn main() -> fisher_brl::Result<()> {
    let market = Market::new(
        vec![1.0, 2.0, 0.5],
        vec![vec![4.0, 1.0, 0.0], vec![1.0, 2.0, 3.0], vec![0.5, 0.0, 5.0]],
        0.5,
    )?;
    let n = market.num_goods();
    let p = PriceVector::new(vec![1.0, 1.0, 1.0])?;

    for k in 1..=4 {
        let profile = BeliefProfile::uniform_level(k, n)?;
        println!("level {k}: F(p) = {}", brl_update(&market, &profile, &p)?);
    }

    let children = level_k_children(0, 3, n)?;
    println!("seller 0 at level 3 expects the others to set {}", believed_prices(&market, &children, &p)?);

    // Seller 0 thinks seller 1 best-responds while seller 2 stays put;
    // seller 1 is level 2, seller 2 is level 1.
    let seller1_thinks = ChildModels::stay_put(1, n);
    let mut models = BTreeMap::new();
    models.insert(1, Arc::new(MentalModel::Respond { owner: 1, children: seller1_thinks }));
    models.insert(2, Arc::new(MentalModel::StayPut));
    let custom = BeliefProfile::new(
        vec![ChildModels::new(0, models, n)?, level_k_children(1, 2, n)?, level_k_children(2, 1, n)?],
        DEFAULT_MAX_DEPTH,
    )?;
    println!("levels {:?}", (0..n).map(|j| custom.level(j)).collect::<Vec<_>>());
    println!("mixed profile: F(p) = {}", brl_update(&market, &custom, &p)?);
    Ok(())
}
