// Synchronous BRL dynamics with freshly drawn beliefs every step, and a
// log-linear fit of the distance to equilibrium.

use fisher_brl::analysis::{fit_decay, solve_equilibrium, DecayUnit};
use fisher_brl::dynamics::{run, Horizon, RandomProfiles, Schedule};
use fisher_brl::generate::MarketGenerator;
use fisher_brl::PriceVector;

fn main() -> fisher_brl::Result<()> {
    let market = MarketGenerator::new(5, 6, 0.6, 17).generate()?;
    let p_star = solve_equilibrium(&market, 1e-12)?.prices;
    let bounds = market.price_bounds();
    let p0 = PriceVector::new(vec![bounds.p_min, bounds.p_max, bounds.p_min, bounds.p_max, 1.0])?;

    let mut beliefs = RandomProfiles::new(market.num_goods(), 3, 0.5, 99)?;
    let mut schedule = Schedule::full(market.num_goods());
    let trajectory = run(&market, &mut schedule, &mut beliefs, &p0, Horizon::Steps(40))?;

    for (t, d) in trajectory.distances(&p_star)?.iter().enumerate().take(15) {
        println!("t = {t:2}  d(p, p*) = {d:.3e}");
    }
    let fit = fit_decay(&trajectory, &p_star, DecayUnit::Steps)?;
    println!("fitted rate {:.4} per step ({} points)", fit.rate, fit.points);
    Ok(())
}
