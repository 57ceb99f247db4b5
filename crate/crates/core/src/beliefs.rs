//! Mental models and best-response-with-lookahead (BRL) updates.
//!
//! A mental model predicts one seller's next price. `StayPut` predicts the
//! current price; `Respond { owner, children }` predicts that `owner`
//! best-responds to the prices its children predict for everybody else.
//! A seller's BRL update is a best response to the vector of prices
//! predicted by its own [`ChildModels`].
//!
//! Models are immutable trees of `Arc`s, so level-k structures share their
//! subtrees and evaluation memoises on node identity.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::best_response::best_response;
use crate::error::{check_index, Error, Result};
use crate::market::{Market, PriceVector};

/// Default cap on the level of a seller's update.
pub const DEFAULT_MAX_DEPTH: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum MentalModel {
    StayPut,
    Respond { owner: usize, children: ChildModels },
}

impl MentalModel {
    /// 0 for `StayPut`, otherwise one more than the deepest child.
    pub fn level(&self) -> usize {
        match self {
            MentalModel::StayPut => 0,
            MentalModel::Respond { children, .. } => 1 + children.max_level(),
        }
    }

    /// Number of `Respond` nodes, counting shared subtrees once per use.
    pub fn respond_count(&self) -> usize {
        match self {
            MentalModel::StayPut => 0,
            MentalModel::Respond { children, .. } => {
                1 + children.iter().map(|(_, m)| m.respond_count()).sum::<usize>()
            }
        }
    }

    fn validate(&self, seller: usize, n: usize) -> Result<()> {
        match self {
            MentalModel::StayPut => Ok(()),
            MentalModel::Respond { owner, children } => {
                if *owner != seller {
                    return Err(Error::Argument(format!(
                        "model for seller {seller} is owned by seller {owner}"
                    )));
                }
                children.validate(n)
            }
        }
    }
}

/// The models one seller holds about every other seller.
#[derive(Debug, Clone, PartialEq)]
pub struct ChildModels {
    owner: usize,
    models: BTreeMap<usize, Arc<MentalModel>>,
}

impl ChildModels {
    /// Children for `owner`; must cover exactly the other `n - 1` sellers.
    pub fn new(owner: usize, models: BTreeMap<usize, Arc<MentalModel>>, n: usize) -> Result<Self> {
        let children = Self { owner, models };
        children.validate(n)?;
        Ok(children)
    }

    /// Every other seller stays put.
    pub fn stay_put(owner: usize, n: usize) -> Self {
        let stay = Arc::new(MentalModel::StayPut);
        Self {
            owner,
            models: (0..n)
                .filter(|&k| k != owner)
                .map(|k| (k, Arc::clone(&stay)))
                .collect(),
        }
    }

    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn get(&self, seller: usize) -> Option<&Arc<MentalModel>> {
        self.models.get(&seller)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Arc<MentalModel>)> {
        self.models.iter().map(|(&k, m)| (k, m))
    }

    pub fn max_level(&self) -> usize {
        self.models.values().map(|m| m.level()).max().unwrap_or(0)
    }

    fn validate(&self, n: usize) -> Result<()> {
        check_index("seller", self.owner, n)?;
        if self.models.contains_key(&self.owner) {
            return Err(Error::Argument(format!(
                "seller {} cannot hold a model of itself",
                self.owner
            )));
        }
        if self.models.len() != n - 1 || self.models.keys().any(|&k| k >= n) {
            return Err(Error::Argument(format!(
                "models held by seller {} must cover exactly the other {} sellers",
                self.owner,
                n - 1
            )));
        }
        for (&k, model) in &self.models {
            model.validate(k, n)?;
        }
        Ok(())
    }
}

/// One [`ChildModels`] per seller. Nothing forces different sellers'
/// beliefs to agree with each other.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefProfile {
    sellers: Vec<ChildModels>,
}

impl BeliefProfile {
    /// Validates coverage and rejects updates deeper than `max_depth`.
    pub fn new(sellers: Vec<ChildModels>, max_depth: usize) -> Result<Self> {
        let n = sellers.len();
        if n == 0 {
            return Err(Error::Argument("belief profile needs at least one seller".into()));
        }
        for (j, children) in sellers.iter().enumerate() {
            if children.owner != j {
                return Err(Error::Argument(format!(
                    "entry {j} of the profile belongs to seller {}",
                    children.owner
                )));
            }
            children.validate(n)?;
            let level = 1 + children.max_level();
            if level > max_depth {
                return Err(Error::Config(format!(
                    "seller {j} uses a level-{level} model; the depth cap is {max_depth}"
                )));
            }
        }
        Ok(Self { sellers })
    }

    /// Everyone stays put: plain best-response dynamics.
    pub fn level_one(n: usize) -> Self {
        Self {
            sellers: (0..n).map(|j| ChildModels::stay_put(j, n)).collect(),
        }
    }

    /// Every seller uses a uniform level-`k` model.
    pub fn uniform_level(k: usize, n: usize) -> Result<Self> {
        Self::levels(&vec![k; n])
    }

    /// Seller `j` uses a uniform level-`levels[j]` model.
    pub fn levels(levels: &[usize]) -> Result<Self> {
        let n = levels.len();
        let max_k = levels.iter().copied().max().unwrap_or(1);
        let table = LevelTable::new(n, max_k.saturating_sub(1));
        let sellers = levels
            .iter()
            .enumerate()
            .map(|(j, &k)| table.children(j, k))
            .collect::<Result<Vec<_>>>()?;
        Self::new(sellers, max_k.max(DEFAULT_MAX_DEPTH))
    }

    pub fn num_sellers(&self) -> usize {
        self.sellers.len()
    }

    pub fn seller(&self, j: usize) -> &ChildModels {
        &self.sellers[j]
    }

    /// Level of seller `j`'s update.
    pub fn level(&self, j: usize) -> usize {
        1 + self.sellers[j].max_level()
    }

    pub fn is_level_one(&self) -> bool {
        self.sellers.iter().all(|c| c.max_level() == 0)
    }
}

/// `models[l][s]`: the shared uniform level-`l` model of seller `s`.
struct LevelTable {
    n: usize,
    models: Vec<Vec<Arc<MentalModel>>>,
}

impl LevelTable {
    fn new(n: usize, max_level: usize) -> Self {
        let stay = Arc::new(MentalModel::StayPut);
        let mut models = vec![vec![stay; n]];
        for level in 1..=max_level {
            let below = &models[level - 1];
            let row = (0..n)
                .map(|s| {
                    let children = (0..n)
                        .filter(|&k| k != s)
                        .map(|k| (k, Arc::clone(&below[k])))
                        .collect();
                    Arc::new(MentalModel::Respond {
                        owner: s,
                        children: ChildModels { owner: s, models: children },
                    })
                })
                .collect();
            models.push(row);
        }
        Self { n, models }
    }

    fn children(&self, j: usize, k: usize) -> Result<ChildModels> {
        if k == 0 {
            return Err(Error::Argument(
                "a seller's own update has level at least 1; level 0 only describes others".into(),
            ));
        }
        check_index("seller", j, self.n)?;
        let below = &self.models[k - 1];
        Ok(ChildModels {
            owner: j,
            models: (0..self.n)
                .filter(|&s| s != j)
                .map(|s| (s, Arc::clone(&below[s])))
                .collect(),
        })
    }
}

/// Children making seller `j`'s update a uniform level-`k` model among
/// `n` sellers: level 1 means everybody else stays put, level `k` means
/// everybody else plays their level-`k-1` update.
pub fn level_k_children(j: usize, k: usize, n: usize) -> Result<ChildModels> {
    LevelTable::new(n, k.saturating_sub(1)).children(j, k)
}

/// Random model for `seller` of level at most `max_level`: each node is a
/// `Respond` with probability `respond_prob` while depth remains.
pub fn random_model<R: Rng + ?Sized>(
    rng: &mut R,
    seller: usize,
    n: usize,
    max_level: usize,
    respond_prob: f64,
) -> MentalModel {
    if max_level == 0 || !rng.gen_bool(respond_prob) {
        return MentalModel::StayPut;
    }
    MentalModel::Respond {
        owner: seller,
        children: random_children(rng, seller, n, max_level - 1, respond_prob),
    }
}

/// Random children for `owner` whose models have level at most `max_level`.
pub fn random_children<R: Rng + ?Sized>(
    rng: &mut R,
    owner: usize,
    n: usize,
    max_level: usize,
    respond_prob: f64,
) -> ChildModels {
    let models = (0..n)
        .filter(|&k| k != owner)
        .map(|k| (k, Arc::new(random_model(rng, k, n, max_level, respond_prob))))
        .collect();
    ChildModels { owner, models }
}

/// Random profile in which every seller's update has level at most
/// `max_depth` (≥ 1).
pub fn random_profile<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    max_depth: usize,
    respond_prob: f64,
) -> Result<BeliefProfile> {
    if max_depth == 0 {
        return Err(Error::Argument("random profiles need max_depth >= 1".into()));
    }
    if !(0.0..=1.0).contains(&respond_prob) {
        return Err(Error::Argument(format!(
            "respond probability must lie in [0, 1], got {respond_prob}"
        )));
    }
    let sellers = (0..n)
        .map(|j| random_children(rng, j, n, max_depth - 1, respond_prob))
        .collect();
    BeliefProfile::new(sellers, max_depth)
}

/// Evaluates models at a fixed price vector, caching each shared node.
struct Evaluator<'a> {
    market: &'a Market,
    p: &'a PriceVector,
    memo: HashMap<*const MentalModel, f64>,
}

impl<'a> Evaluator<'a> {
    fn new(market: &'a Market, p: &'a PriceVector) -> Self {
        Self {
            market,
            p,
            memo: HashMap::new(),
        }
    }

    fn model(&mut self, model: &MentalModel, seller: usize) -> Result<f64> {
        match model {
            MentalModel::StayPut => Ok(self.p[seller]),
            MentalModel::Respond { owner, children } => {
                let key = model as *const MentalModel;
                if let Some(&price) = self.memo.get(&key) {
                    return Ok(price);
                }
                let price = self.respond(*owner, children)?;
                self.memo.insert(key, price);
                Ok(price)
            }
        }
    }

    fn believed_prices(&mut self, children: &ChildModels) -> Result<PriceVector> {
        let mut believed = self.p.as_slice().to_vec();
        for (k, child) in children.iter() {
            believed[k] = self.model(child, k)?;
        }
        PriceVector::new(believed)
    }

    fn respond(&mut self, owner: usize, children: &ChildModels) -> Result<f64> {
        let believed = self.believed_prices(children)?;
        Ok(best_response(self.market, &believed, owner)?.price)
    }
}

/// The price `model` predicts for `seller` at current prices `p`.
pub fn evaluate_model(
    market: &Market,
    model: &MentalModel,
    seller: usize,
    p: &PriceVector,
) -> Result<f64> {
    check_index("seller", seller, market.num_goods())?;
    model.validate(seller, market.num_goods())?;
    Evaluator::new(market, p).model(model, seller)
}

/// The vector seller `j` believes it is responding to: its children's
/// predictions for the others, and `p_j` in its own slot.
pub fn believed_prices(market: &Market, children: &ChildModels, p: &PriceVector) -> Result<PriceVector> {
    children.validate(market.num_goods())?;
    Evaluator::new(market, p).believed_prices(children)
}

/// `F_j(p) = B_j(π^j(p))` for the sellers marked in `active`; inactive
/// coordinates keep their price. All coordinates read the same `p`.
pub fn brl_update_subset(
    market: &Market,
    profile: &BeliefProfile,
    p: &PriceVector,
    active: &[bool],
) -> Result<PriceVector> {
    let n = market.num_goods();
    if profile.num_sellers() != n {
        return Err(Error::Argument(format!(
            "profile covers {} sellers, market has {n} goods",
            profile.num_sellers()
        )));
    }
    if active.len() != n {
        return Err(Error::Argument(format!(
            "active set has {} entries for {n} sellers",
            active.len()
        )));
    }
    let mut eval = Evaluator::new(market, p);
    let mut next = p.as_slice().to_vec();
    for j in (0..n).filter(|&j| active[j]) {
        next[j] = eval.respond(j, profile.seller(j))?;
    }
    PriceVector::new(next)
}

/// The BRL update of every seller.
pub fn brl_update(market: &Market, profile: &BeliefProfile, p: &PriceVector) -> Result<PriceVector> {
    brl_update_subset(market, profile, p, &vec![true; market.num_goods()])
}

/// Serialised form of a model tree.
///
/// ```json
/// {"kind": "respond", "owner": 0, "children": {"1": {"kind": "stay"}, "2": {"kind": "level", "level": 2}}}
/// ```
///
/// `{"kind": "level", "level": k}` expands to the uniform level-`k` model of
/// whichever seller it is attached to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Stay,
    Respond {
        owner: usize,
        #[serde(with = "seller_keys")]
        children: BTreeMap<usize, ModelSpec>,
    },
    Level {
        level: usize,
    },
}

// Internally tagged enums buffer their content, which loses serde_json's
// string-to-integer map key coercion; keys are parsed by hand instead.
mod seller_keys {
    use std::collections::BTreeMap;

    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::ModelSpec;

    pub fn serialize<S: Serializer>(map: &BTreeMap<usize, ModelSpec>, s: S) -> Result<S::Ok, S::Error> {
        let keyed: BTreeMap<String, &ModelSpec> = map.iter().map(|(k, v)| (k.to_string(), v)).collect();
        keyed.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<usize, ModelSpec>, D::Error> {
        BTreeMap::<String, ModelSpec>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| {
                k.parse::<usize>()
                    .map(|k| (k, v))
                    .map_err(|_| D::Error::custom(format!("seller key {k:?} is not an index")))
            })
            .collect()
    }
}

/// A profile file: one entry per seller describing that seller's own update.
/// Each entry is a `respond` node owned by that seller or a `level` (≥ 1)
/// shorthand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub sellers: Vec<ModelSpec>,
}

impl ModelSpec {
    fn build(&self, seller: usize, n: usize) -> Result<MentalModel> {
        match self {
            ModelSpec::Stay => Ok(MentalModel::StayPut),
            ModelSpec::Level { level: 0 } => Ok(MentalModel::StayPut),
            ModelSpec::Level { level } => Ok(MentalModel::Respond {
                owner: seller,
                children: level_k_children(seller, *level, n)?,
            }),
            ModelSpec::Respond { owner, children } => {
                if *owner != seller {
                    return Err(Error::Config(format!(
                        "model attached to seller {seller} names owner {owner}"
                    )));
                }
                let models = children
                    .iter()
                    .map(|(&k, spec)| {
                        check_index("seller", k, n)?;
                        Ok((k, Arc::new(spec.build(k, n)?)))
                    })
                    .collect::<Result<BTreeMap<_, _>>>()?;
                Ok(MentalModel::Respond {
                    owner: seller,
                    children: ChildModels::new(seller, models, n)?,
                })
            }
        }
    }
}

impl ProfileSpec {
    pub fn build(&self, max_depth: usize) -> Result<BeliefProfile> {
        let n = self.sellers.len();
        let sellers = self
            .sellers
            .iter()
            .enumerate()
            .map(|(j, spec)| match spec.build(j, n)? {
                MentalModel::Respond { children, .. } => Ok(children),
                MentalModel::StayPut => Err(Error::Config(format!(
                    "seller {j}'s own update must be a respond node or level >= 1"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        BeliefProfile::new(sellers, max_depth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::best_response::best_response_all;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pv(v: &[f64]) -> PriceVector {
        PriceVector::new(v.to_vec()).unwrap()
    }

    fn symmetric(n: usize) -> Market {
        Market::new(vec![1.0], vec![vec![1.0; n]], 0.5).unwrap()
    }

    #[test]
    fn level_one_children_stay_put() {
        let c = level_k_children(0, 1, 3).unwrap();
        let keys: Vec<usize> = c.iter().map(|(k, _)| k).collect();
        assert_eq!(keys, vec![1, 2]);
        assert!(c.iter().all(|(_, m)| **m == MentalModel::StayPut));
    }

    #[test]
    fn level_two_children_respond_to_stay_put() {
        let c = level_k_children(0, 2, 3).unwrap();
        let expect = |owner: usize| MentalModel::Respond {
            owner,
            children: ChildModels::stay_put(owner, 3),
        };
        assert_eq!(**c.get(1).unwrap(), expect(1));
        assert_eq!(**c.get(2).unwrap(), expect(2));
        assert!(c.get(0).is_none());
    }

    #[test]
    fn level_arithmetic() {
        for k in 1..6 {
            let c = level_k_children(1, k, 4).unwrap();
            let model = MentalModel::Respond { owner: 1, children: c };
            assert_eq!(model.level(), k);
        }
        assert!(matches!(level_k_children(0, 0, 3), Err(Error::Argument(_))));
    }

    #[test]
    fn stay_put_evaluates_to_current_price() {
        let m = symmetric(2);
        assert_eq!(evaluate_model(&m, &MentalModel::StayPut, 1, &pv(&[1.0, 3.0])).unwrap(), 3.0);
    }

    #[test]
    fn level_two_composes_two_solves() {
        let m = symmetric(2);
        let p = pv(&[1.0, 1.0]);
        let model = MentalModel::Respond {
            owner: 0,
            children: level_k_children(0, 2, 2).unwrap(),
        };
        let got = evaluate_model(&m, &model, 0, &p).unwrap();
        // Seller 1 is believed to answer with q = (√5 - 1)/2; seller 0 then
        // solves p'^2 / q + p' - 1 = 0.
        let q = (5.0_f64.sqrt() - 1.0) / 2.0;
        let expected = q * (-1.0 + (1.0 + 4.0 / q).sqrt()) / 2.0;
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
    }

    #[test]
    fn level_one_profile_is_best_response() {
        let m = Market::new(
            vec![1.0, 2.0],
            vec![vec![1.0, 0.5, 0.0], vec![0.2, 1.0, 3.0]],
            0.4,
        )
        .unwrap();
        let p = pv(&[0.9, 1.3, 2.2]);
        let brl = brl_update(&m, &BeliefProfile::level_one(3), &p).unwrap();
        assert_eq!(brl, best_response_all(&m, &p).unwrap());
    }

    #[test]
    fn heterogeneous_symmetric_profile_keeps_symmetry() {
        let m = symmetric(3);
        let profile = BeliefProfile::levels(&[3, 2, 2]).unwrap();
        assert_eq!(profile.level(0), 3);
        assert_eq!(profile.level(1), 2);
        let out = brl_update(&m, &BeliefProfile::uniform_level(2, 3).unwrap(), &pv(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(out[0], out[1]);
        assert_eq!(out[1], out[2]);
        let out = brl_update(&m, &profile, &pv(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(out[1], out[2]);
    }

    #[test]
    fn memoised_evaluation_matches_naive_recursion() {
        fn naive(market: &Market, model: &MentalModel, seller: usize, p: &PriceVector) -> f64 {
            match model {
                MentalModel::StayPut => p[seller],
                MentalModel::Respond { owner, children } => {
                    let mut q = p.as_slice().to_vec();
                    for (k, child) in children.iter() {
                        q[k] = naive(market, child, k, p);
                    }
                    best_response(market, &PriceVector::new(q).unwrap(), *owner)
                        .unwrap()
                        .price
                }
            }
        }
        let m = Market::new(
            vec![1.0, 0.5, 2.0],
            vec![vec![1.0, 0.5, 0.1], vec![0.2, 1.0, 3.0], vec![1.0, 1.0, 1.0]],
            0.6,
        )
        .unwrap();
        let p = pv(&[0.8, 1.1, 1.6]);
        let model = MentalModel::Respond {
            owner: 2,
            children: level_k_children(2, 4, 3).unwrap(),
        };
        assert_eq!(
            evaluate_model(&m, &model, 2, &p).unwrap(),
            naive(&m, &model, 2, &p)
        );
    }

    #[test]
    fn validation_errors() {
        let mut models = BTreeMap::new();
        models.insert(1, Arc::new(MentalModel::StayPut));
        assert!(ChildModels::new(0, models.clone(), 3).is_err());
        models.insert(0, Arc::new(MentalModel::StayPut));
        assert!(ChildModels::new(0, models, 2).is_err());

        let wrong_owner = MentalModel::Respond {
            owner: 2,
            children: ChildModels::stay_put(2, 3),
        };
        let mut models = BTreeMap::new();
        models.insert(1, Arc::new(wrong_owner));
        models.insert(2, Arc::new(MentalModel::StayPut));
        assert!(ChildModels::new(0, models, 3).is_err());

        assert!(matches!(
            BeliefProfile::new(
                (0..2).map(|j| level_k_children(j, 5, 2).unwrap()).collect(),
                4
            ),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn random_profiles_respect_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let profile = random_profile(&mut rng, 4, 3, 0.6).unwrap();
            for j in 0..4 {
                assert!(profile.level(j) <= 3);
            }
        }
        assert!(random_profile(&mut rng, 3, 0, 0.5).is_err());
    }

    #[test]
    fn profile_spec_parses_trees_and_shorthand() {
        let text = r#"{"sellers": [
            {"kind": "respond", "owner": 0, "children": {
                "1": {"kind": "respond", "owner": 1, "children": {"0": {"kind": "stay"}, "2": {"kind": "stay"}}},
                "2": {"kind": "stay"}}},
            {"kind": "level", "level": 2},
            {"kind": "level", "level": 1}
        ]}"#;
        let spec: ProfileSpec = serde_json::from_str(text).unwrap();
        let profile = spec.build(DEFAULT_MAX_DEPTH).unwrap();
        assert_eq!(profile.level(0), 2);
        assert_eq!(profile.level(1), 2);
        assert_eq!(profile.level(2), 1);

        let bad: ProfileSpec = serde_json::from_str(r#"{"sellers": [{"kind": "stay"}]}"#).unwrap();
        assert!(bad.build(DEFAULT_MAX_DEPTH).is_err());
        let wrong: ProfileSpec = serde_json::from_str(
            r#"{"sellers": [{"kind": "respond", "owner": 1, "children": {"1": {"kind": "stay"}}}, {"kind": "level", "level": 1}]}"#,
        )
        .unwrap();
        assert!(wrong.build(DEFAULT_MAX_DEPTH).is_err());
    }
}
