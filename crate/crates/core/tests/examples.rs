//! Runs every example's `main` so the examples stay working.

macro_rules! example {
    ($name:ident) => {
        mod $name {
            include!(concat!("../examples/", stringify!($name), ".rs"));

            #[test]
            fn runs() {
                main().unwrap();
            }
        }
    };
}

example!(demand_and_spending);
example!(best_response);
example!(level_k_beliefs);
example!(sync_dynamics);
example!(async_dynamics);
example!(contraction_estimate);
example!(equilibrium_oracles);
