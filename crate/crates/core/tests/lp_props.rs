use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

use carat_core::synth::{raise_inlet, random_chain, SynthChain, SynthOptions};
use carat_core::{build_lp, fixed_point_oracle, AttributeSolution, InletAttributeTable};

fn chain(seed: u64, cyclic: bool) -> SynthChain {
    let mut rng = StdRng::seed_from_u64(seed);
    let opts = SynthOptions::small(&mut rng, cyclic);
    random_chain(&mut rng, &opts)
}

fn solve_with(c: &SynthChain, inlets: &InletAttributeTable, attributes: &[String]) -> AttributeSolution {
    build_lp(&c.graph, &c.psi, inlets, attributes, &c.elements).unwrap().solve().unwrap()
}

fn solve(c: &SynthChain) -> AttributeSolution {
    solve_with(c, &c.inlets, &c.attributes)
}

#[test]
fn lp_matches_oracle_on_random_chains() {
    let mut cyclic = 0;
    for seed in 0..50u64 {
        let c = chain(seed, seed % 3 == 0);
        cyclic += usize::from(seed % 3 == 0);
        let sol = solve(&c);
        let o = fixed_point_oracle(&c.graph, &c.psi, &c.inlets, &c.attributes, &c.elements).unwrap();
        assert!(o.converged, "seed {seed}");
        assert_eq!(o.beta.keys().collect::<Vec<_>>(), sol.beta.keys().collect::<Vec<_>>(), "seed {seed}");
        for (k, v) in &o.beta {
            for (a, b) in v.iter().zip(&sol.beta[k]) {
                assert!((a - b).abs() < 1e-8, "seed {seed} {k}: {a} vs {b}");
            }
        }
    }
    assert!(cyclic >= 10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn consistent_chains_are_feasible_and_bounded(seed in any::<u64>(), cyclic in any::<bool>()) {
        let c = chain(seed, cyclic);
        let sol = solve(&c);
        prop_assert!(sol.is_optimal());
        prop_assert!(sol.max_residual < 1e-9);
        prop_assert!(sol.total_slack < 1e-9);
        for (k, v) in &sol.beta {
            for b in v {
                prop_assert!((-1e-9..=1.0 + 1e-9).contains(b), "{k}: {b}");
            }
            let (z, q) = sol.slack.get(k).copied().unwrap_or((0.0, 0.0));
            if z.abs() < 1e-12 && q.abs() < 1e-12 {
                prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9, "{k}");
            }
        }
    }

    #[test]
    fn raising_an_inlet_never_lowers_biogenic(seed in any::<u64>(), cyclic in any::<bool>(), which in 0usize..4) {
        let c = chain(seed, cyclic);
        let base = solve(&c);
        let raised = solve_with(&c, &raise_inlet(&c, which, 0.1), &c.attributes);
        for (k, v) in &base.beta {
            let after = raised.share(k, "biogenic").unwrap();
            prop_assert!(after >= v[1] - 1e-9, "{k}: {} -> {after}", v[1]);
        }
    }

    #[test]
    fn relabeling_attributes_permutes_beta(seed in any::<u64>(), cyclic in any::<bool>()) {
        let c = chain(seed, cyclic);
        let base = solve(&c);
        let flipped: Vec<String> = c.attributes.iter().rev().cloned().collect();
        let other = solve_with(&c, &c.inlets, &flipped);
        prop_assert!((base.total_slack - other.total_slack).abs() < 1e-12);
        for k in base.beta.keys() {
            for a in &c.attributes {
                let x = base.share(k, a).unwrap();
                let y = other.share(k, a).unwrap();
                prop_assert!((x - y).abs() < 1e-9, "{k} {a}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn solving_twice_is_bitwise_identical(seed in any::<u64>(), cyclic in any::<bool>()) {
        let c = chain(seed, cyclic);
        let a = solve(&c);
        let b = solve(&c);
        for (k, v) in &a.beta {
            let w = &b.beta[k];
            prop_assert!(v.iter().zip(w).all(|(x, y)| x.to_bits() == y.to_bits()), "{k}");
        }
        prop_assert_eq!(a.iterations, b.iterations);
    }
}
