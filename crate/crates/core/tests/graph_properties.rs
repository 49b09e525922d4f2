mod common;

use std::collections::BTreeSet;

use common::*;
use eigenkit::derivation::{derive_samples, DerivationConfig, Split};
use eigenkit::graph::{compose, Hop, NodeId, RelationKind, Sign};
use proptest::prelude::*;

fn sign_strategy() -> impl Strategy<Value = Sign> {
    prop_oneof![Just(Sign::Positive), Just(Sign::Negative)]
}

fn edges_strategy(n: usize) -> impl Strategy<Value = Vec<(usize, usize, Sign)>> {
    prop::collection::vec((0..n, 0..n, sign_strategy()), 0..12).prop_map(|mut es| {
        es.retain(|(s, t, _)| s != t);
        es.sort();
        es.dedup();
        es
    })
}

fn graph_strategy() -> impl Strategy<Value = eigenkit::InfluenceGraph> {
    (1usize..=6).prop_flat_map(|n| edges_strategy(n).prop_map(move |es| graph_from("p", n, &es)))
}

proptest! {
    #[test]
    fn compose_is_order_independent(mut signs in prop::collection::vec(sign_strategy(), 0..16), seed in any::<u64>()) {
        let before = compose(signs.iter().copied());
        // Deterministic shuffle driven by the seed.
        let len = signs.len();
        let mut state = seed;
        for i in (1..len).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            signs.swap(i, j);
        }
        prop_assert_eq!(compose(signs.iter().copied()), before);
    }

    #[test]
    fn compose_is_a_homomorphism(
        xs in prop::collection::vec(sign_strategy(), 0..10),
        ys in prop::collection::vec(sign_strategy(), 0..10),
    ) {
        let joined: Vec<Sign> = xs.iter().chain(ys.iter()).copied().collect();
        prop_assert_eq!(
            compose(joined),
            compose([compose(xs.iter().copied()), compose(ys.iter().copied())])
        );
        prop_assert_eq!(compose(xs.iter().copied()), stepwise_sign(&xs));
    }

    #[test]
    fn enumerated_paths_match_brute_force(g in graph_strategy(), max_hop in 1u32..=5) {
        for node in &g.nodes {
            let got = g.enumerate_paths(&node.id, Hop::new(max_hop).unwrap()).unwrap();
            for p in &got {
                let distinct: BTreeSet<&NodeId> = p.nodes.iter().collect();
                prop_assert_eq!(distinct.len(), p.nodes.len());
                prop_assert_eq!(p.sign(), stepwise_sign(&p.signs));
            }
            let mut got_set: Vec<OraclePath> = got
                .iter()
                .map(|p| OraclePath {
                    nodes: p.nodes.iter().map(|n| n.as_str().to_string()).collect(),
                    signs: p.signs.clone(),
                })
                .collect();
            let mut sorted = got_set.clone();
            sorted.sort();
            // Already in lexicographic order.
            prop_assert_eq!(&got_set, &sorted);
            got_set.dedup();
            let expected = brute_force_simple_paths(&g, node.id.as_str(), max_hop as usize);
            prop_assert_eq!(got_set, expected);
        }
    }

    #[test]
    fn derived_samples_are_witnessed_by_paths(g in graph_strategy(), max_hop in 1u32..=3, reverse in any::<bool>()) {
        let passage = eigenkit::Passage::new("p", vec!["text".into()]).unwrap();
        let cfg = DerivationConfig { max_hop: Hop::new(max_hop).unwrap(), include_reverse: reverse, ..Default::default() };
        let samples = derive_samples(&g, &passage, &cfg, Split::Train).unwrap();
        let tuples = brute_force_tuples(&g, max_hop as usize);
        let text_of = |id: &str| format!("event {id}");

        let mut forward = BTreeSet::new();
        for s in &samples {
            let hop = s.hop.unwrap().count() as usize;
            prop_assert!(hop <= max_hop as usize);
            let (src, tgt) = if s.relation.is_forward() { (&s.source, &s.target) } else { (&s.target, &s.source) };
            let witnessed = tuples.iter().any(|(a, sign, h, b)| {
                &text_of(a) == src && &text_of(b) == tgt && *h == hop && *sign == s.relation.sign
            });
            prop_assert!(witnessed, "unwitnessed sample {:?}", s);
            if s.relation.is_forward() {
                forward.insert((src.clone(), s.relation.sign, hop, tgt.clone()));
            }
        }
        // One forward sample per distinct tuple, and no more.
        prop_assert_eq!(forward.len(), tuples.len());
        let expected = tuples.len() * if reverse { 2 } else { 1 };
        prop_assert_eq!(samples.len(), expected);
    }

    #[test]
    fn reverse_doubles_and_derivation_is_deterministic(g in graph_strategy()) {
        let passage = eigenkit::Passage::new("p", vec!["text".into()]).unwrap();
        let on = DerivationConfig::default();
        let off = DerivationConfig { include_reverse: false, ..on };
        let a = derive_samples(&g, &passage, &on, Split::Dev).unwrap();
        let b = derive_samples(&g, &passage, &on, Split::Dev).unwrap();
        let c = derive_samples(&g, &passage, &off, Split::Dev).unwrap();
        prop_assert_eq!(a.len(), 2 * c.len());
        let ser = |v: &Vec<eigenkit::DerivedSample>| serde_json::to_string(v).unwrap();
        prop_assert_eq!(ser(&a), ser(&b));
    }
}

#[test]
fn relation_inverse_of_every_kind() {
    for r in RelationKind::ALL {
        assert_ne!(r.invert(), r);
        assert_eq!(r.invert().invert(), r);
    }
}
