mod common;

use std::collections::BTreeSet;

use common::*;
use grouprec::hin::InteractionStore;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn multi_hop_matches_boolean_product_oracle(raw in raw_store(20, 20), depth in 1usize..=4) {
        check_multi_hop(&raw, depth)?;
    }

    #[test]
    fn deeper_closure_only_adds(raw in raw_store(12, 12), depth in 1usize..=3) {
        let (ui, ii, gu) = labels(&raw);
        let mut a = InteractionStore::build(&ui, &ii, &gu).unwrap();
        let mut b = a.clone();
        a.derive_multi_hop(depth).unwrap();
        b.derive_multi_hop(depth + 1).unwrap();
        for (r, c) in a.y_uvv.iter() {
            prop_assert!(b.y_uvv.get(r, c));
        }
        for (r, c) in a.y_gvv.iter() {
            prop_assert!(b.y_gvv.get(r, c));
        }
    }

    #[test]
    fn merged_targets_are_the_union(raw in raw_store(10, 10)) {
        let (ui, ii, gu) = labels(&raw);
        let store = InteractionStore::build(&ui, &ii, &gu).unwrap();
        let merged = store.merged_targets();
        for u in 0..store.n_users() {
            let want: BTreeSet<u32> = store.y_uv.row(u).iter().chain(store.y_uvv.row(u)).copied().collect();
            prop_assert_eq!(merged.users.row(u).to_vec(), want.into_iter().collect::<Vec<_>>());
            prop_assert_eq!(merged.empty_users.contains(&u), merged.users.row(u).is_empty());
        }
    }

    #[test]
    fn record_order_does_not_matter(raw in raw_store(10, 10), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let (mut ui, mut ii, mut gu) = labels(&raw);
        let a = InteractionStore::build(&ui, &ii, &gu).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ui.shuffle(&mut rng);
        ii.shuffle(&mut rng);
        gu.shuffle(&mut rng);
        let b = InteractionStore::build(&ui, &ii, &gu).unwrap();
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn path_incidence_matches_typed_walks(h in hin()) {
        check_path_incidence(&h)?;
    }
}
