//! Randomized contrastive queries over small room-graph tasks.

mod common;

use std::time::{Duration, Instant};

use proptest::prelude::*;

#[test]
fn hundred_random_queries() {
    let started = Instant::now();
    common::run_queries(100);
    assert!(started.elapsed() < Duration::from_secs(60));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forbidden_state_is_never_reached(s in common::scenario()) {
        prop_assert_eq!(common::forbidden_state_avoided(&s), Ok(()));
    }
}
