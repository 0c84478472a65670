//! Solver invariants on random valid constraint systems: soundness of
//! every solved branch, agreement between the search strategies, and
//! faithful trace replay.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use snare::constraints::is_solution;
use snare::{replay, solve_all, RuleApplication, StrategyConfig};

use common::random_system_world;

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 96,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn solved_branches_extend_to_solutions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_system_world(&mut rng, 40);
        let cfg = StrategyConfig::default();
        let out = solve_all(&w.arena, &cfg, &w.system).unwrap();
        for b in &out.branches {
            let tau = b.system.tau_solution(&w.arena, cfg.deduction).unwrap();
            let full = b.subst.compose(&w.arena, &tau);
            prop_assert!(
                is_solution(&w.arena, cfg.deduction, &w.system, &full),
                "branch completion is not a solution of {}",
                w.system.display(&w.arena)
            );
        }
    }

    #[test]
    fn strategies_agree_on_satisfiability(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_system_world(&mut rng, 32);
        let memoized = solve_all(&w.arena, &StrategyConfig::default(), &w.system).unwrap();
        let eager = solve_all(&w.arena, &StrategyConfig::eager(), &w.system).unwrap();
        let diagnostic =
            solve_all(&w.arena, &StrategyConfig::diagnostic_unmemoized(), &w.system).unwrap();
        let verdicts = (
            !memoized.branches.is_empty(),
            !eager.branches.is_empty(),
            !diagnostic.branches.is_empty(),
        );
        prop_assert!(
            verdicts.0 == verdicts.1 && verdicts.1 == verdicts.2,
            "strategies disagree ({verdicts:?}) on {}",
            w.system.display(&w.arena)
        );
    }

    #[test]
    fn branch_traces_replay_to_their_solved_forms(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_system_world(&mut rng, 40);
        let cfg = StrategyConfig::default();
        let out = solve_all(&w.arena, &cfg, &w.system).unwrap();
        for b in &out.branches {
            let apps: Vec<RuleApplication> = b.trace.iter().map(|s| s.app.clone()).collect();
            let end = replay(&w.arena, &cfg, &w.system, &apps).unwrap();
            prop_assert_eq!(&end.active, &b.system);
            prop_assert_eq!(end.steps, b.steps);
            prop_assert_eq!(&end.accumulated, &b.subst);
        }
    }

    #[test]
    fn eager_branches_are_sound_too(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_system_world(&mut rng, 32);
        let cfg = StrategyConfig::eager();
        let out = solve_all(&w.arena, &cfg, &w.system).unwrap();
        for b in &out.branches {
            let tau = b.system.tau_solution(&w.arena, cfg.deduction).unwrap();
            let full = b.subst.compose(&w.arena, &tau);
            prop_assert!(is_solution(&w.arena, cfg.deduction, &w.system, &full));
        }
    }
}
