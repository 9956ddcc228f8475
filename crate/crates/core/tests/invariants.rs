//! Property tests over randomly generated signals and small graphs.

use proptest::prelude::*;

use mia_core::attacks::{attack_base, attack_mca, attack_rmia, AttackConfig, Mode};
use mia_core::graph::{masked_adjacency, Graph, MembershipMask};
use mia_core::metrics::{check_equivalence, roc_auc};
use mia_core::numeric::logit;
use mia_core::signals::{SignalMatrix, SignalMode};
use ndarray::Array2;

fn signals_strategy() -> impl Strategy<Value = SignalMatrix> {
    (2usize..40, 1usize..5).prop_flat_map(|(n, half_k)| {
        let k = 2 * half_k;
        (
            prop::collection::vec(0.0f64..6.0, n),
            prop::collection::vec(prop::collection::vec(0.0f64..6.0, k), n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_map(move |(t, s, members)| SignalMatrix {
                sample_ids: (0..n).collect(),
                members,
                target_loss: t,
                shadow_loss: s,
                in_bits: (0..n).map(|i| (0..k).map(|j| (i + j) % 2 == 0).collect()).collect(),
                mode: SignalMode::External,
            })
    })
}

fn rmia(gamma: f64) -> AttackConfig {
    AttackConfig {
        gamma,
        ..AttackConfig::new("rmia")
    }
}

proptest! {
    #[test]
    fn base_and_rmia_rank_alike(sm in signals_strategy()) {
        let base = attack_base(&sm, &AttackConfig::new("base")).unwrap();
        let r = attack_rmia(&sm, &rmia(1.0)).unwrap();
        prop_assert!(check_equivalence(&base.scores, &r.scores).unwrap().equivalent);
        if sm.members.iter().any(|&m| m) && sm.members.iter().any(|&m| !m) {
            let a = roc_auc(&base.scores, &base.members).unwrap().auc;
            let b = roc_auc(&r.scores, &r.members).unwrap().auc;
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn score_ranges(sm in signals_strategy(), gamma in 0.0f64..4.0, lambda in 0.01f64..0.99) {
        let cfg = AttackConfig { lambda, ..AttackConfig::new("base") };
        for mode in [Mode::Online, Mode::Offline] {
            let b = attack_base(&sm, &cfg.clone().with_mode(mode)).unwrap();
            prop_assert!(b.scores.iter().all(|&p| p > 0.0 && p < 1.0));
        }
        let r = attack_rmia(&sm, &rmia(gamma)).unwrap();
        prop_assert!(r.scores.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn mca_is_odds_of_base(sm in signals_strategy()) {
        let base = attack_base(&sm, &AttackConfig::new("base")).unwrap();
        let mca = attack_mca(&sm, &AttackConfig::new("mca")).unwrap();
        for (b, m) in base.scores.iter().zip(&mca.scores) {
            prop_assert!((logit(*b) - m.ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn signal_csv_round_trip_preserves_scores(sm in signals_strategy()) {
        let back = SignalMatrix::parse_csv(&sm.to_csv()).unwrap();
        let a = attack_base(&sm, &AttackConfig::new("base")).unwrap();
        let b = attack_base(&back, &AttackConfig::new("base")).unwrap();
        prop_assert_eq!(a.scores, b.scores);
    }

    #[test]
    fn masked_edges_join_members_only(
        n in 2usize..15,
        raw in prop::collection::vec((0usize..15, 0usize..15), 0..40),
        bits in prop::collection::vec(any::<bool>(), 15),
    ) {
        let edges: Vec<(usize, usize)> = raw.into_iter().map(|(a, b)| (a % n, b % n)).filter(|(a, b)| a != b).collect();
        let g = Graph::new(Array2::zeros((n, 2)), vec![0; n], 1, edges).unwrap();
        let mask = MembershipMask::from_bits(bits[..n].to_vec());
        let adj = masked_adjacency(&g, &mask).unwrap();
        for &(u, v) in adj.edges() {
            prop_assert!(mask.get(u) && mask.get(v));
        }
        let kept = g.edges().iter().filter(|&&(u, v)| mask.get(u) && mask.get(v)).count();
        prop_assert_eq!(adj.edges().len(), kept);
    }
}
