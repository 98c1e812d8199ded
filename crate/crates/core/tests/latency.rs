mod common;

use etoe_dse::bench::{gen_bench, BenchParams, Topology};
use etoe_dse::handshake::{handshake_bounds, simulate_handshake_ticks};
use etoe_dse::model::ComponentKind;
use etoe_dse::pipeline::Prepared;
use etoe_dse::{Chromosome, FrequencyAssignment};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_config(prep: &Prepared, rng: &mut ChaCha8Rng) -> Chromosome {
    let n_grid = prep.model.grid().len();
    Chromosome {
        alternatives: prep
            .model
            .mccs()
            .map(|(_, m)| rng.gen_range(0..m.alternatives.len()))
            .collect(),
        frequencies: FrequencyAssignment(
            (0..prep.model.n_components()).map(|_| rng.gen_range(0..n_grid)).collect(),
        ),
    }
}

fn system(seed: u64) -> Prepared {
    let topo = if seed % 2 == 0 { Topology::Chain } else { Topology::Branch };
    Prepared::new(gen_bench(&BenchParams::uniform(3, 2, 3, topo, 1.0, seed)).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn faster_mcc_or_handshake_never_slows_a_path(seed in 0u64..40, draw in any::<u64>()) {
        let prep = system(seed);
        let eval = prep.evaluator();
        let mut rng = ChaCha8Rng::seed_from_u64(draw);
        let chrom = random_config(&prep, &mut rng);
        let comps: Vec<usize> = eval
            .table
            .components
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind != ComponentKind::Fsm)
            .map(|(i, _)| i)
            .collect();
        let c = comps[rng.gen_range(0..comps.len())];
        let n_grid = eval.grid.len();
        prop_assume!(chrom.frequencies.0[c] + 1 < n_grid);
        let mut faster = chrom.clone();
        faster.frequencies.0[c] = rng.gen_range(chrom.frequencies.0[c] + 1..n_grid);
        let before = eval.evaluate(&chrom).latencies;
        let after = eval.evaluate(&faster).latencies;
        prop_assert_eq!(before.len(), after.len());
        for (b, a) in before.iter().zip(&after) {
            prop_assert!(*a <= *b * (1.0 + 1e-12), "{} -> {}", b, a);
        }
    }

    #[test]
    fn objectives_match_direct_sums(seed in 0u64..40, draw in any::<u64>()) {
        let prep = system(seed);
        let eval = prep.evaluator();
        let mut rng = ChaCha8Rng::seed_from_u64(draw);
        let chrom = random_config(&prep, &mut rng);
        let ev = eval.evaluate(&chrom);
        let grid = prep.model.grid();
        let mut energy = 0.0;
        let mut area = 0.0;
        let mut comp = 0;
        let mut mcc = 0;
        for psm in &prep.model.psms {
            comp += 1;
            for m in &psm.mccs {
                let alt = &m.alternatives[chrom.alternatives[mcc]];
                let f = grid[chrom.frequencies.0[comp]];
                energy += f * alt.power / (alt.f_max * psm.period);
                area += alt.area;
                comp += 1;
                mcc += 1;
            }
        }
        prop_assert!((ev.energy - energy).abs() <= 1e-9 * energy.max(1.0));
        prop_assert!((ev.area - area).abs() <= 1e-9 * area.max(1.0));
    }
}

#[test]
fn equal_periods_give_five_and_nine() {
    let b = handshake_bounds(1.0, 1.0, 1.0, 1.0);
    assert_eq!((b.receiver, b.sender), (5, 9));
    let b = handshake_bounds(3e-8, 3e-8, 3e-8, 3e-8);
    assert_eq!((b.receiver, b.sender), (5, 9));
}

#[test]
fn simulated_handshake_stays_within_bound_on_small_sweep() {
    for periods in [[4u64, 4, 4, 4], [4, 8, 2, 4], [8, 2, 4, 16], [2, 16, 8, 2]] {
        let b = handshake_bounds(periods[0] as f64, periods[1] as f64, periods[2] as f64, periods[3] as f64);
        for o0 in 0..periods[0] {
            for o1 in 0..periods[1] {
                for o2 in 0..periods[2] {
                    for o3 in 0..periods[3] {
                        let c = simulate_handshake_ticks(periods, [o0, o1, o2, o3]).unwrap();
                        assert!(c.receiver <= b.receiver && c.sender <= b.sender, "{periods:?}");
                    }
                }
            }
        }
    }
}

#[test]
fn tiny_fixture_latency_by_hand() {
    let prep = Prepared::new(common::load_fixture("tiny.json")).unwrap();
    let eval = prep.evaluator();
    // alternative y, every component at 10 MHz: three FSM visits, 50 us in the MCC, five receiver cycles
    let chrom = Chromosome {
        alternatives: vec![1],
        frequencies: FrequencyAssignment(vec![0; prep.model.n_components()]),
    };
    let ev = eval.evaluate(&chrom);
    assert!((ev.latencies[0] - 50.8e-6).abs() < 1e-12, "{:?}", ev.latencies);
    assert!(ev.violation.is_none());
}
