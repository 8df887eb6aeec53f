//! Randomized invariants. Every execution the crate can produce — scripted,
//! noisy, or quantum-scheduled — must replay deterministically and survive
//! the trace validator; recorded races must be re-derivable from their own
//! completion tables; the probability floors must hold on arbitrary inputs.

use proptest::collection::vec;
use proptest::prelude::*;

use racelab::hybrid::{run_hybrid_trial, HybridConfig, Segment};
use racelab::noise::{run_noisy_trial, DelayDistribution, NoiseModel};
use racelab::protocol::{run_with_schedule, validate_trace};
use racelab::race::{
    exactly_one_probability, simulate_race, RaceConfig, RaceOutcome, RaceRun,
};
use racelab::Error;

fn small_dist() -> impl Strategy<Value = DelayDistribution> {
    prop_oneof![
        Just("exp:1"),
        Just("uniform:0,2"),
        Just("geometric:0.5"),
        Just("twopoint:0.5,1.5,0.25"),
        Just("shiftexp:0.5,0.5"),
        Just("normal:1,0.2,0,2"),
    ]
    .prop_map(|label| label.parse().expect("label is well-formed"))
}

/// (inputs, schedule) over 1..=4 processes.
fn inputs_and_schedule() -> impl Strategy<Value = (Vec<bool>, Vec<usize>)> {
    (1usize..=4).prop_flat_map(|n| (vec(any::<bool>(), n), vec(0..n, 0..200)))
}

proptest! {
    /// Scripted runs are pure functions of (inputs, schedule), their traces
    /// always validate, and under unanimous inputs any decision is the
    /// common input, reached at round 2 after exactly 8 own ops.
    #[test]
    fn scripted_runs_replay_identically_and_validate((inputs, schedule) in inputs_and_schedule()) {
        let (out_a, trace_a) = run_with_schedule(&inputs, &schedule, 10_000).unwrap();
        let (out_b, trace_b) = run_with_schedule(&inputs, &schedule, 10_000).unwrap();
        prop_assert_eq!(&out_a, &out_b);
        prop_assert_eq!(&trace_a, &trace_b);

        let report = validate_trace(&trace_a);
        prop_assert!(report.passed(), "violations: {:?}", report.violations);

        if inputs.iter().all(|&b| b == inputs[0]) {
            for rec in &trace_a.decisions {
                prop_assert_eq!(rec.value, inputs[0]);
                prop_assert_eq!(rec.round, 2);
                prop_assert_eq!(rec.ops_executed, 8);
            }
        }
    }

    /// Noisy trials are deterministic in the seed, their traces validate,
    /// and each process's recorded completion times never go backwards.
    #[test]
    fn noisy_trials_are_seed_deterministic_and_validate(
        n in 1usize..=4,
        dist in small_dist(),
        failure_rate in 0.0f64..0.3,
        seed in any::<u64>(),
    ) {
        let inputs: Vec<bool> = (0..n).map(|p| p % 2 == 1).collect();
        let mut model = NoiseModel::iid(dist);
        model.failure_rate = failure_rate;

        let (res_a, trace_a) = run_noisy_trial(&inputs, &model, seed, 4096, true).unwrap();
        let (res_b, trace_b) = run_noisy_trial(&inputs, &model, seed, 4096, true).unwrap();
        prop_assert_eq!(&res_a, &res_b);
        prop_assert_eq!(&trace_a, &trace_b);

        let trace = trace_a.expect("trace was requested");
        let report = validate_trace(&trace);
        prop_assert!(report.passed(), "violations: {:?}", report.violations);
        prop_assert_eq!(res_a.total_ops, trace.ops.len() as u64);

        for pid in 0..n {
            let mut last = f64::NEG_INFINITY;
            for op in trace.ops.iter().filter(|op| op.pid == pid) {
                prop_assert!(op.time >= last, "time went backwards for process {}", pid);
                last = op.time;
            }
        }
    }

    /// The chance that exactly one coordinate succeeds stays above the
    /// analytic floor for arbitrary success profiles, and is a probability.
    #[test]
    fn exactly_one_floor_holds_on_random_vectors(fails in vec(0.0f64..1.0, 1..=12)) {
        // Map [0,1) draws to failure probabilities in (0,1].
        let q: Vec<f64> = fails.iter().map(|f| 1.0 - f).collect();
        let (p, bound) = exactly_one_probability(&q).unwrap();
        prop_assert!((0.0..=1.0).contains(&p), "p = {}", p);
        prop_assert!(bound >= 0.0);
        prop_assert!(p >= bound, "p {} below floor {}", p, bound);
    }

    /// A race's reported outcome is exactly what its stored completion
    /// table implies: same winner, same round, minimal round.
    #[test]
    fn race_outcomes_recheck_from_stored_times(
        n in 1usize..=4,
        c in 1u32..=3,
        dist in small_dist(),
        failure_rate in 0.0f64..0.5,
        seed in any::<u64>(),
    ) {
        let mut config = RaceConfig::iid(n, c, "exp:1".parse().unwrap(), 64);
        config.round_delay = racelab::race::RoundDelay::PerRound(dist);
        config.failure_rate = failure_rate;

        let run = simulate_race(&config, seed).unwrap();
        let rows: Vec<usize> = run.completion.iter().map(Vec::len).collect();
        prop_assert!(rows.iter().all(|&len| len == rows[0]), "ragged table");
        let expected_len = run.outcome.effective_round(config.round_cap) as usize
            + config.c as usize
            + 1;
        prop_assert_eq!(rows[0], expected_len);
        prop_assert_eq!(recheck_outcome(&run, &config), run.outcome);
    }

    /// Any segment script the quantum/priority scheduler accepts yields a
    /// valid trace, and that trace is an ordinary interleaving: replaying
    /// its pid sequence step-by-step reproduces it exactly.
    #[test]
    fn accepted_preemption_scripts_yield_replayable_traces(
        n in 2usize..=3,
        quantum in 4u32..=8,
        priorities in vec(0i32..3, 3),
        script in vec((0usize..3, 1u32..=12), 0..30),
        input_bits in 0u32..8,
    ) {
        let inputs: Vec<bool> = (0..n).map(|p| input_bits >> p & 1 == 1).collect();
        let config = HybridConfig::fresh(priorities[..n].to_vec(), quantum);
        let script: Vec<Segment> = script
            .into_iter()
            .map(|(pid, ops)| Segment::new(pid % n, ops))
            .collect();

        match run_hybrid_trial(&inputs, &config, &script) {
            Err(Error::Strategy { .. }) => {} // scheduler legally refused the script
            Err(other) => prop_assert!(false, "unexpected error: {}", other),
            Ok((outcome, trace)) => {
                let report = validate_trace(&trace);
                prop_assert!(report.passed(), "violations: {:?}", report.violations);

                let pids: Vec<usize> = trace.ops.iter().map(|op| op.pid).collect();
                let (replayed, trace_again) =
                    run_with_schedule(&inputs, &pids, 10_000).unwrap();
                prop_assert_eq!(&trace_again, &trace);
                prop_assert_eq!(&replayed.decisions, &outcome.decisions);
            }
        }
    }
}

/// Independent re-derivation of a race outcome from the stored table:
/// scan rounds in order; at each round first look for a process whose
/// `round + c` completion beats every rival's `round` completion, then
/// check whether the whole field is dead at the `round + c` horizon.
fn recheck_outcome(run: &RaceRun, config: &RaceConfig) -> RaceOutcome {
    let n = config.n;
    let c = config.c as usize;
    let rounds = run.completion[0].len() - 1 - c;
    for r in 1..=rounds {
        for pid in 0..n {
            let lead = run.completion[pid][r + c];
            if lead.is_finite()
                && (0..n).all(|q| q == pid || lead < run.completion[q][r])
            {
                return RaceOutcome::Winner { pid, round: r as u32 };
            }
        }
        if (0..n).all(|p| run.completion[p][r + c].is_infinite()) {
            return RaceOutcome::AllDead { round: r as u32 };
        }
    }
    RaceOutcome::CapHit
}
