//! Acceptance criteria 1 to 10. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::cell::Cell;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use bbcode::circuit::{
    build_sm_circuit, enumerate_depth7_schedules_for_code, verify_schedule_symbolic, verify_sm_circuit, Schedule,
};
use bbcode::code::{build_code, known_code, known_codes, BBCode, BivariatePoly, Group, PauliType};
use bbcode::decode::{
    circuit_distance_upper_bound, distance_upper_bound, exact_distance_small, DistanceConfig, DEFAULT_DISTANCE_BUDGET,
};
use bbcode::experiment::{pseudo_threshold, published_fit, run_memory_experiment, MemoryConfig, StopRule};
use bbcode::logical::{
    build_ancilla_system, find_basis_polynomials, plan_duality_swaps, BasisSearch, LogicalBasis, MeasuredLogical,
};
use bbcode::noise::{build_detector_model, side, FinalReadout, NoisyCircuit};
use bbcode::BinVector;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn code(n: usize) -> BBCode {
    known_code(n).unwrap().spec.build().unwrap()
}

fn c1_parameters() -> Outcome {
    let mut slowest = Duration::ZERO;
    for k in known_codes() {
        let t = Instant::now();
        let c = k.spec.build().map_err(|e| e.to_string())?;
        slowest = slowest.max(t.elapsed());
        check((c.n(), c.k) == (k.n, k.k), format!("{}: got [[{},{}]]", k.name, c.n(), c.k))?;
    }
    check(slowest < Duration::from_secs(1), format!("slowest build {slowest:?}"))?;
    Ok(format!("7 codes match, slowest build {slowest:.2?}"))
}

fn c2_distance() -> Outcome {
    let c72 = code(72);
    let exact = exact_distance_small(&c72, 6, DEFAULT_DISTANCE_BUDGET).map_err(|e| e.to_string())?;
    check(exact == Some(6), format!("exact distance of [[72,12,6]]: {exact:?}"))?;
    let mut found = Vec::new();
    for k in known_codes() {
        let cfg = DistanceConfig {
            trials: 100,
            ..DistanceConfig::default()
        };
        let d = distance_upper_bound(&k.spec.build().unwrap(), &cfg).map_err(|e| e.to_string())?;
        found.push(format!("{}:{d}", k.n));
        if k.d_is_bound {
            check(d <= k.d, format!("{}: bound {d} above {}", k.name, k.d))?;
        } else if k.n <= 144 {
            check(d == k.d, format!("{}: bound {d}, expected {}", k.name, k.d))?;
        }
    }
    Ok(format!("exact d(72) = 6; 100-trial bounds {}", found.join(" ")))
}

fn c3_circuits() -> Outcome {
    let mut slowest = Duration::ZERO;
    for k in known_codes() {
        let c = k.spec.build().unwrap();
        let t = Instant::now();
        let circuit = build_sm_circuit(&c, 1).map_err(|e| e.to_string())?;
        let report = verify_sm_circuit(&circuit, &c);
        slowest = slowest.max(t.elapsed());
        check(report.passed, format!("{}: {:?}", k.name, report.failures))?;
    }
    check(verify_schedule_symbolic(&Schedule::canonical()).passed, "symbolic replay failed")?;
    check(slowest < Duration::from_secs(1), format!("slowest verification {slowest:?}"))?;
    let count = enumerate_depth7_schedules_for_code(&code(144)).len();
    check(count == 936, format!("{count} depth-7 schedules"))?;
    Ok(format!("all 7 verified (slowest {slowest:.2?}); 936 depth-7 schedules on [[144,12,12]]"))
}

fn c4_detector_model() -> Outcome {
    let c = code(144);
    let circuit = NoisyCircuit::new(&c, 12, FinalReadout::NoiselessCycles(1)).map_err(|e| e.to_string())?;
    let faults = circuit.fault_locations(0.001).len();
    check(faults == 98 * 144 * 12, format!("{faults} fault locations"))?;
    let model = build_detector_model(&circuit, 0.001);
    // D_X is the model for X errors, seen by Z checks
    let (dx, dz) = (model.model(PauliType::X), model.model(PauliType::Z));
    check((dx.cols(), dz.cols()) == (8857, 8785), format!("columns {} / {}", dx.cols(), dz.cols()))?;
    for (name, m) in [("D_X", dx), ("D_Z", dz)] {
        check(
            m.d.max_col_weight() <= 6 && m.d.max_row_weight() <= 35,
            format!("{name} is ({},{})-sparse", m.d.max_col_weight(), m.d.max_row_weight()),
        )?;
    }
    Ok(format!("{faults} faults; D_X 8857 and D_Z 8785 columns, both (6,35)-sparse"))
}

fn c5_circuit_distance() -> Outcome {
    let mut out = Vec::new();
    for (n, nc, want) in [(72, 6, 6), (144, 12, 10)] {
        let c = code(n);
        let circuit = NoisyCircuit::new(&c, nc, FinalReadout::default()).map_err(|e| e.to_string())?;
        let model = build_detector_model(&circuit, 0.001);
        for t in [PauliType::X, PauliType::Z] {
            let cfg = DistanceConfig {
                trials: 1000,
                target: Some(want),
                ..DistanceConfig::default()
            };
            let d = circuit_distance_upper_bound(model.model(t), &cfg).map_err(|e| e.to_string())?;
            check(d <= want, format!("[[{n}]] {t:?}: bound {d} above {want}"))?;
            out.push(format!("{n}/{t:?}:{d}"));
        }
    }
    Ok(format!("circuit distance bounds {}", out.join(" ")))
}

fn c6_linearity() -> Outcome {
    let c = code(72);
    let circuit = NoisyCircuit::new(&c, 6, FinalReadout::default()).map_err(|e| e.to_string())?;
    let sigs = circuit.enumerate_faults(0.001);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let rows = circuit.detector_rows();
    for trial in 0..10_000 {
        let size = rng.gen_range(1..=12);
        let picks: Vec<usize> = (0..size).map(|_| rng.gen_range(0..sigs.len())).collect();
        let faults: Vec<_> = picks.iter().map(|&i| sigs[i].fault).collect();
        let shot = circuit.simulate_faults(&faults);
        for t in [PauliType::X, PauliType::Z] {
            let s = side(t);
            let mut det = BinVector::zeros(rows);
            let mut log = BinVector::zeros(c.k);
            for &i in &picks {
                for &r in &sigs[i].detectors[s] {
                    det.flip(r as usize);
                }
                for &r in &sigs[i].logicals[s] {
                    log.flip(r as usize);
                }
            }
            check(
                shot.detectors(t) == &det && shot.logicals(t) == &log,
                format!("multiset {trial} ({picks:?}) breaks linearity"),
            )?;
        }
    }
    Ok(format!("10000 multisets over {} faults, all linear", sigs.len()))
}

fn c7_monte_carlo() -> Outcome {
    let c = code(72);
    let mut cfg = MemoryConfig::new(0.005, 6, 7);
    cfg.stop = StopRule {
        target_failures: 100,
        max_shots: 100_000,
    };
    let r = run_memory_experiment(&c, "[[72,12,6]]", &cfg).map_err(|e| e.to_string())?;
    let predicted = published_fit(72).unwrap().fit.eval(0.005);
    let ratio = r.p_l / predicted;
    let summary = format!(
        "{} failures in {} shots, p_L = {:.4} +- {:.4}, fit {:.4}, ratio {:.2}",
        r.failures, r.shots, r.p_l, r.stderr, predicted, ratio
    );
    check(r.failures >= 100, format!("only {summary}"))?;
    check((0.5..=2.0).contains(&ratio), summary.clone())?;
    Ok(summary)
}

fn c8_fits() -> Outcome {
    let mut out = Vec::new();
    for (n, pl_ref, p0_ref) in [(144, 2e-7, 0.0065), (288, 2e-12, 0.0069)] {
        let f = published_fit(n).unwrap();
        let pl = f.fit.eval(0.001);
        check((pl / pl_ref - 1.0).abs() <= 0.3, format!("[[{n}]] p_L(0.001) = {pl:e}"))?;
        let p0 = pseudo_threshold(&f.fit, f.k).ok_or(format!("[[{n}]] has no pseudo-threshold"))?;
        check((p0 / p0_ref - 1.0).abs() <= 0.1, format!("[[{n}]] p0 = {p0}"))?;
        out.push(format!("[[{n}]] p_L(0.001) = {pl:.2e}, p0 = {p0:.5}"));
    }
    Ok(out.join("; "))
}

fn c9_logical() -> Outcome {
    let c = code(144);
    let triple = find_basis_polynomials(&c, &BasisSearch::default())
        .map_err(|e| e.to_string())?
        .into_iter()
        .next()
        .ok_or("no basis triple")?;
    let basis = LogicalBasis::new(&c, triple).map_err(|e| e.to_string())?;
    basis.verify(&c).map_err(|e| e.to_string())?;
    let mut added = 0;
    for target in [MeasuredLogical::XBar, MeasuredLogical::ZBar] {
        let s = build_ancilla_system(&c, &basis.triple, target, 12).map_err(|e| e.to_string())?;
        check(s.qubits_per_layer() == 30, format!("{target:?} layer has {} qubits", s.qubits_per_layer()))?;
        added += s.added_qubits;
    }
    check(added == 1380, format!("{added} added qubits"))?;
    let mut chains = Vec::new();
    for n in [72, 90, 108, 144, 288, 360] {
        chains.push(plan_duality_swaps(&code(n), 4).map_err(|e| e.to_string())?.chain_length);
    }
    check(chains == [4, 6, 9, 6, 10, 11], format!("chain lengths {chains:?}"))?;
    let depth = plan_duality_swaps(&c, 4).unwrap().cnot_depth;
    check(depth == 132, format!("CNOT depth {depth}"))?;
    Ok(format!("30-qubit layers, labels valid, 1380 added qubits, chains {chains:?}, depth 132"))
}

fn random_code() -> impl Strategy<Value = (usize, usize, [usize; 3], [usize; 3])> {
    (1usize..=12, 1usize..=12)
        .prop_filter("l m <= 72 with room for three terms", |(l, m)| l * m <= 72 && l * m >= 3)
        .prop_flat_map(|(l, m)| {
            let distinct = proptest::sample::subsequence((0..l * m).collect::<Vec<_>>(), 3).prop_shuffle();
            (Just(l), Just(m), distinct.clone(), distinct)
        })
        .prop_map(|(l, m, a, b)| (l, m, [a[0], a[1], a[2]], [b[0], b[1], b[2]]))
}

fn c10_structure() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 200,
        failure_persistence: None,
        rng_algorithm: proptest::test_runner::RngAlgorithm::ChaCha,
        ..Config::default()
    });
    let wheels = Cell::new(0);
    let layouts = Cell::new(0);
    let result = runner.run(&random_code(), |(l, m, ai, bi)| {
        let g = Group::new(l, m).unwrap();
        let poly = |idx: [usize; 3]| BivariatePoly::new(g, idx.iter().map(|&i| g.from_index(i)).collect()).unwrap();
        // build_code checks H^X (H^Z)^T = 0, rank H^X = rank H^Z and both k formulas
        let c = build_code(l, m, poly(ai), poly(bi)).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(c.k, c.n() - 2 * c.hx.rank());
        prop_assert!(c.hx.matmul(&c.hz.transpose()).is_zero());
        prop_assert_eq!(c.components_by_formula(), c.components_by_traversal());
        let t = c.thickness_decomposition();
        prop_assert!(t.is_valid(), "wheel check failed: {:?} {:?}", t.g_a.problems, t.g_b.problems);
        wheels.set(wheels.get() + 1);
        if let Some(layout) = c.toric_layout() {
            prop_assert!(layout.embed(&c).is_ok(), "{:?}", layout.embed(&c).err());
            layouts.set(layouts.get() + 1);
        }
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    Ok(format!(
        "200 random codes: {} wheel decompositions, {} toric layouts, all valid",
        wheels.get(),
        layouts.get()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("parameter table", c1_parameters),
        ("distance", c2_distance),
        ("circuit verification", c3_circuits),
        ("detector model", c4_detector_model),
        ("circuit distance", c5_circuit_distance),
        ("linearity oracle", c6_linearity),
        ("Monte Carlo near threshold", c7_monte_carlo),
        ("fit and threshold", c8_fits),
        ("logical machinery", c9_logical),
        ("structural properties", c10_structure),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {n:>2} PASS  {name}: {msg} [{secs:.1} s]"),
            Err(msg) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {msg} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
