//! Exit criteria, one line each. Runs without the libtest harness so every
//! line is printed; the process fails if any criterion fails.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;

use augeval::augment::{iowa_fit, iowa_generate, random_oversample, IowaVariant};
use augeval::corpus::{generate_synthetic, LabeledCorpus, SyntheticSpec};
use augeval::metrics::{
    balanced_accuracy, optimize_threshold, roc_and_auc, ConfusionCounts, Metric, Objective,
};
use augeval::runner::{
    run_experiment, write_run, ClassifierConfig, CorpusSource, ExperimentConfig, MethodSpec,
    Regime, SyntheticSource, SIGNIFICANCE_LEVEL,
};
use augeval::seeding::{rng_from_seed, Rng as SeededRng};
use augeval::stats::{
    bootstrap_test, modified_band_depth, uniform_grid, BootstrapConfig, CurveEnsemble, GainSample,
    MeanMode,
};
use augeval::theory::{
    corollary1_threshold, example1_m, remap_to_augmented, remap_to_original, AugmentationPlan,
    Kind, PriorVector, ProbVector,
};
use augeval::vectorize::{fit_vocabulary, transform};
use augeval::classify::ForestConfig;
use rand_distr::{Distribution, Normal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn simplex(rng: &mut SeededRng, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

const ROUND_TRIP_TOL: f64 = 1e-12;
const ROUND_TRIP_BUDGET: Duration = Duration::from_secs(1);

fn remap_round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let k = rng.random_range(2..=5);
        let orig = PriorVector::new(simplex(&mut rng, k), Kind::Original).unwrap();
        let aug = PriorVector::new(simplex(&mut rng, k), Kind::Augmented).unwrap();
        let p = ProbVector::new(simplex(&mut rng, k), Kind::Original).unwrap();
        let back = remap_to_original(&remap_to_augmented(&p, &orig, &aug).unwrap(), &orig, &aug).unwrap();
        for (a, b) in p.probs().iter().zip(back.probs()) {
            worst = worst.max((a - b).abs());
        }
    }
    let took = start.elapsed();
    outcome(
        worst <= ROUND_TRIP_TOL && took < ROUND_TRIP_BUDGET,
        format!("max error {worst:.2e} (tol {ROUND_TRIP_TOL:e}), {took:.2?}"),
    )
}

fn cutoff_identity() -> Outcome {
    let spec = SyntheticSpec::tilted(10_000, 0.1, 300, 15.0, 0.8, 2);
    let (corpus, oracle) = generate_synthetic(&spec).unwrap();
    let prior = PriorVector::binary(oracle.prior(), Kind::Original).unwrap();
    let balanced = PriorVector::binary(0.5, Kind::Augmented).unwrap();
    let rule = corollary1_threshold(&prior).unwrap();
    let mut disagreements = 0;
    for d in corpus.docs() {
        let p = oracle.prob_positive(&d.text);
        let q = remap_to_augmented(&ProbVector::binary(p, Kind::Original).unwrap(), &prior, &balanced)
            .unwrap()
            .positive();
        if rule.classify(p) != u8::from(q >= 0.5) {
            disagreements += 1;
        }
    }
    outcome(
        disagreements == 0,
        format!("{disagreements} disagreements on {} documents", corpus.len()),
    )
}

const PRIOR_BAND: f64 = 0.02;

fn augmented_prior_band() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let spec = SyntheticSpec::tilted(2000, 0.1, 100, 10.0, 0.5, 100 + seed);
        let (corpus, _) = generate_synthetic(&spec).unwrap();
        let prior = PriorVector::binary(corpus.positive_ratio(), Kind::Original).unwrap();
        let m = example1_m(corpus.len(), &prior).unwrap();
        let plan = AugmentationPlan::single_class(corpus.len(), m, 1, 2).unwrap();
        let out = random_oversample(&corpus, &plan, seed).unwrap();
        worst = worst.max((out.positive_ratio() - 0.5).abs());
    }
    outcome(
        worst <= PRIOR_BAND,
        format!("max |P_a(Y=1) - 0.5| = {worst:.4} over 50 seeds (band {PRIOR_BAND})"),
    )
}

fn lattice_instance(rng: &mut SeededRng, max_n: usize) -> (Vec<f64>, Vec<u8>) {
    loop {
        let n = rng.random_range(2..=max_n);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..=1000u32)) / 1000.0).collect();
        let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.4))).collect();
        if labels.contains(&0) && labels.contains(&1) {
            return (scores, labels);
        }
    }
}

fn auc_pair_count() -> Outcome {
    let mut rng = rng_from_seed(4);
    let mut mismatches = 0;
    for _ in 0..200 {
        let (scores, labels) = lattice_instance(&mut rng, 200);
        let (mut twice, mut p, mut n) = (0u64, 0u64, 0u64);
        for (i, &li) in labels.iter().enumerate() {
            if li == 1 {
                p += 1;
            } else {
                n += 1;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if li == 1 && lj == 0 {
                    twice += match scores[i].partial_cmp(&scores[j]).unwrap() {
                        std::cmp::Ordering::Greater => 2,
                        std::cmp::Ordering::Equal => 1,
                        std::cmp::Ordering::Less => 0,
                    };
                }
            }
        }
        let brute = twice as f64 / (2 * p * n) as f64;
        let (_, auc) = roc_and_auc(&scores, &labels).unwrap();
        if auc != brute {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} of 200 instances differ"))
}

fn threshold_grid_scan() -> Outcome {
    let mut rng = rng_from_seed(5);
    let mut mismatches = 0;
    for _ in 0..100 {
        let (scores, labels) = lattice_instance(&mut rng, 150);
        let ba_at = |c: f64| {
            let pred: Vec<u8> = scores.iter().map(|&s| u8::from(s >= c)).collect();
            balanced_accuracy(&ConfusionCounts::from_predictions(&pred, &labels).unwrap()).unwrap()
        };
        let grid_best = (0..=10_000)
            .map(|k| ba_at(f64::from(k) / 10_000.0))
            .fold(f64::NEG_INFINITY, f64::max);
        let rule = optimize_threshold(&scores, &labels, Objective::BalancedAccuracy).unwrap();
        if ba_at(rule.cutoff()) != grid_best {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} of 100 instances differ from the grid maximum"))
}

const SIZE_BAND: (f64, f64) = (0.003, 0.017);
const SIZE_BUDGET: Duration = Duration::from_secs(300);

fn bootstrap_size() -> Outcome {
    let start = Instant::now();
    let (i_n, j_n) = (5, 40);
    let between = Normal::new(0.0, 1.0).unwrap();
    let within = Normal::new(0.0, 2.0).unwrap();
    let mut rejections = 0;
    let tests = 2000;
    for t in 0..tests {
        let mut rng = rng_from_seed(60_000 + t);
        let rows: Vec<Vec<f64>> = (0..i_n)
            .map(|_| {
                let m = between.sample(&mut rng);
                (0..j_n).map(|_| m + within.sample(&mut rng)).collect()
            })
            .collect();
        let cfg = BootstrapConfig {
            replicates: 500,
            seed: t,
            mean_mode: MeanMode::Free,
        };
        let r = bootstrap_test(&GainSample::new(rows).unwrap(), &cfg).unwrap();
        if r.significant(SIGNIFICANCE_LEVEL) {
            rejections += 1;
        }
    }
    let rate = f64::from(rejections) / tests as f64;
    let took = start.elapsed();
    outcome(
        (SIZE_BAND.0..=SIZE_BAND.1).contains(&rate) && took < SIZE_BUDGET,
        format!(
            "rejection rate {:.2}% (band {:.1}%..{:.1}%), {took:.2?}",
            100.0 * rate,
            100.0 * SIZE_BAND.0,
            100.0 * SIZE_BAND.1
        ),
    )
}

fn band_depth_brute_force() -> Outcome {
    let mut rng = rng_from_seed(7);
    let grid = uniform_grid(101).unwrap();
    let mut mismatches = 0;
    for _ in 0..50 {
        let n = rng.random_range(3..=15);
        let curves: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..101).map(|_| f64::from(rng.random_range(0..=20u32)) / 20.0).collect())
            .collect();
        let fast = modified_band_depth(&CurveEnsemble::new(grid.clone(), curves.clone()).unwrap());
        let pairs = n * (n - 1) / 2;
        let brute: Vec<f64> = curves
            .iter()
            .map(|f| {
                let mut inside = 0usize;
                for a in 0..n {
                    for b in a + 1..n {
                        for k in 0..101 {
                            let lo = curves[a][k].min(curves[b][k]);
                            let hi = curves[a][k].max(curves[b][k]);
                            if lo <= f[k] && f[k] <= hi {
                                inside += 1;
                            }
                        }
                    }
                }
                inside as f64 / (pairs * 101) as f64
            })
            .collect();
        if fast != brute {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} of 50 ensembles differ"))
}

const LENGTH_TOL: f64 = 0.1;
const FREQ_TOL: f64 = 0.02;

fn iowa_distribution() -> Outcome {
    // class-1 lengths 2, 4, 2, 1: lambda = 9/4; word counts a 4, b 3, c 2
    let corpus = LabeledCorpus::from_pairs(
        "iowa",
        [("a b", 1), ("a a b c", 1), ("b c", 1), ("a", 1), ("d e f", 0), ("d", 0)],
    )
    .unwrap();
    let vocab = Arc::new(fit_vocabulary(&corpus, 1).unwrap());
    let matrix = transform(&corpus, &vocab).unwrap();
    let model = iowa_fit(&matrix, 1, IowaVariant::Frequency).unwrap();
    let lambda = 2.25;
    let g = [("a", 4.0 / 9.0), ("b", 3.0 / 9.0), ("c", 2.0 / 9.0)];
    let fit_ok = (model.lambda - lambda).abs() < 1e-12
        && g.iter().all(|(t, w)| (model.weight_of(t) - w).abs() < 1e-12);

    let generated = iowa_generate(&model, 10_000, 8);
    let mut total = 0usize;
    let mut counts = std::collections::HashMap::new();
    for d in generated.docs() {
        for t in d.text.split_whitespace() {
            total += 1;
            *counts.entry(t.to_owned()).or_insert(0usize) += 1;
        }
    }
    let mean_len = total as f64 / generated.len() as f64;
    let worst_freq = g
        .iter()
        .map(|(t, w)| (counts.get(*t).copied().unwrap_or(0) as f64 / total as f64 - w).abs())
        .fold(0.0, f64::max);
    outcome(
        fit_ok && (mean_len - lambda).abs() <= LENGTH_TOL && worst_freq <= FREQ_TOL,
        format!(
            "mean length {mean_len:.4} vs {lambda} (tol {LENGTH_TOL}), max frequency error {worst_freq:.4} (tol {FREQ_TOL})"
        ),
    )
}

const FINDING_BUDGET: Duration = Duration::from_secs(900);

fn qualitative_finding() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        corpus: CorpusSource::Synthetic(SyntheticSource {
            n_docs: 3000,
            minority_ratio: 0.1,
            ..SyntheticSource::default()
        }),
        train_sizes: vec![500],
        validation_sizes: vec![125],
        test_size: 1000,
        repetitions: 2,
        n_augment_replicates: 8,
        methods: vec![MethodSpec::RandomOversampling],
        classifier: ClassifierConfig::Forest(ForestConfig::default()),
        bootstrap_replicates: 500,
        master_seed: 2024,
        ..ExperimentConfig::default()
    };
    let out = match run_experiment(&cfg) {
        Ok(o) => o,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let ba = |regime: Regime| {
        out.cells
            .iter()
            .find(|c| c.regime == regime)
            .and_then(|c| c.metric(Metric::BalancedAccuracy))
            .cloned()
    };
    let (Some(r1), Some(r2)) = (ba(Regime::BothDefault), ba(Regime::BaseOptimizedVsAugDefault)) else {
        return outcome(false, "missing balanced-accuracy cells");
    };
    let (Some(g1), Some(g2)) = (r1.mean_gain, r2.mean_gain) else {
        return outcome(false, "undefined mean gain");
    };
    let r2_sig_positive = g2 > 0.0 && r2.significant;
    let took = start.elapsed();
    outcome(
        g1 > 0.0 && g2.abs() <= g1 && !r2_sig_positive && took < FINDING_BUDGET,
        format!(
            "regime 1 gain {g1:.4} (p {:?}), regime 2 gain {g2:.4} (p {:?}), {took:.2?}",
            r1.p_value, r2.p_value
        ),
    )
}

fn desk_scale_determinism() -> Outcome {
    let cfg = ExperimentConfig {
        methods: vec![
            MethodSpec::RandomOversampling,
            MethodSpec::Rose(augeval::augment::RoseConfig { shrinkage: 0.5 }),
            MethodSpec::Smote(augeval::augment::SmoteConfig::default()),
        ],
        master_seed: 77,
        ..ExperimentConfig::default()
    }
    .desk_scale();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        match run_experiment(&cfg) {
            Ok(out) => write_run(&out, d.path()).unwrap(),
            Err(e) => return outcome(false, format!("run failed: {e}")),
        }
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("report.csv")).unwrap();
    let (a, b) = (read(&dirs[0]), read(&dirs[1]));
    outcome(a == b && !a.is_empty(), format!("report.csv {} bytes, identical: {}", a.len(), a == b))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("posterior remap round trip", remap_round_trip),
        ("prior cutoff equals balanced remap at 0.5", cutoff_identity),
        ("augmented prior after two-step sampling", augmented_prior_band),
        ("AUC equals pair counting", auc_pair_count),
        ("threshold search equals grid scan", threshold_grid_scan),
        ("bootstrap test size at 1%", bootstrap_size),
        ("band depth equals brute force", band_depth_brute_force),
        ("IOWA length and frequency", iowa_distribution),
        ("gain vanishes once the base cutoff is tuned", qualitative_finding),
        ("desk-scale report is reproducible", desk_scale_determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        println!(
            "criterion {:>2} {} {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 10 criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
