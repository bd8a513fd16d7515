//! End-to-end acceptance checks. Each check prints one PASS/FAIL line; the
//! test fails if any check fails.

use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::{Duration, Instant};

use clap::Parser;
use fairsumm_cli::commands::{build_sweep, Cli, Command};
use fairsumm_cli::pipeline::{evaluate_corpus, Matcher};
use fairsumm_core::attribution::{rule_match, softmax_distribution, ScoreVector};
use fairsumm_core::ingest::save_corpus;
use fairsumm_core::metrics::{auc, auc_exact, bur, sof, uer, underrepresentation_gaps};
use fairsumm_core::model::SplitMode;
use fairsumm_core::synth::{
    degenerate_pair, disjoint_fixture, generate_mixture, lead_summary, oracle_distribution, run_separation,
    synthetic_pool, DegenerateKind, MixtureSpec, PoolSpec,
};
use fairsumm_core::{AttributeSpec, FairnessConfig, Provenance, Sample, SourceUnit, SummaryRecord, ValueDistribution};
use fairsumm_harness::{render_prompt, Addon, PromptTemplate, TemplateId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(), String>;
type Named<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        // bound first so a NaN comparison counts as a failure
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn dist(w: &[f64], p: Provenance) -> ValueDistribution {
    ValueDistribution::new(w.to_vec(), p).unwrap()
}

fn random_simplex(rng: &mut ChaCha8Rng, r: usize) -> Vec<f64> {
    loop {
        // a value is zeroed now and then to exercise the boundary
        let raw: Vec<f64> = (0..r)
            .map(|_| if rng.gen_bool(0.1) { 0.0 } else { rng.gen::<f64>() })
            .collect();
        let total: f64 = raw.iter().sum();
        if total > 1e-3 {
            return raw.iter().map(|x| x / total).collect();
        }
    }
}

// Brute-force references, written from the definitions.

fn ref_bur(py: &[f64], pg: &[f64], tau: f64) -> f64 {
    let mut unfair = false;
    for k in 0..py.len() {
        if py[k] < tau * pg[k] {
            unfair = true;
        }
    }
    if unfair {
        1.0
    } else {
        0.0
    }
}

fn ref_uer(py: &[f64], pg: &[f64]) -> f64 {
    let mut total = 0.0;
    for k in 0..py.len() {
        if py[k] > pg[k] {
            total += py[k] - pg[k];
        }
    }
    total / py.len() as f64
}

fn ref_auc(py: &[f64], pg: &[f64], n: usize) -> f64 {
    let mut total = 0.0;
    for j in 1..=n {
        let tau = (2 * j - 1) as f64 / (2 * n) as f64;
        total += ref_bur(py, pg, tau);
    }
    total / n as f64
}

fn ref_sof(gap_sets: &[Vec<f64>]) -> f64 {
    let r = gap_sets[0].len();
    let mut s = vec![0.0; r];
    for set in gap_sets {
        for k in 0..r {
            s[k] += set[k];
        }
    }
    for v in s.iter_mut() {
        *v /= gap_sets.len() as f64;
    }
    let centre: f64 = s.iter().sum::<f64>() / r as f64;
    s.iter().map(|v| (v - centre).abs()).sum::<f64>() / r as f64
}

fn ref_gaps(py: &[f64], pg: &[f64]) -> Vec<f64> {
    (0..py.len())
        .map(|k| if pg[k] > py[k] { pg[k] - py[k] } else { 0.0 })
        .collect()
}

fn metric_arithmetic() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..1000 {
        let r = 2 + i % 4;
        let (y, g) = (random_simplex(&mut rng, r), random_simplex(&mut rng, r));
        let tau: f64 = rng.gen_range(0.0..=1.0);
        let (py, pg) = (dist(&y, Provenance::Target), dist(&g, Provenance::Gold));

        let b = f64::from(bur(&py, &pg, tau).unwrap().indicator());
        ensure!(b == ref_bur(&y, &g, tau), "BUR mismatch at instance {i}");
        let u = uer(&py, &pg).unwrap();
        ensure!(
            (u - ref_uer(&y, &g)).abs() <= 1e-12,
            "UER mismatch at instance {i}: {u}"
        );
        let a = auc(&py, &pg, 10).unwrap();
        ensure!(
            (a - ref_auc(&y, &g, 10)).abs() <= 1e-12,
            "AUC mismatch at instance {i}: {a}"
        );
        let gaps = underrepresentation_gaps(&py, &pg).unwrap();
        let s = sof(std::slice::from_ref(&gaps)).unwrap();
        ensure!(
            (s - ref_sof(&[ref_gaps(&y, &g)])).abs() <= 1e-12,
            "SOF mismatch at instance {i}: {s}"
        );
    }
    // dataset-level SOF over batches of equal arity
    for batch in 0..50 {
        let r = 2 + batch % 4;
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..20)
            .map(|_| (random_simplex(&mut rng, r), random_simplex(&mut rng, r)))
            .collect();
        let ours: Vec<Vec<f64>> = pairs
            .iter()
            .map(|(y, g)| underrepresentation_gaps(&dist(y, Provenance::Target), &dist(g, Provenance::Gold)).unwrap())
            .collect();
        let theirs: Vec<Vec<f64>> = pairs.iter().map(|(y, g)| ref_gaps(y, g)).collect();
        ensure!(
            (sof(&ours).unwrap() - ref_sof(&theirs)).abs() <= 1e-12,
            "dataset SOF mismatch in batch {batch}"
        );
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(())
}

fn worked_fixture() -> Check {
    let attr = AttributeSpec::new("gender", vec!["male".into(), "female".into()]).unwrap();
    // p_x = [0.5, 0.5]; the summary has 3 male and 7 female tokens
    let sample = Sample::new(
        "worked",
        attr,
        vec![
            SourceUnit::new("a b c d e", "male"),
            SourceUnit::new("f g h i j", "female"),
        ],
    )
    .with_summary(SummaryRecord::new("sys", "a b c f g h i j f g"));
    let config = FairnessConfig::default();
    let matcher = Matcher::from_config(&config.matcher, None).unwrap();
    let eval = evaluate_corpus(&[sample], &config, &matcher, 1).map_err(|e| e.to_string())?;
    let m = &eval.samples[0];
    ensure!(m.source == vec![0.5, 0.5], "p_x = {:?}", m.source);
    ensure!(m.target == vec![0.3, 0.7], "p_y = {:?}", m.target);
    ensure!(m.bur == 1, "BUR = {}", m.bur);
    // 0.7 - 0.5 is not exactly 0.2 in binary floating point
    ensure!((m.uer - 0.10).abs() <= f64::EPSILON, "UER = {}", m.uer);
    ensure!(m.auc == 0.40, "AUC = {}", m.auc);
    Ok(())
}

fn identity_suite() -> Check {
    for seed in 0..20u64 {
        for arity in 2..=5 {
            let base = disjoint_fixture(&format!("id-{seed}-{arity}"), arity, 3, seed).unwrap();
            let (sample, summary) = degenerate_pair(&DegenerateKind::FairIdentity, &base).unwrap();
            let attribution = rule_match(&sample, &summary, 1, SplitMode::Fractional).unwrap();
            for step in 0..=20 {
                let config = FairnessConfig {
                    tolerance: step as f64 / 20.0,
                    ..Default::default()
                };
                let m = fairsumm_core::metrics::evaluate_sample(&sample, "identity", &attribution, &config).unwrap();
                ensure!(
                    m.bur == 0 && m.uer == 0.0 && m.auc == 0.0,
                    "seed {seed} arity {arity} τ {}: BUR {} UER {} AUC {}",
                    config.tolerance,
                    m.bur,
                    m.uer,
                    m.auc
                );
            }
        }
    }
    Ok(())
}

const WORDS: &[&str] = &[
    "claritin", "works", "great", "sneeze", "allergy", "pills", "made", "me", "tired", "day", "night", "mom", "d", "30",
];

fn random_text(rng: &mut ChaCha8Rng, max: usize) -> String {
    let n = rng.gen_range(1..=max);
    (0..n)
        .map(|_| {
            let w = WORDS[rng.gen_range(0..WORDS.len())];
            // punctuation and case noise exercise the tokenizer
            match rng.gen_range(0..6) {
                0 => w.to_uppercase(),
                1 => format!("{w},"),
                2 => format!("({w})"),
                _ => w.to_string(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn attribution_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut compared = 0;
    for i in 0..1000 {
        let r = rng.gen_range(2..=4);
        let attr = AttributeSpec::new("g", (0..r).map(|k| format!("v{k}")).collect()).unwrap();
        let units = (0..rng.gen_range(1..=6))
            .map(|_| SourceUnit::new(random_text(&mut rng, 8), format!("v{}", rng.gen_range(0..r))))
            .collect();
        let sample = Sample::new(format!("f{i}"), attr, units);
        // a copied span makes longer k-grams match now and then
        let copied = &sample.units[rng.gen_range(0..sample.units.len())].text;
        let text = format!("{} {copied} {}", random_text(&mut rng, 4), random_text(&mut rng, 4));
        let summary = SummaryRecord::new("s", text);
        let k = rng.gen_range(1..=3);
        let split = if rng.gen_bool(0.5) {
            SplitMode::Fractional
        } else {
            SplitMode::Full
        };
        match (
            rule_match(&sample, &summary, k, split),
            oracle_distribution(&sample, &summary, k, split),
        ) {
            (Ok(a), Ok(b)) => {
                ensure!(
                    a.target_distribution.weights() == b.weights(),
                    "fixture {i}: {:?} vs {:?}",
                    a.target_distribution.weights(),
                    b.weights()
                );
                compared += 1;
            }
            (Err(_), Err(_)) => {}
            (a, b) => {
                return Err(format!(
                    "fixture {i}: matcher {:?} but oracle {:?}",
                    a.is_ok(),
                    b.is_ok()
                ))
            }
        }
    }
    ensure!(compared > 500, "only {compared} fixtures had a non-degenerate match");

    let attr = AttributeSpec::new("gender", vec!["male".into(), "female".into()]).unwrap();
    let sample = Sample::new(
        "five",
        attr,
        vec![
            SourceUnit::new("claritin works great", "male"),
            SourceUnit::new("claritin made me sneeze", "female"),
        ],
    );
    // "but" and "causes" are unmatched: 2 of 5 tokens
    let r = rule_match(
        &sample,
        &SummaryRecord::new("s", "claritin works but causes sneeze"),
        1,
        SplitMode::Fractional,
    )
    .unwrap();
    ensure!(
        r.hallucination_mass == 0.4,
        "hallucination mass {}",
        r.hallucination_mass
    );
    Ok(())
}

fn separation() -> Check {
    let start = Instant::now();
    let attr = AttributeSpec::new("gender", vec!["male".into(), "female".into()]).unwrap();
    let pool = synthetic_pool(
        attr,
        &PoolSpec {
            units_per_value: vec![100, 400],
            seed: 11,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let report = run_separation(&pool, 0, 5, 0..100, 0.8).map_err(|e| e.to_string())?;
    ensure!(report.gold == vec![0.2, 0.8], "gold {:?}", report.gold);
    ensure!(report.biased.n == 100 && report.balanced.n == 100, "condition sizes");
    let gap = report.biased.mean_uer - report.balanced.mean_uer;
    ensure!(
        gap > 0.2,
        "UER gap {gap} (biased {}, balanced {})",
        report.biased.mean_uer,
        report.balanced.mean_uer
    );
    ensure!(report.biased.mean_bur == 1.0, "biased BUR {}", report.biased.mean_bur);
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(())
}

fn write_random_corpus(path: &Path, seed: u64, samples: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attr = AttributeSpec::new("gender", vec!["male".into(), "female".into()]).unwrap();
    let pool = synthetic_pool(
        attr,
        &PoolSpec {
            units_per_value: vec![60, 60],
            seed,
            ..Default::default()
        },
    )
    .unwrap();
    let corpus: Vec<Sample> = (0..samples)
        .map(|i| {
            let p: f64 = rng.gen_range(0.1..0.9);
            let spec = MixtureSpec {
                ratio: dist(&[p, 1.0 - p], Provenance::Source),
                n_units: 6,
                seed: seed + i as u64,
            };
            let sample = generate_mixture(&format!("s{i:03}"), &spec, &pool).unwrap();
            let lead = lead_summary(&sample, "lead");
            // a noisy extract: random source words plus a few invented ones
            let words: Vec<String> = sample
                .units
                .iter()
                .flat_map(|u| u.text.split(' ').map(str::to_string))
                .collect();
            let mut picked: Vec<String> = (0..rng.gen_range(3..12))
                .map(|_| words[rng.gen_range(0..words.len())].clone())
                .collect();
            picked.push("novel".into());
            sample
                .with_summary(lead)
                .with_summary(SummaryRecord::new("noisy", picked.join(" ")))
        })
        .collect();
    save_corpus(&corpus, path).unwrap();
}

fn sweep_args(args: &[&str]) -> fairsumm_cli::commands::SweepArgs {
    match Cli::try_parse_from(std::iter::once("fairsumm").chain(args.iter().copied()))
        .unwrap()
        .command
    {
        Command::Sweep(s) => s,
        _ => unreachable!(),
    }
}

fn monotone_sweep(dir: &Path) -> Check {
    for seed in 0..5 {
        let path = dir.join(format!("sweep-{seed}.jsonl"));
        write_random_corpus(&path, seed, 30);
        let input = path.to_str().unwrap();
        for grid in ["10", "100"] {
            let report = build_sweep(&sweep_args(&["sweep", "--input", input, "--tau-grid", grid]))
                .map_err(|e| e.to_string())?;
            ensure!(report.curves.len() == 2, "expected two systems");
            for c in &report.curves {
                ensure!(
                    c.bur_pct.windows(2).all(|w| w[0] <= w[1]),
                    "seed {seed}, {}: BUR not monotone {:?}",
                    c.system,
                    c.bur_pct
                );
                let diff = (c.auc_pct - c.auc_exact_pct).abs() / 100.0;
                ensure!(
                    diff <= 0.05,
                    "seed {seed}, {}: AUC midpoint vs exact differ by {diff}",
                    c.system
                );
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for i in 0..1000 {
        let (y, g) = (random_simplex(&mut rng, 2), random_simplex(&mut rng, 2));
        let (py, pg) = (dist(&y, Provenance::Target), dist(&g, Provenance::Gold));
        let diff = (auc(&py, &pg, 10).unwrap() - auc_exact(&py, &pg).unwrap()).abs();
        ensure!(diff <= 0.05 + 1e-12, "instance {i}: |midpoint - exact| = {diff}");
    }
    Ok(())
}

fn softmax_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..1000 {
        let r = rng.gen_range(2..=5);
        let scores: Vec<f64> = (0..r).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let shift = rng.gen_range(-50.0..50.0);
        let t = rng.gen_range(0.05..2.0);
        let a = softmax_distribution(&ScoreVector::new(scores.clone()).unwrap(), t).unwrap();
        let b = softmax_distribution(
            &ScoreVector::new(scores.iter().map(|s| s + shift).collect()).unwrap(),
            t,
        )
        .unwrap();
        for (x, y) in a.weights().iter().zip(b.weights()) {
            ensure!((x - y).abs() <= 1e-12, "instance {i}: shift moved {x} to {y}");
        }
    }
    let d = softmax_distribution(&ScoreVector::new(vec![-1.0, -2.0]).unwrap(), 0.1).unwrap();
    let expected = 1.0 / (1.0 + (-10.0f64).exp());
    ensure!((d.get(0) - expected).abs() <= 1e-9, "weight {} vs {expected}", d.get(0));
    Ok(())
}

fn run_binary(args: &[&str]) -> std::process::Output {
    Process::new(env!("CARGO_BIN_EXE_fairsumm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn determinism(dir: &Path) -> Check {
    let corpus = dir.join("determinism.jsonl");
    write_random_corpus(&corpus, 42, 200);
    let mut outputs = Vec::new();
    for (run, workers) in [("a", "8"), ("b", "8"), ("c", "1")] {
        let out = dir.join(format!("report-{run}.json"));
        let status = run_binary(&[
            "evaluate",
            "--input",
            corpus.to_str().unwrap(),
            "--workers",
            workers,
            "--format",
            "json",
            "--out",
            out.to_str().unwrap(),
        ]);
        ensure!(status.status.success(), "run {run} exited {:?}", status.status.code());
        outputs.push(std::fs::read(&out).unwrap());
    }
    // the output path is part of the embedded run config, so compare with it masked
    let mask =
        |bytes: &[u8], run: &str| String::from_utf8_lossy(bytes).replace(&format!("report-{run}.json"), "report.json");
    ensure!(
        mask(&outputs[0], "a") == mask(&outputs[1], "b"),
        "two 8-worker runs differ"
    );
    ensure!(
        mask(&outputs[0], "a") == mask(&outputs[2], "c"),
        "1-worker and 8-worker runs differ"
    );

    // same path twice gives byte-identical files
    let out = dir.join("report-same.json");
    let args = [
        "evaluate",
        "--input",
        corpus.to_str().unwrap(),
        "--workers",
        "8",
        "--out",
        out.to_str().unwrap(),
    ];
    run_binary(&args);
    let first = std::fs::read(&out).unwrap();
    run_binary(&args);
    ensure!(
        first == std::fs::read(&out).unwrap(),
        "identical invocations wrote different bytes"
    );
    Ok(())
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn prompt_fidelity() -> Check {
    let gender = AttributeSpec::new("gender", vec!["male".into(), "female".into()]).unwrap();
    let reviews = Sample::new(
        "r",
        gender,
        vec![
            SourceUnit::new("mucinex and claritin. (@ cvs pharmacy)", "male"),
            SourceUnit::new("i took a claritin and motrin 30 minutes ago!", "female"),
        ],
    );
    let speakers = AttributeSpec::new("speaker", vec!["PETITIONER".into(), "RESPONDENT".into()]).unwrap();
    let dialogue = Sample::new(
        "d",
        speakers,
        vec![
            SourceUnit::new("The statute is clear on its face.", "PETITIONER"),
            SourceUnit::new("It is not, Your Honor.", "RESPONDENT"),
        ],
    );
    let variants: [(&str, Vec<Addon>); 4] = [
        ("", vec![]),
        ("_sentences3", vec![Addon::SentenceControl(3)]),
        ("_fair40", vec![Addon::FairInstruction(40.0)]),
        (
            "_sentences3_fair40",
            vec![Addon::SentenceControl(3), Addon::FairInstruction(40.0)],
        ),
    ];
    let mut checked = 0;
    for id in TemplateId::ALL {
        let sample = if matches!(id, TemplateId::SupremeCourt | TemplateId::Iq2) {
            &dialogue
        } else {
            &reviews
        };
        for (suffix, addons) in &variants {
            let mut template = PromptTemplate::new(id);
            template.addons = addons.clone();
            let rendered = render_prompt(&template, sample).map_err(|e| e.to_string())?;
            let file = golden_dir().join(format!("{id}{suffix}.txt"));
            let golden = std::fs::read(&file).map_err(|e| format!("{}: {e}", file.display()))?;
            ensure!(
                rendered.as_bytes() == golden.as_slice(),
                "{} differs:\n  got:    {rendered:?}\n  golden: {:?}",
                file.display(),
                String::from_utf8_lossy(&golden)
            );
            checked += 1;
        }
    }
    ensure!(checked == 24, "checked {checked} prompts");
    Ok(())
}

#[test]
fn acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let checks: Vec<Named> = vec![
        ("metric arithmetic matches brute force", Box::new(metric_arithmetic)),
        ("worked fixture BUR 1 / UER 0.10 / AUC 0.40", Box::new(worked_fixture)),
        ("identity suite is fair at every tolerance", Box::new(identity_suite)),
        (
            "rule matcher equals brute-force oracle",
            Box::new(attribution_equivalence),
        ),
        ("biased and balanced mixtures separate", Box::new(separation)),
        (
            "sweep BUR monotone, AUC within one grid cell",
            Box::new(|| monotone_sweep(dir.path())),
        ),
        ("softmax shift invariance and temperature", Box::new(softmax_properties)),
        (
            "reports byte-identical across runs",
            Box::new(|| determinism(dir.path())),
        ),
        ("prompts byte-match golden files", Box::new(prompt_fidelity)),
    ];
    // written past the harness capture so the lines show up in plain `cargo test` output
    let mut stderr = std::io::stderr();
    let mut failed = Vec::new();
    for (name, check) in &checks {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or(p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(()) => {
                let _ = writeln!(stderr, "acceptance PASS  {name} ({ms} ms)");
            }
            Err(why) => {
                let _ = writeln!(stderr, "acceptance FAIL  {name} ({ms} ms): {why}");
                failed.push(*name);
            }
        }
    }
    assert!(failed.is_empty(), "failed checks: {failed:?}");
}
