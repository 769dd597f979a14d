//! Acceptance suite. Prints one line per criterion and exits non-zero if a
//! gated criterion fails. Run with `cargo test --test acceptance`.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use drf::combiners::{average_recover, ConcatLayout};
use drf::data::{generate, Correlation, Dataset, DatasetSpec, ModalitySpec};
use drf::mapping::MappingLog;
use drf::primitive::{output_set, train_exemplar_quantizer, Codebook, Primitive, PrimitiveSpec};
use drf::sample::{Sample, Shape, DEFAULT_GRID};
use drf::set::FiniteSet;
use drf::structures::graph::{graph_train, ArchitectureGraph, GraphConfig, TrainedGraph};
use drf::structures::{observed_tuples, train_associative_layer, train_column, PyramidParams};
use drf::verify::{
    check_average_latent, check_cardinality_chain, check_concat_bijective, check_correlation, check_diversity,
    check_latent_set, check_pyramid_column_corollary, CheckStatus,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ARCH1: &str = include_str!("../../../configs/arch1_al.json");
const ARCH2: &str = include_str!("../../../configs/arch2_columns_al.json");
const ARCH3: &str = include_str!("../../../configs/arch3_columns_mid_al.json");
const PAIRED: &str = include_str!("../../../configs/paired_350.json");

/// Timing limits.
const C1_LIMIT: Duration = Duration::from_secs(10);
const C3_LIMIT: Duration = Duration::from_secs(5);
const C7_LIMIT: Duration = Duration::from_secs(60);
/// Exploratory class-label threshold, reported but not gated.
const C8_LABEL_RATE: f64 = 0.95;

struct Outcome {
    id: &'static str,
    title: &'static str,
    pass: bool,
    gated: bool,
    detail: String,
}

fn outcome(id: &'static str, title: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome {
        id,
        title,
        pass,
        gated: true,
        detail,
    }
}

fn dataset_350() -> Dataset {
    let spec: DatasetSpec = serde_json::from_str(PAIRED).unwrap();
    generate(&spec).unwrap()
}

fn noiseless() -> Dataset {
    let mut spec: DatasetSpec = serde_json::from_str(PAIRED).unwrap();
    for m in &mut spec.modalities {
        m.noise_std = 0.0;
    }
    generate(&spec).unwrap()
}

fn train(text: &str, ds: &Dataset) -> TrainedGraph {
    let g = ArchitectureGraph::new(GraphConfig::from_json(text).unwrap()).unwrap();
    graph_train(&g, ds).unwrap()
}

fn random_set(rng: &mut ChaCha8Rng, len: usize, dims: usize) -> FiniteSet {
    let shape = Shape::vector(dims).unwrap();
    let mut set = FiniteSet::new(shape.clone(), DEFAULT_GRID).unwrap();
    while set.len() < len {
        let v = (0..dims).map(|_| rng.random_range(0.0..1.0)).collect();
        set.insert(Sample::new(shape.clone(), v).unwrap()).unwrap();
    }
    set
}

fn random_quantizers(count: usize) -> Vec<(FiniteSet, Codebook)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    (0..count)
        .map(|_| {
            let len = rng.random_range(2..=200);
            let dims = rng.random_range(1..=4);
            let radius = rng.random_range(0.01..0.8);
            let set = random_set(&mut rng, len, dims);
            let cb = train_exemplar_quantizer(&set, radius, set.shape()).unwrap();
            (set, cb)
        })
        .collect()
}

fn c1() -> Outcome {
    let start = Instant::now();
    let trained = random_quantizers(120);
    let passed = trained
        .iter()
        .filter(|(set, cb)| check_latent_set(set, cb, "q").status == CheckStatus::Passed)
        .count();
    let elapsed = start.elapsed();
    outcome(
        "C1",
        "latent-set suite",
        passed == trained.len() && elapsed < C1_LIMIT,
        format!("{passed}/{} trainings pass, {:.2?} (limit {:?})", trained.len(), elapsed, C1_LIMIT),
    )
}

fn c2() -> Outcome {
    let mut logs: Vec<MappingLog> = random_quantizers(120)
        .iter()
        .map(|(set, cb)| MappingLog::record(cb, set).unwrap())
        .collect();
    let ds = dataset_350();
    for text in [ARCH1, ARCH2, ARCH3] {
        let tg = train(text, &ds);
        let replay = tg.replay(&ds).unwrap();
        for (k, node) in tg.nodes.iter().enumerate() {
            let p = node.model.as_primitive();
            let set = FiniteSet::from_samples(p.shape().clone(), DEFAULT_GRID, replay.inputs[k].iter().cloned()).unwrap();
            logs.push(MappingLog::record(p, &set).unwrap());
        }
    }
    let applicable: Vec<&MappingLog> = logs.iter().filter(|l| l.output_set().len() < l.input_set().len()).collect();
    let passed = applicable.iter().filter(|l| check_diversity(l, "s").passed).count();
    outcome(
        "C2",
        "pigeonhole on every reducing structure",
        passed == applicable.len() && applicable.len() == logs.len(),
        format!("{passed}/{} structures have a shared archetype ({} trained)", applicable.len(), logs.len()),
    )
}

fn c3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut total = 0;
    let mut passed = 0;
    for levels in 1..=3 {
        for _ in 0..20 {
            let len = rng.random_range(10..=60);
            let set = random_set(&mut rng, len, 2);
            let spec = PrimitiveSpec::Exemplar {
                merge_radius: rng.random_range(0.02..0.3),
            };
            let r = check_pyramid_column_corollary(&set, levels, &PyramidParams::identical(spec), "dp");
            total += 1;
            passed += usize::from(r.status == CheckStatus::Passed);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        "C3",
        "pyramid equals column",
        passed == total && elapsed < C3_LIMIT,
        format!("{passed}/{total} (n = 1, 2, 3 x 20 sets), {:.2?} (limit {:?})", elapsed, C3_LIMIT),
    )
}

fn c4() -> Outcome {
    let ds = dataset_350();
    let spec = PrimitiveSpec::Exemplar { merge_radius: 0.1 };
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["digit", "hand"] {
        let set = ds.slot_set(name).unwrap();
        let column = train_column(&set, 3, &spec).unwrap();
        let levels: Vec<usize> = column.level_output_sets(&set).unwrap().iter().map(FiniteSet::len).collect();
        let single = output_set(&spec.train(&set).unwrap(), &set).unwrap().len();
        let top = *levels.last().unwrap();
        let chain = check_cardinality_chain(set.len(), &levels, name);
        ok &= chain.passed && top < single && single < 350 && set.len() == 350;
        parts.push(format!("{name}: 350 > P {single} > DC {top}, levels {levels:?}"));
    }
    outcome("C4", "cardinality chain", ok, parts.join("; "))
}

fn c5() -> Outcome {
    let v = |d| Shape::vector(d).unwrap();
    let layouts = [
        vec![v(3), v(2)],
        vec![v(1), v(4), v(2)],
        vec![v(2), v(1), v(3), v(1), v(2)],
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, parts_shapes) in layouts.into_iter().enumerate() {
        let layout = ConcatLayout::new(parts_shapes).unwrap();
        let r = check_concat_bijective(&layout, 1000, 50 + k as u64, "concat");
        ok &= r.passed && r.cases_run == 1000;
        parts.push(format!("arity {}: {}", layout.arity(), if r.passed { "ok" } else { "FAIL" }));
    }
    outcome("C5", "concatenation is bijective", ok, parts.join(", "))
}

fn independent_2x2() -> Dataset {
    let modality = |name: &str, seed| ModalitySpec {
        name: name.to_string(),
        shape: Shape::vector(2).unwrap(),
        classes: 2,
        samples_per_class: 10,
        noise_std: 0.0,
        seed,
    };
    generate(&DatasetSpec {
        modalities: vec![modality("a", 1), modality("b", 2)],
        correlation: Correlation::Independent,
        label_slot: None,
        grid: DEFAULT_GRID,
    })
    .unwrap()
}

fn al_input_count(ds: &Dataset, slots: &[&str], mode: Correlation) -> (usize, bool) {
    let shapes: Vec<Shape> = slots.iter().map(|s| ds.slot_shape(s).unwrap()).collect();
    let layout = ConcatLayout::new(shapes).unwrap();
    let columns: Vec<Vec<Sample>> = slots.iter().map(|s| ds.slot_values(s).unwrap()).collect();
    let tuples: Vec<Vec<Sample>> = (0..ds.rows()).map(|r| columns.iter().map(|c| c[r].clone()).collect()).collect();
    let spec = PrimitiveSpec::Exemplar { merge_radius: 0.05 };
    let al = train_associative_layer(&tuples, &layout, &spec, ds.grid()).unwrap();
    let inputs = observed_tuples(&tuples, &layout, ds.grid()).unwrap();
    assert_eq!(al.codebook().shape(), inputs.shape());
    let check = check_correlation(&tuples, &inputs, &layout, mode, "al");
    (inputs.len(), check.status == CheckStatus::Passed)
}

fn c6() -> Outcome {
    let slots = ["digit", "hand", "label"];
    let (noisy, noisy_ok) = al_input_count(&dataset_350(), &slots, Correlation::Correlated);
    let (clean, clean_ok) = al_input_count(&noiseless(), &slots, Correlation::Correlated);
    let (ind, ind_ok) = al_input_count(&independent_2x2(), &["a", "b"], Correlation::Independent);
    outcome(
        "C6",
        "correlation semantics",
        noisy == 350 && clean == 5 && ind == 4 && noisy_ok && clean_ok && ind_ok,
        format!("correlated noisy {noisy} (want 350), noiseless {clean} (want 5), independent 2x2 {ind} (want 4)"),
    )
}

fn c7() -> Outcome {
    let start = Instant::now();
    let ds = dataset_350();
    let o: Vec<usize> = [ARCH1, ARCH2, ARCH3]
        .iter()
        .map(|t| train(t, &ds).sink().stats.output_diversity)
        .collect();
    let elapsed = start.elapsed();
    outcome(
        "C7",
        "three-architecture reduction",
        350 > o[0] && o[0] > o[1] && o[1] >= o[2] && elapsed < C7_LIMIT,
        format!("350 > {} > {} >= {}, {:.2?} (limit {:?})", o[0], o[1], o[2], elapsed, C7_LIMIT),
    )
}

/// Rows whose unknown slots complete to exactly the row's own values.
fn exact_completions(tg: &TrainedGraph, ds: &Dataset, known: &[&str]) -> usize {
    tg.source_tuples(ds)
        .unwrap()
        .into_iter()
        .filter(|row| {
            let given: BTreeMap<String, Sample> =
                row.iter().filter(|(k, _)| known.contains(&k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect();
            let done = tg.complete(&given).unwrap();
            row.iter().all(|(k, v)| done.get(k) == Some(v))
        })
        .count()
}

fn c8a() -> Outcome {
    let ds = noiseless();
    let tg = train(ARCH1, &ds);
    let archetypes = tg.sink().stats.output_diversity;
    let exact = exact_completions(&tg, &ds, &["digit"]);
    outcome(
        "C8a",
        "exact partner recovery, noiseless",
        exact == ds.rows(),
        format!(
            "{exact}/{} rows (5 distinct tuples, {archetypes} archetypes after strict reduction)",
            ds.rows()
        ),
    )
}

fn c8b() -> Outcome {
    let ds = dataset_350();
    let tg = train(ARCH1, &ds);
    let labels = ds.labels().unwrap();
    let correct = tg
        .source_tuples(&ds)
        .unwrap()
        .into_iter()
        .enumerate()
        .filter(|(r, row)| {
            let mut known = row.clone();
            known.remove("label");
            tg.complete(&known).unwrap()["label"] == ds.label_sample(labels[*r]).unwrap()
        })
        .count();
    let rate = correct as f64 / ds.rows() as f64;
    Outcome {
        id: "C8b",
        title: "class label recovery, noisy (exploratory)",
        pass: rate >= C8_LABEL_RATE,
        gated: false,
        detail: format!("{correct}/{} = {:.3} (threshold {C8_LABEL_RATE})", ds.rows(), rate),
    }
}

/// Well-separated clusters of one or two multiples of 8. Every archetype of
/// both quantizers is then a multiple of 4, so all means stay on the unit grid.
fn aligned_case(seed: u64) -> FiniteSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = Shape::vector(1).unwrap();
    let mut set = FiniteSet::new(shape.clone(), 1.0).unwrap();
    let clusters = rng.random_range(5..=15);
    let mut base = 0i64;
    for _ in 0..clusters {
        base += 8 * rng.random_range(13..40);
        set.insert(Sample::new(shape.clone(), vec![base as f64]).unwrap()).unwrap();
        if rng.random_bool(0.5) {
            set.insert(Sample::new(shape.clone(), vec![(base + 8) as f64]).unwrap()).unwrap();
        }
    }
    set
}

fn c9() -> Outcome {
    let mut passed = 0;
    let mut cases = 0;
    for seed in 0..20 {
        let set = aligned_case(seed);
        let p1 = train_exemplar_quantizer(&set, 0.5, set.shape()).unwrap();
        let p2 = train_exemplar_quantizer(&set, 9.0, set.shape()).unwrap();
        let check = check_average_latent(&set, &p1, &p2, "avg");
        // Direct replay of the recovery formula as an independent oracle.
        let direct = set.iter().all(|i| {
            let (id1, o1) = p1.encode(i).unwrap();
            let (_, o2) = p2.encode(i).unwrap();
            let o = Sample::vector(o1.values().iter().zip(o2.values()).map(|(a, b)| (a + b) / 2.0).collect()).unwrap();
            let recovered = average_recover(&o, &o2, &p1).unwrap();
            p1.encode(&recovered).unwrap().0 == id1
        });
        cases += set.len();
        passed += usize::from(check.status == CheckStatus::Passed && direct);
    }
    outcome(
        "C9",
        "average_recover round trip",
        passed == 20,
        format!("{passed}/20 seeds, {cases} inputs"),
    )
}

fn c10() -> Outcome {
    let ds = dataset_350();
    let pyramid = r#"{"seed":5,"nodes":[{"name":"p","kind":"pyramid","params":{"levels":3,"merge_radius":0.1,"radius_jitter":0.25,"shape":[8]}}],
        "edges":[{"from":"digit","to":"p","slot":0}],"sources":["digit"],"sink":"p"}"#;
    let configs = [ARCH1, ARCH2, ARCH3, pyramid];
    let identical = configs
        .iter()
        .filter(|t| train(t, &ds).to_json().unwrap() == train(t, &ds).to_json().unwrap())
        .count();
    let regenerated = dataset_350().to_csv_string() == ds.to_csv_string();
    outcome(
        "C10",
        "byte-identical retraining",
        identical == configs.len() && regenerated,
        format!("{identical}/{} model files identical; dataset regenerated identically: {regenerated}", configs.len()),
    )
}

fn main() {
    let criteria: [fn() -> Outcome; 11] = [c1, c2, c3, c4, c5, c6, c7, c8a, c8b, c9, c10];
    let mut gated_failures = 0;
    for run in criteria {
        let o = run();
        let verdict = match (o.pass, o.gated) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "MISS",
        };
        println!("[{verdict}] {:<4} {:<42} {}", o.id, o.title, o.detail);
        if !o.pass && o.gated {
            gated_failures += 1;
        }
    }
    if gated_failures > 0 {
        println!("{gated_failures} gated criteria failed");
        std::process::exit(1);
    }
    println!("all gated criteria passed");
}
