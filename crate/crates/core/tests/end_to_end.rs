use chainkb_core::eval::evaluate;
use chainkb_core::kgraph::WalkConfig;
use chainkb_core::numcore::{derive_rng, AdamConfig};
use chainkb_core::pathmodel::{ModelConfig, ModelShape};
use chainkb_core::synthkg::{generate, SynthData, SynthSpec};
use chainkb_core::training::{build_dataset, train, Dataset, DatasetConfig, PathStore, TrainConfig};
use chainkb_core::{ModelParams, PoolingKind};

fn small_spec() -> SynthSpec {
    SynthSpec {
        n_entities: 80,
        edges_per_relation: 90,
        ..SynthSpec::default()
    }
}

fn setup(seed: u64) -> (SynthData, PathStore, Dataset) {
    let data = generate(&small_spec(), seed).unwrap();
    let mut store = PathStore::new(WalkConfig { max_len: 3, walks: 400 }, seed, data.heads.clone());
    let ds = build_dataset(
        &data.kg,
        &data.heads,
        &data.train,
        DatasetConfig::default(),
        &mut store,
        &mut derive_rng(seed, "dataset", 0),
    )
    .unwrap();
    (data, store, ds)
}

fn fit(data: &SynthData, ds: &Dataset, model: &str, epochs: usize) -> ModelParams {
    let kg = &data.kg;
    let shape = ModelShape {
        relations: kg.num_relations(),
        query_relations: data.heads.len(),
        types: kg.num_types(),
        entities: kg.num_entities(),
    };
    let init = ModelParams::init(ModelConfig::preset(model, 8, 8, 4).unwrap(), shape, &mut derive_rng(1, "init", 0)).unwrap();
    let config = TrainConfig {
        epochs,
        adam: AdamConfig {
            learning_rate: 0.01,
            ..AdamConfig::default()
        },
        seed: 1,
        ..TrainConfig::default()
    };
    train(kg, ds, init, &config).unwrap().params
}

#[test]
fn training_is_reproducible() {
    let (data, _, ds) = setup(11);
    for model in ["pathrnn", "single+ent+types"] {
        assert_eq!(fit(&data, &ds, model, 2), fit(&data, &ds, model, 2), "{model}");
    }
    let (again, _, ds2) = setup(11);
    assert_eq!(ds, ds2);
    assert_eq!(data.test, again.test);
}

#[test]
fn path_sets_do_not_depend_on_request_order() {
    let (data, _, _) = setup(12);
    let pairs: Vec<_> = data.test.iter().map(|t| (t.triple.source, t.triple.target)).collect();
    let walk = WalkConfig { max_len: 3, walks: 100 };
    let mut forward = PathStore::new(walk, 5, data.heads.clone());
    let mut backward = PathStore::new(walk, 5, data.heads.clone());
    for &(s, t) in &pairs {
        forward.paths(&data.kg, s, t).unwrap();
    }
    for &(s, t) in pairs.iter().rev() {
        backward.paths(&data.kg, s, t).unwrap();
    }
    assert!(forward.iter().eq(backward.iter()));
}

#[test]
fn training_beats_the_initial_ranking() {
    let (data, mut store, ds) = setup(13);
    let before = fit(&data, &ds, "single", 0);
    let after = fit(&data, &ds, "single", 20);
    let map = |p: &ModelParams, store: &mut PathStore| {
        evaluate(p, &data.kg, &data.heads, &data.test, store, PoolingKind::LogSumExp)
            .unwrap()
            .map
            .unwrap()
    };
    let (a, b) = (map(&before, &mut store), map(&after, &mut store));
    assert!(b > a && b > 0.8, "MAP {a} -> {b}");
}
