use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlx_core::attribution::{attribute, BaselineSpec, Grid, Method, ScalarTarget};
use vlx_core::data::{build_prompt_sets, generate_dataset, Corpus, PromptSet, SynthConfig};
use vlx_core::fusion::{
    explain_conventional, explain_fused, fuse, fuse_grids, fuse_prompt, per_dimension_maps,
    CacheOutcome, FusedMapRecord, MapStack, StackCache,
};
use vlx_core::model::{DualEncoderModel, ModelConfig};
use vlx_core::VlxError;

fn corpus(side: usize) -> Corpus {
    generate_dataset(10, &SynthConfig::new(side), 41).unwrap()
}

fn model(c: &Corpus, embed_dim: usize, seed: u64) -> DualEncoderModel {
    let mut cfg = ModelConfig::new(c.vocab.clone());
    cfg.image_side = c.config.image_side;
    cfg.patch_size = 4;
    cfg.vision_hidden = 16;
    cfg.text_hidden = 8;
    cfg.embed_dim = embed_dim;
    cfg.init_temperature = 4.0;
    cfg.seed = seed;
    DualEncoderModel::new(cfg).unwrap()
}

fn random_grids(rng: &mut ChaCha8Rng, m: usize, a: usize) -> Vec<Grid> {
    (0..m)
        .map(|_| Grid::from_values(a, a, (0..a * a).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
        .collect()
}

#[test]
fn fuse_matches_a_brute_force_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let maps = random_grids(&mut rng, 8, 4);
    let mut t: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = t.iter().map(|v| v * v).sum::<f64>().sqrt();
    t.iter_mut().for_each(|v| *v /= n);
    let tau = 3.7;
    let fused = fuse_grids(&maps, &t, tau).unwrap();
    for p in 0..16 {
        let mut want = 0.0;
        for i in 0..8 {
            want += tau * t[i] * maps[i].values[p];
        }
        assert!((fused.values[p] - want).abs() <= 1e-12);
    }
}

#[test]
fn singleton_stack_is_the_direct_map() {
    let c = corpus(16);
    let m = model(&c, 1, 2);
    let img = &c.samples[0].image;
    let stack = per_dimension_maps(&m, img, &Method::Saliency).unwrap();
    let direct = attribute(&m, img, &ScalarTarget::EmbeddingDim(0), &Method::Saliency).unwrap();
    assert_eq!(stack.maps, vec![direct.grid]);
}

#[test]
fn stacks_are_reproducible() {
    let c = corpus(16);
    let m = model(&c, 6, 3);
    let img = &c.samples[1].image;
    let a = per_dimension_maps(&m, img, &Method::Saliency).unwrap();
    let b = per_dimension_maps(&m, img, &Method::Saliency).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
}

#[test]
fn fused_maps_equal_direct_logit_attribution() {
    let c = corpus(16);
    let m = model(&c, 6, 4);
    let img = &c.samples[2].image;
    let t = m.encode_prompt(&c.samples[7].caption).unwrap();
    for method in [
        Method::Saliency,
        Method::IntegratedGradients {
            steps: 16,
            baseline: BaselineSpec::Constant { value: 0.0 },
        },
        Method::GradientShap {
            samples: 6,
            mean: 0.5,
            std: 0.25,
            seed: 3,
            fixed_alpha: None,
        },
        Method::Occlusion {
            window: 4,
            stride: 2,
            fill: 0.1,
        },
    ] {
        let stack = per_dimension_maps(&m, img, &method).unwrap();
        let fused = fuse(&stack, &t, m.tau()).unwrap();
        let direct = attribute(&m, img, &ScalarTarget::SimilarityLogit(t.clone()), &method).unwrap();
        for (a, b) in fused.values.iter().zip(&direct.grid.values) {
            assert!((a - b).abs() <= 1e-10, "{}", method.name());
        }
    }
}

#[test]
fn cache_serves_later_prompts_without_rebuilding() {
    let c = corpus(16);
    let m = model(&c, 6, 5);
    let img = &c.samples[3].image;
    let method = Method::Occlusion {
        window: 4,
        stride: 4,
        fill: 0.2,
    };
    let cache = StackCache::in_memory();
    let (first, o1) = explain_fused(&m, img, "large circle at the center", &method, &cache).unwrap();
    let (_, o2) = explain_fused(&m, img, "small square at the upper left", &method, &cache).unwrap();
    let (again, o3) = explain_fused(&m, img, "large circle at the center", &method, &cache).unwrap();
    assert_eq!((o1, o2, o3), (CacheOutcome::Built, CacheOutcome::Memory, CacheOutcome::Memory));
    assert_eq!((cache.builds(), cache.hits()), (1, 2));
    assert_eq!(first, again);

    let uncached = fuse_prompt(&m, &per_dimension_maps(&m, img, &method).unwrap(), "large circle at the center").unwrap();
    assert_eq!(uncached.grid, first.grid);
}

#[test]
fn disk_cache_survives_a_new_session() {
    let c = corpus(16);
    let m = model(&c, 4, 6);
    let img = &c.samples[4].image;
    let dir = tempfile::tempdir().unwrap();
    let (a, built) = explain_fused(&m, img, "circle", &Method::Saliency, &StackCache::with_dir(dir.path())).unwrap();
    let (b, loaded) = explain_fused(&m, img, "circle", &Method::Saliency, &StackCache::with_dir(dir.path())).unwrap();
    assert_eq!((built, loaded), (CacheOutcome::Built, CacheOutcome::Disk));
    assert_eq!(a, b);
}

#[test]
fn stale_stack_is_refused() {
    let c = corpus(16);
    let m = model(&c, 4, 7);
    let other = model(&c, 4, 8);
    let stack = per_dimension_maps(&m, &c.samples[0].image, &Method::Saliency).unwrap();
    assert!(matches!(
        fuse_prompt(&other, &stack, "circle"),
        Err(VlxError::Staleness { .. })
    ));
    assert!(matches!(
        fuse(&stack, &[1.0, 0.0], 1.0),
        Err(VlxError::Dimension { .. })
    ));
}

#[test]
fn stack_file_roundtrip() {
    let c = corpus(16);
    let m = model(&c, 3, 9);
    let stack = per_dimension_maps(
        &m,
        &c.samples[5].image,
        &Method::IntegratedGradients {
            steps: 4,
            baseline: BaselineSpec::Noise {
                mean: 0.4,
                std: 0.1,
                seed: 2,
            },
        },
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.vlxs");
    stack.save(&path).unwrap();
    assert_eq!(MapStack::load(&path).unwrap(), stack);
    assert_eq!(&std::fs::read(&path).unwrap()[..4], b"VLXS");
}

#[test]
fn fused_json_roundtrip() {
    let c = corpus(16);
    let m = model(&c, 3, 10);
    let stack = per_dimension_maps(&m, &c.samples[6].image, &Method::Saliency).unwrap();
    let fused = fuse_prompt(&m, &stack, "small triangle at the lower left").unwrap();
    let record: FusedMapRecord = serde_json::from_str(&fused.to_json().unwrap()).unwrap();
    assert_eq!(record, fused.record());
    assert_eq!(record.a, 16);
    assert_eq!(record.values.len(), 256);
    assert_eq!(serde_json::to_string_pretty(&record).unwrap(), fused.to_json().unwrap());
}

#[test]
fn conventional_examples() {
    let c = corpus(16);
    let m = model(&c, 4, 11);
    let img = &c.samples[7].image;
    let single = vec![PromptSet::new("circle", vec!["circle".into()]).unwrap()];
    let map = explain_conventional(&m, img, &single, 0, &Method::Saliency).unwrap();
    assert!(map.grid.values.iter().all(|&v| v == 0.0));

    let set = build_prompt_sets(&["circle".to_string()], 3, 0).unwrap().remove(0);
    let twins = vec![set.clone(), PromptSet { label: "other".into(), ..set }];
    let a = explain_conventional(&m, img, &twins, 0, &Method::Saliency).unwrap();
    let b = explain_conventional(&m, img, &twins, 1, &Method::Saliency).unwrap();
    assert_eq!(a.grid, b.grid);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fuse_is_linear_in_the_weights(
        seed in any::<u64>(),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
        tau in 0.05f64..100.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let maps = random_grids(&mut rng, 6, 5);
        let u: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| alpha * a + beta * b).collect();
        let fw = fuse_grids(&maps, &w, tau).unwrap();
        let fu = fuse_grids(&maps, &u, tau).unwrap();
        let fv = fuse_grids(&maps, &v, tau).unwrap();
        for p in 0..25 {
            let want = alpha * fu.values[p] + beta * fv.values[p];
            prop_assert!((fw.values[p] - want).abs() <= 1e-12 * tau.max(1.0) * 16.0);
        }
    }

    #[test]
    fn temperature_scales_and_keeps_argmax(seed in any::<u64>(), tau in 0.05f64..100.0, k in 0u32..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let maps = random_grids(&mut rng, 4, 6);
        let t: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        // Powers of two keep the rescaling exact.
        let c = 2f64.powi(k as i32 - 2);
        let base = fuse_grids(&maps, &t, tau).unwrap();
        let scaled = fuse_grids(&maps, &t, c * tau).unwrap();
        for (a, b) in base.values.iter().zip(&scaled.values) {
            prop_assert_eq!(c * a, *b);
        }
        let argmax = |g: &Grid| vlx_core::numeric::argmax(&g.values);
        prop_assert_eq!(argmax(&base), argmax(&scaled));
    }

    #[test]
    fn one_hot_weights_select_a_map(seed in any::<u64>(), k in 0usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let maps = random_grids(&mut rng, 5, 3);
        let mut t = vec![0.0; 5];
        t[k] = 1.0;
        prop_assert_eq!(&fuse_grids(&maps, &t, 1.0).unwrap(), &maps[k]);
    }
}
