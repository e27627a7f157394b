use std::f64::consts::PI;

use proptest::prelude::*;
use vlx_core::data::{
    build_prompt_sets, generate_composite, generate_dataset, Shape, label_prompt_sets, load_image, read_corpus, write_corpus,
    SynthConfig,
};
use vlx_core::model::tokenize;

#[test]
fn class_frequencies_are_near_uniform() {
    let config = SynthConfig::new(32);
    let corpus = generate_dataset(2000, &config, 0).unwrap();
    let mut counts = vec![0usize; config.n_classes];
    for s in &corpus.samples {
        counts[s.class_id] += 1;
    }
    let uniform = 1.0 / config.n_classes as f64;
    for c in counts {
        assert!((c as f64 / 2000.0 - uniform).abs() <= 0.05, "{c}");
    }
}

#[test]
fn corpus_roundtrips_through_disk() {
    let corpus = generate_dataset(12, &SynthConfig::new(16), 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), &corpus).unwrap();
    for name in ["corpus.json", "img_0.pgm", "mask_11.pgm"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let back = read_corpus(dir.path()).unwrap();
    assert_eq!(back.vocab, corpus.vocab);
    for (a, b) in back.samples.iter().zip(&corpus.samples) {
        assert_eq!(a.caption, b.caption);
        assert_eq!(a.class_id, b.class_id);
        assert_eq!(a.image.mask(), b.image.mask());
        // PGM stores 8-bit pixels.
        for (x, y) in a.image.pixels().iter().zip(b.image.pixels()) {
            assert!((x - y).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }
    let img = load_image(&dir.path().join("img_3.pgm"), 16).unwrap();
    assert_eq!(img.pixels(), back.samples[3].image.pixels());
}

#[test]
fn label_prompts_are_bare_labels() {
    let classes: Vec<String> = SynthConfig::new(32).class_names();
    let sets = build_prompt_sets(&classes, 10, 4).unwrap();
    let labels = label_prompt_sets(&sets);
    for (set, label) in sets.iter().zip(&labels) {
        assert_eq!(label.prompts, vec![set.label.clone()]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generation_is_a_pure_function_of_seed(seed in any::<u64>(), n in 1usize..6) {
        let config = SynthConfig::new(32);
        let a = generate_dataset(n, &config, seed).unwrap();
        let b = generate_dataset(n, &config, seed).unwrap();
        prop_assert_eq!(a.vocab, b.vocab);
        for (x, y) in a.samples.iter().zip(&b.samples) {
            prop_assert_eq!(&x.image, &y.image);
            prop_assert_eq!(&x.caption, &y.caption);
        }
    }

    #[test]
    fn samples_satisfy_their_contracts(seed in any::<u64>(), side in prop::sample::select(vec![16usize, 32, 64])) {
        let config = SynthConfig::new(side);
        let corpus = generate_dataset(8, &config, seed).unwrap();
        let min_pixels = PI * (config.min_size as f64).powi(2) / 8.0;
        for s in &corpus.samples {
            prop_assert!(s.image.pixels().iter().all(|p| (0.0..=1.0).contains(p)));
            let mask = s.image.mask().unwrap();
            prop_assert!(mask.iter().filter(|&&m| m).count() as f64 >= min_pixels);
            let tokens = tokenize(&s.caption, &corpus.vocab).unwrap();
            prop_assert_eq!(tokens.unknown_count(), 0);
            prop_assert!(s.caption.contains(s.spec.shape.name()));
        }
    }

    #[test]
    fn prompts_are_distinct_and_name_their_class(seed in any::<u64>(), k in 1usize..=10) {
        let classes = SynthConfig::new(32).class_names();
        let corpus = generate_dataset(400, &SynthConfig::new(16), 0).unwrap();
        let sets = build_prompt_sets(&classes, k, seed).unwrap();
        for (set, class) in sets.iter().zip(&classes) {
            prop_assert_eq!(set.prompts.len(), k);
            let mut unique = set.prompts.clone();
            unique.sort();
            unique.dedup();
            prop_assert_eq!(unique.len(), k);
            for p in &set.prompts {
                prop_assert!(p.split_whitespace().any(|w| w == class));
                prop_assert_eq!(tokenize(p, &corpus.vocab).unwrap().unknown_count(), 0);
            }
        }
    }

    #[test]
    fn composites_hold_two_disjoint_shapes(seed in any::<u64>(), a in 0usize..4, b in 0usize..4, side in prop::sample::select(vec![16usize, 32, 64])) {
        prop_assume!(a != b);
        let config = SynthConfig::new(side);
        let c = generate_composite(&config, Shape::ALL[a], Shape::ALL[b], seed).unwrap();
        let floor = PI * (config.min_size as f64).powi(2) / 8.0;
        for mask in [&c.first_mask, &c.second_mask] {
            prop_assert!(mask.iter().filter(|&&m| m).count() as f64 >= floor);
        }
        prop_assert!(c.first_mask.iter().zip(&c.second_mask).all(|(x, y)| !(x & y)));
        prop_assert_eq!(c.first.shape, Shape::ALL[a]);
    }
}
