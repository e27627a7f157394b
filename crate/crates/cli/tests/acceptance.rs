//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Failing criteria are reported
//! but only fail the process when `VLX_ACCEPTANCE_STRICT=1`.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlx_core::attribution::{
    attribute, attribute_all, evaluate, occlusion_maps, saliency_maps, BaselineSpec, Method,
    ScalarTarget, TargetFunction, VisionEmbedding,
};
use vlx_core::data::{
    build_prompt_sets, generate_composite, generate_dataset, Corpus, PromptSet, Shape, SynthConfig,
};
use vlx_core::fusion::{explain_conventional, fuse, per_dimension_maps, StackCache};
use vlx_core::metrics::{localization_mass, mean_pairwise_correlation};
use vlx_core::model::{
    train_contrastive, DualEncoderModel, ImageInput, ModelConfig, TextInput, TrainOptions,
};
use vlx_core::numeric::argmax;
use vlx_core::{Tape, Tensor};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn small_model(corpus: &Corpus, side: usize, patch: usize, embed: usize, seed: u64) -> DualEncoderModel {
    let mut cfg = ModelConfig::new(corpus.vocab.clone());
    cfg.image_side = side;
    cfg.patch_size = patch;
    cfg.embed_dim = embed;
    cfg.seed = seed;
    cfg.init_temperature = 1.0 + (seed % 7) as f64;
    DualEncoderModel::new(cfg).expect("valid config")
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn fusion_linearity() -> Outcome {
    let start = Instant::now();
    let corpus = generate_dataset(40, &SynthConfig::new(32), 11).unwrap();
    let mut worst = [0.0f64; 4];
    let names = ["saliency", "ig", "gradshap", "occlusion"];
    let triples = 20;
    for t in 0..triples {
        let model = small_model(&corpus, 32, 8, 16, 100 + t as u64);
        let img = &corpus.samples[t].image;
        let prompt = &corpus.samples[(t + 17) % corpus.samples.len()].caption;
        let tp = model.encode_prompt(prompt).unwrap();
        let methods = [
            Method::Saliency,
            Method::IntegratedGradients {
                steps: 64,
                baseline: BaselineSpec::Constant { value: 0.0 },
            },
            Method::GradientShap {
                samples: 16,
                mean: 0.5,
                std: 0.25,
                seed: t as u64,
                fixed_alpha: None,
            },
            Method::Occlusion {
                window: 4,
                stride: 4,
                fill: 0.1,
            },
        ];
        for (m, method) in methods.iter().enumerate() {
            let stack = per_dimension_maps(&model, img, method).unwrap();
            let fused = fuse(&stack, &tp, model.tau()).unwrap();
            let direct = attribute(&model, img, &ScalarTarget::SimilarityLogit(tp.clone()), method)
                .unwrap();
            worst[m] = worst[m].max(max_abs_diff(&fused.values, &direct.grid.values));
        }
    }
    let elapsed = start.elapsed();
    let max_err = worst.iter().copied().fold(0.0, f64::max);
    let per: Vec<String> = names
        .iter()
        .zip(worst)
        .map(|(n, e)| format!("{n} {e:.1e}"))
        .collect();
    outcome(
        max_err <= 1e-10 && elapsed <= Duration::from_secs(120),
        format!(
            "{triples} triples, max abs err {} (≤ 1e-10), {:.1}s (≤ 120s)",
            per.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

fn ig_completeness() -> Outcome {
    let corpus = generate_dataset(20, &SynthConfig::new(16), 5).unwrap();
    let mut ok = true;
    let mut worst_rel = 0.0f64;
    let mut non_monotone = 0;
    for case in 0..10u64 {
        let model = small_model(&corpus, 16, 4, 8, 300 + case);
        let img = &corpus.samples[case as usize].image;
        let tp = model.encode_prompt(&corpus.samples[(case as usize + 3) % 20].caption).unwrap();
        let f = TargetFunction::new(&model, ScalarTarget::SimilarityLogit(tp)).unwrap();
        let baseline = match case % 3 {
            // An all-zero image has no defined embedding, so Δf needs a
            // baseline away from it.
            0 => BaselineSpec::Constant { value: 0.1 },
            1 => BaselineSpec::Constant { value: 1.0 },
            _ => BaselineSpec::Noise {
                mean: 0.5,
                std: 0.2,
                seed: case,
            },
        };
        let x = img.to_tensor();
        let b = baseline.materialize(x.shape()).unwrap();
        let delta = evaluate(&f, &x).unwrap()[0] - evaluate(&f, &b).unwrap()[0];
        let scale = delta.abs().max(1.0);
        let errs: Vec<f64> = [32, 64, 128, 256]
            .iter()
            .map(|&steps| {
                let method = Method::IntegratedGradients {
                    steps,
                    baseline: baseline.clone(),
                };
                let map = attribute_all(&f, &x, &method).unwrap().remove(0);
                (map.sum() - delta).abs()
            })
            .collect();
        let rel = errs[3] / scale;
        worst_rel = worst_rel.max(rel);
        ok &= errs[3] <= 1e-3 * scale;
        // Differences below the float noise floor of the sum do not count.
        let noise = 1e-12 * scale;
        for w in errs.windows(2) {
            if w[1] > w[0] + noise {
                non_monotone += 1;
            }
        }
    }
    outcome(
        ok && non_monotone == 0,
        format!(
            "10 cases, worst |Σ−Δ|/max(1,|Δ|) at n=256 {worst_rel:.2e} (≤ 1e-3), {non_monotone} increases over n=32→256"
        ),
    )
}

fn occlusion_brute_force() -> Outcome {
    let corpus = generate_dataset(10, &SynthConfig::new(8), 3).unwrap();
    let configs = [(2, 2), (1, 1), (3, 2), (4, 3), (8, 1)];
    let mut worst_delta = 0.0f64;
    let mut worst_map = 0.0f64;
    let mut windows_checked = 0;
    for (c, &(w, s)) in configs.iter().enumerate() {
        for seed in 0..2u64 {
            let model = small_model(&corpus, 8, 2, 8, 500 + 10 * c as u64 + seed);
            let img = &corpus.samples[(c + seed as usize) % 10].image;
            let fill = 0.3;
            let trace =
                occlusion_maps(&VisionEmbedding::new(&model), &img.to_tensor(), w, s, fill).unwrap();
            let base = model.encode_image(img).unwrap();
            let mut sums = vec![vec![0.0; 64]; model.embed_dim()];
            let mut counts = vec![0usize; 64];
            for (win, got) in trace.windows.iter().zip(&trace.deltas) {
                let mut px = img.pixels().to_vec();
                for r in win.row..win.row + win.size {
                    for col in win.col..win.col + win.size {
                        px[r * 8 + col] = fill;
                        counts[r * 8 + col] += 1;
                    }
                }
                let occluded = model.encode_image(&ImageInput::new(8, px).unwrap()).unwrap();
                for k in 0..model.embed_dim() {
                    let want = base[k] - occluded[k];
                    worst_delta = worst_delta.max((want - got[k]).abs());
                    for r in win.row..win.row + win.size {
                        for col in win.col..win.col + win.size {
                            sums[k][r * 8 + col] += want;
                        }
                    }
                }
                windows_checked += 1;
            }
            for k in 0..model.embed_dim() {
                let want: Vec<f64> = sums[k]
                    .iter()
                    .zip(&counts)
                    .map(|(v, &n)| v / n as f64)
                    .collect();
                worst_map = worst_map.max(max_abs_diff(&want, &trace.maps[k].values));
            }
        }
    }
    outcome(
        worst_delta <= 1e-12 && worst_map <= 1e-12,
        format!(
            "{windows_checked} windows on 8×8 images, max |Δ err| {worst_delta:.1e}, max map err {worst_map:.1e} (≤ 1e-12)"
        ),
    )
}

fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    max_abs_diff(analytic, numeric) / scale
}

fn central_differences(x: &Tensor, h: f64, f: impl Fn(&Tensor) -> f64) -> Vec<f64> {
    (0..x.numel())
        .map(|i| {
            let mut plus = x.clone();
            plus.data_mut()[i] += h;
            let mut minus = x.clone();
            minus.data_mut()[i] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

/// A random scalar graph over a `[r, c]` input, built only from smooth ops.
fn random_graph(seed: u64) -> (Tensor, impl Fn(&mut Tape<'_>, vlx_core::Var) -> vlx_core::Var) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = rng.random_range(2..5);
    let c = rng.random_range(2..6);
    let x = Tensor::new(vec![r, c], (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let hidden = rng.random_range(2..6);
    let w = Tensor::new(
        vec![c, hidden],
        (0..c * hidden).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    let bias = Tensor::row((0..hidden).map(|_| rng.random_range(-0.5..0.5)).collect());
    let mix = Tensor::new(
        vec![r, hidden],
        (0..r * hidden).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    let ops: Vec<u8> = (0..rng.random_range(2..6)).map(|_| rng.random_range(0..7)).collect();
    let graph = move |tape: &mut Tape<'_>, input: vlx_core::Var| {
        let w = tape.constant(w.clone());
        let mut h = tape.matmul(input, w).unwrap();
        for &op in &ops {
            h = match op {
                0 => tape.gelu(h).unwrap(),
                1 => tape.l2_normalize_rows(h).unwrap(),
                2 => tape.softmax_rows(h).unwrap(),
                3 => {
                    let b = tape.constant(bias.clone());
                    tape.add(h, b).unwrap()
                }
                4 => {
                    let m = tape.constant(mix.clone());
                    tape.mul(h, m).unwrap()
                }
                5 => tape.log_softmax_rows(h).unwrap(),
                _ => {
                    let hh = tape.mul(h, h).unwrap();
                    tape.scale(hh, 0.5).unwrap()
                }
            };
        }
        let m = tape.constant(mix.clone());
        let weighted = tape.mul(h, m).unwrap();
        tape.sum(weighted).unwrap()
    };
    (x, graph)
}

fn autodiff_soundness() -> Outcome {
    let h = 1e-4;
    let mut worst = 0.0f64;
    let mut cases = 0;
    for seed in 0..50u64 {
        let (x, graph) = random_graph(seed);
        let mut tape = Tape::new();
        let input = tape.leaf(x.clone());
        let out = graph(&mut tape, input);
        let grad = tape.backward(out).unwrap().get(input).unwrap().data().to_vec();
        let numeric = central_differences(&x, h, |p| {
            let mut t = Tape::new();
            let v = t.constant(p.clone());
            let o = graph(&mut t, v);
            t.value(o).item()
        });
        worst = worst.max(rel_err(&grad, &numeric));
        cases += 1;
    }
    let corpus = generate_dataset(50, &SynthConfig::new(16), 9).unwrap();
    let classes: Vec<String> = ["circle", "square", "triangle", "cross"].map(String::from).to_vec();
    let sets = build_prompt_sets(&classes, 3, 1).unwrap();
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let side = if seed % 2 == 0 { 8 } else { 16 };
        let mut cfg = ModelConfig::new(corpus.vocab.clone());
        cfg.image_side = side;
        cfg.patch_size = [2, 4][rng.random_range(0..2)];
        cfg.vision_hidden = rng.random_range(4..24);
        cfg.text_hidden = rng.random_range(4..16);
        cfg.embed_dim = rng.random_range(2..10);
        cfg.init_temperature = rng.random_range(0.5..10.0);
        cfg.seed = seed;
        let model = DualEncoderModel::new(cfg).unwrap();
        let px: Vec<f64> = (0..side * side).map(|_| rng.random_range(0.0..1.0)).collect();
        let x = Tensor::new(vec![side, side], px).unwrap();
        let target = match seed % 3 {
            0 => ScalarTarget::EmbeddingDim(rng.random_range(0..model.embed_dim())),
            1 => ScalarTarget::SimilarityLogit(model.encode_prompt(&corpus.samples[seed as usize].caption).unwrap()),
            _ => ScalarTarget::ClassProbability {
                class: rng.random_range(0..4),
                prompt_sets: sets.clone(),
            },
        };
        let f = TargetFunction::new(&model, target).unwrap();
        let grad = saliency_maps(&f, &x).unwrap().remove(0).values;
        let numeric = central_differences(&x, h, |p| evaluate(&f, p).unwrap()[0]);
        worst = worst.max(rel_err(&grad, &numeric));
        cases += 1;
    }
    outcome(
        worst <= 1e-4,
        format!("{cases} random graphs and models, worst relative error {worst:.2e} (≤ 1e-4, h = 1e-4)"),
    )
}

struct Trained {
    model: DualEncoderModel,
    held_out: Corpus,
    sets: Vec<PromptSet>,
    config: SynthConfig,
    mean_pixel: f64,
}

fn zero_shot_accuracy(model: &DualEncoderModel, held_out: &Corpus, sets: &[PromptSet]) -> f64 {
    let correct = held_out
        .samples
        .iter()
        .filter(|s| argmax(&model.prompt_classify(&s.image, sets).unwrap()) == s.class_id)
        .count();
    correct as f64 / held_out.samples.len() as f64
}

fn train_seed(seed: u64) -> (Trained, f64, Duration) {
    let config = SynthConfig::new(64);
    let start = Instant::now();
    let corpus = generate_dataset(2000, &config, seed).unwrap();
    let mut mc = ModelConfig::new(corpus.vocab.clone());
    mc.seed = seed;
    mc.init_temperature = 10.0;
    let mut model = DualEncoderModel::new(mc).unwrap();
    let captions: Vec<TextInput> = corpus
        .samples
        .iter()
        .map(|s| model.tokenize(&s.caption).unwrap())
        .collect();
    let pairs: Vec<(&ImageInput, &TextInput)> = corpus
        .samples
        .iter()
        .zip(&captions)
        .map(|(s, c)| (&s.image, c))
        .collect();
    let opts = TrainOptions {
        seed,
        ..TrainOptions::default()
    };
    train_contrastive(&mut model, &pairs, &opts).unwrap();
    let elapsed = start.elapsed();
    let held_out = generate_dataset(200, &config, seed + 1000).unwrap();
    let sets = build_prompt_sets(&config.class_names(), 10, seed).unwrap();
    let acc = zero_shot_accuracy(&model, &held_out, &sets);
    let trained = Trained {
        model,
        held_out,
        sets,
        config,
        mean_pixel: corpus.mean_pixel(),
    };
    (trained, acc, elapsed)
}

fn training_sanity() -> (Outcome, Trained) {
    let mut runs = Vec::new();
    let mut primary = None;
    for seed in 0..3u64 {
        let (trained, acc, elapsed) = train_seed(seed);
        runs.push((seed, acc, elapsed));
        if seed == 0 {
            primary = Some(trained);
        }
    }
    let limit = Duration::from_secs(300);
    let min_acc = runs.iter().map(|r| r.1).fold(1.0, f64::min);
    let pass = runs[0].1 >= 0.90 && min_acc >= 0.85 && runs.iter().all(|r| r.2 <= limit);
    let per: Vec<String> = runs
        .iter()
        .map(|(s, a, t)| format!("seed {s}: {:.1}% in {:.0}s", 100.0 * a, t.as_secs_f64()))
        .collect();
    (
        outcome(
            pass,
            format!(
                "30 epochs, n=2000, A=64, 200 held-out; {} (seed 0 ≥ 90%, min ≥ 85%, each ≤ 300s)",
                per.join(", ")
            ),
        ),
        primary.unwrap(),
    )
}

fn localization(t: &Trained) -> Outcome {
    let class_embs = t.model.class_embeddings(&t.sets).unwrap();
    let mut wins = 0;
    let mut matched = 0.0;
    let mut mismatched = 0.0;
    let n = 100;
    for s in t.held_out.samples.iter().take(n) {
        let stack = per_dimension_maps(&t.model, &s.image, &Method::Saliency).unwrap();
        let mask = s.image.mask().unwrap();
        let mass: Vec<f64> = class_embs
            .iter()
            .map(|e| localization_mass(&fuse(&stack, e, t.model.tau()).unwrap().values, mask).unwrap())
            .collect();
        let k = s.class_id;
        if (0..mass.len()).all(|c| c == k || mass[k] > mass[c]) {
            wins += 1;
        }
        matched += mass[k];
        mismatched += (0..mass.len()).filter(|&c| c != k).map(|c| mass[c]).sum::<f64>()
            / (mass.len() - 1) as f64;
    }
    outcome(
        wins * 5 >= n * 4,
        format!(
            "matching prompt beats every mismatch on {wins}/{n} images (need ≥ 80); mean top-decile mass in mask {:.3} matching vs {:.3} mismatching",
            matched / n as f64,
            mismatched / n as f64
        ),
    )
}

fn focus_shift(t: &Trained) -> Outcome {
    let class_embs = t.model.class_embeddings(&t.sets).unwrap();
    let n = 50u64;
    let mut ok = 0;
    let mut one_sided = 0;
    for i in 0..n {
        let a = Shape::ALL[(i % 4) as usize];
        let b = Shape::ALL[((i % 4) + 1 + (i / 4) % 3) as usize % 4];
        let comp = generate_composite(&t.config, a, b, 9000 + i).unwrap();
        let stack = per_dimension_maps(&t.model, &comp.image, &Method::Saliency).unwrap();
        let fa = fuse(&stack, &class_embs[a.class_id()], t.model.tau()).unwrap().values;
        let fb = fuse(&stack, &class_embs[b.class_id()], t.model.tau()).unwrap().values;
        let a_ok = localization_mass(&fa, &comp.first_mask).unwrap()
            > localization_mass(&fa, &comp.second_mask).unwrap();
        let b_ok = localization_mass(&fb, &comp.second_mask).unwrap()
            > localization_mass(&fb, &comp.first_mask).unwrap();
        if a_ok && b_ok {
            ok += 1;
        } else if a_ok || b_ok {
            one_sided += 1;
        }
    }
    outcome(
        ok * 5 >= n as usize * 4,
        format!("both prompts land on their own shape in {ok}/{n} composites (need ≥ 40); {one_sided} more one-sided"),
    )
}

fn conventional_contrast(t: &Trained) -> Outcome {
    let class_embs = t.model.class_embeddings(&t.sets).unwrap();
    let n = 20;
    let (mut conv, mut fused) = (0.0, 0.0);
    let (mut conv_abs, mut fused_abs) = (0.0, 0.0);
    let mean_r = |maps: &[Vec<f64>]| {
        let refs: Vec<&[f64]> = maps.iter().map(|m| m.as_slice()).collect();
        mean_pairwise_correlation(&refs).unwrap().unwrap_or(0.0)
    };
    let abs = |maps: &[Vec<f64>]| -> Vec<Vec<f64>> {
        maps.iter().map(|m| m.iter().map(|v| v.abs()).collect()).collect()
    };
    for s in t.held_out.samples.iter().take(n) {
        let c: Vec<Vec<f64>> = (0..t.sets.len())
            .map(|k| {
                explain_conventional(&t.model, &s.image, &t.sets, k, &Method::Saliency)
                    .unwrap()
                    .grid
                    .values
            })
            .collect();
        let stack = per_dimension_maps(&t.model, &s.image, &Method::Saliency).unwrap();
        let f: Vec<Vec<f64>> = class_embs
            .iter()
            .map(|e| fuse(&stack, e, t.model.tau()).unwrap().values)
            .collect();
        conv += mean_r(&c);
        fused += mean_r(&f);
        conv_abs += mean_r(&abs(&c));
        fused_abs += mean_r(&abs(&f));
    }
    let n = n as f64;
    let (conv, fused) = (conv / n, fused / n);
    outcome(
        conv > fused,
        format!(
            "saliency, 20 images: inter-class correlation conventional {conv:.3} vs fused {fused:.3}, margin {:.3} (magnitudes: {:.3} vs {:.3})",
            conv - fused,
            conv_abs / n,
            fused_abs / n
        ),
    )
}

fn cache_economics(t: &Trained) -> Outcome {
    let method = Method::Occlusion {
        window: 8,
        stride: 4,
        fill: t.mean_pixel,
    };
    let img = &t.held_out.samples[0].image;
    let cache = StackCache::in_memory();
    let build_start = Instant::now();
    let (stack, first) = cache.get_or_build(&t.model, img, &method).unwrap();
    let build = build_start.elapsed();
    let prompts = ["large circle at the center", "small square at the upper left"];
    let _ = fuse(&stack, &t.model.encode_prompt(prompts[0]).unwrap(), t.model.tau()).unwrap();
    let second_start = Instant::now();
    let (again, outcome_second) = cache.get_or_build(&t.model, img, &method).unwrap();
    let text = t.model.encode_prompt(prompts[1]).unwrap();
    let _ = fuse(&again, &text, t.model.tau()).unwrap();
    let second = second_start.elapsed();
    let ratio = second.as_secs_f64() / build.as_secs_f64();
    outcome(
        !first.is_hit() && outcome_second.is_hit() && cache.builds() == 1 && ratio < 0.05,
        format!(
            "occlusion stack (A=64, M={}) built in {:.3}s, second prompt fused from cache in {:.2}ms ({:.3}% of build, < 5%)",
            stack.embed_dim(),
            build.as_secs_f64(),
            second.as_secs_f64() * 1e3,
            100.0 * ratio
        ),
    )
}

fn run_vlx(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_vlx"))
        .current_dir(dir)
        .args(args)
        .env_remove("VLX_CACHE_DIR")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("vlx {}: {}", args[0], String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn pipeline_once(dir: &Path) -> Result<(Vec<u8>, Vec<u8>), String> {
    run_vlx(dir, &["gen", "--n", "300", "--side", "32", "--seed", "4", "--out", "corpus"])?;
    run_vlx(
        dir,
        &["train", "--corpus", "corpus", "--epochs", "3", "--seed", "4", "--out", "model.vlxm"],
    )?;
    run_vlx(
        dir,
        &[
            "stack", "--model", "model.vlxm", "--image", "corpus/img_7.pgm", "--method", "gradshap",
            "--samples", "8", "--seed", "4", "--out", "stack.vlxs",
        ],
    )?;
    run_vlx(
        dir,
        &[
            "fuse", "--stack", "stack.vlxs", "--model", "model.vlxm", "--prompt",
            "small triangle at the lower right", "--out", "map.json",
        ],
    )?;
    let read = |p: &str| std::fs::read(dir.join(p)).map_err(|e| format!("{p}: {e}"));
    Ok((read("map.json")?, read("model.vlxm")?))
}

fn determinism() -> Outcome {
    let runs: Result<Vec<_>, String> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            pipeline_once(dir.path())
        })
        .collect();
    match runs {
        Ok(r) => {
            let same_map = r[0].0 == r[1].0;
            let same_model = r[0].1 == r[1].1;
            outcome(
                same_map && same_model,
                format!(
                    "gen → train → stack → fuse via the vlx binary twice: map.json {} ({} bytes), checkpoint {}",
                    if same_map { "identical" } else { "differs" },
                    r[0].0.len(),
                    if same_model { "identical" } else { "differs" }
                ),
            )
        }
        Err(e) => outcome(false, format!("pipeline failed: {e}")),
    }
}

fn report(n: usize, name: &str, o: &Outcome, results: &mut Vec<bool>) {
    println!(
        "criterion {n:2} {}: {name}: {}",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
    results.push(o.pass);
}

fn main() {
    // `cargo test` passes harness flags such as `--list`; nothing to list.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut results = Vec::new();
    report(1, "fusion linearity", &fusion_linearity(), &mut results);
    report(2, "IG completeness", &ig_completeness(), &mut results);
    report(3, "occlusion brute force", &occlusion_brute_force(), &mut results);
    report(4, "autodiff soundness", &autodiff_soundness(), &mut results);
    let (training, trained) = training_sanity();
    report(5, "toy training", &training, &mut results);
    report(6, "localization", &localization(&trained), &mut results);
    report(7, "focus shift", &focus_shift(&trained), &mut results);
    report(8, "conventional contrast", &conventional_contrast(&trained), &mut results);
    report(9, "cache economics", &cache_economics(&trained), &mut results);
    report(10, "end-to-end determinism", &determinism(), &mut results);
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    if passed < results.len() && std::env::var("VLX_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
