use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::synth::{Location, SizeWord};
use super::PromptSet;
use crate::error::{Result, VlxError};

/// Every prompt the templates can produce for `label`, canonical sentence
/// first. Templates vary the size and location wording around the label.
pub fn prompt_pool(label: &str) -> Vec<String> {
    let sizes = [SizeWord::Large, SizeWord::Small];
    let mut pool = vec![format!("large {label} at the center")];
    for size in sizes {
        for loc in Location::ALL {
            let p = format!("{} {label} at the {}", size.word(), loc.words());
            if p != pool[0] {
                pool.push(p);
            }
        }
    }
    for loc in Location::ALL {
        pool.push(format!("{label} at the {}", loc.words()));
    }
    for size in sizes {
        pool.push(format!("{} {label}", size.word()));
    }
    pool
}

/// `k` distinct prompts per class: the canonical sentence plus `k - 1`
/// templates drawn from the rest of the pool by a seeded shuffle. Every
/// class gets the same templates, so no class is favoured by the size and
/// location wording of its prompts.
pub fn build_prompt_sets(classes: &[String], k: usize, seed: u64) -> Result<Vec<PromptSet>> {
    if classes.is_empty() {
        return Err(VlxError::Parameter("no classes to build prompts for".into()));
    }
    if k == 0 {
        return Err(VlxError::Parameter("need at least one prompt per class".into()));
    }
    let pool_len = prompt_pool("").len();
    if pool_len < k {
        return Err(VlxError::Parameter(format!(
            "template pool has {pool_len} prompts, {k} requested"
        )));
    }
    let mut picks: Vec<usize> = (1..pool_len).collect();
    picks.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    picks.truncate(k - 1);
    picks.insert(0, 0);
    classes
        .iter()
        .map(|label| {
            let pool = prompt_pool(label);
            PromptSet::new(label.clone(), picks.iter().map(|&i| pool[i].clone()).collect())
        })
        .collect()
}

/// The bare class label as a one-word prompt, one set per class.
pub fn label_prompt_sets(sets: &[PromptSet]) -> Vec<PromptSet> {
    sets.iter()
        .map(|s| PromptSet {
            label: s.label.clone(),
            prompts: vec![s.label.clone()],
        })
        .collect()
}
