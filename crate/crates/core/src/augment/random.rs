use rand::Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::Distribution;

use crate::corpus::LabeledCorpus;
use crate::error::{Error, Result};
use crate::seeding::rng_from_seed;
use crate::theory::AugmentationPlan;

/// Two-step resampling: draw a class `k` with probability `w_k`, then copy a
/// uniformly chosen training document of class `k`. Returns the original
/// documents followed by the `plan.m` copies.
pub fn random_oversample(
    corpus: &LabeledCorpus,
    plan: &AugmentationPlan,
    seed: u64,
) -> Result<LabeledCorpus> {
    if plan.n != corpus.len() {
        return Err(Error::invalid(format!(
            "plan is for n = {} but the corpus has {} documents",
            plan.n,
            corpus.len()
        )));
    }
    if plan.weights().len() != 2 {
        return Err(Error::invalid("binary corpora need two class weights"));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, d) in corpus.docs().iter().enumerate() {
        by_class[d.label as usize].push(i);
    }
    for (k, &w) in plan.weights().iter().enumerate() {
        if w > 0.0 && by_class[k].is_empty() {
            return Err(Error::MissingClass(k as u8));
        }
    }
    let mut out = corpus.clone();
    if plan.m == 0 {
        return Ok(out);
    }
    let class_dist = WeightedIndex::new(plan.weights())
        .map_err(|e| Error::invalid(format!("class weights: {e}")))?;
    let mut rng = rng_from_seed(seed);
    for _ in 0..plan.m {
        let pool = &by_class[class_dist.sample(&mut rng)];
        let pick = pool[rng.random_range(0..pool.len())];
        out.push(corpus.docs()[pick].clone())?;
    }
    Ok(out)
}
