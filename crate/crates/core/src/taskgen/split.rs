use rand::seq::SliceRandom;

use super::{rng_for, LabeledStatement, Result, Split, TaskgenError};

/// Keeps split shuffles off the generator's random stream for the same seed.
const SPLIT_SALT: u64 = 0x5eed_0000_5711_7000;

/// Stratified train/test split. The train size is `round(fraction · n)`,
/// divided between the classes in proportion, so class balance carries
/// over to both splits. Each returned half is in id order.
pub fn split_dataset(
    ds: &[LabeledStatement],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledStatement>, Vec<LabeledStatement>)> {
    if ds.is_empty() {
        return Err(TaskgenError::EmptyDataset);
    }
    let mut rng = rng_for(seed ^ SPLIT_SALT);
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| ds[i].label);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    let n_train = (train_fraction * ds.len() as f64).round() as usize;
    let pos_train = ((train_fraction * pos.len() as f64).round() as usize)
        .min(n_train)
        .min(pos.len());
    let neg_train = (n_train - pos_train).min(neg.len());

    let mut is_train = vec![false; ds.len()];
    for &i in pos[..pos_train].iter().chain(&neg[..neg_train]) {
        is_train[i] = true;
    }
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(ds.len() - n_train);
    for (s, &t) in ds.iter().zip(&is_train) {
        let mut s = s.clone();
        if t {
            s.split = Some(Split::Train);
            train.push(s);
        } else {
            s.split = Some(Split::Test);
            test.push(s);
        }
    }
    train.sort_by_key(|s| s.id);
    test.sort_by_key(|s| s.id);
    Ok((train, test))
}
