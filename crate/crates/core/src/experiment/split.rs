use crate::augment::{ClassEntry, DatasetManifest};
use crate::error::{Error, Result};
use crate::rng::Rng;

use super::config::SplitSpec;

/// Train sizes for `counts` summing to `round(fraction * total)`. Each class
/// gets the floor or ceiling of `fraction * count` (largest remainders win,
/// earlier classes on ties), clamped to `[1, count - 1]`.
pub fn apportion(counts: &[usize], fraction: f64) -> Vec<usize> {
    let total: usize = counts.iter().sum();
    let target = (fraction * total as f64).round() as usize;
    let mut take: Vec<usize> = counts.iter().map(|&c| (fraction * c as f64).floor() as usize).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    let rem = |i: usize| fraction * counts[i] as f64 - take[i] as f64;
    order.sort_by(|&a, &b| rem(b).total_cmp(&rem(a)).then(a.cmp(&b)));
    let mut missing = target.saturating_sub(take.iter().sum());
    for &i in &order {
        if missing == 0 {
            break;
        }
        if take[i] < counts[i] {
            take[i] += 1;
            missing -= 1;
        }
    }
    for (t, &c) in take.iter_mut().zip(counts) {
        *t = (*t).clamp(1, c.saturating_sub(1).max(1));
    }
    take
}

/// Partition a manifest into train and test manifests.
///
/// Count-only manifests are split by count. With file lists, class `i`'s
/// files are permuted by `Rng(seed).child(i)` and the first ones go to
/// training; both outputs keep the original file order.
pub fn split_dataset(manifest: &DatasetManifest, spec: &SplitSpec) -> Result<(DatasetManifest, DatasetManifest)> {
    spec.validate()?;
    for e in &manifest.entries {
        if e.count < 2 {
            return Err(Error::Split { class: e.class.clone(), count: e.count });
        }
        if !e.files.is_empty() && e.files.len() != e.count {
            return Err(Error::contract(format!(
                "class `{}` lists {} files for count {}",
                e.class,
                e.files.len(),
                e.count
            )));
        }
    }
    let counts: Vec<usize> = manifest.entries.iter().map(|e| e.count).collect();
    let rng = Rng::new(spec.seed);
    let takes = if spec.stratified { apportion(&counts, spec.fraction) } else { pooled_takes(&counts, spec, &rng) };

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, (e, &k)) in manifest.entries.iter().zip(&takes).enumerate() {
        let (tr, te) = if e.files.is_empty() {
            (Vec::new(), Vec::new())
        } else {
            let mut in_train = vec![false; e.count];
            for &j in rng.child(i as u64).permutation(e.count).iter().take(k) {
                in_train[j] = true;
            }
            let (tr, te): (Vec<_>, Vec<_>) = e.files.iter().zip(&in_train).partition(|(_, &t)| t);
            (tr.into_iter().map(|(f, _)| f.clone()).collect(), te.into_iter().map(|(f, _)| f.clone()).collect())
        };
        train.push(ClassEntry { class: e.class.clone(), count: k, proportion: 0.0, files: tr });
        test.push(ClassEntry { class: e.class.clone(), count: e.count - k, proportion: 0.0, files: te });
    }
    let mut train = DatasetManifest { entries: train };
    let mut test = DatasetManifest { entries: test };
    train.recompute_proportions();
    test.recompute_proportions();
    Ok((train, test))
}

/// Per-class train sizes from splitting the pooled samples at random.
fn pooled_takes(counts: &[usize], spec: &SplitSpec, rng: &Rng) -> Vec<usize> {
    let total: usize = counts.iter().sum();
    let k = ((spec.fraction * total as f64).round() as usize).clamp(1, total - 1);
    let owner: Vec<usize> = counts.iter().enumerate().flat_map(|(i, &c)| std::iter::repeat(i).take(c)).collect();
    let mut takes = vec![0; counts.len()];
    for &j in rng.child(u64::MAX).permutation(total).iter().take(k) {
        takes[owner[j]] += 1;
    }
    takes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::presets;
    use std::collections::BTreeSet;

    fn files(class: &str, n: usize) -> (String, Vec<String>) {
        (class.to_string(), (0..n).map(|i| format!("{class}/{i:03}.png")).collect())
    }

    #[test]
    fn augmented_preset_test_total() {
        let (train, test) = split_dataset(
            &presets::augmented_manifest(),
            &SplitSpec { fraction: 25_186.0 / 28_044.0, ..SplitSpec::default() },
        )
        .unwrap();
        assert_eq!(train.total(), 25_186);
        assert_eq!(test.total(), 2_858);
    }

    #[test]
    fn ten_sample_class() {
        let m = DatasetManifest::from_files(vec![files("a", 10)]);
        let (train, test) = split_dataset(&m, &SplitSpec::default()).unwrap();
        assert_eq!((train.total(), test.total()), (9, 1));
    }

    #[test]
    fn partition_property() {
        let m = DatasetManifest::from_files(vec![files("a", 17), files("b", 5), files("c", 2)]);
        let (train, test) = split_dataset(&m, &SplitSpec { seed: 4, ..SplitSpec::default() }).unwrap();
        for ((e, tr), te) in m.entries.iter().zip(&train.entries).zip(&test.entries) {
            let a: BTreeSet<_> = tr.files.iter().collect();
            let b: BTreeSet<_> = te.files.iter().collect();
            assert!(a.is_disjoint(&b));
            let all: BTreeSet<_> = a.union(&b).copied().collect();
            assert_eq!(all, e.files.iter().collect());
            assert!(!tr.files.is_empty() && !te.files.is_empty());
        }
    }

    #[test]
    fn deterministic_and_seed_dependent() {
        let m = DatasetManifest::from_files(vec![files("a", 40)]);
        let s = |seed| split_dataset(&m, &SplitSpec { seed, ..SplitSpec::default() }).unwrap();
        assert_eq!(s(1), s(1));
        assert_ne!(s(1).1, s(2).1);
    }

    #[test]
    fn tiny_class_is_an_error() {
        let m = DatasetManifest::from_files(vec![files("a", 5), files("lonely", 1)]);
        match split_dataset(&m, &SplitSpec::default()) {
            Err(Error::Split { class, count }) => assert_eq!((class.as_str(), count), ("lonely", 1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn apportion_stays_within_one_of_exact() {
        let counts = [7076, 4482, 4022, 1834, 3806, 2038, 4786];
        let f = 0.9;
        let take = apportion(&counts, f);
        for (&t, &c) in take.iter().zip(&counts) {
            assert!((t as f64 - f * c as f64).abs() < 1.0);
        }
        assert_eq!(take.iter().sum::<usize>(), (f * 28_044.0f64).round() as usize);
    }
}
