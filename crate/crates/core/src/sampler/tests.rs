use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;

use super::*;
use crate::dataset::{TagCode, IMAGE_PIXELS};

/// A pack with the given number of samples per class and blank images.
fn pack_with(sizes: &[usize]) -> DatasetPack {
    let tags = (0..sizes.len()).map(|c| TagCode::from_u16(0xB0A1 + c as u16)).collect();
    let mut labels = Vec::new();
    for (c, &n) in sizes.iter().enumerate() {
        labels.extend(core::iter::repeat(c as u32).take(n));
    }
    let n = labels.len();
    DatasetPack::from_parts(tags, labels, vec![0; n * IMAGE_PIXELS]).unwrap()
}

#[test]
fn uniform_batch_of_200() {
    let pack = pack_with(&[3, 5, 7]);
    let b = sample_uniform(&pack, 200, &mut RngStream::new(1)).unwrap();
    assert_eq!(b.len(), 200);
    assert!(b.sample_indices.iter().all(|&i| i < pack.len()));
    assert!(b.sample_indices.iter().zip(&b.labels).all(|(&i, &l)| pack.label(i) == l));
}

#[test]
fn uniform_single_sample() {
    let pack = pack_with(&[1]);
    let b = sample_uniform(&pack, 1, &mut RngStream::new(1)).unwrap();
    assert_eq!(b.sample_indices, vec![0]);
}

#[test]
fn uniform_same_seed_same_batch() {
    let pack = pack_with(&[10, 10]);
    let a = sample_uniform(&pack, 30, &mut RngStream::new(9)).unwrap();
    let b = sample_uniform(&pack, 30, &mut RngStream::new(9)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn uniform_empty_pack() {
    let pack = pack_with(&[0, 0]);
    assert!(matches!(sample_uniform(&pack, 4, &mut RngStream::new(0)), Err(Error::Data(_))));
}

#[test]
fn pairs_of_90_classes() {
    let pack = pack_with(&[4; 100]);
    let b = sample_class_pairs(&pack, 90, &mut RngStream::new(2)).unwrap();
    assert_eq!(b.len(), 180);
    b.check_structure().unwrap();
    let mut distinct = b.labels.clone();
    distinct.dedup();
    assert_eq!(distinct.len(), 90);
    assert!(b.resampled_classes.is_empty());
}

#[test]
fn pairs_exhaust_two_classes() {
    let pack = pack_with(&[3, 3]);
    let b = sample_class_pairs(&pack, 2, &mut RngStream::new(2)).unwrap();
    let mut labels = b.labels.clone();
    labels.sort_unstable();
    assert_eq!(labels, vec![0, 0, 1, 1]);
}

#[test]
fn pairs_from_singleton_class_duplicate() {
    let pack = pack_with(&[1]);
    let b = sample_class_pairs(&pack, 1, &mut RngStream::new(0)).unwrap();
    assert_eq!(b.sample_indices, vec![0, 0]);
    assert_eq!(b.resampled_classes, vec![0]);
}

#[test]
fn pairs_too_few_classes() {
    let pack = pack_with(&[2; 50]);
    match sample_class_pairs(&pack, 90, &mut RngStream::new(0)) {
        Err(Error::Data(msg)) => assert!(msg.contains("40 short"), "{msg}"),
        other => panic!("{other:?}"),
    }
    // empty classes do not count
    let pack = pack_with(&[2, 0, 2]);
    assert!(sample_class_pairs(&pack, 3, &mut RngStream::new(0)).is_err());
}

#[test]
fn groups_of_five_by_forty() {
    let pack = pack_with(&[50; 8]);
    let b = sample_class_groups(&pack, 5, 40, &mut RngStream::new(3)).unwrap();
    assert_eq!(b.len(), 200);
    b.check_structure().unwrap();
    for block in b.sample_indices.chunks(40) {
        let mut v = block.to_vec();
        v.sort_unstable();
        v.dedup();
        assert_eq!(v.len(), 40, "drawn without replacement");
    }
}

#[test]
fn groups_single_sample() {
    let pack = pack_with(&[1, 1]);
    let b = sample_class_groups(&pack, 1, 1, &mut RngStream::new(3)).unwrap();
    assert_eq!(b.len(), 1);
}

#[test]
fn groups_small_class_falls_back() {
    let pack = pack_with(&[10]);
    let b = sample_class_groups(&pack, 1, 40, &mut RngStream::new(3)).unwrap();
    assert_eq!(b.len(), 40);
    assert_eq!(b.resampled_classes, vec![0]);
    assert!(b.sample_indices.iter().all(|&i| i < 10));
}

#[test]
fn check_structure_catches_broken_layout() {
    let mut b = Batch {
        sample_indices: vec![0, 1, 2, 3],
        labels: vec![0, 1, 0, 1],
        structure: BatchStructure::Pairs { classes_per_batch: 2 },
        resampled_classes: vec![],
    };
    assert!(b.check_structure().is_err());
    b.labels = vec![0, 0, 0, 0];
    assert!(b.check_structure().is_err());
    b.labels = vec![1, 1, 0, 0];
    assert!(b.check_structure().is_ok());
}

#[test]
fn uniform_frequencies_are_balanced() {
    let pack = pack_with(&[20; 10]);
    let mut counts = [0usize; 10];
    let mut rng = RngStream::new(12);
    for _ in 0..100 {
        for l in sample_uniform(&pack, 100, &mut rng).unwrap().labels {
            counts[l] += 1;
        }
    }
    // binomial(10000, 0.1): sd = 30
    for c in counts {
        assert!((c as f64 - 1000.0).abs() < 5.0 * 30.0, "{counts:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn structured_batches_hold_invariants(
        sizes in proptest::collection::vec(1usize..12, 2..15),
        classes in 1usize..6,
        per_class in 1usize..10,
        seed in any::<u64>(),
    ) {
        let pack = pack_with(&sizes);
        let classes = classes.min(sizes.len());
        let b = sample_class_groups(&pack, classes, per_class, &mut RngStream::new(seed)).unwrap();
        prop_assert!(b.check_structure().is_ok());
        prop_assert!(b.sample_indices.iter().zip(&b.labels).all(|(&i, &l)| pack.label(i) == l));
        let again = sample_class_groups(&pack, classes, per_class, &mut RngStream::new(seed)).unwrap();
        prop_assert_eq!(&b, &again);

        let p = sample_class_pairs(&pack, classes, &mut RngStream::new(seed)).unwrap();
        prop_assert!(p.check_structure().is_ok());
        prop_assert_eq!(p.len(), 2 * classes);
    }
}
