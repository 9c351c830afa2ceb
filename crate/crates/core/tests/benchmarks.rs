//! Benchmark generators: structure, determinism and partition properties.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use clflow::benchmarks::{
    benchmark_from_datasets, experience_permutation, nc_benchmark, ni_benchmark,
    permutation_benchmark, rotate_image, rotation_benchmark, BenchmarkInstance, NcOptions,
};
use clflow::data::{
    make_synthetic_split, parse_filelist, targets_of, DatasetRef, SyntheticSpec, TensorDataset,
};
use proptest::prelude::*;

fn split(
    n_classes: usize,
    train_pc: usize,
    test_pc: usize,
    dim: usize,
    seed: u64,
) -> (DatasetRef, DatasetRef) {
    let (tr, te) = make_synthetic_split(&SyntheticSpec {
        n_classes,
        train_per_class: train_pc,
        test_per_class: test_pc,
        input_dim: dim,
        class_separation: 3.0,
        seed,
    })
    .unwrap();
    (tr, te)
}

fn nc(n_exp: usize, seed: u64) -> NcOptions {
    NcOptions {
        n_experiences: n_exp,
        seed,
        ..NcOptions::default()
    }
}

fn classes(bench: &BenchmarkInstance, stream: &str) -> Vec<BTreeSet<usize>> {
    let s = if stream == "train" {
        &bench.train_stream
    } else {
        &bench.test_stream
    };
    s.iter()
        .map(|e| e.classes_in_this_experience.clone())
        .collect()
}

/// Checks partition, correspondence, coverage and index invariants of an
/// NC instance built from `train`/`test`.
fn check_nc(bench: &BenchmarkInstance, train: &DatasetRef, test: &DatasetRef) {
    for (stream, src) in [(&bench.train_stream, train), (&bench.test_stream, test)] {
        let mut seen = Vec::new();
        for (i, e) in stream.iter().enumerate() {
            assert_eq!(e.index, i);
            seen.extend(e.source_indices.clone().unwrap());
            let ys: BTreeSet<usize> = targets_of(e.dataset.as_ref())
                .unwrap()
                .into_iter()
                .collect();
            assert_eq!(ys, e.classes_in_this_experience);
        }
        seen.sort_unstable();
        assert_eq!(seen, (0..src.len()).collect::<Vec<_>>());
    }
    assert_eq!(classes(bench, "train"), classes(bench, "test"));
    let mut union = BTreeSet::new();
    for e in bench.train_stream.iter() {
        union.extend(e.classes_in_this_experience.iter().copied());
        assert_eq!(e.classes_seen_so_far, union);
    }
}

#[test]
fn split_mnist_structure() {
    let (train, test) = split(10, 20, 5, 4, 1);
    let bench = nc_benchmark(&train, &test, &nc(5, 1)).unwrap();
    assert_eq!(bench.n_experiences(), 5);
    for c in classes(&bench, "train") {
        assert_eq!(c.len(), 2);
    }
    check_nc(&bench, &train, &test);
}

#[test]
fn single_experience_holds_every_class() {
    let (train, test) = split(4, 5, 2, 3, 2);
    let bench = nc_benchmark(&train, &test, &nc(1, 2)).unwrap();
    assert_eq!(classes(&bench, "train"), vec![(0..4).collect()]);
}

#[test]
fn fixed_order_is_split_contiguously() {
    let (train, test) = split(4, 5, 2, 3, 3);
    let opts = NcOptions {
        fixed_class_order: Some(vec![3, 1, 2, 0]),
        ..nc(2, 0)
    };
    let bench = nc_benchmark(&train, &test, &opts).unwrap();
    assert_eq!(
        classes(&bench, "train"),
        vec![BTreeSet::from([1, 3]), BTreeSet::from([0, 2])]
    );
    assert_eq!(bench.recipe.class_order, Some(vec![3, 1, 2, 0]));
}

#[test]
fn nc_errors() {
    let (train, test) = split(10, 3, 1, 2, 4);
    assert!(nc_benchmark(&train, &test, &nc(3, 0)).is_err());
    let bad_order = NcOptions {
        fixed_class_order: Some(vec![0, 1, 2]),
        ..nc(2, 0)
    };
    assert!(nc_benchmark(&train, &test, &bad_order).is_err());
    let sizes = NcOptions {
        per_experience_classes: Some(vec![5, 3, 2]),
        ..nc(3, 0)
    };
    let bench = nc_benchmark(&train, &test, &sizes).unwrap();
    let counts: Vec<usize> = classes(&bench, "train").iter().map(BTreeSet::len).collect();
    assert_eq!(counts, vec![5, 3, 2]);
}

#[test]
fn task_labels_and_relabelling() {
    let (train, test) = split(6, 4, 2, 2, 5);
    let opts = NcOptions {
        task_labels: true,
        class_ids_from_zero_per_experience: true,
        ..nc(3, 5)
    };
    let bench = nc_benchmark(&train, &test, &opts).unwrap();
    for stream in [&bench.train_stream, &bench.test_stream] {
        for (i, e) in stream.iter().enumerate() {
            assert_eq!(e.task_labels, BTreeSet::from([i]));
            assert_eq!(e.classes_in_this_experience, BTreeSet::from([0, 1]));
        }
    }
    // Relabelling maps the same source classes identically on both streams.
    for i in 0..3 {
        let tr = &bench.train_stream[i];
        let te = &bench.test_stream[i];
        let mut map = BTreeMap::new();
        for (k, &src) in tr.source_indices.as_ref().unwrap().iter().enumerate() {
            map.insert(train.target(src).unwrap(), tr.dataset.target(k).unwrap());
        }
        for (k, &src) in te.source_indices.as_ref().unwrap().iter().enumerate() {
            assert_eq!(
                map[&test.target(src).unwrap()],
                te.dataset.target(k).unwrap()
            );
        }
    }
}

#[test]
fn ni_sizes() {
    let (train, test) = split(4, 25, 5, 2, 6);
    let bench = ni_benchmark(&train, &test, 4, 6, false).unwrap();
    let sizes: Vec<usize> = bench.train_stream.iter().map(|e| e.len()).collect();
    assert_eq!(sizes, vec![25; 4]);
    assert_eq!(bench.test_stream.len(), 1);
    assert_eq!(bench.test_stream[0].len(), test.len());

    let (small, test) = split(2, 5, 1, 2, 6);
    let bench = ni_benchmark(&small, &test, 3, 6, false).unwrap();
    let mut sizes: Vec<usize> = bench.train_stream.iter().map(|e| e.len()).collect();
    sizes.sort_unstable();
    assert_eq!(sizes, vec![3, 3, 4]);
    assert!(ni_benchmark(&small, &test, 11, 0, false).is_err());
}

#[test]
fn ni_balanced_counts_per_class() {
    let (train, test) = split(2, 50, 5, 2, 7);
    let bench = ni_benchmark(&train, &test, 5, 7, true).unwrap();
    for e in bench.train_stream.iter() {
        let ys = targets_of(e.dataset.as_ref()).unwrap();
        assert_eq!(ys.iter().filter(|&&y| y == 0).count(), 10);
        assert_eq!(ys.iter().filter(|&&y| y == 1).count(), 10);
        assert_eq!(e.task_labels, BTreeSet::from([0]));
    }
}

#[test]
fn permutations() {
    let (train, test) = split(3, 4, 2, 9, 8);
    let bench = permutation_benchmark(&train, &test, 3, 8, true).unwrap();
    for i in 0..train.len() {
        assert_eq!(
            bench.train_stream[0].dataset.get(i).unwrap(),
            train.get(i).unwrap().clone_with_task(0)
        );
    }
    for e in bench.train_stream.iter() {
        assert_eq!(e.classes_in_this_experience, (0..3).collect());
        assert_eq!(e.task_labels, BTreeSet::from([e.index]));
    }
    let p = experience_permutation(9, 8, 1);
    let x = bench.train_stream[1].dataset.get(0).unwrap().x;
    let orig = train.get(0).unwrap().x;
    for (k, &src) in p.iter().enumerate() {
        assert_eq!(x.data()[k], orig.data()[src]);
    }
    assert_eq!(experience_permutation(9, 8, 1), p);
}

trait WithTask {
    fn clone_with_task(self, t: usize) -> Self;
}

impl WithTask for clflow::data::Sample {
    fn clone_with_task(mut self, t: usize) -> Self {
        self.t = t;
        self
    }
}

#[test]
fn rotations() {
    let img = [1.0, 2.0, 3.0, 4.0];
    assert_eq!(rotate_image(&img, 2, 0.0), img.to_vec());
    assert_eq!(rotate_image(&img, 2, 90.0), vec![2.0, 4.0, 1.0, 3.0]);
    let odd: Vec<f64> = (0..9).map(f64::from).collect();
    assert_eq!(rotate_image(&rotate_image(&odd, 3, 180.0), 3, 180.0), odd);

    let (train, test) = split(2, 3, 1, 4, 9);
    let bench = rotation_benchmark(&train, &test, 2, &[0.0, 90.0]).unwrap();
    let x = bench.train_stream[1].dataset.get(0).unwrap().x;
    assert_eq!(
        x.data(),
        rotate_image(train.get(0).unwrap().x.data(), 2, 90.0)
    );
    assert!(rotation_benchmark(&train, &test, 2, &[0.0]).is_err());
    let (bad, bad_test) = split(2, 3, 1, 3, 9);
    assert!(rotation_benchmark(&bad, &bad_test, 1, &[0.0]).is_err());
}

#[test]
fn dataset_lists_pass_through() {
    let (a, t) = split(2, 3, 1, 2, 10);
    let (b, _) = split(2, 4, 1, 2, 11);
    let (c, _) = split(2, 5, 1, 2, 12);
    let bench = benchmark_from_datasets(&[a, b, c], &[t], None).unwrap();
    assert_eq!(bench.train_stream.len(), 3);
    assert_eq!(bench.test_stream.len(), 1);
    let sizes: Vec<usize> = bench.train_stream.iter().map(|e| e.len()).collect();
    assert_eq!(sizes, vec![6, 8, 10]);
    assert!(benchmark_from_datasets(&[], &[], None).is_err());
}

#[test]
fn filelist_datasets_pass_through() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.bin"), [0u8, 255]).unwrap();
    std::fs::write(dir.path().join("b.bin"), [51u8, 102]).unwrap();
    let ds: DatasetRef = Arc::new(parse_filelist("a.bin 0\nb.bin 1 2\n", dir.path()).unwrap());
    let bench = benchmark_from_datasets(std::slice::from_ref(&ds), std::slice::from_ref(&ds), None)
        .unwrap();
    let e = &bench.train_stream[0];
    for i in 0..2 {
        assert_eq!(e.dataset.get(i).unwrap(), ds.get(i).unwrap());
    }
    assert_eq!(e.task_labels, BTreeSet::from([0, 2]));
}

#[test]
fn same_inputs_same_instance() {
    let (train, test) = split(6, 5, 2, 2, 13);
    let a = nc_benchmark(&train, &test, &nc(3, 13)).unwrap();
    let b = nc_benchmark(&train, &test, &nc(3, 13)).unwrap();
    assert_eq!(a.summary(), b.summary());
    for (x, y) in a.train_stream.iter().zip(b.train_stream.iter()) {
        assert_eq!(x.source_indices, y.source_indices);
    }
}

#[test]
fn later_permutations_are_not_idempotent() {
    for seed in 0..100 {
        for i in 1..4 {
            let p = experience_permutation(16, seed, i);
            let twice: Vec<usize> = (0..16).map(|k| p[p[k]]).collect();
            assert_ne!(twice, p, "seed {seed}, experience {i}");
        }
    }
}

fn tiny(n_classes: usize, per_class: usize) -> DatasetRef {
    let n = n_classes * per_class;
    let targets: Vec<usize> = (0..n).map(|i| i % n_classes).collect();
    Arc::new(
        TensorDataset::new((0..n).map(|i| i as f64).collect(), vec![1], targets, None).unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn nc_partition_properties(
        n_classes in 1usize..12,
        per_class in 1usize..6,
        n_exp_pick in 0usize..12,
        seed in any::<u64>(),
        task_labels in any::<bool>(),
    ) {
        let divisors: Vec<usize> = (1..=n_classes).filter(|d| n_classes % d == 0).collect();
        let n_exp = divisors[n_exp_pick % divisors.len()];
        let (train, test) = (tiny(n_classes, per_class), tiny(n_classes, 1));
        let opts = NcOptions { task_labels, ..nc(n_exp, seed) };
        let a = nc_benchmark(&train, &test, &opts).unwrap();
        let b = nc_benchmark(&train, &test, &opts).unwrap();
        prop_assert_eq!(a.summary(), b.summary());
        check_nc(&a, &train, &test);
        for c in classes(&a, "train") {
            prop_assert_eq!(c.len(), n_classes / n_exp);
        }
    }

    #[test]
    fn ni_partition_properties(
        len in 1usize..120,
        n_pick in 1usize..20,
        seed in any::<u64>(),
        balance in any::<bool>(),
    ) {
        let n = 1 + (n_pick - 1) % len;
        let train = tiny(3, len.div_ceil(3));
        let test = tiny(3, 1);
        let a = ni_benchmark(&train, &test, n, seed, balance).unwrap();
        let b = ni_benchmark(&train, &test, n, seed, balance).unwrap();
        prop_assert_eq!(a.summary(), b.summary());
        let sizes: Vec<usize> = a.train_stream.iter().map(|e| e.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let mut all: Vec<usize> = a.train_stream.iter().flat_map(|e| e.source_indices.clone().unwrap()).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..train.len()).collect::<Vec<_>>());
    }

    #[test]
    fn permutations_are_seeded_and_nontrivial(seed in any::<u64>(), d in 2usize..40) {
        let p = experience_permutation(d, seed, 1);
        prop_assert_eq!(&p, &experience_permutation(d, seed, 1));
        let mut sorted = p.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..d).collect::<Vec<_>>());
        prop_assert_eq!(experience_permutation(d, seed, 0), (0..d).collect::<Vec<_>>());
    }
}
