use std::collections::BTreeSet;

use nalgebra::DMatrix;
use proptest::prelude::*;

use drbounds::data::{split_folds, Dataset};

fn dataset() -> impl Strategy<Value = Dataset> {
    (2usize..30, 0usize..5).prop_flat_map(|(n, d)| {
        (
            proptest::collection::vec(-1e6f64..1e6, n),
            proptest::collection::vec(0u8..2, n),
            proptest::collection::vec(-1e3f64..1e3, n * d),
        )
            .prop_map(move |(y, t, x)| {
                let names = (0..d).map(|j| format!("x{j}")).collect();
                Dataset::new(y, t, DMatrix::from_vec(n, d, x), names).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn csv_round_trip_is_exact(ds in dataset()) {
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice(), "y", "t").unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn subset_composition(ds in dataset(), a_mask in 0u32..32, b_mask in 0u32..32) {
        let d = ds.d();
        let a: BTreeSet<usize> = (0..d).filter(|j| a_mask >> j & 1 == 1).collect();
        let b: BTreeSet<usize> = (0..d).filter(|j| b_mask >> j & 1 == 1 && !a.contains(j)).collect();
        let both: BTreeSet<usize> = a.union(&b).copied().collect();
        let first = ds.subset_covariates(&a).unwrap();
        let kept: Vec<usize> = (0..d).filter(|j| !a.contains(j)).collect();
        let relabeled: BTreeSet<usize> = b.iter().map(|j| kept.iter().position(|k| k == j).unwrap()).collect();
        prop_assert_eq!(first.subset_covariates(&relabeled).unwrap(), ds.subset_covariates(&both).unwrap());
    }

    #[test]
    fn folds_are_a_pure_function(n in 2usize..500, k in 2usize..10, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let a = split_folds(n, k, seed).unwrap();
        prop_assert_eq!(&a, &split_folds(n, k, seed).unwrap());
        let sizes = a.sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
}
