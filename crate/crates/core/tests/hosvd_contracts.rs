use nalgebra::DMatrix;
use proptest::prelude::*;
use stotiht::hosvd::{discarded_energy, random_tucker, svd_thin};
use stotiht::rng;
use stotiht::{hosvd_truncate, project_rank_r, reconstruct, DenseTensor, Matrix, RankTuple, Shape};

fn to_nalgebra(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(m.rows(), m.cols(), m.data())
}

proptest! {
    #[test]
    fn singular_values_match_nalgebra(rows in 1usize..9, cols in 1usize..9, seed in any::<u64>()) {
        let m = Matrix::random_gaussian(rows, cols, &mut rng::from_seed(seed));
        let ours = svd_thin(&m).unwrap();
        let mut theirs: Vec<f64> = to_nalgebra(&m).singular_values().iter().copied().collect();
        theirs.sort_by(|a, b| b.total_cmp(a));
        prop_assert_eq!(ours.s.len(), theirs.len());
        for (a, b) in ours.s.iter().zip(&theirs) {
            prop_assert!((a - b).abs() <= 1e-10 * theirs[0]);
        }
        let back = ours.reconstruct();
        let err = back.data().iter().zip(m.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-10 * m.frobenius_norm());
    }

    #[test]
    fn projection_properties(seed in any::<u64>()) {
        let mut g = rng::from_seed(seed);
        let shape = Shape::new(vec![4, 5, 3]).unwrap();
        let rank = RankTuple::for_shape(vec![2, 2, 2], &shape).unwrap();
        let x = DenseTensor::random_gaussian(shape, &mut g);
        let p = project_rank_r(&x, &rank).unwrap();
        let pp = project_rank_r(&p, &rank).unwrap();
        prop_assert!(pp.distance(&p).unwrap() <= 1e-8 * p.frobenius_norm().max(1.0));
        prop_assert!(p.frobenius_norm() <= x.frobenius_norm() + 1e-10);
    }
}

#[test]
fn exact_low_rank_reconstruction() {
    let mut g = rng::from_seed(10);
    for (dims, ranks) in [
        (vec![5, 5, 6], vec![1, 2, 2]),
        (vec![4, 6, 3, 2], vec![2, 3, 1, 2]),
        (vec![7, 3], vec![2, 2]),
        (vec![6], vec![1]),
    ] {
        let shape = Shape::new(dims).unwrap();
        let rank = RankTuple::for_shape(ranks, &shape).unwrap();
        for _ in 0..10 {
            let x = reconstruct(&random_tucker(&shape, &rank, &mut g).unwrap()).unwrap();
            let t = hosvd_truncate(&x, &rank).unwrap();
            for u in &t.factors {
                assert!(u.orthonormality_defect() <= 1e-10);
            }
            assert_eq!(t.core.shape().dims(), rank.ranks());
            let back = reconstruct(&t).unwrap();
            assert!(back.distance(&x).unwrap() <= 1e-10 * x.frobenius_norm());
            let p = project_rank_r(&x, &rank).unwrap();
            assert!(p.distance(&x).unwrap() <= 1e-10 * x.frobenius_norm());
        }
    }
}

#[test]
fn truncation_error_within_discarded_energy() {
    let mut g = rng::from_seed(11);
    let shape = Shape::new(vec![5, 5, 6]).unwrap();
    let rank = RankTuple::for_shape(vec![1, 2, 2], &shape).unwrap();
    for _ in 0..50 {
        let x = DenseTensor::random_gaussian(shape.clone(), &mut g);
        let t = hosvd_truncate(&x, &rank).unwrap();
        for u in &t.factors {
            assert!(u.orthonormality_defect() <= 1e-10);
        }
        let err2 = reconstruct(&t).unwrap().distance(&x).unwrap().powi(2);
        let bound = discarded_energy(&x, &rank).unwrap();
        assert!(err2 <= bound * (1.0 + 1e-12), "{err2} > {bound}");
    }
}

/// Left singular vectors from `svd_thin` span the same space as nalgebra's.
#[test]
fn hosvd_factors_match_reference_subspace() {
    let mut g = rng::from_seed(12);
    let shape = Shape::new(vec![5, 4, 6]).unwrap();
    let rank = RankTuple::for_shape(vec![2, 3, 2], &shape).unwrap();
    let x = DenseTensor::random_gaussian(shape, &mut g);
    let t = hosvd_truncate(&x, &rank).unwrap();
    for (mode, u) in t.factors.iter().enumerate() {
        let unf = to_nalgebra(&x.unfold(mode).unwrap());
        let svd = unf.svd(true, false);
        let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
        idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let refu = svd.u.unwrap();
        let r = rank.ranks()[mode];
        let ref_lead = DMatrix::from_fn(refu.nrows(), r, |i, j| refu[(i, idx[j])]);
        let ours = to_nalgebra(u);
        let proj_a = &ours * ours.transpose();
        let proj_b = &ref_lead * ref_lead.transpose();
        assert!((proj_a - proj_b).abs().max() <= 1e-10);
    }
}
