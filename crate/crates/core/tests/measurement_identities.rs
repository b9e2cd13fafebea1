use rand::Rng;
use rand_distr::StandardNormal;
use stotiht::hosvd::random_tucker;
use stotiht::rng::{self, Rng as StreamRng};
use stotiht::sensing::trip_estimate;
use stotiht::{reconstruct, BatchPartition, DenseTensor, RankTuple, SensingOperator, Shape};

fn shape() -> Shape {
    Shape::new(vec![5, 5, 6]).unwrap()
}

fn low_rank(g: &mut StreamRng, rank: &RankTuple) -> DenseTensor {
    reconstruct(&random_tucker(&shape(), rank, g).unwrap()).unwrap()
}

fn gaussian_vec(g: &mut StreamRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| g.sample(StandardNormal)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn adjoint_identity_on_random_pairs() {
    let mut g = rng::from_seed(100);
    let op = SensingOperator::gaussian(shape(), 120, &mut g).unwrap();
    for _ in 0..100 {
        let x = DenseTensor::random_gaussian(shape(), &mut g);
        let y = gaussian_vec(&mut g, 120);
        let lhs = dot(&op.apply(&x).unwrap(), &y);
        let rhs = x.inner(&op.adjoint(&y).unwrap()).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs(), "{lhs} vs {rhs}");
    }
}

#[test]
fn monotone_gradient_identity() {
    let mut g = rng::from_seed(101);
    let rank = RankTuple::for_shape(vec![1, 2, 2], &shape()).unwrap();
    let op = SensingOperator::gaussian(shape(), 360, &mut g).unwrap();
    let y = gaussian_vec(&mut g, 360);
    for _ in 0..100 {
        let x1 = low_rank(&mut g, &rank);
        let x2 = low_rank(&mut g, &rank);
        let diff = x2.sub(&x1).unwrap();
        let gdiff = op.grad_full(&y, &x2).unwrap().sub(&op.grad_full(&y, &x1).unwrap()).unwrap();
        let lhs = diff.inner(&gdiff).unwrap();
        let ad = op.apply(&diff).unwrap();
        let rhs = dot(&ad, &ad) / 360.0;
        assert!((lhs - rhs).abs() <= 1e-12 * rhs, "{lhs} vs {rhs}");
    }
}

fn central_difference(f: impl Fn(&DenseTensor) -> f64, x: &DenseTensor, d: &DenseTensor, h: f64) -> f64 {
    let plus = x.add_scaled(h, d).unwrap();
    let minus = x.add_scaled(-h, d).unwrap();
    (f(&plus) - f(&minus)) / (2.0 * h)
}

#[test]
fn gradients_match_finite_differences() {
    let mut g = rng::from_seed(102);
    let op = SensingOperator::gaussian(shape(), 90, &mut g).unwrap();
    let part = BatchPartition::uniform(90, 25).unwrap();
    let y = gaussian_vec(&mut g, 90);
    for _ in 0..10 {
        let x = DenseTensor::random_gaussian(shape(), &mut g);
        let d = DenseTensor::random_gaussian(shape(), &mut g);
        let fd = central_difference(|t| op.cost_full(&y, t).unwrap(), &x, &d, 1e-5);
        let an = op.grad_full(&y, &x).unwrap().inner(&d).unwrap();
        assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "{fd} vs {an}");
        for i in 0..part.count() {
            let fd = central_difference(|t| op.cost_batch(&part, i, &y, t).unwrap(), &x, &d, 1e-5);
            let an = op.grad_batch(&part, i, &y, &x).unwrap().inner(&d).unwrap();
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "batch {i}: {fd} vs {an}");
        }
    }
}

fn weighted_gradient_sum(op: &SensingOperator, part: &BatchPartition, y: &[f64], x: &DenseTensor) -> DenseTensor {
    let mut acc = DenseTensor::zeros(x.shape().clone());
    let m_batches = part.count() as f64;
    for (i, &p) in part.probabilities().iter().enumerate() {
        let gi = op.grad_batch(part, i, y, x).unwrap();
        acc = acc.add_scaled(p / (m_batches * p), &gi).unwrap();
    }
    acc
}

#[test]
fn stochastic_gradient_is_unbiased() {
    let mut g = rng::from_seed(103);
    let small = Shape::new(vec![2, 3, 2]).unwrap();
    for (m, b, probs) in [
        (360usize, 90usize, None),
        (360, 90, Some(vec![0.1, 0.2, 0.3, 0.4])),
        (10, 3, None),
        (10, 3, Some(vec![0.4, 0.3, 0.2, 0.1])),
    ] {
        let sh = if m == 10 { small.clone() } else { shape() };
        let op = SensingOperator::gaussian(sh.clone(), m, &mut g).unwrap();
        let part = match probs {
            None => BatchPartition::uniform(m, b).unwrap(),
            Some(p) => BatchPartition::with_probabilities(m, b, p).unwrap(),
        };
        let y = gaussian_vec(&mut g, m);
        let x = DenseTensor::random_gaussian(sh, &mut g);
        let full = op.grad_full(&y, &x).unwrap();
        let est = weighted_gradient_sum(&op, &part, &y, &x);
        let err = est.distance(&full).unwrap();
        assert!(err <= 1e-12 * full.frobenius_norm(), "m={m} b={b}: {err}");
    }
}

#[test]
fn batch_gradient_lipschitz_proxy() {
    let mut g = rng::from_seed(104);
    let rank = RankTuple::for_shape(vec![1, 2, 2], &shape()).unwrap();
    let op = SensingOperator::gaussian(shape(), 360, &mut g).unwrap();
    let part = BatchPartition::uniform(360, 90).unwrap();
    let rank2 = rank.scaled_clipped(2, &shape());
    let est = trip_estimate(&op, &part, &rank2, 50, 7).unwrap();
    let delta = est.delta_lower_full.max(est.delta_lower_batch) + 0.1;
    let rho_plus = 2.0 * (1.0 + delta);
    let y = gaussian_vec(&mut g, 360);
    for _ in 0..50 {
        let x1 = low_rank(&mut g, &rank);
        let x2 = low_rank(&mut g, &rank);
        for i in 0..part.count() {
            let gd = op
                .grad_batch(&part, i, &y, &x2)
                .unwrap()
                .distance(&op.grad_batch(&part, i, &y, &x1).unwrap())
                .unwrap();
            assert!(gd <= rho_plus * x2.distance(&x1).unwrap());
        }
    }
}
