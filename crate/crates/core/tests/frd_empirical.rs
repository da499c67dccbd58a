//! Monte Carlo check of the finite-range decomposition in d = 2: the summed
//! components reproduce the covariance of the field they were built from.

use gffpin_core::decomposition::FiniteRangeDecomposition;
use gffpin_core::gaussian::{CovarianceSolver, Domain};
use gffpin_core::Site;

#[test]
fn empirical_covariance_matches_solver() {
    let window: Vec<Site> = (-1..=1).flat_map(|a| (-1..=1).map(move |b| vec![a, b])).collect();
    let frd = FiniteRangeDecomposition::new(2, 2, window).unwrap();
    let padded = frd.sampling_region().pad(3 * frd.period());
    let big = CovarianceSolver::new(Domain::box_interior(&padded).unwrap()).unwrap();

    let sites: Vec<Site> = vec![vec![3, 3], vec![4, 4], vec![6, 3], vec![7, 7]];
    assert!(sites.iter().all(|x| frd.is_complete(x)));

    let draws = 3000;
    let mut values = vec![Vec::with_capacity(draws); sites.len()];
    for seed in 0..draws as u64 {
        let s = frd.sample_with(&big, seed).unwrap();
        for (v, x) in values.iter_mut().zip(&sites) {
            v.push(s.total.at(x));
        }
    }

    let mut worst: f64 = 0.0;
    for i in 0..sites.len() {
        for j in i..sites.len() {
            let prod: Vec<f64> = values[i].iter().zip(&values[j]).map(|(a, b)| a * b).collect();
            let n = prod.len() as f64;
            let mean = prod.iter().sum::<f64>() / n;
            let var = prod.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let exact = big.green(&sites[i], &sites[j]).unwrap();
            let z = (mean - exact).abs() / (var / n).sqrt();
            worst = worst.max(z);
            assert!(z < 5.0, "{:?} {:?}: {mean} vs {exact} (z = {z:.2})", sites[i], sites[j]);
        }
    }
    println!("worst z-score {worst:.2}");
}
