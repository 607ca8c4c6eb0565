//! Bisection eigenvalues against an independent dense solve of the same
//! discretization (fixtures/dense_eigs.py).

use gapgrad_core::geometry::WeightSpec;
use gapgrad_core::spectral::{assemble_operator, richardson, solve_spectrum, CircleGrid};

const FIXTURE: &str = include_str!("fixtures/dense_eigs.txt");

fn fixture(n: usize, weight: &str) -> Vec<f64> {
    FIXTURE
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split_whitespace().collect::<Vec<_>>())
        .find(|f| f[0] == n.to_string() && f[1] == weight)
        .map(|f| f[2..].iter().map(|v| v.parse().unwrap()).collect())
        .unwrap()
}

fn spec(weight: &str) -> WeightSpec {
    match weight {
        "ellipse" => WeightSpec::sum_of_powers(2.0, vec![1.0, 2.0]).unwrap(),
        "cube4" => WeightSpec::sum_of_powers(4.0, vec![1.0, 1.0]).unwrap(),
        "one" => WeightSpec::isotropic(3, 2.0, 1.0).unwrap(),
        _ => unreachable!(),
    }
}

fn eigenvalues(weight: &str, n: usize, k: usize) -> Vec<f64> {
    let op = assemble_operator(&spec(weight), &CircleGrid::new(n).unwrap()).unwrap();
    solve_spectrum(&op, k).unwrap().eigenvalues
}

#[test]
fn matches_dense_solve() {
    for (n, weight) in [
        (2048, "ellipse"),
        (2048, "cube4"),
        (2048, "one"),
        (512, "cube4"),
    ] {
        let dense = fixture(n, weight);
        let ours = eigenvalues(weight, n, 5);
        for (a, b) in ours.iter().zip(&dense) {
            assert!(
                (a - b).abs() < 1e-8 * b.abs().max(1.0),
                "{weight} n={n}: {a} vs {b}"
            );
        }
    }
}

#[test]
fn ellipse_weight_against_fine_oracle() {
    let fine = fixture(8192, "ellipse")[1];
    let lambda = eigenvalues("ellipse", 2048, 2)[1];
    assert!(lambda <= 1.0 - 1e-3);
    // Second-order convergence: the n = 2048 error is about 16× the
    // n = 8192 error, so the gap is close to 15/16 of the total.
    assert!((lambda - fine).abs() < 1e-6, "{lambda} vs {fine}");
    let coarse = eigenvalues("ellipse", 1024, 2)[1];
    let extrapolated = richardson(coarse, lambda, 2.0, 2.0);
    assert!(
        (extrapolated - fine).abs() < 5e-8,
        "{extrapolated} vs {fine}"
    );
}

#[test]
fn second_order_convergence() {
    let l: Vec<f64> = [256, 512, 1024, 2048]
        .iter()
        .map(|&n| eigenvalues("cube4", n, 2)[1])
        .collect();
    let ratios: Vec<f64> = l
        .windows(3)
        .map(|w| (w[1] - w[0]) / (w[2] - w[1]))
        .collect();
    for r in ratios {
        assert!((r - 4.0).abs() < 0.2, "ratio {r}");
    }
    let e1 = richardson(l[1], l[2], 2.0, 2.0);
    let e2 = richardson(l[2], l[3], 2.0, 2.0);
    assert!((e1 - e2).abs() < 1e-8, "{e1} vs {e2}");
}
