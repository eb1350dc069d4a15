//! Complex matrices on which nalgebra's SVD converges to a wrong
//! factorization at machine-precision tolerance.

use btnslab::{svd, Tensor, C64};

fn load(name: &str) -> Tensor {
    let path = format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"));
    let (m, n, entries): (usize, usize, Vec<[f64; 2]>) =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    Tensor::new(vec![m, n], entries.iter().map(|e| C64::new(e[0], e[1])).collect()).unwrap()
}

/// `lapack` holds the singular values reported by numpy.linalg.svd.
fn check(name: &str, lapack: &[f64]) {
    let a = load(name);
    let d = svd(&a, &[0], &[1], None, 0.0).unwrap();
    assert_eq!(d.singular_values.len(), lapack.len());
    for (got, want) in d.singular_values.iter().zip(lapack) {
        assert!((got - want).abs() <= 1e-12 * lapack[0], "{name}: σ = {got}, LAPACK {want}");
    }
    let (m, n, r) = (a.shape()[0], a.shape()[1], lapack.len());
    let (u, vt) = (d.left.data(), d.right.data());
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in 0..n {
            let x: C64 = (0..r).map(|k| u[i * r + k] * d.singular_values[k] * vt[k * n + j]).sum();
            worst = worst.max((x - a.data()[i * n + j]).norm());
        }
    }
    assert!(worst <= 1e-11 * a.norm(), "{name}: reconstruction error {worst:e}");
}

#[test]
fn first_hard_matrix() {
    check(
        "svd_hard_12x12.json",
        &[
            5.946018779766544,
            3.2123806036993012,
            1.8640429001318908,
            0.2946351051453569,
            0.25076273846747543,
            0.21835807709553134,
            0.003332945094665612,
            0.0014320463729659153,
            0.0006291516638537435,
            0.00020520465931998309,
            1.5722506908706098e-05,
            7.443262054535855e-06,
        ],
    );
}

#[test]
fn second_hard_matrix() {
    check(
        "svd_hard_12x12_b.json",
        &[
            3.406689913813802,
            2.7035651221740045,
            1.6825495280349774,
            1.3711066139607133,
            0.8767784402784903,
            0.5428375454993117,
            0.16424509479567095,
            0.1575285642768444,
            0.14383156841779787,
            0.09399140122487668,
            0.060091718930527456,
            0.03954385635800679,
        ],
    );
}
