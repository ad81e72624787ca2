use ndarray::{array, Array2};
use num_complex::Complex64;
use proptest::prelude::*;
use wpbc_core::wpbc::{restrict_element, restrict_vector};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn real(d: [[f64; 3]; 3]) -> Array2<Complex64> {
    Array2::from_shape_fn((3, 3), |(i, j)| c(d[i][j], 0.0))
}

fn k2() -> Array2<Complex64> {
    array![
        [c(4.0, 1.0), c(-1.0, 0.5), c(0.25, 0.0)],
        [c(-1.0, 0.5), c(3.0, -2.0), c(-0.75, 1.0)],
        [c(0.25, 0.0), c(-0.75, 1.0), c(2.0, 0.0)]
    ]
}

fn k3() -> Array2<Complex64> {
    array![
        [c(6.0, 0.0), c(1.5, -0.5), c(-2.0, 0.25)],
        [c(1.5, -0.5), c(5.0, 3.0), c(0.5, 0.0)],
        [c(-2.0, 0.25), c(0.5, 0.0), c(1.0, -1.0)]
    ]
}

/// `d_i K_ij d_j` for a real diagonal `D`.
fn scaled(k: &Array2<Complex64>, d: [f64; 3]) -> Array2<Complex64> {
    Array2::from_shape_fn((3, 3), |(i, j)| k[[i, j]] * d[i] * d[j])
}

#[test]
fn worked_hanging_node_matrices() {
    // K2 on (φ3, φ4, φ6), K3 on (φ4, φ5, φ7).
    let d2 = real([[1.0, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 1.0]]);
    let d3 = real([[0.5, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    let r2 = restrict_element(&k2(), &d2).unwrap();
    let r3 = restrict_element(&k3(), &d3).unwrap();
    assert_eq!(r2, scaled(&k2(), [1.0, 0.5, 1.0]));
    assert_eq!(r3, scaled(&k3(), [0.5, 1.0, 1.0]));
    assert_eq!(r2[[1, 1]], c(0.75, -0.5));
    assert_eq!(r3[[0, 0]], c(1.5, 0.0));
    let f = array![c(1.0, 0.0), c(2.0, -4.0), c(3.0, 1.0)];
    assert_eq!(restrict_vector(&f, &d2).unwrap(), array![c(1.0, 0.0), c(1.0, -2.0), c(3.0, 1.0)]);
}

#[test]
fn conforming_hanging_node_coupling() {
    // φ3' = φ3 + φ4/2 and φ4' = φ5 + φ4/2: on K2 the midpoint function φ4
    // carries half of each master.
    let d = real([[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]]);
    let k = k2();
    let r = restrict_element(&k, &d).unwrap();
    let expect = array![
        [k[[0, 0]] + k[[0, 1]] * 0.5 + k[[1, 0]] * 0.5 + k[[1, 1]] * 0.25, (k[[0, 1]] + k[[1, 1]] * 0.5) * 0.5, k[[0, 2]] + k[[1, 2]] * 0.5],
        [(k[[1, 0]] + k[[1, 1]] * 0.5) * 0.5, k[[1, 1]] * 0.25, k[[1, 2]] * 0.5],
        [k[[2, 0]] + k[[2, 1]] * 0.5, k[[2, 1]] * 0.5, k[[2, 2]]]
    ];
    for (a, b) in r.iter().zip(expect.iter()) {
        assert!((a - b).norm() < 1e-15, "{a} vs {b}");
    }
}

#[test]
fn mismatched_shapes_are_rejected() {
    let d = real([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    let k = Array2::<Complex64>::zeros((2, 2));
    assert!(restrict_element(&k, &d).is_err());
}

proptest! {
    #[test]
    fn restriction_conjugates_the_left_factor(
        vals in prop::collection::vec(-3.0f64..3.0, 36),
    ) {
        let k = Array2::from_shape_fn((3, 3), |(i, j)| c(vals[3 * i + j], vals[9 + 3 * i + j]));
        let d = Array2::from_shape_fn((3, 2), |(i, j)| c(vals[18 + 2 * i + j], vals[24 + 2 * i + j]));
        let r = restrict_element(&k, &d).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let mut s = c(0.0, 0.0);
                for i in 0..3 {
                    for j in 0..3 {
                        s += d[[i, a]].conj() * k[[i, j]] * d[[j, b]];
                    }
                }
                prop_assert!((r[[a, b]] - s).norm() <= 1e-12 * (1.0 + s.norm()));
            }
        }
    }
}
