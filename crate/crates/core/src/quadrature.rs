//! Gauss quadrature on the reference segment `[0, 1]` and the reference
//! triangle `{(ξ, η) : ξ, η ≥ 0, ξ + η ≤ 1}`.

use std::f64::consts::PI;

/// Points and weights on a reference element. Points are stored as
/// `[ξ, η]`; segment rules leave `η = 0`.
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    /// `n`-point Gauss–Legendre rule on `[0, 1]`, exact for degree `2n - 1`.
    pub fn segment(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        QuadRule {
            points: x.iter().map(|&t| [0.5 * (t + 1.0), 0.0]).collect(),
            weights: w.iter().map(|&w| 0.5 * w).collect(),
        }
    }

    /// Collapsed (Duffy) tensor rule with `n × n` points, exact for total
    /// degree `2n - 2`.
    pub fn triangle(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (i, &xu) in x.iter().enumerate() {
            let u = 0.5 * (xu + 1.0);
            for (j, &xv) in x.iter().enumerate() {
                let v = 0.5 * (xv + 1.0);
                points.push([u, (1.0 - u) * v]);
                weights.push(0.25 * w[i] * w[j] * (1.0 - u));
            }
        }
        QuadRule { points, weights }
    }

    /// Segment rule exact for polynomials of degree `degree`.
    pub fn segment_for_degree(degree: usize) -> Self {
        Self::segment(degree / 2 + 1)
    }

    /// Triangle rule exact for polynomials of total degree `degree`.
    pub fn triangle_for_degree(degree: usize) -> Self {
        Self::triangle(degree.div_ceil(2) + 1)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, Newton iteration from
/// the Chebyshev-like initial guesses.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "quadrature needs at least one point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_and_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_weights_sum_to_length() {
        for n in 1..12 {
            let q = QuadRule::segment(n);
            let s: f64 = q.weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-14, "n={n} sum={s}");
        }
    }

    #[test]
    fn triangle_weights_sum_to_area() {
        for n in 1..10 {
            let q = QuadRule::triangle(n);
            let s: f64 = q.weights.iter().sum();
            assert!((s - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn segment_exactness() {
        // ∫_0^1 t^k dt = 1/(k+1)
        for n in 1..10 {
            let q = QuadRule::segment(n);
            for k in 0..2 * n {
                let v: f64 = q
                    .points
                    .iter()
                    .zip(&q.weights)
                    .map(|(p, w)| w * p[0].powi(k as i32))
                    .sum();
                assert!((v - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn triangle_exactness() {
        // ∫_T ξ^a η^b = a! b! / (a + b + 2)!
        fn fact(n: usize) -> f64 {
            (1..=n).map(|k| k as f64).product()
        }
        for n in 1..8 {
            let q = QuadRule::triangle(n);
            let deg = 2 * n - 2;
            for a in 0..=deg {
                for b in 0..=(deg - a) {
                    let v: f64 = q
                        .points
                        .iter()
                        .zip(&q.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    let exact = fact(a) * fact(b) / fact(a + b + 2);
                    assert!((v - exact).abs() < 1e-14, "n={n} a={a} b={b}");
                }
            }
        }
    }
}
