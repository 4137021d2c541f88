//! Gauss-Legendre and Gauss-Lobatto rules on [0,1], plus tensor rules on the
//! unit square and a collapsed-coordinate rule on the reference triangle
//! {x >= 0, y >= 0, x + y <= 1}.

/// Legendre polynomial value and derivative on [-1,1].
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut pm, mut p) = (1.0, x);
    for k in 1..n {
        let kf = k as f64;
        let pn = ((2.0 * kf + 1.0) * x * p - kf * pm) / (kf + 1.0);
        pm = p;
        p = pn;
    }
    let dp = if x.abs() < 1.0 - 1e-12 {
        n as f64 * (x * p - pm) / (x * x - 1.0)
    } else {
        // endpoint limit: P_n'(±1) = ±^{n+1} n(n+1)/2
        let sgn = if x > 0.0 { 1.0 } else { (-1.0f64).powi(n as i32 + 1) };
        sgn * (n * (n + 1)) as f64 / 2.0
    };
    (p, dp)
}

/// n-point Gauss-Legendre rule on [0,1]; exact for polynomials of degree
/// 2n-1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut pts = vec![0.0; n];
    let mut wts = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        pts[n - 1 - i] = 0.5 * (x + 1.0);
        wts[n - 1 - i] = 0.5 * w;
    }
    (pts, wts)
}

/// n-point Gauss-Lobatto rule on [0,1] (n >= 2), endpoints included; exact
/// for polynomials of degree 2n-3.
pub fn gauss_lobatto(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let m = n - 1;
    let mut pts = vec![0.0; n];
    let mut wts = vec![0.0; n];
    let endpoint_w = 2.0 / (n * m) as f64;
    pts[0] = -1.0;
    pts[n - 1] = 1.0;
    wts[0] = endpoint_w;
    wts[n - 1] = endpoint_w;
    for i in 1..m {
        // interior nodes are the roots of P'_{n-1}
        let mut x = (std::f64::consts::PI * (m - i) as f64 / m as f64).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, x);
            let ddp = (2.0 * x * dp - (m * (m + 1)) as f64 * p) / (1.0 - x * x);
            let dx = dp / ddp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (p, _) = legendre(m, x);
        pts[i] = x;
        wts[i] = 2.0 / ((n * m) as f64 * p * p);
    }
    for i in 0..n {
        pts[i] = 0.5 * (pts[i] + 1.0);
        wts[i] *= 0.5;
    }
    (pts, wts)
}

#[derive(Debug, Clone)]
pub struct QuadRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

/// m-by-m tensor Gauss-Legendre rule on the unit square.
pub fn quad_quadrature(m: usize) -> QuadRule {
    let (x, w) = gauss_legendre(m);
    let mut points = Vec::with_capacity(m * m);
    let mut weights = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            points.push([x[i], x[j]]);
            weights.push(w[i] * w[j]);
        }
    }
    QuadRule { points, weights }
}

/// m*m-point rule on the reference triangle via the collapsed map
/// x = u, y = v(1-u); exact for total degree at least 2m-2.
pub fn tri_quadrature(m: usize) -> QuadRule {
    let (x, w) = gauss_legendre(m);
    let mut points = Vec::with_capacity(m * m);
    let mut weights = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            let u = x[i];
            let v = x[j];
            points.push([u, v * (1.0 - u)]);
            weights.push(w[i] * w[j] * (1.0 - u));
        }
    }
    QuadRule { points, weights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gl_exactness() {
        for n in 1..=8 {
            let (x, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
            for k in 0..=(2 * n - 1) {
                let q: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(k as i32)).sum();
                assert_relative_eq!(q, 1.0 / (k as f64 + 1.0), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn gll_exactness_and_endpoints() {
        for n in 2..=8 {
            let (x, w) = gauss_lobatto(n);
            assert_relative_eq!(x[0], 0.0, epsilon = 1e-15);
            assert_relative_eq!(x[n - 1], 1.0, epsilon = 1e-15);
            for k in 0..=(2 * n - 3) {
                let q: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(k as i32)).sum();
                assert_relative_eq!(q, 1.0 / (k as f64 + 1.0), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn gll_nodes_sorted() {
        let (x, _) = gauss_lobatto(6);
        for p in x.windows(2) {
            assert!(p[1] > p[0]);
        }
    }

    /// Oracle: integral of x^a y^b over the reference triangle is
    /// a! b! / (a+b+2)!.
    #[test]
    fn tri_monomial_exactness() {
        fn fact(n: u32) -> f64 {
            (1..=n).map(|k| k as f64).product()
        }
        let m = 6;
        let rule = tri_quadrature(m);
        assert_relative_eq!(rule.weights.iter().sum::<f64>(), 0.5, epsilon = 1e-14);
        for a in 0..=(2 * m as u32 - 2) {
            for b in 0..=(2 * m as u32 - 2 - a) {
                let q: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(p, &w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                    .sum();
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                assert_relative_eq!(q, exact, epsilon = 1e-13, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn square_tensor_exactness() {
        let rule = quad_quadrature(4);
        for a in 0..=7i32 {
            for b in 0..=7i32 {
                let q: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(p, &w)| w * p[0].powi(a) * p[1].powi(b))
                    .sum();
                let exact = 1.0 / ((a + 1) as f64 * (b + 1) as f64);
                assert_relative_eq!(q, exact, epsilon = 1e-13);
            }
        }
    }
}
