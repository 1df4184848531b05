#![allow(clippy::needless_range_loop)]

//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the library's linear algebra.

#![allow(dead_code)]

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sofcma::analysis::spectral_abscissa;
use sofcma::{ClosedLoopRealization, PlantRealization};

type C64 = Complex<f64>;

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Exact product of two doubles as an unevaluated sum (hi, lo).
fn two_prod(a: f64, b: f64) -> [f64; 2] {
    let p = a * b;
    [p, a.mul_add(b, -p)]
}

/// Dot product with every partial product split exactly before compensated summation.
pub fn accurate_dot(a: &[f64], b: &[f64]) -> f64 {
    compensated_sum(a.iter().zip(b).flat_map(|(x, y)| two_prod(*x, *y)))
}

/// `C = A * B` by explicit triple loop.
pub fn triple_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.nrows());
    let mut out = DMatrix::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut acc = 0.0;
            for k in 0..a.ncols() {
                acc += a[(i, k)] * b[(k, j)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Characteristic polynomial coefficients of `m` (monic, highest degree first)
/// by the Faddeev-LeVerrier recursion.
pub fn char_poly(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut coeffs = vec![1.0];
    let mut mk = DMatrix::<f64>::zeros(n, n);
    let mut c_prev = 1.0;
    for k in 1..=n {
        for i in 0..n {
            mk[(i, i)] += c_prev;
        }
        let am = triple_product(m, &mk);
        let trace: f64 = compensated_sum((0..n).map(|i| am[(i, i)]));
        let ck = -trace / k as f64;
        coeffs.push(ck);
        mk = am;
        c_prev = ck;
    }
    coeffs
}

fn horner(coeffs: &[f64], z: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for &c in coeffs {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All complex roots of a monic real polynomial via Aberth-Ehrlich iteration
/// followed by Newton polishing.
pub fn poly_roots(coeffs: &[f64]) -> Vec<C64> {
    let deg = coeffs.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let radius = 1.0 + coeffs[1..].iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
    let mut z: Vec<C64> = (0..deg)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / deg as f64 + 0.4;
            C64::from_polar(radius * 0.5, angle)
        })
        .collect();
    for _ in 0..2000 {
        let mut moved = 0.0f64;
        for i in 0..deg {
            let (p, dp) = horner(coeffs, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let mut repulse = C64::new(0.0, 0.0);
            for j in 0..deg {
                if j != i {
                    repulse += C64::new(1.0, 0.0) / (z[i] - z[j]);
                }
            }
            let step = ratio / (C64::new(1.0, 0.0) - ratio * repulse);
            z[i] -= step;
            moved = moved.max(step.norm() / (1.0 + z[i].norm()));
        }
        if moved < 1e-15 {
            break;
        }
    }
    for root in z.iter_mut() {
        for _ in 0..5 {
            let (p, dp) = horner(coeffs, *root);
            if dp.norm() == 0.0 {
                break;
            }
            *root -= p / dp;
        }
    }
    z
}

/// Spectral abscissa from the roots of the characteristic polynomial.
pub fn abscissa_oracle(m: &DMatrix<f64>) -> f64 {
    poly_roots(&char_poly(m))
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Solves `M X = R` for complex matrices by Gaussian elimination with partial pivoting.
pub fn complex_solve(m: &[Vec<C64>], rhs: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let n = m.len();
    let k = rhs[0].len();
    let mut a: Vec<Vec<C64>> = m.to_vec();
    let mut b: Vec<Vec<C64>> = rhs.to_vec();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for c in col..n {
                let v = a[col][c];
                a[row][c] -= factor * v;
            }
            for c in 0..k {
                let v = b[col][c];
                b[row][c] -= factor * v;
            }
        }
    }
    let mut x = vec![vec![C64::new(0.0, 0.0); k]; n];
    for c in 0..k {
        for row in (0..n).rev() {
            let mut acc = b[row][c];
            for j in row + 1..n {
                acc -= a[row][j] * x[j][c];
            }
            x[row][c] = acc / a[row][row];
        }
    }
    x
}

/// `C_F (jw I - A_F)^{-1} B1 + D11` built from nested vectors.
pub fn freq_response_oracle(cl: &ClosedLoopRealization, omega: f64) -> Vec<Vec<C64>> {
    let n = cl.a_f.nrows();
    let resolvent: Vec<Vec<C64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let diag = if i == j {
                        C64::new(0.0, omega)
                    } else {
                        C64::new(0.0, 0.0)
                    };
                    diag - cl.a_f[(i, j)]
                })
                .collect()
        })
        .collect();
    let rhs: Vec<Vec<C64>> = (0..n)
        .map(|i| {
            (0..cl.b1.ncols())
                .map(|j| C64::new(cl.b1[(i, j)], 0.0))
                .collect()
        })
        .collect();
    let x = complex_solve(&resolvent, &rhs);
    (0..cl.c_f.nrows())
        .map(|i| {
            (0..cl.b1.ncols())
                .map(|j| {
                    let mut acc = C64::new(cl.d11[(i, j)], 0.0);
                    for k in 0..n {
                        acc += x[k][j] * cl.c_f[(i, k)];
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// A random stable closed loop: Gaussian entries with `A` shifted left so its
/// abscissa lands in `[-1.0, -0.1]`.
pub fn random_stable_loop(rng: &mut ChaCha8Rng, max_states: usize) -> ClosedLoopRealization {
    let n = rng.random_range(1..=max_states);
    let n_w = rng.random_range(1..=3);
    let n_z = rng.random_range(1..=3);
    let mut a = normal_matrix(rng, n, n);
    let margin = rng.random_range(0.1..1.0);
    let shift = spectral_abscissa(&a).unwrap() + margin;
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    let b1 = normal_matrix(rng, n, n_w);
    let c_f = normal_matrix(rng, n_z, n);
    let d11 = if rng.random_bool(0.5) {
        normal_matrix(rng, n_z, n_w) * 0.5
    } else {
        DMatrix::zeros(n_z, n_w)
    };
    ClosedLoopRealization::new(a, b1, c_f, d11).unwrap()
}

/// A random plant with the given dimensions and Gaussian entries.
pub fn random_plant(rng: &mut ChaCha8Rng, n_x: usize, n_u: usize, n_y: usize) -> PlantRealization {
    let n_w = 2;
    let n_z = 2;
    PlantRealization::new(
        "random",
        normal_matrix(rng, n_x, n_x),
        normal_matrix(rng, n_x, n_w),
        normal_matrix(rng, n_x, n_u),
        normal_matrix(rng, n_z, n_x),
        normal_matrix(rng, n_z, n_w),
        normal_matrix(rng, n_z, n_u),
        normal_matrix(rng, n_y, n_x),
    )
    .unwrap()
}

pub fn one(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

/// `1/(s+1) + d`.
pub fn lag(d: f64) -> ClosedLoopRealization {
    ClosedLoopRealization::new(one(-1.0), one(1.0), one(1.0), one(d)).unwrap()
}

pub fn resonant() -> ClosedLoopRealization {
    ClosedLoopRealization::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -0.1]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        DMatrix::zeros(1, 1),
    )
    .unwrap()
}

pub fn double_integrator() -> PlantRealization {
    PlantRealization::new(
        "double_integrator",
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        DMatrix::zeros(2, 1),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        DMatrix::identity(2, 2),
    )
    .unwrap()
}

pub fn rosenbrock(x: &[f64]) -> f64 {
    -x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum::<f64>()
}

pub fn sphere(x: &[f64]) -> f64 {
    -x.iter().map(|v| v * v).sum::<f64>()
}
