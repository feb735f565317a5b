#![allow(dead_code)]

use lrnn_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Triple-loop product, independent of the library kernel.
pub fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols(), b.rows());
    Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        (0..a.cols()).map(|k| a[(i, k)] * b[(k, j)]).sum()
    })
}

pub fn naive_kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (p, q) = b.shape();
    Matrix::from_fn(a.rows() * p, a.cols() * q, |i, j| a[(i / p, j / q)] * b[(i % p, j % q)])
}

/// Column-stacked entries.
pub fn naive_vec(m: &Matrix) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.len());
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            v.push(m[(i, j)]);
        }
    }
    v
}

pub fn naive_matvec(a: &Matrix, x: &[f64]) -> Vec<f64> {
    (0..a.rows())
        .map(|i| (0..a.cols()).map(|k| a[(i, k)] * x[k]).sum())
        .collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = a.iter().chain(b).fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

use lrnn_core::costs::{CostFunction, CostTerm, MultiTermExpr, NormSpec, Regime};

enum OracleNorm {
    Eps(Vec<f64>),
    Sq(Matrix),
}

/// Cost evaluated from first principles: each residual is
/// `(Σ Mᵢᵀ ⊗ Lᵢ) vec Z − vec N`, built with loop-based helpers.
pub struct OracleCost {
    terms: Vec<(f64, Matrix, Vec<f64>, OracleNorm)>,
    pub dim: usize,
}

impl OracleCost {
    pub fn from_cost(cost: &CostFunction) -> Self {
        let (zr, zc) = cost.z_shape();
        let terms = cost
            .terms()
            .iter()
            .map(|t| {
                let (rr, rc) = t.expr.residual_shape();
                let mut op = Matrix::zeros(rr * rc, zr * zc);
                for (l, m) in t.expr.terms() {
                    op.add_scaled(1.0, &naive_kron(&m.transpose(), l)).unwrap();
                }
                let norm = match &t.norm {
                    NormSpec::EpsInsensitive(r) => OracleNorm::Eps(naive_vec(r)),
                    NormSpec::SquaredK(k) => OracleNorm::Sq(k.clone()),
                };
                (t.weight, op, naive_vec(t.expr.offset()), norm)
            })
            .collect();
        OracleCost { terms, dim: zr * zc }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        let mut total = 0.0;
        for (w, op, n, norm) in &self.terms {
            let res: Vec<f64> = (0..op.rows())
                .map(|i| op.row(i).iter().zip(z).map(|(a, b)| a * b).sum::<f64>() - n[i])
                .collect();
            let v = match norm {
                OracleNorm::Eps(r) => res.iter().zip(r).map(|(x, e)| (x.abs() - e).max(0.0)).sum(),
                OracleNorm::Sq(k) => {
                    let p = k.rows();
                    let mut s = 0.0;
                    for col in res.chunks(p) {
                        for i in 0..p {
                            for j in 0..p {
                                s += col[i] * k[(i, j)] * col[j];
                            }
                        }
                    }
                    s
                }
            };
            total += w * v;
        }
        total
    }

    /// Minimum over a regular grid, refined twice around the incumbent:
    /// step 0.25 on [−5, 5]ᵈ, then 0.05 and 0.01 on shrinking boxes.
    pub fn grid_min(&self) -> (Vec<f64>, f64) {
        let mut center = vec![0.0; self.dim];
        let mut best = (center.clone(), f64::INFINITY);
        for (half, step) in [(5.0f64, 0.25f64), (0.5, 0.05), (0.1, 0.01)] {
            let n = (2.0 * half / step).round() as usize + 1;
            let mut idx = vec![0usize; self.dim];
            let mut z = vec![0.0; self.dim];
            loop {
                for k in 0..self.dim {
                    z[k] = center[k] - half + step * idx[k] as f64;
                }
                let v = self.eval(&z);
                if v < best.1 {
                    best = (z.clone(), v);
                }
                let mut k = 0;
                while k < self.dim {
                    idx[k] += 1;
                    if idx[k] < n {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == self.dim {
                    break;
                }
            }
            center = best.0.clone();
        }
        best
    }
}

const Z_SHAPES: [(usize, usize); 7] = [(1, 1), (1, 2), (2, 1), (1, 3), (2, 2), (1, 4), (4, 1)];

/// Random small cost with one or two residual terms (each possibly two
/// summands) plus a norm regularizer on Z.
pub fn random_cost(rng: &mut impl Rng, regime: Regime) -> CostFunction {
    let (zr, zc) = Z_SHAPES[rng.random_range(0..Z_SHAPES.len())];
    let mut terms = Vec::new();
    for _ in 0..rng.random_range(1..=2) {
        let (r, c) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let parts = (0..rng.random_range(1..=2))
            .map(|_| (random_matrix(rng, r, zr), random_matrix(rng, zc, c)))
            .collect();
        let expr = MultiTermExpr::new(parts, random_matrix(rng, r, c), zr, zc).unwrap();
        let norm = match regime {
            Regime::Sparse => NormSpec::eps_insensitive(r, c, rng.random_range(0.0..0.2)),
            Regime::Quadratic => {
                let a = random_matrix(rng, r, r);
                let mut k = naive_matmul(&a.transpose(), &a);
                for i in 0..r {
                    k.row_mut(i)[i] += 0.1;
                }
                k.symmetrize();
                NormSpec::SquaredK(k)
            }
        };
        terms.push(CostTerm::new(rng.random_range(0.5..2.0), expr, norm).unwrap());
    }
    let reg = match regime {
        Regime::Sparse => NormSpec::l1(zr, zc),
        Regime::Quadratic => NormSpec::squared(zr),
    };
    terms.push(CostTerm::new(rng.random_range(0.1..0.4), MultiTermExpr::identity(zr, zc), reg).unwrap());
    CostFunction::new(terms, regime).unwrap()
}
