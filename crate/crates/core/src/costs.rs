//! Weighted cost functions over linear multi-term residuals
//! `Σᵢ Lᵢ Z Mᵢ − N`, and their reduction to a linear program (sparse regime)
//! or to an explicit quadratic form (quadratic regime).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, kron, matmul, unvec, vec_values, Matrix};
use crate::optimize::{minimize_quadratic, solve_lp, LinearProgram, LpStatus};

/// Affine map `Z ↦ Σᵢ Lᵢ Z Mᵢ − N`.
#[derive(Debug, Clone)]
pub struct MultiTermExpr {
    terms: Vec<(Matrix, Matrix)>,
    offset: Matrix,
    z_rows: usize,
    z_cols: usize,
}

impl MultiTermExpr {
    pub fn new(terms: Vec<(Matrix, Matrix)>, offset: Matrix, z_rows: usize, z_cols: usize) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("multi-term expression without terms".into()));
        }
        for (k, (l, m)) in terms.iter().enumerate() {
            if l.cols() != z_rows || m.rows() != z_cols {
                return Err(Error::dims(
                    "MultiTermExpr::new",
                    format!(
                        "term {k}: L is {:?}, M is {:?}, Z is {z_rows}x{z_cols}",
                        l.shape(),
                        m.shape()
                    ),
                ));
            }
            if (l.rows(), m.cols()) != offset.shape() {
                return Err(Error::dims(
                    "MultiTermExpr::new",
                    format!(
                        "term {k} yields {}x{}, offset is {:?}",
                        l.rows(),
                        m.cols(),
                        offset.shape()
                    ),
                ));
            }
        }
        Ok(MultiTermExpr {
            terms,
            offset,
            z_rows,
            z_cols,
        })
    }

    /// `Z ↦ Z`, the form used by the regularizers.
    pub fn identity(z_rows: usize, z_cols: usize) -> Self {
        MultiTermExpr {
            terms: vec![(Matrix::identity(z_rows), Matrix::identity(z_cols))],
            offset: Matrix::zeros(z_rows, z_cols),
            z_rows,
            z_cols,
        }
    }

    pub fn terms(&self) -> &[(Matrix, Matrix)] {
        &self.terms
    }

    pub fn offset(&self) -> &Matrix {
        &self.offset
    }

    pub fn z_shape(&self) -> (usize, usize) {
        (self.z_rows, self.z_cols)
    }

    pub fn residual_shape(&self) -> (usize, usize) {
        self.offset.shape()
    }

    /// `Σᵢ Mᵢᵀ ⊗ Lᵢ`, the matrix acting on `vec(Z)`.
    pub fn vectorized_operator(&self) -> Matrix {
        let mut iter = self.terms.iter();
        let (l, m) = iter.next().expect("at least one term");
        let mut out = kron(&m.transpose(), l);
        for (l, m) in iter {
            out.add_scaled(1.0, &kron(&m.transpose(), l))
                .expect("terms share the residual shape");
        }
        out
    }
}

#[derive(Debug, Clone)]
pub enum NormSpec {
    /// `Σᵢⱼ max(0, |mᵢⱼ| − εᵢⱼ)` with `R = [εᵢⱼ]`; `R = 0` is the L1 norm.
    EpsInsensitive(Matrix),
    /// `tr(Mᵀ K M)` for symmetric positive definite `K`.
    SquaredK(Matrix),
}

impl NormSpec {
    pub fn l1(rows: usize, cols: usize) -> Self {
        NormSpec::EpsInsensitive(Matrix::zeros(rows, cols))
    }

    pub fn eps_insensitive(rows: usize, cols: usize, eps: f64) -> Self {
        NormSpec::EpsInsensitive(Matrix::filled(rows, cols, eps))
    }

    pub fn squared(rows: usize) -> Self {
        NormSpec::SquaredK(Matrix::identity(rows))
    }

    pub fn value(&self, m: &Matrix) -> f64 {
        match self {
            NormSpec::EpsInsensitive(r) => m
                .as_slice()
                .iter()
                .zip(r.as_slice())
                .map(|(v, e)| (v.abs() - e).max(0.0))
                .sum(),
            NormSpec::SquaredK(k) => {
                let km = matmul(k, m).expect("K sized to the residual");
                m.as_slice().iter().zip(km.as_slice()).map(|(a, b)| a * b).sum()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CostTerm {
    pub weight: f64,
    pub expr: MultiTermExpr,
    pub norm: NormSpec,
}

impl CostTerm {
    pub fn new(weight: f64, expr: MultiTermExpr, norm: NormSpec) -> Result<Self> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "term weight must be positive, got {weight}"
            )));
        }
        let (rr, rc) = expr.residual_shape();
        match &norm {
            NormSpec::EpsInsensitive(r) => {
                if r.shape() != (rr, rc) {
                    return Err(Error::dims(
                        "CostTerm::new",
                        format!("R is {:?}, residual is {rr}x{rc}", r.shape()),
                    ));
                }
                if r.as_slice().iter().any(|e| !(*e >= 0.0)) {
                    return Err(Error::InvalidArgument("R must be nonnegative".into()));
                }
            }
            NormSpec::SquaredK(k) => {
                if k.shape() != (rr, rr) {
                    return Err(Error::dims(
                        "CostTerm::new",
                        format!("K is {:?}, residual has {rr} rows", k.shape()),
                    ));
                }
                if k.max_asymmetry() > 1e-12 * (1.0 + k.max_abs()) {
                    return Err(Error::NotSymmetric {
                        asymmetry: k.max_asymmetry(),
                    });
                }
                cholesky(k)?;
            }
        }
        Ok(CostTerm { weight, expr, norm })
    }

    pub fn value(&self, z: &Matrix) -> Result<f64> {
        Ok(self.weight * self.norm.value(&eval_residual(&self.expr, z)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    Sparse,
    Quadratic,
}

impl Regime {
    pub const ALL: [Regime; 2] = [Regime::Sparse, Regime::Quadratic];
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Sparse => "sparse",
            Regime::Quadratic => "quadratic",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sparse" | "l1" => Ok(Regime::Sparse),
            "quadratic" | "l2" => Ok(Regime::Quadratic),
            other => Err(Error::InvalidArgument(format!("unknown regime '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CostFunction {
    terms: Vec<CostTerm>,
    regime: Regime,
}

impl CostFunction {
    pub fn new(terms: Vec<CostTerm>, regime: Regime) -> Result<Self> {
        let Some(first) = terms.first() else {
            return Err(Error::InvalidArgument("cost function without terms".into()));
        };
        let shape = first.expr.z_shape();
        for t in &terms {
            if t.expr.z_shape() != shape {
                return Err(Error::dims(
                    "CostFunction::new",
                    format!("terms over {:?} and {:?}", shape, t.expr.z_shape()),
                ));
            }
            let ok = matches!(
                (&t.norm, regime),
                (NormSpec::EpsInsensitive(_), Regime::Sparse) | (NormSpec::SquaredK(_), Regime::Quadratic)
            );
            if !ok {
                return Err(Error::InvalidArgument(format!("{regime} cost with a mismatched norm")));
            }
        }
        Ok(CostFunction { terms, regime })
    }

    pub fn terms(&self) -> &[CostTerm] {
        &self.terms
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn z_shape(&self) -> (usize, usize) {
        self.terms[0].expr.z_shape()
    }
}

pub fn eval_residual(expr: &MultiTermExpr, z: &Matrix) -> Result<Matrix> {
    if z.shape() != expr.z_shape() {
        return Err(Error::dims(
            "eval_residual",
            format!("Z is {:?}, expression expects {:?}", z.shape(), expr.z_shape()),
        ));
    }
    let mut out = expr.offset.scale(-1.0);
    for (l, m) in &expr.terms {
        let lzm = matmul(&matmul(l, z)?, m)?;
        out.add_scaled(1.0, &lzm)?;
    }
    Ok(out)
}

pub fn eval_cost(cost: &CostFunction, z: &Matrix) -> Result<f64> {
    cost.terms.iter().map(|t| t.value(z)).sum()
}

/// Linear program whose optimum equals `min_Z eval_cost(cost, Z)`.
///
/// Variables are `y = (vec Z, a₁, a₁*, a₂, a₂*, …)` with one pair of slack
/// blocks per term. Each term contributes the rows
///
/// ```text
///  M_L z − a  ≤ r + n
/// −M_L z − a* ≤ r − n
///      −a     ≤ 0
///      −a*    ≤ 0
/// ```
///
/// where `M_L = Σ Mᵢᵀ ⊗ Lᵢ`, `n = vec N` and `r = vec R`, and the objective
/// charges `λ` per unit of `a` and `a*`.
pub fn assemble_lp(cost: &CostFunction) -> Result<LinearProgram> {
    if cost.regime != Regime::Sparse {
        return Err(Error::InvalidArgument("assemble_lp needs a sparse cost".into()));
    }
    let (zr, zc) = cost.z_shape();
    let nz = zr * zc;
    let sizes: Vec<usize> = cost.terms.iter().map(|t| t.expr.offset.len()).collect();
    let nvars = nz + 2 * sizes.iter().sum::<usize>();
    let nrows = 4 * sizes.iter().sum::<usize>();

    let mut d = Matrix::zeros(nrows, nvars);
    let mut q = vec![0.0; nrows];
    let mut w = vec![0.0; nvars];

    let mut row0 = 0;
    let mut col0 = nz;
    for (term, &len) in cost.terms.iter().zip(&sizes) {
        let NormSpec::EpsInsensitive(r) = &term.norm else {
            unreachable!("checked by CostFunction::new");
        };
        let op = term.expr.vectorized_operator();
        let n = vec_values(&term.expr.offset);
        let r = vec_values(r);
        let a0 = col0;
        let s0 = col0 + len;
        for k in 0..len {
            let upper = d.row_mut(row0 + k);
            upper[..nz].copy_from_slice(op.row(k));
            upper[a0 + k] = -1.0;
            q[row0 + k] = r[k] + n[k];

            let lower = d.row_mut(row0 + len + k);
            for (dst, src) in lower[..nz].iter_mut().zip(op.row(k)) {
                *dst = -src;
            }
            lower[s0 + k] = -1.0;
            q[row0 + len + k] = r[k] - n[k];

            d[(row0 + 2 * len + k, a0 + k)] = -1.0;
            d[(row0 + 3 * len + k, s0 + k)] = -1.0;

            w[a0 + k] = term.weight;
            w[s0 + k] = term.weight;
        }
        row0 += 4 * len;
        col0 += 2 * len;
    }
    LinearProgram::new(w, d, q, nz)
}

/// `½ zᵀHz + fᵀz + constant` with `z = vec Z`.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    pub h: Matrix,
    pub f: Vec<f64>,
    pub constant: f64,
}

impl QuadraticForm {
    pub fn value(&self, z: &[f64]) -> f64 {
        crate::optimize::quadratic_value(&self.h, &self.f, self.constant, z)
    }
}

/// Quadratic form reproducing `eval_cost` for a quadratic-regime cost.
///
/// Per term, with `Pᵢⱼ = LᵢᵀKLⱼ`:
/// `H = 2λ Σᵢⱼ (Mᵢ Mⱼᵀ) ⊗ Pᵢⱼ`, `f = −2λ Σⱼ vec(LⱼᵀKNMⱼᵀ)`,
/// `constant = λ tr(NᵀKN)`. The Kronecker factor is the mixed-product form
/// of `(Mᵢᵀ ⊗ I)ᵀ (Mⱼᵀ ⊗ Pᵢⱼ)`.
pub fn assemble_qp(cost: &CostFunction) -> Result<QuadraticForm> {
    if cost.regime != Regime::Quadratic {
        return Err(Error::InvalidArgument("assemble_qp needs a quadratic cost".into()));
    }
    let (zr, zc) = cost.z_shape();
    let nz = zr * zc;
    let mut h = Matrix::zeros(nz, nz);
    let mut f = vec![0.0; nz];
    let mut constant = 0.0;
    for term in &cost.terms {
        let NormSpec::SquaredK(k) = &term.norm else {
            unreachable!("checked by CostFunction::new");
        };
        let lam = term.weight;
        let terms = term.expr.terms();
        let n = term.expr.offset();
        let kl: Vec<Matrix> = terms.iter().map(|(l, _)| matmul(k, l)).collect::<Result<_>>()?;
        for (li, mi) in terms {
            for ((_, mj), klj) in terms.iter().zip(&kl) {
                let p = matmul(&li.transpose(), klj)?;
                let mm = matmul(mi, &mj.transpose())?;
                h.add_scaled(2.0 * lam, &kron(&mm, &p))?;
            }
        }
        let kn = matmul(k, n)?;
        for (lj, mj) in terms {
            let g = matmul(&matmul(&lj.transpose(), &kn)?, &mj.transpose())?;
            for (fi, gi) in f.iter_mut().zip(vec_values(&g)) {
                *fi -= 2.0 * lam * gi;
            }
        }
        constant += lam * n.as_slice().iter().zip(kn.as_slice()).map(|(a, b)| a * b).sum::<f64>();
    }
    h.symmetrize();
    Ok(QuadraticForm { h, f, constant })
}

/// Global minimizer of a cost function, via the LP or the quadratic form.
#[derive(Debug, Clone)]
pub struct Minimum {
    pub z: Matrix,
    /// `eval_cost` at `z`.
    pub value: f64,
    /// Optimal value reported by the solver.
    pub solver_value: f64,
}

pub fn minimize_cost(cost: &CostFunction) -> Result<Minimum> {
    let (zr, zc) = cost.z_shape();
    let nz = zr * zc;
    let (z, solver_value) = match cost.regime {
        Regime::Sparse => {
            let lp = assemble_lp(cost)?;
            let sol = solve_lp(&lp)?;
            match sol.status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => return Err(Error::LpStatus("infeasible")),
                LpStatus::Unbounded => return Err(Error::LpStatus("unbounded")),
            }
            (unvec(&sol.y[..nz], zr, zc)?, sol.objective_value)
        }
        Regime::Quadratic => {
            let qp = assemble_qp(cost)?;
            let (z, value) = minimize_quadratic(&qp.h, &qp.f, qp.constant)?;
            (unvec(&z, zr, zc)?, value)
        }
    };
    let value = eval_cost(cost, &z)?;
    Ok(Minimum { z, value, solver_value })
}
