//! Linear recurrent network `u_{t+1} = F u_t + G x_t`, `x̂_{t+1} = H u_{t+1}`,
//! identified by alternating global minimization over the hidden state
//! sequence `U` and the recurrent weights `F`.
//!
//! Both half-steps are linear multi-term problems: the approximation
//! residual `H(FU + GX) − zX` and the state residual `(FU + GX)Cᵉ − UCᵇ` are
//! affine in `U` for fixed `F` and affine in `F` for fixed `U`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::costs::{minimize_cost, CostFunction, CostTerm, MultiTermExpr, NormSpec, Regime};
use crate::error::{Error, Result};
use crate::linalg::{matmul, Matrix};

#[derive(Debug, Clone)]
pub struct LrnnModel {
    pub f: Matrix,
    pub g: Matrix,
    pub h: Matrix,
}

impl LrnnModel {
    pub fn new(f: Matrix, g: Matrix, h: Matrix) -> Result<Self> {
        let du = f.rows();
        let dx = h.rows();
        if f.cols() != du || g.shape() != (du, dx) || h.shape() != (dx, du) {
            return Err(Error::dims(
                "LrnnModel::new",
                format!("F {:?}, G {:?}, H {:?}", f.shape(), g.shape(), h.shape()),
            ));
        }
        Ok(LrnnModel { f, g, h })
    }

    /// F and G drawn i.i.d. uniform on [0, 1); H projects onto the first
    /// hidden coordinate(s).
    pub fn random_init(d_u: usize, d_x: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = Matrix::from_fn(d_u, d_u, |_, _| rng.random::<f64>());
        let g = Matrix::from_fn(d_u, d_x, |_, _| rng.random::<f64>());
        LrnnModel {
            f,
            g,
            h: first_coordinate_projection(d_x, d_u),
        }
    }

    pub fn d_u(&self) -> usize {
        self.f.rows()
    }

    pub fn d_x(&self) -> usize {
        self.h.rows()
    }
}

/// `H` with `H[i][i] = 1`: output `i` reads hidden coordinate `i`.
pub fn first_coordinate_projection(d_x: usize, d_u: usize) -> Matrix {
    Matrix::from_fn(d_x, d_u, |i, j| if i == j { 1.0 } else { 0.0 })
}

/// Term weights of the training objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lambdas {
    pub appr: f64,
    pub state: f64,
    pub u: f64,
    pub f: f64,
}

/// Weights that give every term a comparable contribution:
/// `1/(T d_x)`, `1/((T−1) d_u)`, `1/(T d_u)`, `1/d_u²`.
pub fn default_lambdas(t: usize, d_x: usize, d_u: usize) -> Result<Lambdas> {
    if t < 2 {
        return Err(Error::InvalidArgument(format!("series length {t} < 2")));
    }
    if d_x == 0 || d_u == 0 {
        return Err(Error::InvalidArgument("zero dimension".into()));
    }
    let (t, dx, du) = (t as f64, d_x as f64, d_u as f64);
    Ok(Lambdas {
        appr: 1.0 / (t * dx),
        state: 1.0 / ((t - 1.0) * du),
        u: 1.0 / (t * du),
        f: 1.0 / (du * du),
    })
}

/// `(Cᵇ, Cᵉ)`, both `T × (T−1)`: `U Cᵇ = [u₂ … u_T]`, `U Cᵉ = [u₁ … u_{T−1}]`.
pub fn cut_matrices(t: usize) -> (Matrix, Matrix) {
    let cb = Matrix::from_fn(t, t - 1, |i, j| if i == j + 1 { 1.0 } else { 0.0 });
    let ce = Matrix::from_fn(t, t - 1, |i, j| if i == j { 1.0 } else { 0.0 });
    (cb, ce)
}

#[derive(Debug, Clone)]
pub struct TrainingProblem {
    pub x: Matrix,
    pub zx: Matrix,
    pub c_b: Matrix,
    pub c_e: Matrix,
    pub lambdas: Lambdas,
    pub eps: f64,
    pub regime: Regime,
}

impl TrainingProblem {
    pub fn new(x: Matrix, zx: Matrix, lambdas: Lambdas, eps: f64, regime: Regime) -> Result<Self> {
        if x.shape() != zx.shape() {
            return Err(Error::dims(
                "TrainingProblem::new",
                format!("X {:?} vs zX {:?}", x.shape(), zx.shape()),
            ));
        }
        if x.cols() < 2 {
            return Err(Error::InvalidArgument(format!("series length {} < 2", x.cols())));
        }
        let l = lambdas;
        if [l.appr, l.state, l.u, l.f].iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidArgument(format!("weights must be positive: {l:?}")));
        }
        if !(eps >= 0.0) {
            return Err(Error::InvalidArgument(format!("eps must be nonnegative, got {eps}")));
        }
        let (c_b, c_e) = cut_matrices(x.cols());
        Ok(TrainingProblem {
            x,
            zx,
            c_b,
            c_e,
            lambdas,
            eps,
            regime,
        })
    }

    /// One-dimensional problem from `T + 1` consecutive samples with the
    /// default weights.
    pub fn from_series(values: &[f64], t: usize, d_u: usize, eps: f64, regime: Regime) -> Result<Self> {
        if values.len() < t + 1 {
            return Err(Error::InvalidArgument(format!(
                "need {} samples for T = {t}, got {}",
                t + 1,
                values.len()
            )));
        }
        let x = Matrix::row_vector(&values[..t]);
        let zx = Matrix::row_vector(&values[1..t + 1]);
        TrainingProblem::new(x, zx, default_lambdas(t, 1, d_u)?, eps, regime)
    }

    pub fn t(&self) -> usize {
        self.x.cols()
    }

    pub fn d_x(&self) -> usize {
        self.x.rows()
    }

    fn residual_norm(&self, rows: usize, cols: usize) -> NormSpec {
        match self.regime {
            Regime::Sparse => NormSpec::eps_insensitive(rows, cols, self.eps),
            Regime::Quadratic => NormSpec::squared(rows),
        }
    }

    fn regularizer_norm(&self, rows: usize, cols: usize) -> NormSpec {
        match self.regime {
            Regime::Sparse => NormSpec::l1(rows, cols),
            Regime::Quadratic => NormSpec::squared(rows),
        }
    }

    /// `H(FU + GX) − zX`.
    pub fn approximation_residual(&self, model: &LrnnModel, u: &Matrix) -> Result<Matrix> {
        let drive = matmul(&model.f, u)?.add(&matmul(&model.g, &self.x)?)?;
        matmul(&model.h, &drive)?.sub(&self.zx)
    }

    /// `(FU + GX)Cᵉ − UCᵇ`.
    pub fn state_residual(&self, model: &LrnnModel, u: &Matrix) -> Result<Matrix> {
        let drive = matmul(&model.f, u)?.add(&matmul(&model.g, &self.x)?)?;
        matmul(&drive, &self.c_e)?.sub(&matmul(u, &self.c_b)?)
    }

    /// Weighted approximation term alone, in the regime's norm.
    pub fn approximation_cost(&self, model: &LrnnModel, u: &Matrix) -> Result<f64> {
        let r = self.approximation_residual(model, u)?;
        Ok(self.lambdas.appr * self.residual_norm(r.rows(), r.cols()).value(&r))
    }

    /// Full training objective at `(F, U)`.
    pub fn full_cost(&self, model: &LrnnModel, u: &Matrix) -> Result<f64> {
        let appr = self.approximation_residual(model, u)?;
        let state = self.state_residual(model, u)?;
        let l = &self.lambdas;
        Ok(l.appr * self.residual_norm(appr.rows(), appr.cols()).value(&appr)
            + l.state * self.residual_norm(state.rows(), state.cols()).value(&state)
            + l.f * self.regularizer_norm(model.f.rows(), model.f.cols()).value(&model.f)
            + l.u * self.regularizer_norm(u.rows(), u.cols()).value(u))
    }

    fn check_shapes(&self, model: &LrnnModel, u: Option<&Matrix>) -> Result<()> {
        if model.d_x() != self.d_x() {
            return Err(Error::dims(
                "training problem",
                format!("model d_x {} vs data d_x {}", model.d_x(), self.d_x()),
            ));
        }
        if let Some(u) = u {
            if u.shape() != (model.d_u(), self.t()) {
                return Err(Error::dims(
                    "training problem",
                    format!("U is {:?}, expected {}x{}", u.shape(), model.d_u(), self.t()),
                ));
            }
        }
        Ok(())
    }
}

/// Cost over `Z = F` with `U`, `G`, `H` fixed. The `λ_U` term is constant in
/// `F` and left out.
pub fn build_f_step(problem: &TrainingProblem, model: &LrnnModel, u: &Matrix) -> Result<CostFunction> {
    problem.check_shapes(model, Some(u))?;
    let du = model.d_u();
    let t = problem.t();
    let dx = problem.d_x();
    let gx = matmul(&model.g, &problem.x)?;

    let appr_n = problem.zx.sub(&matmul(&model.h, &gx)?)?;
    let appr = MultiTermExpr::new(vec![(model.h.clone(), u.clone())], appr_n, du, du)?;

    let u_ce = matmul(u, &problem.c_e)?;
    let state_n = matmul(u, &problem.c_b)?.sub(&matmul(&gx, &problem.c_e)?)?;
    let state = MultiTermExpr::new(vec![(Matrix::identity(du), u_ce)], state_n, du, du)?;

    let l = &problem.lambdas;
    CostFunction::new(
        vec![
            CostTerm::new(l.appr, appr, problem.residual_norm(dx, t))?,
            CostTerm::new(l.state, state, problem.residual_norm(du, t - 1))?,
            CostTerm::new(l.f, MultiTermExpr::identity(du, du), problem.regularizer_norm(du, du))?,
        ],
        problem.regime,
    )
}

/// Cost over `Z = U` with `F`, `G`, `H` fixed. The `λ_F` term is constant in
/// `U` and left out.
pub fn build_u_step(problem: &TrainingProblem, model: &LrnnModel) -> Result<CostFunction> {
    problem.check_shapes(model, None)?;
    let du = model.d_u();
    let t = problem.t();
    let dx = problem.d_x();
    let gx = matmul(&model.g, &problem.x)?;

    let appr_n = problem.zx.sub(&matmul(&model.h, &gx)?)?;
    let appr = MultiTermExpr::new(vec![(matmul(&model.h, &model.f)?, Matrix::identity(t))], appr_n, du, t)?;

    let state_n = matmul(&gx, &problem.c_e)?.scale(-1.0);
    let state = MultiTermExpr::new(
        vec![
            (model.f.clone(), problem.c_e.clone()),
            (Matrix::identity(du), problem.c_b.scale(-1.0)),
        ],
        state_n,
        du,
        t,
    )?;

    let l = &problem.lambdas;
    CostFunction::new(
        vec![
            CostTerm::new(l.appr, appr, problem.residual_norm(dx, t))?,
            CostTerm::new(l.state, state, problem.residual_norm(du, t - 1))?,
            CostTerm::new(l.u, MultiTermExpr::identity(du, t), problem.regularizer_norm(du, t))?,
        ],
        problem.regime,
    )
}

/// Cost over `Z = G` with `F`, `U`, `H` fixed, regularized with weight
/// `1/(d_u d_x)`. Only used when [`TrainOptions::optimize_g`] is set.
pub fn build_g_step(problem: &TrainingProblem, model: &LrnnModel, u: &Matrix) -> Result<CostFunction> {
    problem.check_shapes(model, Some(u))?;
    let du = model.d_u();
    let dx = problem.d_x();
    let t = problem.t();
    let fu = matmul(&model.f, u)?;

    let appr_n = problem.zx.sub(&matmul(&model.h, &fu)?)?;
    let appr = MultiTermExpr::new(vec![(model.h.clone(), problem.x.clone())], appr_n, du, dx)?;

    let state_n = matmul(u, &problem.c_b)?.sub(&matmul(&fu, &problem.c_e)?)?;
    let state = MultiTermExpr::new(
        vec![(Matrix::identity(du), matmul(&problem.x, &problem.c_e)?)],
        state_n,
        du,
        dx,
    )?;

    let l = &problem.lambdas;
    let lambda_g = 1.0 / (du * dx) as f64;
    CostFunction::new(
        vec![
            CostTerm::new(l.appr, appr, problem.residual_norm(dx, t))?,
            CostTerm::new(l.state, state, problem.residual_norm(du, t - 1))?,
            CostTerm::new(
                lambda_g,
                MultiTermExpr::identity(du, dx),
                problem.regularizer_norm(du, dx),
            )?,
        ],
        problem.regime,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HalfStep {
    U,
    F,
    G,
}

impl HalfStep {
    fn label(self) -> &'static str {
        match self {
            HalfStep::U => "U-step",
            HalfStep::F => "F-step",
            HalfStep::G => "G-step",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub half_step: HalfStep,
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingState {
    pub model: LrnnModel,
    pub u: Matrix,
    /// Full objective after every half-step.
    pub cost_trace: Vec<TraceEntry>,
    pub converged_at: Option<usize>,
}

impl TrainingState {
    /// Objective at the end of each full iteration.
    pub fn iteration_costs(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        let mut current = 0;
        for e in &self.cost_trace {
            if e.iteration != current {
                out.push(e.cost);
                current = e.iteration;
            } else if let Some(last) = out.last_mut() {
                *last = e.cost;
            }
        }
        out
    }

    pub fn iterations(&self) -> usize {
        self.cost_trace.last().map_or(0, |e| e.iteration)
    }

    pub fn final_cost(&self) -> f64 {
        self.cost_trace.last().map_or(f64::NAN, |e| e.cost)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainOptions {
    pub max_iters: usize,
    /// Stop once a full iteration lowers the objective by less than this
    /// fraction.
    pub tol: f64,
    /// Also alternate over `G`. Off for the reference protocol.
    pub optimize_g: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            max_iters: 50,
            tol: 1e-6,
            optimize_g: false,
        }
    }
}

/// Alternates a U-step and an F-step (and optionally a G-step) per
/// iteration, starting with the U-step so no initial hidden sequence is
/// needed.
pub fn train(problem: &TrainingProblem, init: &LrnnModel, opts: &TrainOptions) -> Result<TrainingState> {
    problem.check_shapes(init, None)?;
    if opts.max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
    }
    let mut model = init.clone();
    let mut u = Matrix::zeros(model.d_u(), problem.t());
    let mut trace = Vec::new();
    let mut converged_at = None;
    let mut previous: Option<f64> = None;

    let wrap = |iteration: usize, step: HalfStep| {
        move |e: Error| Error::Training {
            iteration,
            half_step: step.label(),
            source: Box::new(e),
        }
    };

    for it in 1..=opts.max_iters {
        let cost = build_u_step(problem, &model).map_err(wrap(it, HalfStep::U))?;
        u = minimize_cost(&cost).map_err(wrap(it, HalfStep::U))?.z;
        trace.push(TraceEntry {
            iteration: it,
            half_step: HalfStep::U,
            cost: problem.full_cost(&model, &u)?,
        });

        let cost = build_f_step(problem, &model, &u).map_err(wrap(it, HalfStep::F))?;
        model.f = minimize_cost(&cost).map_err(wrap(it, HalfStep::F))?.z;
        let mut current = problem.full_cost(&model, &u)?;
        trace.push(TraceEntry {
            iteration: it,
            half_step: HalfStep::F,
            cost: current,
        });

        if opts.optimize_g {
            let cost = build_g_step(problem, &model, &u).map_err(wrap(it, HalfStep::G))?;
            let g = minimize_cost(&cost).map_err(wrap(it, HalfStep::G))?.z;
            let candidate = LrnnModel { g, ..model.clone() };
            let c = problem.full_cost(&candidate, &u)?;
            // the G-step drops nothing, but its extra regularizer means the
            // full objective is only guaranteed not to rise when we keep the
            // better of the two
            if c <= current {
                model = candidate;
                current = c;
            }
            trace.push(TraceEntry {
                iteration: it,
                half_step: HalfStep::G,
                cost: current,
            });
        }

        if let Some(prev) = previous {
            let drop = prev - current;
            if drop <= opts.tol * prev.abs().max(f64::MIN_POSITIVE) {
                converged_at = Some(it);
                break;
            }
        }
        previous = Some(current);
    }

    Ok(TrainingState {
        model,
        u,
        cost_trace: trace,
        converged_at,
    })
}

/// One-step-ahead outputs `H(FU + GX)` on the training window.
pub fn predict_insample(state: &TrainingState, problem: &TrainingProblem) -> Result<Matrix> {
    let m = &state.model;
    let drive = matmul(&m.f, &state.u)?.add(&matmul(&m.g, &problem.x)?)?;
    matmul(&m.h, &drive)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trajectory {
    /// Hidden state norm ended no larger than it started.
    Converging,
    /// Hidden state norm grew, or the run overflowed.
    Diverging,
}

#[derive(Debug, Clone)]
pub struct RecursivePrediction {
    /// `d_x × steps`; shorter than the horizon when the run overflowed.
    pub outputs: Matrix,
    pub overflowed: bool,
    pub trajectory: Trajectory,
}

const OVERFLOW_LIMIT: f64 = 1e100;

/// Closed-loop rollout feeding each output back as the next input:
/// `u_{t+1} = F u_t + G x̂_t`, `x̂_{t+1} = H u_{t+1}`.
pub fn predict_recursive(
    model: &LrnnModel,
    x_seed: &[f64],
    u_seed: &[f64],
    horizon: usize,
) -> Result<RecursivePrediction> {
    if x_seed.len() != model.d_x() || u_seed.len() != model.d_u() {
        return Err(Error::dims(
            "predict_recursive",
            format!("seeds of length {} and {}", x_seed.len(), u_seed.len()),
        ));
    }
    let mut u = u_seed.to_vec();
    let mut x = x_seed.to_vec();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let start = norm(&u);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(horizon);
    let mut overflowed = false;
    for _ in 0..horizon {
        let fu = model.f.mul_vec(&u)?;
        let gx = model.g.mul_vec(&x)?;
        let next: Vec<f64> = fu.iter().zip(&gx).map(|(a, b)| a + b).collect();
        if next.iter().any(|v| !v.is_finite() || v.abs() > OVERFLOW_LIMIT) {
            overflowed = true;
            break;
        }
        u = next;
        x = model.h.mul_vec(&u)?;
        out.push(x.clone());
    }
    let dx = model.d_x();
    let outputs = Matrix::from_fn(dx, out.len(), |i, j| out[j][i]);
    let trajectory = if overflowed || norm(&u) > start {
        Trajectory::Diverging
    } else {
        Trajectory::Converging
    };
    Ok(RecursivePrediction {
        outputs,
        overflowed,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::eval_cost;

    #[test]
    fn lambdas_follow_dimension_normalization() {
        let l = default_lambdas(100, 1, 4).unwrap();
        assert!((l.appr - 0.01).abs() < 1e-18);
        assert!((l.state - 1.0 / 396.0).abs() < 1e-18);
        assert!((l.u - 0.0025).abs() < 1e-18);
        assert!((l.f - 0.0625).abs() < 1e-18);

        let l = default_lambdas(2, 1, 1).unwrap();
        assert_eq!((l.appr, l.state, l.u, l.f), (0.5, 1.0, 0.5, 1.0));

        let l = default_lambdas(10, 1, 4).unwrap();
        assert!((l.appr - 0.1).abs() < 1e-18);
        assert!((l.state - 1.0 / 36.0).abs() < 1e-18);
        assert!((l.u - 0.025).abs() < 1e-18);
        assert_eq!(l.f, 0.0625);

        assert!(default_lambdas(1, 1, 4).is_err());
    }

    #[test]
    fn cut_matrices_select_columns() {
        let (cb, ce) = cut_matrices(4);
        let u = Matrix::from_rows(&[&[1.0, 2.0, 3.0, 4.0], &[5.0, 6.0, 7.0, 8.0]]);
        assert_eq!(
            matmul(&u, &cb).unwrap(),
            Matrix::from_rows(&[&[2.0, 3.0, 4.0], &[6.0, 7.0, 8.0]])
        );
        assert_eq!(
            matmul(&u, &ce).unwrap(),
            Matrix::from_rows(&[&[1.0, 2.0, 3.0], &[5.0, 6.0, 7.0]])
        );
    }

    fn small_problem(regime: Regime) -> (TrainingProblem, LrnnModel, Matrix) {
        let values: Vec<f64> = (0..9).map(|i| (i as f64 * 0.7).sin()).collect();
        let p = TrainingProblem::from_series(&values, 8, 3, 0.05, regime).unwrap();
        let m = LrnnModel::random_init(3, 1, 42);
        let u = Matrix::from_fn(3, 8, |i, j| ((i * 8 + j) as f64 * 0.37).cos());
        (p, m, u)
    }

    #[test]
    fn step_costs_agree_with_full_objective() {
        for regime in Regime::ALL {
            let (p, m, u) = small_problem(regime);
            let full = p.full_cost(&m, &u).unwrap();
            let reg_u = match regime {
                Regime::Sparse => p.lambdas.u * NormSpec::l1(3, 8).value(&u),
                Regime::Quadratic => p.lambdas.u * u.frobenius_sq(),
            };
            let reg_f = match regime {
                Regime::Sparse => p.lambdas.f * NormSpec::l1(3, 3).value(&m.f),
                Regime::Quadratic => p.lambdas.f * m.f.frobenius_sq(),
            };
            let f_step = eval_cost(&build_f_step(&p, &m, &u).unwrap(), &m.f).unwrap();
            assert!((f_step + reg_u - full).abs() < 1e-12 * (1.0 + full), "{regime}");
            let u_step = eval_cost(&build_u_step(&p, &m).unwrap(), &u).unwrap();
            assert!((u_step + reg_f - full).abs() < 1e-12 * (1.0 + full), "{regime}");
            let g_cost = build_g_step(&p, &m, &u).unwrap();
            let g_reg = match regime {
                Regime::Sparse => m.g.as_slice().iter().map(|v| v.abs()).sum::<f64>(),
                Regime::Quadratic => m.g.frobenius_sq(),
            } / 3.0;
            let g_step = eval_cost(&g_cost, &m.g).unwrap();
            assert!((g_step - g_reg + reg_f + reg_u - full).abs() < 1e-12 * (1.0 + full));
        }
    }

    #[test]
    fn zero_data_f_step_is_pure_regularizer() {
        for regime in Regime::ALL {
            let x = Matrix::zeros(1, 5);
            let p = TrainingProblem::new(x.clone(), x, default_lambdas(5, 1, 2).unwrap(), 0.05, regime).unwrap();
            let m = LrnnModel::new(
                Matrix::from_rows(&[&[0.5, -1.0], &[2.0, 0.25]]),
                Matrix::zeros(2, 1),
                first_coordinate_projection(1, 2),
            )
            .unwrap();
            let u = Matrix::zeros(2, 5);
            let c = build_f_step(&p, &m, &u).unwrap();
            let reg = match regime {
                Regime::Sparse => p.lambdas.f * 3.75,
                Regime::Quadratic => p.lambdas.f * m.f.frobenius_sq(),
            };
            assert!((eval_cost(&c, &m.f).unwrap() - reg).abs() < 1e-15);
        }
    }

    #[test]
    fn u_step_with_zero_weights_returns_zero() {
        for regime in Regime::ALL {
            let (p, _, _) = small_problem(regime);
            let m = LrnnModel::new(
                Matrix::zeros(3, 3),
                Matrix::zeros(3, 1),
                first_coordinate_projection(1, 3),
            )
            .unwrap();
            let min = minimize_cost(&build_u_step(&p, &m).unwrap()).unwrap();
            assert!(min.z.max_abs() < 1e-12, "{regime}: {:?}", min.z);
        }
    }

    #[test]
    fn training_trace_is_monotone() {
        for regime in Regime::ALL {
            let (p, m, _) = small_problem(regime);
            let s = train(
                &p,
                &m,
                &TrainOptions {
                    max_iters: 15,
                    ..Default::default()
                },
            )
            .unwrap();
            for w in s.cost_trace.windows(2) {
                assert!(w[1].cost <= w[0].cost + 1e-9, "{regime}: {:?}", w);
            }
            assert_eq!(s.cost_trace[0].half_step, HalfStep::U);
            let again = train(
                &p,
                &m,
                &TrainOptions {
                    max_iters: 15,
                    ..Default::default()
                },
            )
            .unwrap();
            let a: Vec<u64> = s.cost_trace.iter().map(|e| e.cost.to_bits()).collect();
            let b: Vec<u64> = again.cost_trace.iter().map(|e| e.cost.to_bits()).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn g_alternation_keeps_descent() {
        for regime in Regime::ALL {
            let (p, m, _) = small_problem(regime);
            let opts = TrainOptions {
                max_iters: 6,
                optimize_g: true,
                ..Default::default()
            };
            let s = train(&p, &m, &opts).unwrap();
            assert!(s.cost_trace.iter().any(|e| e.half_step == HalfStep::G));
            for w in s.cost_trace.windows(2) {
                assert!(w[1].cost <= w[0].cost + 1e-9);
            }
        }
    }

    #[test]
    fn persistence_predictor() {
        let values = [0.1, -0.4, 0.9, 0.3, -0.2];
        let p = TrainingProblem::from_series(&values, 4, 1, 0.05, Regime::Quadratic).unwrap();
        let model = LrnnModel::new(
            Matrix::zeros(1, 1),
            Matrix::from_rows(&[&[1.0]]),
            Matrix::from_rows(&[&[1.0]]),
        )
        .unwrap();
        let state = TrainingState {
            model,
            u: Matrix::from_rows(&[&[5.0, 6.0, 7.0, 8.0]]),
            cost_trace: Vec::new(),
            converged_at: None,
        };
        assert_eq!(predict_insample(&state, &p).unwrap(), p.x);
    }

    #[test]
    fn recursive_rollouts() {
        let zero = LrnnModel::new(
            Matrix::zeros(2, 2),
            Matrix::zeros(2, 1),
            first_coordinate_projection(1, 2),
        )
        .unwrap();
        let r = predict_recursive(&zero, &[0.7], &[1.0, -1.0], 5).unwrap();
        assert!(r.outputs.as_slice().iter().all(|v| *v == 0.0));
        assert_eq!(r.trajectory, Trajectory::Converging);

        let decay = LrnnModel::new(
            Matrix::from_rows(&[&[0.5, 0.0], &[0.0, 0.4]]),
            Matrix::zeros(2, 1),
            first_coordinate_projection(1, 2),
        )
        .unwrap();
        let r = predict_recursive(&decay, &[0.0], &[1.0, 1.0], 20).unwrap();
        let o = r.outputs.as_slice();
        assert!(o.windows(2).all(|w| w[1].abs() < w[0].abs()));
        assert!(o[19].abs() < 1e-5);

        let blow = LrnnModel::new(
            Matrix::from_rows(&[&[10.0]]),
            Matrix::zeros(1, 1),
            Matrix::from_rows(&[&[1.0]]),
        )
        .unwrap();
        let r = predict_recursive(&blow, &[0.0], &[1.0], 500).unwrap();
        assert!(r.overflowed);
        assert!(r.outputs.cols() < 500);
        assert_eq!(r.trajectory, Trajectory::Diverging);
    }
}
