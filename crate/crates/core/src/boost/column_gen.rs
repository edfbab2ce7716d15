//! Column generation for the semi-infinite QP
//!
//! ```text
//! min_w  ½ ρᵀQρ − θ eᵀρ   s.t.  w ∈ Δ_n,  ρ = A w
//! ```
//!
//! Each round asks the stump learner for the column with the largest edge
//! under the current duals `u = −Qρ + θe`. If that edge does not exceed
//! `r + ε`, where `r` is the largest edge among the columns already in the
//! master problem, the duals are feasible and training stops. Otherwise
//! the column is appended and the restricted primal is re-solved over the
//! simplex with warm-started EG.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};

use super::qspec::QSpec;
use super::BoostModel;
use crate::data::{build_balance_vector, compute_margins, dot, BalanceVector, Dataset, ResponseMatrix, WeakHypothesis};
use crate::error::{check_len, input, Error, Result};
use crate::simplex_qp::{eg_solve, gradient_sup_norm, warm_start, EgConfig, SimplexQp, Start};
use crate::stump::{StumpChoice, StumpConfig, StumpLearner};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    /// `Q = blockdiag(Q₁, Q₂)`.
    Fisher,
    /// `Q = blockdiag(Q₁, 0)`.
    Lac,
    /// `Q = blockdiag(Q₁, δ·Q₂)`.
    Blend(f64),
    /// LAC with a ridge: `blockdiag(Q₁, 0) + δ̃·I`.
    Ridge(f64),
    /// Arbitrary blend plus ridge.
    Custom { delta: f64, ridge: f64 },
}

impl Variant {
    /// `(delta, ridge)`.
    pub fn q_params(self) -> (f64, f64) {
        match self {
            Variant::Fisher => (1.0, 0.0),
            Variant::Lac => (0.0, 0.0),
            Variant::Blend(d) => (d, 0.0),
            Variant::Ridge(r) => (0.0, r),
            Variant::Custom { delta, ridge } => (delta, ridge),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostConfig {
    pub theta: f64,
    /// Slack on dual feasibility in the stopping test.
    pub epsilon: f64,
    pub max_weak: usize,
    pub variant: Variant,
    pub eg: EgConfig,
    pub warm_start_mix: f64,
    /// Run EG with the exact gradient sup-norm instead of the looser
    /// row-wise bound.
    pub tight_lipschitz: bool,
    pub stump: StumpConfig,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            theta: 0.1,
            epsilon: 1e-5,
            max_weak: 100,
            variant: Variant::Fisher,
            eg: EgConfig {
                tolerance: 1e-7,
                max_iterations: 200_000,
                lipschitz_override: None,
            },
            warm_start_mix: 0.1,
            tight_lipschitz: true,
            stump: StumpConfig::default(),
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0) {
            return input(format!("theta must be positive, got {}", self.theta));
        }
        if !(self.epsilon > 0.0) {
            return input(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.max_weak == 0 {
            return input("max_weak must be at least 1");
        }
        Ok(())
    }
}

/// Dual variables recovered from a primal solution.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub u: Vec<f64>,
    /// Largest edge `Σ_i u_i A_ij` over the columns in the master problem.
    pub r: f64,
}

/// `½ ρᵀQρ − θ eᵀρ` (any ridge in `q` contributes `½ δ̃ ‖ρ‖²`).
pub fn primal_objective(rho: &[f64], q: &QSpec, theta: f64, e: &BalanceVector) -> Result<f64> {
    check_len(q.m(), rho.len(), "margins vs Q")?;
    check_len(e.len(), rho.len(), "margins vs e")?;
    Ok(0.5 * q.quad_form(rho)? - theta * dot(e, rho))
}

/// `u = −Qρ + θe` and `r = max_j Σ_i u_i A_ij`.
///
/// The duals belong to the equality constraints `ρ = Aw` and are not sign
/// constrained, so negative entries are returned as computed.
pub fn recover_duals(
    rho: &[f64],
    q: &QSpec,
    theta: f64,
    e: &BalanceVector,
    a: &ResponseMatrix,
) -> Result<DualState> {
    check_len(a.rows(), rho.len(), "margins vs response rows")?;
    let qrho = q.apply(rho)?;
    let u: Vec<f64> = qrho.iter().zip(e.iter()).map(|(&qr, &ei)| -qr + theta * ei).collect();
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite dual variable".into()));
    }
    let r = a
        .transpose_mul(&u)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(DualState { u, r })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// No stump violates dual feasibility by more than ε.
    Converged,
    MaxWeak,
    /// Only constant stumps exist on this data.
    Degenerate,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    /// Primal objective after each column was added.
    pub objectives: Vec<f64>,
    /// Edge of each added column under the duals it was selected with.
    pub edges: Vec<f64>,
    /// `r` after each re-solve.
    pub r: Vec<f64>,
    pub eg_iterations: Vec<usize>,
    /// Rounds where the EG result was worse than the previous solution padded with a zero.
    pub eg_fallbacks: usize,
    /// Rounds where `eᵀρ < 0`.
    pub mean_gap_violations: usize,
    /// Best edge found by the final pricing step and the `r` it was compared with.
    pub final_edge: f64,
    pub final_r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: BoostModel,
    pub trace: TrainTrace,
    pub stop: StopReason,
    pub duals: DualState,
}

impl TrainOutcome {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }
}

/// Restricted master problem state. Exposed so the cascade trainer can add
/// columns one at a time.
#[derive(Debug, Clone)]
pub struct ColumnGeneration<'a> {
    data: &'a Dataset,
    cfg: BoostConfig,
    q: QSpec,
    e: BalanceVector,
    learner: StumpLearner,
    a: ResponseMatrix,
    p: DMatrix<f64>,
    c: Vec<f64>,
    w: Vec<f64>,
    rho: Vec<f64>,
    objective: f64,
    duals: DualState,
    trace: TrainTrace,
}

impl<'a> ColumnGeneration<'a> {
    pub fn new(data: &'a Dataset, cfg: BoostConfig) -> Result<Self> {
        cfg.validate()?;
        let (delta, ridge) = cfg.variant.q_params();
        let q = QSpec::new(data.m1(), data.m2(), delta, ridge)?;
        let e = build_balance_vector(data.m1(), data.m2())?;
        let m = data.len();
        Ok(Self {
            data,
            learner: StumpLearner::with_config(data, cfg.stump),
            cfg,
            q,
            e,
            a: ResponseMatrix::new(m),
            p: DMatrix::zeros(0, 0),
            c: Vec::new(),
            w: Vec::new(),
            rho: vec![0.0; m],
            objective: 0.0,
            // initial duals u_i = 1/m
            duals: DualState {
                u: vec![1.0 / m as f64; m],
                r: f64::NEG_INFINITY,
            },
            trace: TrainTrace::default(),
        })
    }

    /// Starts from an existing hypothesis list (e.g. the shared prefix of a
    /// multi-exit cascade on a refreshed training set) and solves the
    /// restricted problem over it.
    pub fn with_hypotheses(data: &'a Dataset, cfg: BoostConfig, hypotheses: &[WeakHypothesis]) -> Result<Self> {
        let mut cg = Self::new(data, cfg)?;
        for h in hypotheses {
            cg.append_column(*h)?;
        }
        if !hypotheses.is_empty() {
            cg.solve(Start::Uniform)?;
        }
        Ok(cg)
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn margins(&self) -> &[f64] {
        &self.rho
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn duals(&self) -> &DualState {
        &self.duals
    }

    pub fn trace(&self) -> &TrainTrace {
        &self.trace
    }

    pub fn response_matrix(&self) -> &ResponseMatrix {
        &self.a
    }

    pub fn q_spec(&self) -> &QSpec {
        &self.q
    }

    pub fn balance(&self) -> &BalanceVector {
        &self.e
    }

    pub fn model(&self) -> BoostModel {
        BoostModel {
            hypotheses: self.a.hypotheses().to_vec(),
            w: self.w.clone(),
            b: 0.0,
        }
    }

    /// Most violated constraint under the current duals.
    pub fn price(&mut self) -> Result<StumpChoice> {
        self.learner.best(self.data, &self.duals.u)
    }

    /// One round of column generation. Returns `Some(reason)` when training
    /// should stop.
    pub fn step(&mut self) -> Result<Option<StopReason>> {
        let choice = self.price()?;
        self.trace.final_edge = choice.edge;
        self.trace.final_r = self.duals.r;
        if self.n() > 0 {
            if choice.edge < self.duals.r + self.cfg.epsilon {
                return Ok(Some(StopReason::Converged));
            }
            if choice.degenerate {
                return Ok(Some(StopReason::Degenerate));
            }
        }
        if self.n() >= self.cfg.max_weak {
            return Ok(Some(StopReason::MaxWeak));
        }
        self.add_column(choice.hypothesis, choice.edge)?;
        Ok(None)
    }

    /// Appends `h` and re-solves the restricted primal.
    pub fn add_column(&mut self, h: WeakHypothesis, edge: f64) -> Result<()> {
        let previous = std::mem::take(&mut self.w);
        let prev_objective = self.objective;
        self.append_column(h)?;
        self.trace.edges.push(edge);
        let n = self.n();
        if n == 1 {
            self.solve(Start::Uniform)?;
        } else {
            let start = warm_start(&previous, n, self.cfg.warm_start_mix)?;
            self.solve(Start::Point(start))?;
            if self.objective > prev_objective {
                // [previous; 0] is feasible for the enlarged problem
                let mut padded = previous;
                padded.push(0.0);
                self.set_weights(padded)?;
                self.trace.eg_fallbacks += 1;
            }
        }
        self.trace.objectives.push(self.objective);
        self.trace.r.push(self.duals.r);
        Ok(())
    }

    fn append_column(&mut self, h: WeakHypothesis) -> Result<()> {
        let theta = self.cfg.theta;
        let col = self.a.push(h, self.data)?.to_vec();
        let q_col = self.q.apply(&col)?;
        let n = self.a.cols();
        let mut p = std::mem::replace(&mut self.p, DMatrix::zeros(0, 0)).resize(n, n, 0.0);
        for j in 0..n {
            let v = dot(self.a.column(j), &q_col);
            p[(j, n - 1)] = v;
            p[(n - 1, j)] = v;
        }
        self.p = p;
        self.c.push(-theta * dot(&self.e, &col));
        Ok(())
    }

    fn solve(&mut self, start: Start) -> Result<()> {
        let qp = SimplexQp::new(self.p.clone(), DVector::from_column_slice(&self.c))?;
        let mut eg = self.cfg.eg;
        if self.cfg.tight_lipschitz && eg.lipschitz_override.is_none() {
            eg.lipschitz_override = Some(gradient_sup_norm(&qp));
        }
        let sol = eg_solve(&qp, &start, &eg)?;
        if !sol.converged {
            debug!("EG hit its iteration cap at n = {}", qp.dim());
        }
        self.trace.eg_iterations.push(sol.iterations);
        self.set_weights(sol.w)
    }

    fn set_weights(&mut self, w: Vec<f64>) -> Result<()> {
        let rho = compute_margins(&self.a, &w)?.into_inner();
        self.objective = primal_objective(&rho, &self.q, self.cfg.theta, &self.e)?;
        self.duals = recover_duals(&rho, &self.q, self.cfg.theta, &self.e, &self.a)?;
        let mean_gap = dot(&self.e, &rho);
        if mean_gap < 0.0 {
            warn!("class mean gap eᵀρ = {mean_gap:.3e} is negative");
            self.trace.mean_gap_violations += 1;
        }
        self.w = w;
        self.rho = rho;
        Ok(())
    }

    pub fn into_outcome(self, stop: StopReason) -> TrainOutcome {
        let model = self.model();
        TrainOutcome {
            model,
            trace: self.trace,
            stop,
            duals: self.duals,
        }
    }
}

/// Totally-corrective training by column generation. The returned model has
/// `b = 0`; tune it with [`super::fit_offset`].
pub fn train(data: &Dataset, cfg: &BoostConfig) -> Result<TrainOutcome> {
    let mut cg = ColumnGeneration::new(data, *cfg)?;
    loop {
        if let Some(stop) = cg.step()? {
            return Ok(cg.into_outcome(stop));
        }
    }
}
