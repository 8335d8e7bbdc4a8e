//! Many-stage Runge-Kutta methods in modified Shu-Osher form.
//!
//! A stability polynomial `P(z) = 1 + z ∏ (1 − z/r_j)` is realized stage by stage:
//! every real pseudo-extremum is a forward Euler step, every conjugate pair a
//! two-stage submethod in two-register form and, with grouping enabled, pairs close to
//! the imaginary axis are fused with far-left pairs into four-stage submethods. The
//! final stage `Y_{S+1} = Y_1 + Δt F(Y_S)` supplies the leading `1 + z·(…)`.
//!
//! Stages are numbered from 0 in code: row `k` holds `Y_{k+1}`.

use std::f64::consts::PI;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::goldensectionsearch::GoldenSectionSearch;
use argmin::solver::neldermead::NelderMead;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::polynomial::{PseudoExtremaSet, StabilityPolynomial};
use crate::{Error, Result};

/// Tag written into every tableau file.
pub const TABLEAU_FORMAT: &str = "stabpoly-tableau/1";

/// Default boundary sample count for [`internal_stability`].
pub const BOUNDARY_SAMPLES: usize = 256;

const LEBEDEV_STARTS: usize = 24;
const LEBEDEV_PENALTY: f64 = 1e6;
const PAIR_GRID: usize = 400;
/// Slack for the `α ∈ [0, 1]` and `β ≥ 0` checks on solved four-stage coefficients.
const COEF_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubmethodKind {
    Euler,
    Pair,
    LebedevQuad,
}

/// One block of consecutive stages realizing one factor of the polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submethod {
    pub kind: SubmethodKind,
    /// Indices into the pseudo-extrema list: real roots first, then upper pairs.
    pub pe: Vec<usize>,
    /// First and last stage row (inclusive).
    pub stages: (usize, usize),
    /// `‖β‖₁` of the block.
    pub beta_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coef {
    pub col: usize,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    pub allow_negative_beta: bool,
    pub lebedev_grouping: bool,
    /// Pairs with real part above this value (scaled plane) are grouped.
    pub grouping_threshold: f64,
    /// Seed of the multistart in the four-stage solve.
    pub seed: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { allow_negative_beta: true, lebedev_grouping: true, grouping_threshold: -0.5, seed: 0 }
    }
}

/// Explicit method `Y_k = v_k U_n + Σ_l (α_{k,l} Y_l + Δt β_{k,l} F(Y_l))`, with
/// `U_{n+1} = Y_{S+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShuOsherTableau {
    stages: usize,
    pub order: u8,
    pub dt: f64,
    v: Vec<f64>,
    rows: Vec<Vec<Coef>>,
    c: Vec<f64>,
    pub grouping: Vec<Submethod>,
}

impl ShuOsherTableau {
    /// Assembles a tableau from its rows (`S + 1` of them, strictly lower triangular)
    /// and computes the abscissae.
    pub fn from_rows(rows: Vec<Vec<Coef>>, order: u8, dt: f64, grouping: Vec<Submethod>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Construction("a tableau needs at least two rows".into()));
        }
        for (k, row) in rows.iter().enumerate() {
            if let Some(e) = row.iter().find(|e| e.col >= k) {
                return Err(Error::Construction(format!("row {k} references stage {} (not explicit)", e.col)));
            }
        }
        let stages = rows.len() - 1;
        let mut v = vec![0.0; stages + 1];
        v[0] = 1.0;
        let mut t = Self { stages, order, dt, v, rows, c: Vec::new(), grouping };
        t.c = t.abscissae();
        Ok(t)
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    /// Row `k` (0-based, `k = S` is the output row).
    pub fn row(&self, k: usize) -> &[Coef] {
        &self.rows[k]
    }

    pub fn rows(&self) -> &[Vec<Coef>] {
        &self.rows
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn alpha(&self, k: usize, l: usize) -> f64 {
        self.rows[k].iter().find(|e| e.col == l).map_or(0.0, |e| e.alpha)
    }

    pub fn beta(&self, k: usize, l: usize) -> f64 {
        self.rows[k].iter().find(|e| e.col == l).map_or(0.0, |e| e.beta)
    }

    /// `c = (I − α)⁻¹ β 𝟙` by forward substitution.
    fn abscissae(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.stages];
        for k in 1..self.stages {
            c[k] = self.rows[k].iter().map(|e| e.alpha * c[e.col] + e.beta).sum();
        }
        c
    }

    /// Largest `|β|` entry.
    pub fn max_abs_beta(&self) -> f64 {
        self.rows.iter().flatten().fold(0.0f64, |m, e| m.max(e.beta.abs()))
    }
}

/// `Y_{S+1}` for `y' = λy`, `Δtλ = z`, `U_n = 1`.
pub fn scalar_stability_function(t: &ShuOsherTableau, z: Complex64) -> Complex64 {
    let mut y: Vec<Complex64> = Vec::with_capacity(t.stages + 1);
    for (k, row) in t.rows.iter().enumerate() {
        let mut acc = Complex64::new(t.v[k], 0.0);
        for e in row {
            acc += (e.alpha + z * e.beta) * y[e.col];
        }
        y.push(acc);
    }
    y[t.stages]
}

/// Two-stage block for `(1 − z/r)(1 − z/r̄) = 1 + s z + q z²`:
/// `Y_k = Y_{k−1} + Δt b1 F(Y_{k−1})`,
/// `Y_{k+1} = (1 − a) Y_{k−1} + a Y_k + Δt (b0 F(Y_{k−1}) + b2 F(Y_k))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCoefficients {
    pub b1: f64,
    pub a: f64,
    pub b0: f64,
    pub b2: f64,
}

impl PairCoefficients {
    pub fn beta_norm(&self) -> f64 {
        self.b1.abs() + self.b0.abs() + self.b2.abs()
    }
}

/// `s = −2 Re r / |r|²` and `q = 1 / |r|²`.
fn quadratic_factor(r: Complex64) -> (f64, f64) {
    let m = r.norm_sqr();
    (-2.0 * r.re / m, 1.0 / m)
}

/// For fixed `b1 > 0`, the coefficients with the smallest `|b0|` (and `b0 ≥ 0` unless
/// negative entries are allowed), or `None` if no admissible `a ∈ [0, 1]` exists.
fn pair_for_b1(s: f64, q: f64, b1: f64, allow_negative: bool) -> Option<PairCoefficients> {
    let b2 = q / b1;
    let rest = s - b2;
    let a = (rest / b1).clamp(0.0, 1.0);
    let b0 = rest - a * b1;
    if !allow_negative && b0 < 0.0 {
        return None;
    }
    Some(PairCoefficients { b1, a, b0, b2 })
}

struct PairCost {
    s: f64,
    q: f64,
    allow_negative: bool,
}

impl PairCost {
    /// Objective in `u = ln b1`.
    fn eval(&self, u: f64) -> f64 {
        pair_for_b1(self.s, self.q, u.exp(), self.allow_negative).map_or(f64::INFINITY, |c| c.beta_norm())
    }
}

impl CostFunction for PairCost {
    type Param = f64;
    type Output = f64;

    fn cost(&self, u: &f64) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.eval(*u))
    }
}

/// Minimizes `‖β‖₁` of the two-stage block over `b1` (log grid, then golden section
/// in the best cell). Negative `b1` never helps: it forces `b2 < 0` and `b0 > s`.
pub fn solve_pair(r: Complex64, allow_negative_beta: bool) -> Result<PairCoefficients> {
    let (s, q) = quadratic_factor(r);
    if !(s.is_finite() && q.is_finite()) || q <= 0.0 || s < 0.0 {
        return Err(Error::Construction(format!("pseudo-extremum {r} cannot form a two-stage block")));
    }
    let cost = PairCost { s, q, allow_negative: allow_negative_beta };
    let center = 0.5 * q.ln();
    let (lo, hi) = (center - 20.0, center + 20.0);
    let h = (hi - lo) / PAIR_GRID as f64;
    let (best_i, best_f) = (0..=PAIR_GRID)
        .map(|i| (i, cost.eval(lo + h * i as f64)))
        .fold((0, f64::INFINITY), |acc, (i, f)| if f < acc.1 { (i, f) } else { acc });
    if !best_f.is_finite() {
        return Err(Error::Construction(format!("no admissible two-stage block for pseudo-extremum {r}")));
    }
    let u_best = lo + h * best_i as f64;
    let (a, b) = ((u_best - h).max(lo), (u_best + h).min(hi));
    let refined = GoldenSectionSearch::new(a, b)
        .and_then(|g| g.with_tolerance(1e-12))
        .and_then(|solver| {
            Executor::new(PairCost { s, q, allow_negative: allow_negative_beta }, solver)
                .configure(|st| st.param(u_best).max_iters(200))
                .run()
        })
        .ok()
        .and_then(|res| res.state().get_best_param().copied());
    // the non-negative case may attain its minimum at the edge b1 = q/s of the
    // admissible interval
    let u = [refined, Some((q / s).ln())].into_iter().flatten().fold(u_best, |u, cand| {
        if cost.eval(cand) < cost.eval(u) {
            cand
        } else {
            u
        }
    });
    Ok(pair_for_b1(s, q, u.exp(), allow_negative_beta).expect("admissible point"))
}

/// Four-stage block in two-register form over base `Y_{m}`:
/// stage 1 is `Y_m + Δt b[0] F(Y_m)`, stages `j = 2..4` are
/// `a_j Y_m + (1 − a_j) Y_{prev} + Δt (b0_j F(Y_m) + b_j F(Y_{prev}))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadCoefficients {
    pub b1: f64,
    /// `a_j` for stages 2, 3, 4.
    pub a: [f64; 3],
    /// `b0_j` for stages 2, 3, 4.
    pub b0: [f64; 3],
    /// `b_j` for stages 2, 3, 4.
    pub b: [f64; 3],
}

impl QuadCoefficients {
    pub fn betas(&self) -> [f64; 7] {
        [self.b1, self.b0[0], self.b[0], self.b0[1], self.b[1], self.b0[2], self.b[2]]
    }

    pub fn beta_norm(&self) -> f64 {
        self.betas().iter().map(|b| b.abs()).sum()
    }

    /// Coefficients `[1, c1, c2, c3, c4]` of the block's scalar stability polynomial.
    pub fn quartic(&self) -> [f64; 5] {
        let mut w = vec![1.0];
        let b1 = [1.0, self.b1];
        w = mul(&w, &b1);
        for j in 0..3 {
            // a_j + b0_j z + (1 − a_j + b_j z) w
            let mut next = mul(&w, &[1.0 - self.a[j], self.b[j]]);
            next[0] += self.a[j];
            next[1] += self.b0[j];
            w = next;
        }
        [w[0], w[1], w[2], w[3], w[4]]
    }
}

fn mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

/// Target `[c1, c2, c3, c4]` of `(1 + s₁z + q₁z²)(1 + s₂z + q₂z²)`.
fn quartic_target(r1: Complex64, r2: Complex64) -> [f64; 4] {
    let (s1, q1) = quadratic_factor(r1);
    let (s2, q2) = quadratic_factor(r2);
    [s1 + s2, q1 + q2 + s1 * s2, s1 * q2 + s2 * q1, q1 * q2]
}

/// Completes the four-stage block from the free parameters
/// `[b1, a2, b0_2, b2, a3, b3]` so that it matches `target` exactly.
fn complete_quad(free: &[f64], target: &[f64; 4]) -> Option<QuadCoefficients> {
    let [b1, a2, b02, b2, a3, b3] = [free[0], free[1], free[2], free[3], free[4], free[5]];
    let [c1, c2, c3, c4] = *target;
    let e1 = b02 + (1.0 - a2) * b1 + b2;
    let e2 = b2 * b1;
    let d2 = (1.0 - a3) * e2 + b3 * e1;
    let d3 = b3 * e2;
    if d3 == 0.0 {
        return None;
    }
    let b4 = c4 / d3;
    let m4 = (c3 - b4 * d2) / d3;
    let d1 = (c2 - m4 * d2) / b4;
    let b03 = d1 - (1.0 - a3) * e1 - b3;
    let b04 = c1 - m4 * d1 - b4;
    let q = QuadCoefficients { b1, a: [a2, a3, 1.0 - m4], b0: [b02, b03, b04], b: [b2, b3, b4] };
    q.betas().iter().all(|b| b.is_finite()).then_some(q)
}

fn quad_violation(q: &QuadCoefficients, allow_negative: bool) -> f64 {
    let mut v: f64 = q.a.iter().map(|a| (-a).max(0.0) + (a - 1.0).max(0.0)).sum();
    if !allow_negative {
        v += q.betas().iter().map(|b| (-b).max(0.0)).sum::<f64>();
    }
    v
}

struct QuadCost {
    target: [f64; 4],
    allow_negative: bool,
    scale: f64,
}

impl CostFunction for QuadCost {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        Ok(match complete_quad(p, &self.target) {
            Some(q) => q.beta_norm() / self.scale + LEBEDEV_PENALTY * quad_violation(&q, self.allow_negative),
            None => f64::INFINITY,
        })
    }
}

/// Minimizes `‖β‖₁` of the four-stage block for the pairs `small` and `large` by
/// Nelder-Mead from several seeded starting points. Six of the ten coefficients are
/// free, the other four follow from matching the quartic.
pub fn solve_quad(
    small: Complex64,
    large: Complex64,
    allow_negative_beta: bool,
    seed: u64,
) -> Result<QuadCoefficients> {
    let target = quartic_target(small, large);
    let scale = target[3].powf(0.25);
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Construction(format!("cannot group pseudo-extrema {small} and {large}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, QuadCoefficients)> = None;
    for _ in 0..LEBEDEV_STARTS {
        let x0 = vec![
            scale * rng.random_range(0.2..2.0),
            rng.random_range(0.0..1.0),
            scale * rng.random_range(0.0..1.0),
            scale * rng.random_range(0.2..2.0),
            rng.random_range(0.0..1.0),
            scale * rng.random_range(0.2..2.0),
        ];
        let mut simplex = vec![x0.clone()];
        for i in 0..x0.len() {
            let mut x = x0.clone();
            x[i] += if i == 1 || i == 4 { 0.1 } else { 0.2 * scale };
            simplex.push(x);
        }
        let cost = QuadCost { target, allow_negative: allow_negative_beta, scale };
        let Ok(solver) = NelderMead::new(simplex).with_sd_tolerance(1e-14) else {
            continue;
        };
        let Ok(res) = Executor::new(cost, solver).configure(|st| st.max_iters(4000)).run() else {
            continue;
        };
        let Some(p) = res.state().get_best_param() else {
            continue;
        };
        let Some(mut q) = complete_quad(p, &target) else {
            continue;
        };
        if quad_violation(&q, allow_negative_beta) > COEF_SLACK {
            continue;
        }
        for a in q.a.iter_mut() {
            *a = a.clamp(0.0, 1.0);
        }
        let norm = q.beta_norm();
        if best.as_ref().is_none_or(|(b, _)| norm < *b) {
            best = Some((norm, q));
        }
    }
    best.map(|(_, q)| q).ok_or_else(|| {
        Error::Construction(format!("no admissible four-stage block for pseudo-extrema {small} and {large}"))
    })
}

enum Block {
    Euler { pe: usize, beta: f64 },
    Pair { pe: usize, coef: PairCoefficients },
    Quad { pe: [usize; 2], coef: QuadCoefficients },
}

impl Block {
    fn beta_norm(&self) -> f64 {
        match self {
            Block::Euler { beta, .. } => beta.abs(),
            Block::Pair { coef, .. } => coef.beta_norm(),
            Block::Quad { coef, .. } => coef.beta_norm(),
        }
    }
}

/// Pairs (indices into `upper`) to fuse: small-real-part pairs, nearest to the
/// imaginary axis first, matched with the remaining pairs of most negative real part.
fn lebedev_groups(upper: &[Complex64], threshold: f64) -> Result<Vec<(usize, usize)>> {
    let mut small: Vec<usize> = (0..upper.len()).filter(|&j| upper[j].re > threshold).collect();
    let mut large: Vec<usize> = (0..upper.len()).filter(|&j| upper[j].re <= threshold).collect();
    small.sort_by(|&a, &b| upper[b].re.total_cmp(&upper[a].re));
    large.sort_by(|&a, &b| upper[a].re.total_cmp(&upper[b].re));
    if small.len() > large.len() {
        let lone = upper[small[large.len()]];
        return Err(Error::Construction(format!(
            "pseudo-extremum {lone} has no partner with real part below {threshold}"
        )));
    }
    Ok(small.into_iter().zip(large).collect())
}

/// Builds the Shu-Osher tableau realizing `poly`. Blocks are ordered by increasing
/// `‖β‖₁`.
pub fn build_tableau(poly: &StabilityPolynomial, opts: &BuildOptions) -> Result<ShuOsherTableau> {
    let pe: &PseudoExtremaSet = &poly.pe;
    let n_real = pe.real_pe().len();
    let upper = pe.upper_pe();
    let mut blocks = Vec::new();
    for (i, &r) in pe.real_pe().iter().enumerate() {
        if r >= 0.0 {
            return Err(Error::Construction(format!("real pseudo-extremum {r} is not negative")));
        }
        blocks.push(Block::Euler { pe: i, beta: -1.0 / r });
    }
    let groups = if opts.lebedev_grouping { lebedev_groups(upper, opts.grouping_threshold)? } else { Vec::new() };
    let mut grouped = vec![false; upper.len()];
    for (g, &(s, l)) in groups.iter().enumerate() {
        grouped[s] = true;
        grouped[l] = true;
        let coef = solve_quad(upper[s], upper[l], opts.allow_negative_beta, opts.seed.wrapping_add(g as u64))?;
        blocks.push(Block::Quad { pe: [n_real + s, n_real + l], coef });
    }
    for (j, &r) in upper.iter().enumerate() {
        if !grouped[j] {
            let coef = solve_pair(r, opts.allow_negative_beta)?;
            blocks.push(Block::Pair { pe: n_real + j, coef });
        }
    }
    blocks.sort_by(|a, b| a.beta_norm().total_cmp(&b.beta_norm()));

    let stages = pe.degree();
    let mut rows: Vec<Vec<Coef>> = vec![Vec::new()];
    let mut grouping = Vec::with_capacity(blocks.len());
    let entry = |col, alpha, beta| Coef { col, alpha, beta };
    for block in &blocks {
        let base = rows.len() - 1;
        let (kind, ids) = match block {
            Block::Euler { pe, beta } => {
                rows.push(vec![entry(base, 1.0, *beta)]);
                (SubmethodKind::Euler, vec![*pe])
            }
            Block::Pair { pe, coef } => {
                rows.push(vec![entry(base, 1.0, coef.b1)]);
                rows.push(vec![entry(base, 1.0 - coef.a, coef.b0), entry(base + 1, coef.a, coef.b2)]);
                (SubmethodKind::Pair, vec![*pe])
            }
            Block::Quad { pe, coef } => {
                rows.push(vec![entry(base, 1.0, coef.b1)]);
                for j in 0..3 {
                    let prev = rows.len() - 1;
                    rows.push(vec![entry(base, coef.a[j], coef.b0[j]), entry(prev, 1.0 - coef.a[j], coef.b[j])]);
                }
                (SubmethodKind::LebedevQuad, pe.to_vec())
            }
        };
        grouping.push(Submethod { kind, pe: ids, stages: (base + 1, rows.len() - 1), beta_norm: block.beta_norm() });
    }
    debug_assert_eq!(rows.len(), stages);
    rows.push(vec![entry(0, 1.0, 0.0), entry(stages - 1, 0.0, 1.0)]);
    for row in rows.iter_mut() {
        row.retain(|e| e.alpha != 0.0 || e.beta != 0.0);
    }
    ShuOsherTableau::from_rows(rows, poly.order, poly.dt, grouping)
}

/// Round-off amplification over a set of boundary samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplificationReport {
    /// `max |Q_k|` over the samples, `k = 1..=S+1`.
    pub per_stage: Vec<f64>,
    /// `max_z Σ_{k≥2} |Q_k(z)|`.
    pub m_tilde: f64,
    pub sample_points: Vec<Complex64>,
    /// `Δt^{p+1}`, the size of the local truncation error.
    pub truncation_scale: f64,
}

/// Internal stability polynomials `Q_1..Q_{S+1}` at `z`. The row vector
/// `(α_{S+1} + zβ_{S+1})(I − α − zβ)⁻¹` is accumulated as the finite power sum
/// `Σ_k e (α + zβ)^k`; the matrix is nilpotent, so no inverse is formed.
pub fn internal_stability_polynomials(t: &ShuOsherTableau, z: Complex64) -> Vec<Complex64> {
    let s = t.stages;
    let mut x = vec![Complex64::new(0.0, 0.0); s];
    for e in &t.rows[s] {
        x[e.col] += e.alpha + z * e.beta;
    }
    let mut q = x.clone();
    for _ in 1..s {
        let mut next = vec![Complex64::new(0.0, 0.0); s];
        for (k, row) in t.rows[..s].iter().enumerate() {
            if x[k] == Complex64::new(0.0, 0.0) {
                continue;
            }
            for e in row {
                next[e.col] += x[k] * (e.alpha + z * e.beta);
            }
        }
        if next.iter().all(|v| *v == Complex64::new(0.0, 0.0)) {
            break;
        }
        for (qi, ni) in q.iter_mut().zip(&next) {
            *qi += ni;
        }
        x = next;
    }
    q.push(Complex64::new(1.0, 0.0));
    q
}

/// `M̃` and per-stage maxima of the internal stability polynomials over the samples.
pub fn internal_stability(t: &ShuOsherTableau, boundary_samples: &[Complex64]) -> AmplificationReport {
    internal_stability_with(t, boundary_samples, Exec::default())
}

pub fn internal_stability_with(t: &ShuOsherTableau, boundary_samples: &[Complex64], exec: Exec) -> AmplificationReport {
    let moduli: Vec<Vec<f64>> =
        exec.map(boundary_samples, |&z| internal_stability_polynomials(t, z).iter().map(|q| q.norm()).collect());
    let mut per_stage = vec![0.0f64; t.stages + 1];
    let mut m_tilde = 0.0f64;
    for m in &moduli {
        for (p, v) in per_stage.iter_mut().zip(m) {
            *p = p.max(*v);
        }
        m_tilde = m_tilde.max(m[1..].iter().sum());
    }
    AmplificationReport {
        per_stage,
        m_tilde,
        sample_points: boundary_samples.to_vec(),
        truncation_scale: t.dt.powi(i32::from(t.order) + 1),
    }
}

/// Points with `|P(z)| = 1` along `count` rays from `anchor` (first exit from the
/// stability region, located by marching and bisection). `anchor` must satisfy
/// `|P(anchor)| ≤ 1`; the mean of the pseudo-extrema is a reasonable choice.
pub fn boundary_samples(poly: &StabilityPolynomial, anchor: Complex64, count: usize) -> Result<Vec<Complex64>> {
    if poly.eval(anchor).norm() > 1.0 {
        return Err(Error::InvalidArgument(format!("anchor {anchor} lies outside the stability region")));
    }
    let reach = poly.pe.all_roots().iter().fold(1.0f64, |m, r| m.max((r - anchor).norm()));
    let t_max = 2.0 * reach + 1.0;
    const MARCH: usize = 2000;
    let samples = (0..count)
        .map(|i| {
            let dir = Complex64::from_polar(1.0, 2.0 * PI * i as f64 / count as f64);
            let at = |t: f64| anchor + dir * t;
            let mut lo = 0.0;
            let mut hi = t_max;
            for j in 1..=MARCH {
                let t = t_max * j as f64 / MARCH as f64;
                if poly.eval(at(t)).norm() > 1.0 {
                    hi = t;
                    break;
                }
                lo = t;
            }
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if poly.eval(at(mid)).norm() > 1.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            at(lo)
        })
        .collect();
    Ok(samples)
}

/// Mean of all pseudo-extrema (a point on the negative real axis).
pub fn default_anchor(poly: &StabilityPolynomial) -> Complex64 {
    let roots = poly.pe.all_roots();
    roots.iter().sum::<Complex64>() / roots.len() as f64
}

/// `min α_{k,l} / β_{k,l}` over entries with `β ≠ 0`; a negative `β` anywhere gives 0.
pub fn ssp_coefficient(t: &ShuOsherTableau) -> f64 {
    let mut c = f64::INFINITY;
    for e in t.rows.iter().flatten() {
        if e.beta < 0.0 {
            return 0.0;
        }
        if e.beta > 0.0 {
            c = c.min(e.alpha / e.beta);
        }
    }
    if c.is_finite() {
        c.max(0.0)
    } else {
        0.0
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableauFile {
    format: String,
    stages: usize,
    order: u8,
    dt: f64,
    v: Vec<f64>,
    alpha: Vec<(usize, usize, f64)>,
    beta: Vec<(usize, usize, f64)>,
    c: Vec<f64>,
    grouping: Vec<Submethod>,
}

/// JSON encoding with sparse `(row, col, value)` triplets. Numbers use the shortest
/// representation that parses back to the same `f64`.
pub fn serialize_tableau(t: &ShuOsherTableau) -> String {
    let triplets = |f: fn(&Coef) -> f64| {
        t.rows
            .iter()
            .enumerate()
            .flat_map(|(k, row)| row.iter().map(move |e| (k, e.col, f(e))))
            .filter(|x| x.2 != 0.0)
            .collect()
    };
    let file = TableauFile {
        format: TABLEAU_FORMAT.into(),
        stages: t.stages,
        order: t.order,
        dt: t.dt,
        v: t.v.clone(),
        alpha: triplets(|e| e.alpha),
        beta: triplets(|e| e.beta),
        c: t.c.clone(),
        grouping: t.grouping.clone(),
    };
    serde_json::to_string_pretty(&file).expect("tableau is serializable")
}

pub fn deserialize_tableau(text: &str) -> Result<ShuOsherTableau> {
    let file: TableauFile =
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
    if file.format != TABLEAU_FORMAT {
        return Err(Error::Format(format!("unsupported format tag {:?} (expected {TABLEAU_FORMAT})", file.format)));
    }
    let s = file.stages;
    if file.v.len() != s + 1 || file.c.len() != s {
        return Err(Error::Format(format!("vector lengths do not match {s} stages")));
    }
    if file.v.iter().enumerate().any(|(k, &v)| v != if k == 0 { 1.0 } else { 0.0 }) {
        return Err(Error::Format("only v = (1, 0, …, 0) is supported".into()));
    }
    let mut rows: Vec<Vec<Coef>> = vec![Vec::new(); s + 1];
    let mut place = |(k, l, x): (usize, usize, f64), is_alpha: bool| -> Result<()> {
        if k > s || l >= k {
            return Err(Error::Format(format!("entry ({k}, {l}) is outside the strictly lower triangle")));
        }
        let row = &mut rows[k];
        let idx = match row.iter().position(|e| e.col == l) {
            Some(i) => i,
            None => {
                row.push(Coef { col: l, alpha: 0.0, beta: 0.0 });
                row.len() - 1
            }
        };
        if is_alpha {
            row[idx].alpha = x;
        } else {
            row[idx].beta = x;
        }
        Ok(())
    };
    for a in file.alpha {
        place(a, true)?;
    }
    for b in file.beta {
        place(b, false)?;
    }
    for row in rows.iter_mut() {
        row.sort_by_key(|e| e.col);
    }
    let mut t = ShuOsherTableau::from_rows(rows, file.order, file.dt, file.grouping)?;
    t.c = file.c;
    Ok(t)
}

/// Two forward Euler steps averaged: `Y₂ = Y₁ + ΔtF(Y₁)`,
/// `Y₃ = ½Y₁ + ½Y₂ + ½ΔtF(Y₂)`.
pub fn ssp_rk2() -> ShuOsherTableau {
    let rows = vec![
        vec![],
        vec![Coef { col: 0, alpha: 1.0, beta: 1.0 }],
        vec![Coef { col: 0, alpha: 0.5, beta: 0.0 }, Coef { col: 1, alpha: 0.5, beta: 0.5 }],
    ];
    ShuOsherTableau::from_rows(rows, 2, 1.0, Vec::new()).expect("valid tableau")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polynomial::{circle_pe, disk_polynomial_pe, eval};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn poly(pe: PseudoExtremaSet, order: u8) -> StabilityPolynomial {
        StabilityPolynomial::new(pe, order, 1.0).unwrap()
    }

    #[test]
    fn single_euler_stage() {
        let p = poly(PseudoExtremaSet::new(vec![-2.0], vec![]).unwrap(), 2);
        let t = build_tableau(&p, &BuildOptions::default()).unwrap();
        assert_eq!(t.stages(), 2);
        assert_eq!(t.beta(1, 0), 0.5);
        assert_eq!((t.alpha(2, 0), t.beta(2, 0), t.alpha(2, 1), t.beta(2, 1)), (1.0, 0.0, 0.0, 1.0));
        let z = c(-1.0, 0.0);
        assert!((scalar_stability_function(&t, z) - c(0.5, 0.0)).norm() < 1e-15);
        assert_eq!(scalar_stability_function(&t, c(0.0, 0.0)), c(1.0, 0.0));
    }

    #[test]
    fn pair_block_satisfies_factor_constraints() {
        let r = c(-3.0, 3.0);
        for neg in [false, true] {
            let p = solve_pair(r, neg).unwrap();
            assert!((p.a * p.b1 + p.b0 + p.b2 - 1.0 / 3.0).abs() < 1e-15);
            assert!((p.b1 * p.b2 - 1.0 / 18.0).abs() < 1e-15);
            assert!((0.0..=1.0).contains(&p.a));
        }
    }

    /// Closed-form minimum of `‖β‖₁` for the two-stage block.
    fn pair_oracle(r: Complex64, allow_negative: bool) -> f64 {
        let m = r.norm_sqr();
        let (s, q) = (-2.0 * r.re / m, 1.0 / m);
        let rq = q.sqrt();
        if s >= rq {
            // b1 = √q, b0 = 0 reaches the AM-GM bound
            return 2.0 * rq;
        }
        if allow_negative {
            // a = 0, b0 = s − q/b1 < 0: b1 + 2q/b1 − s on b1 < q/s
            let b1 = (2.0 * q).sqrt();
            if b1 < q / s {
                (2.0 * b1 - s).min(q / s + s)
            } else {
                q / s + s
            }
        } else {
            // smallest admissible b1 = q/s
            q / s + s
        }
    }

    #[test]
    fn pair_search_reaches_closed_form_minimum() {
        for r in [c(-3.0, 3.0), c(-1.0, 5.0), c(-0.1, 10.0), c(-20.0, 0.5), c(-4.0, 0.0)] {
            for neg in [false, true] {
                let got = solve_pair(r, neg).unwrap().beta_norm();
                let want = pair_oracle(r, neg);
                assert!((got - want).abs() <= 1e-8 * want, "{r} {neg}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn quad_expansion_matches_product_of_factors() {
        let (r1, r2) = (c(-0.1, 8.0), c(-30.0, 4.0));
        let q = solve_quad(r1, r2, true, 7).unwrap();
        let got = q.quartic();
        let want = quartic_target(r1, r2);
        assert_eq!(got[0], 1.0);
        for i in 0..4 {
            assert!((got[i + 1] - want[i]).abs() <= 1e-12 * want[i].abs().max(1e-300), "{i}: {got:?} {want:?}");
        }
        assert!(q.a.iter().all(|a| (0.0..=1.0).contains(a)));
        // numerical product of the two quadratic factors as an independent check
        let f = |r: Complex64| {
            let m = r.norm_sqr();
            [1.0, -2.0 * r.re / m, 1.0 / m]
        };
        let prod = mul(&f(r1), &f(r2));
        for i in 0..5 {
            assert!((got[i] - prod[i]).abs() <= 1e-12 * prod[i].abs());
        }
    }

    #[test]
    fn quad_with_nonnegative_beta() {
        let q = solve_quad(c(-0.3, 4.0), c(-20.0, 3.0), false, 1).unwrap();
        assert!(q.betas().iter().all(|b| *b >= 0.0), "{q:?}");
    }

    #[test]
    fn disk_tableau_reproduces_polynomial() {
        for s in [4, 8, 16] {
            let p = poly(disk_polynomial_pe(s, 2).unwrap(), 2);
            let t = build_tableau(&p, &BuildOptions::default()).unwrap();
            assert_eq!(t.stages(), s);
            for i in 0..50 {
                let z = Complex64::from_polar(s as f64 * 1.5 * (i as f64 / 50.0), 0.7 + 0.05 * i as f64);
                let (a, b) = (scalar_stability_function(&t, z), eval(&p.pe, z));
                assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0), "{s} {z}: {a} {b}");
            }
        }
    }

    #[test]
    fn rows_are_consistent_and_ordered() {
        let p = poly(circle_pe(16, 16.0).unwrap(), 1);
        let t = build_tableau(&p, &BuildOptions { lebedev_grouping: false, ..Default::default() }).unwrap();
        for k in 1..=t.stages() {
            let sum: f64 = t.row(k).iter().map(|e| e.alpha).sum();
            assert!((sum - 1.0).abs() <= 1e-14, "row {k}: {sum}");
        }
        let norms: Vec<f64> = t.grouping.iter().map(|g| g.beta_norm).collect();
        assert!(norms.windows(2).all(|w| w[0] <= w[1]));
        assert!(t.c().iter().all(|c| *c >= 0.0));
    }

    #[test]
    fn abscissae_match_triangular_solve() {
        let p = poly(disk_polynomial_pe(10, 2).unwrap(), 2);
        let t = build_tableau(&p, &BuildOptions::default()).unwrap();
        let s = t.stages();
        let a = nalgebra::DMatrix::from_fn(s, s, |i, j| f64::from(i == j) - t.alpha(i, j));
        let b = nalgebra::DVector::from_fn(s, |i, _| (0..s).map(|j| t.beta(i, j)).sum());
        let want = a.lu().solve(&b).unwrap();
        for k in 0..s {
            assert!((t.c()[k] - want[k]).abs() <= 1e-12, "{k}");
        }
    }

    #[test]
    fn q1_is_the_stability_polynomial_and_last_is_one() {
        let p = poly(disk_polynomial_pe(8, 2).unwrap(), 2);
        let t = build_tableau(&p, &BuildOptions::default()).unwrap();
        let z = c(-3.0, 2.5);
        let q = internal_stability_polynomials(&t, z);
        assert!((q[0] - eval(&p.pe, z)).norm() <= 1e-12 * eval(&p.pe, z).norm());
        assert_eq!(q[t.stages()], c(1.0, 0.0));
    }

    #[test]
    fn two_stage_amplification_by_hand() {
        // S = 2 from pe {−2}: Q₂ = z, Q₃ = 1
        let p = poly(PseudoExtremaSet::new(vec![-2.0], vec![]).unwrap(), 2);
        let t = build_tableau(&p, &BuildOptions::default()).unwrap();
        let z = c(-1.5, 0.5);
        let q = internal_stability_polynomials(&t, z);
        assert!((q[1] - z).norm() < 1e-15 && q[2] == c(1.0, 0.0));
        let report = internal_stability(&t, &[z]);
        assert!((report.m_tilde - (z.norm() + 1.0)).abs() < 1e-15);
        assert_eq!(report.truncation_scale, 1.0);
    }

    #[test]
    fn boundary_samples_lie_on_unit_modulus_curve() {
        let p = poly(disk_polynomial_pe(8, 2).unwrap(), 2);
        let pts = boundary_samples(&p, default_anchor(&p), 64).unwrap();
        assert_eq!(pts.len(), 64);
        for z in pts {
            assert!((eval(&p.pe, z).norm() - 1.0).abs() < 1e-9, "{z}");
        }
    }

    #[test]
    fn ssp_coefficients() {
        assert_eq!(ssp_coefficient(&ssp_rk2()), 1.0);
        let p = poly(disk_polynomial_pe(8, 2).unwrap(), 2);
        assert_eq!(ssp_coefficient(&build_tableau(&p, &BuildOptions::default()).unwrap()), 0.0);
        let rows = vec![vec![], vec![Coef { col: 0, alpha: 1.0, beta: -0.5 }]];
        assert_eq!(ssp_coefficient(&ShuOsherTableau::from_rows(rows, 1, 1.0, vec![]).unwrap()), 0.0);
    }

    #[test]
    fn grouping_tames_small_real_part_pairs() {
        let pe = PseudoExtremaSet::new(vec![-40.0], vec![c(-0.02, 9.0), c(-38.0, 5.0), c(-20.0, 15.0)]).unwrap();
        let p = poly(pe, 1);
        let plain = build_tableau(
            &p,
            &BuildOptions { lebedev_grouping: false, allow_negative_beta: false, ..Default::default() },
        )
        .unwrap();
        let grouped = build_tableau(&p, &BuildOptions { allow_negative_beta: false, ..Default::default() }).unwrap();
        assert!(plain.max_abs_beta() > 10.0, "{}", plain.max_abs_beta());
        assert!(grouped.max_abs_beta() <= 10.0, "{}", grouped.max_abs_beta());
        assert_eq!(grouped.grouping.iter().filter(|g| g.kind == SubmethodKind::LebedevQuad).count(), 1);
        for i in 0..30 {
            let z = Complex64::from_polar(0.5 + i as f64, 1.6 + 0.05 * i as f64);
            let (a, b) = (scalar_stability_function(&grouped, z), eval(&p.pe, z));
            assert!((a - b).norm() <= 1e-10 * b.norm().max(1.0));
        }
    }

    #[test]
    fn lone_small_pair_is_an_error() {
        let pe = PseudoExtremaSet::new(vec![-4.0], vec![c(-0.1, 3.0), c(-0.2, 2.0)]).unwrap();
        assert!(matches!(build_tableau(&poly(pe, 1), &BuildOptions::default()), Err(Error::Construction(_))));
    }

    #[test]
    fn serialization_round_trip_is_exact() {
        let p = poly(disk_polynomial_pe(12, 2).unwrap(), 2);
        let t = build_tableau(&p, &BuildOptions::default()).unwrap();
        let back = deserialize_tableau(&serialize_tableau(&t)).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn serialization_errors() {
        let p = poly(disk_polynomial_pe(4, 2).unwrap(), 2);
        let text = serialize_tableau(&build_tableau(&p, &BuildOptions::default()).unwrap());
        let wrong_tag = text.replace(TABLEAU_FORMAT, "stabpoly-tableau/0");
        assert!(matches!(deserialize_tableau(&wrong_tag), Err(Error::Format(_))));
        let mut json: serde_json::Value = serde_json::from_str(&text).unwrap();
        json.as_object_mut().unwrap().remove("beta");
        assert!(matches!(deserialize_tableau(&json.to_string()), Err(Error::Parse { .. })));
        assert!(matches!(deserialize_tableau("{ not json"), Err(Error::Parse { line: 1, .. })));
    }
}
