//! Projected L-BFGS with Armijo backtracking for box-constrained minimization.

use std::collections::VecDeque;

const MEMORY: usize = 10;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 60;
const STALL_LIMIT: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    Converged,
    Stalled,
    MaxIter,
}

#[cfg_attr(not(test), allow(dead_code))]
pub struct Outcome<A> {
    pub v: Vec<f64>,
    pub f: f64,
    pub aux: A,
    pub iterations: usize,
    pub stop: Stop,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project(v: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((x, l), h) in v.iter_mut().zip(lo).zip(hi) {
        *x = x.clamp(*l, *h);
    }
}

/// Minimizes `eval` over the box `[lo, hi]` starting from `v0`.
///
/// `eval` returns the objective, its gradient and an auxiliary record that `done`
/// inspects after every accepted step (and at the start). `first_step` bounds the
/// largest coordinate change of the initial steepest-descent step.
pub fn minimize<A, E, D>(
    mut eval: E,
    v0: &[f64],
    lo: &[f64],
    hi: &[f64],
    max_iter: usize,
    first_step: f64,
    done: D,
) -> Outcome<A>
where
    E: FnMut(&[f64]) -> (f64, Vec<f64>, A),
    D: Fn(&A) -> bool,
{
    let n = v0.len();
    let mut v = v0.to_vec();
    project(&mut v, lo, hi);
    let (mut f, mut g, mut aux) = eval(&v);
    if done(&aux) {
        return Outcome { v, f, aux, iterations: 0, stop: Stop::Converged };
    }
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut gamma = 1.0;
    let mut stall = 0;
    let mut iterations = 0;
    while iterations < max_iter {
        let steepest = |g: &[f64]| {
            let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let scale = if gmax > 0.0 { first_step / gmax } else { 0.0 };
            g.iter().map(|x| -scale * x).collect::<Vec<f64>>()
        };
        let mut d = if memory.is_empty() { steepest(&g) } else { two_loop(&g, &memory, gamma) };
        let freeze = |d: &mut [f64], v: &[f64]| {
            for i in 0..n {
                if (v[i] <= lo[i] && d[i] < 0.0) || (v[i] >= hi[i] && d[i] > 0.0) {
                    d[i] = 0.0;
                }
            }
        };
        freeze(&mut d, &v);
        if !(dot(&g, &d) < 0.0) {
            memory.clear();
            d = steepest(&g);
            freeze(&mut d, &v);
            if !(dot(&g, &d) < 0.0) {
                return Outcome { v, f, aux, iterations, stop: Stop::Stalled };
            }
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let mut trial: Vec<f64> = v.iter().zip(&d).map(|(x, di)| x + t * di).collect();
            project(&mut trial, lo, hi);
            let step: Vec<f64> = trial.iter().zip(&v).map(|(a, b)| a - b).collect();
            if step.iter().all(|s| *s == 0.0) {
                break;
            }
            let (ft, gt, at) = eval(&trial);
            if ft.is_finite() && ft <= f + ARMIJO * dot(&g, &step) {
                accepted = Some((trial, step, ft, gt, at));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, s, ft, gt, at)) = accepted else {
            if memory.is_empty() {
                return Outcome { v, f, aux, iterations, stop: Stop::Stalled };
            }
            memory.clear();
            stall += 1;
            if stall >= STALL_LIMIT {
                return Outcome { v, f, aux, iterations, stop: Stop::Stalled };
            }
            continue;
        };
        iterations += 1;
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        if sy > 1e-16 * dot(&s, &s).sqrt() * yy.sqrt() && yy > 0.0 {
            if memory.len() == MEMORY {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
            gamma = sy / yy;
        }
        if f - ft <= 1e-14 * f.abs() {
            stall += 1;
        } else {
            stall = 0;
        }
        v = trial;
        f = ft;
        g = gt;
        aux = at;
        if done(&aux) {
            return Outcome { v, f, aux, iterations, stop: Stop::Converged };
        }
        if stall >= STALL_LIMIT {
            return Outcome { v, f, aux, iterations, stop: Stop::Stalled };
        }
    }
    Outcome { v, f, aux, iterations, stop: Stop::MaxIter }
}

/// `−H g` from the two-loop recursion.
fn two_loop(g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, gamma: f64) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    for qi in q.iter_mut() {
        *qi *= gamma;
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|x| -x).collect()
}
