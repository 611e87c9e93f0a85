use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const REFLECTION: f64 = 1.0;
const EXPANSION: f64 = 2.0;
const CONTRACTION: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TerminationConfig {
    /// Stop once `max f - min f` over the simplex falls below this.
    pub fitness_tolerance: f64,
    /// Stop once the largest vertex-to-vertex distance falls below this (mV).
    pub simplex_size_tolerance: f64,
    /// Budget of objective evaluations.
    pub max_iterations: usize,
    pub rule: StopRule,
}

/// How the two tolerances combine.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopRule {
    /// Stop when either tolerance is met.
    #[default]
    Either,
    /// Stop only when both are met.
    Both,
}

impl Default for TerminationConfig {
    fn default() -> Self {
        Self {
            fitness_tolerance: 0.02,
            simplex_size_tolerance: 2.0,
            max_iterations: 50,
            rule: StopRule::Either,
        }
    }
}

impl TerminationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fitness_tolerance > 0.0 && self.simplex_size_tolerance > 0.0)
            || self.max_iterations == 0
        {
            return Err(Error::Config(
                "termination tolerances and budget must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// A tolerance was met.
    Converged,
    /// The evaluation budget ran out first.
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum<const N: usize> {
    pub point: [f64; N],
    pub value: f64,
    pub evaluations: usize,
    pub termination: Termination,
    /// Every evaluated point with its value, in evaluation order.
    pub trace: Vec<([f64; N], f64)>,
}

struct Budgeted<'a, F, const N: usize> {
    objective: &'a mut F,
    remaining: usize,
    trace: Vec<([f64; N], f64)>,
}

impl<F, E, const N: usize> Budgeted<'_, F, N>
where
    F: FnMut(&[f64; N]) -> std::result::Result<f64, E>,
{
    /// `None` once the budget is spent.
    fn eval(&mut self, x: [f64; N]) -> std::result::Result<Option<f64>, E> {
        if self.remaining == 0 {
            return Ok(None);
        }
        self.remaining -= 1;
        let v = (self.objective)(&x)?;
        self.trace.push((x, v));
        Ok(Some(v))
    }
}

/// Minimizes `objective` from an initial simplex of `N + 1` vertices with
/// reflection, expansion, contraction and shrink coefficients 1, 2, 0.5
/// and 0.5. `known_first` is a value already computed for `simplex[0]`; it
/// is reused instead of spending an evaluation on it.
pub fn nelder_mead<F, E, const N: usize>(
    mut objective: F,
    simplex: &[[f64; N]],
    known_first: Option<f64>,
    term: &TerminationConfig,
) -> std::result::Result<Minimum<N>, E>
where
    F: FnMut(&[f64; N]) -> std::result::Result<f64, E>,
{
    assert_eq!(
        simplex.len(),
        N + 1,
        "a simplex in {N} dimensions needs {} vertices",
        N + 1
    );
    let mut run = Budgeted {
        objective: &mut objective,
        remaining: term.max_iterations,
        trace: Vec::new(),
    };
    let mut spent_first = 0;
    let mut verts: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
    for (i, &x) in simplex.iter().enumerate() {
        let v = match (i, known_first) {
            (0, Some(v)) => {
                spent_first = 1;
                Some(v)
            }
            _ => run.eval(x)?,
        };
        match v {
            Some(v) => verts.push((x, v)),
            None => {
                return Ok(finish(
                    verts,
                    run.trace,
                    Termination::MaxIterations,
                    spent_first,
                ));
            }
        }
    }

    loop {
        verts.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = verts[N].1 - verts[0].1;
        let flat = spread < term.fitness_tolerance;
        let small = diameter(&verts) < term.simplex_size_tolerance;
        let done = match term.rule {
            StopRule::Either => flat || small,
            StopRule::Both => flat && small,
        };
        if done {
            return Ok(finish(
                verts,
                run.trace,
                Termination::Converged,
                spent_first,
            ));
        }
        if run.remaining == 0 {
            return Ok(finish(
                verts,
                run.trace,
                Termination::MaxIterations,
                spent_first,
            ));
        }

        let mut centroid = [0.0; N];
        for (x, _) in &verts[..N] {
            for d in 0..N {
                centroid[d] += x[d] / N as f64;
            }
        }
        let toward = |from: &[f64; N], coef: f64, to: &[f64; N]| -> [f64; N] {
            std::array::from_fn(|d| from[d] + coef * (to[d] - from[d]))
        };
        let (worst, f_worst) = verts[N];
        let reflected = toward(&centroid, -REFLECTION, &worst);
        let Some(f_r) = run.eval(reflected)? else {
            continue;
        };

        if f_r < verts[0].1 {
            let expanded = toward(&centroid, EXPANSION, &reflected);
            let Some(f_e) = run.eval(expanded)? else {
                verts[N] = (reflected, f_r);
                continue;
            };
            verts[N] = if f_e < f_r {
                (expanded, f_e)
            } else {
                (reflected, f_r)
            };
            continue;
        }
        if f_r < verts[N - 1].1 {
            verts[N] = (reflected, f_r);
            continue;
        }

        let (contracted, accept_below) = if f_r < f_worst {
            (toward(&centroid, CONTRACTION, &reflected), f_r)
        } else {
            (toward(&centroid, CONTRACTION, &worst), f_worst)
        };
        let Some(f_c) = run.eval(contracted)? else {
            continue;
        };
        let outside = f_r < f_worst;
        if (outside && f_c <= accept_below) || (!outside && f_c < accept_below) {
            verts[N] = (contracted, f_c);
            continue;
        }

        let best = verts[0].0;
        for vert in verts.iter_mut().skip(1) {
            let x = toward(&best, SHRINK, &vert.0);
            match run.eval(x)? {
                Some(v) => *vert = (x, v),
                None => break,
            }
        }
    }
}

fn finish<const N: usize>(
    mut verts: Vec<([f64; N], f64)>,
    trace: Vec<([f64; N], f64)>,
    termination: Termination,
    reused: usize,
) -> Minimum<N> {
    verts.sort_by(|a, b| a.1.total_cmp(&b.1));
    // With no vertices evaluated at all, fall back to the best traced point.
    let (point, value) = verts
        .first()
        .copied()
        .or_else(|| trace.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1)))
        .unwrap_or(([f64::NAN; N], f64::NAN));
    Minimum {
        point,
        value,
        evaluations: trace.len() + reused,
        termination,
        trace,
    }
}

fn diameter<const N: usize>(verts: &[([f64; N], f64)]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in verts.iter().enumerate() {
        for b in &verts[i + 1..] {
            let dist =
                a.0.iter()
                    .zip(&b.0)
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
                    .sqrt();
            d = d.max(dist);
        }
    }
    d
}
