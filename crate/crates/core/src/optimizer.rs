//! Candidate generation: Polak–Ribière conjugate gradient with bracketing
//! line minimization, alternated with Newton iteration on the gradient.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::energy::{energy_of_params, gradient_params, hessian_params, RieszParam};
use crate::error::{Error, Result};
use crate::manifold::{self, min_polar_distance, Configuration, Manifold};

const GOLD: f64 = 1.618_033_988_749_895;
const CGOLD: f64 = 0.381_966_011_250_105_1;

/// Tunable limits of the optimization pipeline.
///
/// The two gradient tolerances scale with the problem: CG hands over to
/// Newton once `‖∇E‖ ≤ grad_switch_scale · √n`, and a trial counts as
/// converged once `‖∇E‖ ≤ grad_final_scale · max(1, |E|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSettings {
    pub cg_max_iters: usize,
    pub newton_max_iters: usize,
    pub line_tol: f64,
    pub grad_switch_scale: f64,
    pub grad_final_scale: f64,
    /// CG restart period; `None` means `2n`.
    pub restart_period: Option<usize>,
    /// Maximum number of CG/Newton alternations.
    pub max_rounds: usize,
    /// Separation factor for random starts.
    pub sep_factor: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            cg_max_iters: 20_000,
            newton_max_iters: 40,
            line_tol: 1e-5,
            grad_switch_scale: 1e-3,
            grad_final_scale: 1e-11,
            restart_period: None,
            max_rounds: 5,
            sep_factor: manifold::DEFAULT_SEP_FACTOR,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.line_tol, self.grad_switch_scale, self.grad_final_scale];
        if positive.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::Precondition("optimizer tolerances must be positive".into()));
        }
        if self.restart_period == Some(0) {
            return Err(Error::Precondition("restart period must be at least 1".into()));
        }
        if self.max_rounds == 0 {
            return Err(Error::Precondition("at least one optimization round is required".into()));
        }
        Ok(())
    }

    pub fn grad_switch_tol(&self, n: usize) -> f64 {
        self.grad_switch_scale * (n as f64).sqrt()
    }

    pub fn grad_final_tol(&self, energy: f64) -> f64 {
        self.grad_final_scale * energy.abs().max(1.0)
    }

    fn restart(&self, n: usize) -> usize {
        self.restart_period.unwrap_or(2 * n)
    }
}

/// Outcome of one optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub config: Configuration,
    pub energy: f64,
    pub grad_norm: f64,
    pub cg_iterations: usize,
    pub newton_iterations: usize,
    pub seed: Option<u64>,
    pub converged: bool,
}

/// Result of a one-dimensional minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub step: f64,
    pub value: f64,
    pub evaluations: usize,
    /// False when no point below the starting value was found; `step` is then 0.
    pub bracketed: bool,
}

/// Minimizes `f` over `t ≥ 0` starting from `f(0) = f0` with trial step `t0`,
/// by golden-ratio bracketing followed by Brent's parabolic/golden search to
/// relative tolerance `tol`. The returned value never exceeds `f0`.
pub fn minimize_along<F: FnMut(f64) -> f64>(mut f: F, f0: f64, t0: f64, tol: f64) -> LineSearch {
    let mut evals = 0;
    let mut eval = |t: f64| {
        evals += 1;
        let v = f(t);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut a = 0.0;
    let (mut b, mut fb) = (t0, eval(t0));
    let c;
    if fb < f0 {
        let mut found = None;
        for _ in 0..60 {
            let t = b + GOLD * (b - a);
            let ft = eval(t);
            if ft > fb {
                found = Some(t);
                break;
            }
            a = b;
            b = t;
            fb = ft;
        }
        match found {
            Some(t) => c = t,
            None => return LineSearch { step: b, value: fb, evaluations: evals, bracketed: false },
        }
    } else {
        let mut found = false;
        let mut hi = b;
        for _ in 0..80 {
            let t = CGOLD * hi;
            let ft = eval(t);
            if ft < f0 {
                b = t;
                fb = ft;
                found = true;
                break;
            }
            hi = t;
        }
        if !found {
            return LineSearch { step: 0.0, value: f0, evaluations: evals, bracketed: false };
        }
        c = hi;
    }
    let (x, fx) = brent(&mut eval, a, b, fb, c, tol);
    LineSearch { step: x, value: fx, evaluations: evals, bracketed: true }
}

fn brent<F: FnMut(f64) -> f64>(f: &mut F, ax: f64, bx: f64, fbx: f64, cx: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = if ax < cx { (ax, cx) } else { (cx, ax) };
    let zeps = 1e-3 * tol * (b - a).abs();
    let (mut x, mut w, mut v) = (bx, bx, bx);
    let (mut fx, mut fw, mut fv) = (fbx, fbx, fbx);
    let (mut d, mut e): (f64, f64) = (0.0, 0.0);
    for _ in 0..200 {
        let xm = 0.5 * (a + b);
        let tol1 = tol * x.abs() + zeps;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() >= (0.5 * q * etemp).abs() || p <= q * (a - x) || p >= q * (b - x) || !p.is_finite() {
                e = if x >= xm { a - x } else { b - x };
                d = CGOLD * e;
            } else {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
            }
        } else {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn energy_or_inf(manifold: &Manifold, params: &[f64], s: RieszParam) -> f64 {
    energy_of_params(manifold, params, s).unwrap_or(f64::INFINITY)
}

fn spacing(manifold: &Manifold, n: usize) -> f64 {
    (manifold.area() / n as f64).sqrt()
}

fn line_search_params(
    manifold: &Manifold,
    s: RieszParam,
    params: &[f64],
    e0: f64,
    dir: &[f64],
    max_move: f64,
    tol: f64,
) -> LineSearch {
    let t0 = max_move / max_abs(dir);
    let mut trial = params.to_vec();
    minimize_along(
        |t| {
            for ((x, p), d) in trial.iter_mut().zip(params).zip(dir) {
                *x = p + t * d;
            }
            energy_or_inf(manifold, &trial, s)
        },
        e0,
        t0,
        tol,
    )
}

/// Minimizes the energy along `direction` from the configuration's parameters.
pub fn line_minimize(
    config: &Configuration,
    s: RieszParam,
    direction: &[f64],
    settings: &OptimizerSettings,
) -> Result<LineSearch> {
    if direction.len() != config.params().len() {
        return Err(Error::Precondition(format!(
            "direction has {} components, expected {}",
            direction.len(),
            config.params().len()
        )));
    }
    if direction.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("search direction".into()));
    }
    if max_abs(direction) == 0.0 {
        return Err(Error::Precondition("search direction is zero".into()));
    }
    let m = config.manifold();
    let e0 = energy_of_params(&m, config.params(), s)?;
    let max_move = 0.1 * spacing(&m, config.n());
    Ok(line_search_params(&m, s, config.params(), e0, direction, max_move, settings.line_tol))
}

/// Mutable optimization state on raw parameters.
struct State {
    manifold: Manifold,
    s: RieszParam,
    params: Vec<f64>,
    energy: f64,
    grad: Vec<f64>,
    cg_iterations: usize,
    newton_iterations: usize,
}

impl State {
    fn new(config: &Configuration, s: RieszParam) -> Result<Self> {
        let manifold = config.manifold();
        let params = config.params().to_vec();
        let energy = energy_of_params(&manifold, &params, s)?;
        let grad = gradient_params(&manifold, &params, s);
        Ok(State { manifold, s, params, energy, grad, cg_iterations: 0, newton_iterations: 0 })
    }

    fn n(&self) -> usize {
        self.params.len() / 2
    }

    fn grad_norm(&self) -> f64 {
        norm(&self.grad)
    }

    fn set_params(&mut self, params: Vec<f64>, energy: f64) {
        self.grad = gradient_params(&self.manifold, &params, self.s);
        self.params = params;
        self.energy = energy;
    }

    fn config(&self) -> Result<Configuration> {
        Configuration::new(self.manifold, self.params.clone())
    }

    /// Rotates sphere parameters so that the poles are far from every point.
    fn realign(&mut self) -> Result<()> {
        if !self.manifold.is_sphere() {
            return Ok(());
        }
        let aligned = manifold::align_poles_away(&self.config()?)?;
        let energy = energy_of_params(&self.manifold, aligned.params(), self.s)?;
        self.set_params(aligned.into_params(), energy);
        Ok(())
    }

    fn near_pole(&self) -> bool {
        self.manifold.is_sphere() && min_polar_distance(&self.params) < REALIGN_POLAR
    }

    fn into_result(self, seed: Option<u64>, settings: &OptimizerSettings) -> Result<TrialResult> {
        let config = self.config()?;
        let energy = crate::energy::total_energy(&config, self.s)?.total;
        let grad_norm = norm(&gradient_params(&config.manifold(), config.params(), self.s));
        Ok(TrialResult {
            converged: grad_norm <= settings.grad_final_tol(energy),
            config,
            energy,
            grad_norm,
            cg_iterations: self.cg_iterations,
            newton_iterations: self.newton_iterations,
            seed,
        })
    }
}

const REALIGN_POLAR: f64 = 2e-2;
const REALIGN_CHECK: usize = 50;
const MAX_LINE_FAILURES: usize = 3;

/// Runs PR+ conjugate gradient until the gradient norm falls to `target`
/// or `max_iters` iterations have been taken. Returns whether the target
/// was reached.
fn cg_run(state: &mut State, target: f64, max_iters: usize, settings: &OptimizerSettings) -> Result<bool> {
    let n = state.n();
    let restart_period = settings.restart(n);
    let spacing = spacing(&state.manifold, n);
    let mut dir: Vec<f64> = state.grad.iter().map(|g| -g).collect();
    let mut since_restart = 0;
    let mut failures = 0;
    let mut last_move = 0.1 * spacing;
    for it in 0..max_iters {
        if state.grad_norm() <= target {
            return Ok(true);
        }
        if it > 0 && it % REALIGN_CHECK == 0 && state.near_pole() {
            state.realign()?;
            dir = state.grad.iter().map(|g| -g).collect();
            since_restart = 0;
        }
        let max_move = last_move.min(0.1 * spacing);
        let ls = line_search_params(&state.manifold, state.s, &state.params, state.energy, &dir, max_move, settings.line_tol);
        state.cg_iterations += 1;
        if !ls.bracketed && ls.step == 0.0 || !(ls.value <= state.energy) {
            failures += 1;
            if failures >= MAX_LINE_FAILURES {
                return Err(Error::Stagnation { iteration: it, restarts: failures });
            }
            dir = state.grad.iter().map(|g| -g).collect();
            since_restart = 0;
            last_move = 0.1 * spacing;
            continue;
        }
        failures = 0;
        last_move = (2.0 * ls.step * max_abs(&dir)).max(1e-12 * spacing);
        let new_params: Vec<f64> = state.params.iter().zip(&dir).map(|(p, d)| p + ls.step * d).collect();
        debug_assert!(ls.value <= state.energy);
        let old_grad = std::mem::take(&mut state.grad);
        state.set_params(new_params, ls.value);
        let g = &state.grad;
        let gg = dot(&old_grad, &old_grad);
        let beta = if gg > 0.0 {
            (g.iter().zip(&old_grad).map(|(a, b)| a * (a - b)).sum::<f64>() / gg).max(0.0)
        } else {
            0.0
        };
        since_restart += 1;
        if beta == 0.0 || since_restart >= restart_period {
            dir = g.iter().map(|x| -x).collect();
            since_restart = 0;
        } else {
            for (d, gi) in dir.iter_mut().zip(g) {
                *d = -gi + beta * *d;
            }
            if dot(&dir, g) >= 0.0 {
                dir = g.iter().map(|x| -x).collect();
                since_restart = 0;
            }
        }
    }
    Ok(state.grad_norm() <= target)
}

/// Conjugate gradient descent down to the CG/Newton switch tolerance.
pub fn cg_descend(config: &Configuration, s: RieszParam, settings: &OptimizerSettings) -> Result<TrialResult> {
    settings.validate()?;
    let mut state = State::new(config, s)?;
    let target = settings.grad_switch_tol(state.n());
    cg_run(&mut state, target, settings.cg_max_iters, settings)?;
    state.into_result(None, settings)
}

/// Newton step for the gradient root with rigid-motion directions lifted by a
/// positive penalty so the system is nonsingular at a critical orbit.
fn newton_step(state: &State) -> Option<Vec<f64>> {
    let dim = state.params.len();
    let mut h = hessian_params(&state.manifold, &state.params, state.s);
    let gens = state.manifold.rigid_generators(&state.params);
    let c = {
        let m = (0..dim).map(|k| h[(k, k)].abs()).sum::<f64>() / dim as f64;
        if m > 0.0 && m.is_finite() {
            m
        } else {
            1.0
        }
    };
    for r in &gens {
        for a in 0..dim {
            if r[a] == 0.0 {
                continue;
            }
            for b in 0..dim {
                h[(a, b)] += c * r[a] * r[b];
            }
        }
    }
    let rhs = DVector::from_iterator(dim, state.grad.iter().map(|g| -g));
    let step = match h.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => pseudo_solve(h, &rhs)?,
    };
    let step: Vec<f64> = step.iter().copied().collect();
    step.iter().all(|x| x.is_finite()).then_some(step)
}

fn pseudo_solve(h: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let eig = SymmetricEigen::try_new(h, 1e-14, 10_000)?;
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let cut = 1e-12 * scale;
    let mut out = DVector::zeros(rhs.len());
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() > cut {
            let v = eig.eigenvectors.column(k);
            out += v * (v.dot(rhs) / lambda);
        }
    }
    Some(out)
}

const MAX_HALVINGS: usize = 20;

/// Newton iteration with step halving and CG fallback. Returns `Ok(true)` on
/// convergence and an error carrying the best iterate on persistent failure.
fn newton_run(state: &mut State, settings: &OptimizerSettings) -> Result<bool> {
    let mut best = (state.grad_norm(), state.params.clone(), state.energy);
    let mut stalls = 0;
    for _ in 0..settings.newton_max_iters {
        let gnorm = state.grad_norm();
        if gnorm <= settings.grad_final_tol(state.energy) {
            return Ok(true);
        }
        if state.manifold.is_sphere() && min_polar_distance(&state.params) < manifold::POLE_GUARD {
            state.realign()?;
        }
        state.newton_iterations += 1;
        let mut accepted = false;
        if let Some(step) = newton_step(state) {
            let mut t = 1.0;
            for _ in 0..=MAX_HALVINGS {
                let trial: Vec<f64> = state.params.iter().zip(&step).map(|(p, d)| p + t * d).collect();
                let g = gradient_params(&state.manifold, &trial, state.s);
                let gn = norm(&g);
                if gn < gnorm {
                    if let Ok(e) = energy_of_params(&state.manifold, &trial, state.s) {
                        state.params = trial;
                        state.grad = g;
                        state.energy = e;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
        }
        if !accepted {
            let n = state.n();
            let target = 0.1 * gnorm;
            let swept = cg_run(state, target, 2 * n, settings).unwrap_or(false);
            if !swept && state.grad_norm() >= gnorm {
                stalls += 1;
                if stalls >= 2 {
                    break;
                }
            }
        } else {
            stalls = 0;
        }
        if state.grad_norm() < best.0 {
            best = (state.grad_norm(), state.params.clone(), state.energy);
        }
    }
    if state.grad_norm() <= settings.grad_final_tol(state.energy) {
        return Ok(true);
    }
    if best.0 < state.grad_norm() {
        let grad = gradient_params(&state.manifold, &best.1, state.s);
        state.params = best.1.clone();
        state.energy = best.2;
        state.grad = grad;
    }
    Err(Error::NonConvergence { best_grad_norm: best.0, best_params: best.1 })
}

/// Newton polishing toward a nearby critical point.
pub fn newton_polish(config: &Configuration, s: RieszParam, settings: &OptimizerSettings) -> Result<TrialResult> {
    settings.validate()?;
    let mut state = State::new(config, s)?;
    let switch = settings.grad_switch_tol(state.n());
    if state.grad_norm() > switch {
        log::debug!("Newton started outside the switch tolerance ({:.3e} > {:.3e})", state.grad_norm(), switch);
    }
    newton_run(&mut state, settings)?;
    state.into_result(None, settings)
}

/// One full trial: seeded random start, alignment, then alternating CG and
/// Newton rounds. Failure to converge is reported through
/// [`TrialResult::converged`], not as an error.
pub fn generate_candidate(
    manifold: Manifold,
    n: usize,
    s: RieszParam,
    seed: u64,
    settings: &OptimizerSettings,
) -> Result<TrialResult> {
    settings.validate()?;
    let start = manifold::random_config(manifold, n, seed, settings.sep_factor)?;
    let mut state = State::new(&start, s)?;
    state.realign()?;
    let mut switch = settings.grad_switch_tol(n);
    for round in 0..settings.max_rounds {
        match cg_run(&mut state, switch, settings.cg_max_iters, settings) {
            Ok(_) | Err(Error::Stagnation { .. }) => {}
            Err(e) => return Err(e),
        }
        match newton_run(&mut state, settings) {
            Ok(true) => break,
            Ok(false) | Err(Error::NonConvergence { .. }) => {
                log::debug!("seed {seed}: round {round} ended at gradient norm {:.3e}", state.grad_norm());
                switch *= 0.1;
            }
            Err(e) => return Err(e),
        }
    }
    state.realign()?;
    if state.grad_norm() > settings.grad_final_tol(state.energy) {
        let _ = newton_run(&mut state, settings);
    }
    state.into_result(Some(seed), settings)
}

/// Independent trials over a list of seeds, run in parallel.
pub fn run_trials(
    manifold: Manifold,
    n: usize,
    s: RieszParam,
    seeds: &[u64],
    settings: &OptimizerSettings,
) -> Vec<Result<TrialResult>> {
    seeds.par_iter().map(|&seed| generate_candidate(manifold, n, s, seed, settings)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{gradient, total_energy};

    fn rp(s: f64) -> RieszParam {
        RieszParam::new(s).unwrap()
    }

    #[test]
    fn quadratic_line_minimum() {
        let ls = minimize_along(|t| 2.5 * (t - 1.7).powi(2), 2.5 * 1.7f64.powi(2), 0.01, 1e-12);
        assert!(ls.bracketed);
        assert!((ls.step - 1.7).abs() < 1e-10, "{}", ls.step);
        let ls = minimize_along(|t| (t - 0.02).powi(2), 0.0004, 5.0, 1e-12);
        assert!((ls.step - 0.02).abs() < 1e-10);
    }

    #[test]
    fn increasing_direction_returns_zero() {
        let ls = minimize_along(|t| t, 0.0, 1.0, 1e-8);
        assert!(!ls.bracketed);
        assert_eq!(ls.step, 0.0);
    }

    #[test]
    fn zero_direction_rejected() {
        let c = manifold::random_config(Manifold::Sphere, 5, 1, 0.5).unwrap();
        let z = vec![0.0; 10];
        assert!(matches!(line_minimize(&c, rp(1.0), &z, &OptimizerSettings::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn steepest_descent_step_decreases_energy() {
        let c = manifold::canonical_align(&manifold::random_config(Manifold::Sphere, 20, 4, 0.5).unwrap()).unwrap();
        let g = gradient(&c, rp(1.0)).unwrap();
        let d: Vec<f64> = g.iter().map(|x| -x).collect();
        let ls = line_minimize(&c, rp(1.0), &d, &OptimizerSettings::default()).unwrap();
        let e0 = total_energy(&c, rp(1.0)).unwrap().total;
        assert!(ls.step > 0.0 && ls.value < e0);
    }

    #[test]
    fn two_points_become_antipodal() {
        for seed in 0..3 {
            let t = generate_candidate(Manifold::Sphere, 2, rp(1.0), seed, &OptimizerSettings::default()).unwrap();
            assert!(t.converged);
            assert!((t.energy - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn four_points_become_tetrahedron() {
        let want = 12.0 / (8.0f64 / 3.0).sqrt();
        for seed in 0..4 {
            let t = generate_candidate(Manifold::Sphere, 4, rp(1.0), seed, &OptimizerSettings::default()).unwrap();
            assert!(t.converged);
            assert!((t.energy - want).abs() < 1e-9 * want, "seed {seed}: {}", t.energy);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let s = OptimizerSettings::default();
        let a = generate_candidate(Manifold::Sphere, 15, rp(1.0), 21, &s).unwrap();
        let b = generate_candidate(Manifold::Sphere, 15, rp(1.0), 21, &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn torus_pair_converges() {
        let m = Manifold::torus(2.0, 1.0).unwrap();
        for seed in 0..3 {
            let t = generate_candidate(m, 2, rp(1.0), seed, &OptimizerSettings::default()).unwrap();
            assert!(t.converged, "seed {seed}: grad {}", t.grad_norm);
        }
    }

    #[test]
    fn critical_input_is_returned_unchanged() {
        let t = generate_candidate(Manifold::Sphere, 6, rp(1.0), 2, &OptimizerSettings::default()).unwrap();
        let again = cg_descend(&t.config, rp(1.0), &OptimizerSettings::default()).unwrap();
        assert_eq!(again.cg_iterations, 0);
        assert_eq!(again.energy, t.energy);
        let polished = newton_polish(&t.config, rp(1.0), &OptimizerSettings::default()).unwrap();
        assert_eq!(polished.newton_iterations, 0);
        assert_eq!(polished.config, t.config);
    }

    #[test]
    fn newton_from_random_start_does_not_panic() {
        let c = manifold::canonical_align(&manifold::random_config(Manifold::Sphere, 10, 3, 0.5).unwrap()).unwrap();
        match newton_polish(&c, rp(1.0), &OptimizerSettings::default()) {
            Ok(t) => assert!(t.grad_norm.is_finite()),
            Err(Error::NonConvergence { best_params, .. }) => assert_eq!(best_params.len(), 20),
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}
