//! Slow, exact reference computations: exhaustive path enumeration for the
//! HMM posteriors, the closed-form single-speaker marginal likelihood, and
//! finite-difference stationarity checks for the speaker posterior update.
//! Used by tests and the `oracle` CLI subcommand; everything here carries
//! its own arithmetic so it stays independent of the engine it validates.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bhmm::LN_2PI;
use crate::{Error, Result};

/// Hard cap on enumerated paths.
pub const MAX_PATHS: f64 = 1e6;

/// A problem small enough for exhaustive enumeration.
#[derive(Debug, Clone)]
pub struct SmallProblem {
    pub x: Array2<f64>,
    pub phi: Array1<f64>,
    pub pi: Array1<f64>,
    pub loop_p: f64,
    pub fa: f64,
    pub fb: f64,
}

/// Exact posteriors from summing over every state sequence.
#[derive(Debug, Clone)]
pub struct PathPosterior {
    pub gamma: Array2<f64>,
    pub log_px: f64,
}

fn check_path_count(t: usize, s: usize) -> Result<()> {
    let paths = (s as f64).powi(t as i32);
    if paths > MAX_PATHS {
        return Err(Error::InstanceTooLarge(format!(
            "{s}^{t} paths exceed the {MAX_PATHS:.0} enumeration cap"
        )));
    }
    Ok(())
}

fn logsumexp(vals: &[f64]) -> f64 {
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn path_log_weight(
    path: &[usize],
    loglik: ArrayView2<f64>,
    pi: ArrayView1<f64>,
    loop_p: f64,
) -> f64 {
    let mut logw = pi[path[0]].ln() + loglik[(0, path[0])];
    for t in 1..path.len() {
        let trans =
            (1.0 - loop_p) * pi[path[t]] + if path[t] == path[t - 1] { loop_p } else { 0.0 };
        logw += trans.ln() + loglik[(t, path[t])];
    }
    logw
}

fn for_each_path(t: usize, s: usize, mut f: impl FnMut(&[usize])) {
    let mut path = vec![0usize; t];
    loop {
        f(&path);
        let mut pos = t;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            path[pos] += 1;
            if path[pos] < s {
                break;
            }
            path[pos] = 0;
        }
    }
}

/// Exact per-frame state marginals by summation over all `S^T` sequences.
pub fn enumerate_path_posterior(
    loglik: ArrayView2<f64>,
    pi: ArrayView1<f64>,
    loop_p: f64,
) -> Result<PathPosterior> {
    let (t, s) = loglik.dim();
    if t == 0 {
        return Err(Error::EmptyInput("no frames to enumerate".into()));
    }
    check_path_count(t, s)?;

    let mut weights = Vec::new();
    for_each_path(t, s, |path| {
        weights.push(path_log_weight(path, loglik, pi, loop_p));
    });
    let log_px = logsumexp(&weights);

    let mut gamma = Array2::<f64>::zeros((t, s));
    let mut idx = 0;
    for_each_path(t, s, |path| {
        let post = (weights[idx] - log_px).exp();
        for (ti, &z) in path.iter().enumerate() {
            gamma[(ti, z)] += post;
        }
        idx += 1;
    });
    for mut row in gamma.axis_iter_mut(Axis(0)) {
        let total = row.sum();
        row /= total;
    }
    Ok(PathPosterior { gamma, log_px })
}

/// Expected number of entries into each speaker through the prior branch
/// (initial frame plus speaker changes), normalized to sum one. This is the
/// exact value the type-II prior update estimates.
pub fn enumerate_entry_mass(
    loglik: ArrayView2<f64>,
    pi: ArrayView1<f64>,
    loop_p: f64,
) -> Result<Array1<f64>> {
    let (t, s) = loglik.dim();
    if t == 0 {
        return Err(Error::EmptyInput("no frames to enumerate".into()));
    }
    check_path_count(t, s)?;

    let mut weights = Vec::new();
    for_each_path(t, s, |path| {
        weights.push(path_log_weight(path, loglik, pi, loop_p));
    });
    let log_px = logsumexp(&weights);

    let mut mass = Array1::<f64>::zeros(s);
    let mut idx = 0;
    for_each_path(t, s, |path| {
        let post = (weights[idx] - log_px).exp();
        mass[path[0]] += post;
        for ti in 1..t {
            let to = path[ti];
            let frac = if to == path[ti - 1] {
                let change = (1.0 - loop_p) * pi[to];
                change / (change + loop_p)
            } else {
                1.0
            };
            mass[to] += post * frac;
        }
        idx += 1;
    });
    let total = mass.sum();
    Ok(mass / total)
}

/// Closed-form log marginal likelihood of the single-speaker model with
/// `fa = fb = 1`: per dimension the frames are jointly Gaussian with
/// covariance `I + phi * 1 1'`, evaluated through the rank-one determinant
/// and inverse identities.
pub fn single_speaker_logml(x: ArrayView2<f64>, phi: ArrayView1<f64>) -> f64 {
    let (t, r) = x.dim();
    let tf = t as f64;
    let mut total = 0.0;
    for j in 0..r {
        let col = x.column(j);
        let sum: f64 = col.sum();
        let sq: f64 = col.dot(&col);
        let denom = 1.0 + tf * phi[j];
        let quad = sq - phi[j] / denom * sum * sum;
        total += -0.5 * (tf * LN_2PI + denom.ln() + quad);
    }
    total
}

/// The ELBO written out as an explicit function of the speaker posterior
/// parameters with the responsibilities held fixed; terms independent of
/// `alpha` and `lambda` (the state-sequence prior and entropy) are omitted
/// since only differences matter here.
pub fn explicit_elbo(
    x: ArrayView2<f64>,
    gamma: ArrayView2<f64>,
    alpha: ArrayView2<f64>,
    lambda: ArrayView2<f64>,
    phi: ArrayView1<f64>,
    fa: f64,
    fb: f64,
) -> f64 {
    let (t, r) = x.dim();
    let s = gamma.ncols();
    let mut value = 0.0;
    for ti in 0..t {
        for j in 0..s {
            let g = gamma[(ti, j)];
            if g == 0.0 {
                continue;
            }
            let mut dot = 0.0;
            let mut quad = 0.0;
            let mut xsq = 0.0;
            for i in 0..r {
                let rho = phi[i].sqrt() * x[(ti, i)];
                dot += alpha[(j, i)] * rho;
                quad += phi[i] * (lambda[(j, i)] + alpha[(j, i)] * alpha[(j, i)]);
                xsq += x[(ti, i)] * x[(ti, i)];
            }
            value += g * fa * (dot - 0.5 * quad - 0.5 * r as f64 * LN_2PI - 0.5 * xsq);
        }
    }
    for j in 0..s {
        let mut log_det = 0.0;
        let mut trace = 0.0;
        let mut norm_sq = 0.0;
        for i in 0..r {
            log_det += lambda[(j, i)].ln();
            trace += lambda[(j, i)];
            norm_sq += alpha[(j, i)] * alpha[(j, i)];
        }
        value += 0.5 * fb * (r as f64 + log_det - trace - norm_sq);
    }
    value
}

/// Largest central-difference derivative of [`explicit_elbo`] over all
/// entries of `alpha`.
#[allow(clippy::too_many_arguments)]
pub fn fd_gradient_max(
    x: ArrayView2<f64>,
    gamma: ArrayView2<f64>,
    alpha: ArrayView2<f64>,
    lambda: ArrayView2<f64>,
    phi: ArrayView1<f64>,
    fa: f64,
    fb: f64,
    delta: f64,
) -> f64 {
    let mut work = alpha.to_owned();
    let mut max_grad = 0.0_f64;
    for j in 0..alpha.nrows() {
        for i in 0..alpha.ncols() {
            let orig = work[(j, i)];
            work[(j, i)] = orig + delta;
            let plus = explicit_elbo(x, gamma, work.view(), lambda, phi, fa, fb);
            work[(j, i)] = orig - delta;
            let minus = explicit_elbo(x, gamma, work.view(), lambda, phi, fa, fb);
            work[(j, i)] = orig;
            max_grad = max_grad.max(((plus - minus) / (2.0 * delta)).abs());
        }
    }
    max_grad
}

/// Runs one responsibility pass from the prior speaker posteriors, applies
/// the engine's q(Y) update, and returns the largest finite-difference ELBO
/// gradient over `alpha` at that point. Near zero means the update really
/// sits at the stationary point.
pub fn elbo_fd_gradient(problem: &SmallProblem, delta: f64) -> Result<f64> {
    let (t, _) = problem.x.dim();
    let s = problem.pi.len();
    let r = problem.phi.len();

    let prior_alpha = Array2::<f64>::zeros((s, r));
    let prior_lambda = Array2::<f64>::ones((s, r));
    let loglik = crate::bhmm::emission_matrix(
        problem.x.view(),
        prior_alpha.view(),
        prior_lambda.view(),
        problem.phi.view(),
        problem.fa,
    );
    let pass = crate::bhmm::forward_backward(loglik.view(), problem.pi.view(), problem.loop_p)?;

    let mut state = crate::bhmm::init_state(&vec![0usize; t], s, r)?;
    state.gamma = pass.gamma.clone();
    let cfg = crate::bhmm::VbxConfig {
        fa: problem.fa,
        fb: problem.fb,
        ..Default::default()
    };
    crate::bhmm::update_qy(&mut state, problem.x.view(), problem.phi.view(), &cfg)?;

    Ok(fd_gradient_max(
        problem.x.view(),
        pass.gamma.view(),
        state.alpha.view(),
        state.lambda.view(),
        problem.phi.view(),
        problem.fa,
        problem.fb,
        delta,
    ))
}

/// Engine-versus-oracle deltas over seeded random instances, formatted as a
/// text report for the CLI.
pub fn engine_delta_report(seed: u64, instances: usize) -> Result<String> {
    use std::fmt::Write as _;

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = String::new();
    writeln!(
        out,
        "oracle comparison over {instances} random instances (seed {seed})"
    )
    .unwrap();

    let mut max_gamma = 0.0_f64;
    let mut max_logpx = 0.0_f64;
    let mut max_pi = 0.0_f64;
    let mut max_elbo = 0.0_f64;
    let mut max_grad = 0.0_f64;
    for _ in 0..instances {
        let t = rng.gen_range(2..=6);
        let s = rng.gen_range(1..=3);
        let r = rng.gen_range(1..=3);
        let loop_p = rng.gen_range(0.5..0.99);
        let x = Array2::from_shape_fn((t, r), |_| StandardNormal.sample(&mut rng));
        let phi = Array1::from_shape_fn(r, |_| rng.gen_range(0.1..10.0));
        let mut pi = Array1::from_shape_fn(s, |_| rng.gen_range(0.05..1.0));
        let total = pi.sum();
        pi /= total;

        let alpha = Array2::from_shape_fn((s, r), |_| StandardNormal.sample(&mut rng));
        let lambda = Array2::from_shape_fn((s, r), |_| rng.gen_range(0.1..1.0));
        let loglik =
            crate::bhmm::emission_matrix(x.view(), alpha.view(), lambda.view(), phi.view(), 1.0);

        let pass = crate::bhmm::forward_backward(loglik.view(), pi.view(), loop_p)?;
        let exact = enumerate_path_posterior(loglik.view(), pi.view(), loop_p)?;
        for (a, b) in pass.gamma.iter().zip(exact.gamma.iter()) {
            max_gamma = max_gamma.max((a - b).abs());
        }
        max_logpx = max_logpx.max(((pass.log_px - exact.log_px) / exact.log_px).abs());

        let engine_pi = crate::bhmm::update_pi(&pass, loglik.view(), pi.view(), loop_p);
        let exact_pi = enumerate_entry_mass(loglik.view(), pi.view(), loop_p)?;
        for (a, b) in engine_pi.iter().zip(exact_pi.iter()) {
            max_pi = max_pi.max((a - b).abs());
        }

        // Single-speaker ELBO exactness.
        let labels = vec![0usize; t];
        let cfg = crate::bhmm::VbxConfig {
            fa: 1.0,
            fb: 1.0,
            loop_p,
            max_iters: 100,
            elbo_tol: 1e-12,
            prune_pi: 0.0,
        };
        let state = crate::bhmm::run(x.view(), &labels, phi.view(), &cfg)?;
        let engine_elbo = *state.elbo_trace.last().unwrap();
        let exact_ml = single_speaker_logml(x.view(), phi.view());
        max_elbo = max_elbo.max((engine_elbo - exact_ml).abs());

        let problem = SmallProblem {
            x,
            phi,
            pi,
            loop_p,
            fa: rng.gen_range(0.2..2.0),
            fb: rng.gen_range(0.5..5.0),
        };
        max_grad = max_grad.max(elbo_fd_gradient(&problem, 1e-5)?);
    }

    writeln!(
        out,
        "  max |gamma engine - enumeration|   : {max_gamma:.3e}"
    )
    .unwrap();
    writeln!(
        out,
        "  max relative log p(X) difference   : {max_logpx:.3e}"
    )
    .unwrap();
    writeln!(out, "  max |pi update - enumerated mass|  : {max_pi:.3e}").unwrap();
    writeln!(out, "  max |ELBO - single-speaker log ml| : {max_elbo:.3e}").unwrap();
    writeln!(out, "  max |dELBO/dalpha| at update       : {max_grad:.3e}").unwrap();
    Ok(out)
}
