//! Variational inference for the Bayesian HMM whose states are speakers.
//!
//! One iteration updates the speaker posteriors q(Y), re-estimates the
//! frame responsibilities q(Z) with a log-space forward-backward pass,
//! re-fits the speaker priors, and evaluates the evidence lower bound.
//! Redundant speakers collapse through the prior update and are pruned
//! between iterations.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::{Error, Result};

pub const LN_2PI: f64 = 1.8378770664093453;

/// Inference hyperparameters.
///
/// `fa` scales the acoustic (likelihood) term and `fb` the speaker
/// regularization; `loop_p` is the self-transition probability.
#[derive(Debug, Clone, Copy)]
pub struct VbxConfig {
    pub fa: f64,
    pub fb: f64,
    pub loop_p: f64,
    pub max_iters: usize,
    pub elbo_tol: f64,
    pub prune_pi: f64,
}

impl Default for VbxConfig {
    fn default() -> Self {
        VbxConfig {
            fa: 0.3,
            fb: 17.0,
            loop_p: 0.99,
            max_iters: 40,
            elbo_tol: 1e-6,
            prune_pi: 1e-4,
        }
    }
}

/// Finite and strictly positive; rejects NaN and infinities.
pub(crate) fn finite_positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl VbxConfig {
    pub fn validate(&self) -> Result<()> {
        if !finite_positive(self.fa) || !finite_positive(self.fb) {
            return Err(Error::invalid("fa and fb must be positive"));
        }
        if !finite_positive(self.loop_p) || self.loop_p >= 1.0 {
            return Err(Error::invalid("loop_p must be in (0, 1)"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        if !finite_positive(self.elbo_tol) {
            return Err(Error::invalid("elbo_tol must be positive"));
        }
        if self.prune_pi < 0.0 {
            return Err(Error::invalid("prune_pi must be non-negative"));
        }
        Ok(())
    }
}

/// Per-recording inference state over the currently active speakers.
#[derive(Debug, Clone)]
pub struct VbxState {
    /// T x S responsibilities; rows sum to 1.
    pub gamma: Array2<f64>,
    /// S x R posterior means of the speaker latent vectors.
    pub alpha: Array2<f64>,
    /// S x R diagonals of the posterior covariances (inverse precisions), in (0, 1].
    pub lambda: Array2<f64>,
    /// Speaker priors, summing to 1.
    pub pi: Array1<f64>,
    pub elbo_trace: Vec<f64>,
    /// Which of the initial speakers are still active.
    pub active: Vec<bool>,
    /// False when the loop hit `max_iters` without meeting `elbo_tol`.
    pub converged: bool,
}

impl VbxState {
    pub fn n_frames(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn n_speakers(&self) -> usize {
        self.gamma.ncols()
    }

    /// Hard assignment per frame: argmax responsibility, lowest index on ties.
    pub fn hard_labels(&self) -> Vec<usize> {
        self.gamma
            .axis_iter(Axis(0))
            .map(|row| {
                let mut best = 0;
                for s in 1..row.len() {
                    if row[s] > row[best] {
                        best = s;
                    }
                }
                best
            })
            .collect()
    }
}

/// Probability of moving from state `from` to state `to`: the self-loop mass
/// plus re-entry through the speaker prior.
pub fn transition_prob(pi: ArrayView1<f64>, loop_p: f64, from: usize, to: usize) -> f64 {
    (1.0 - loop_p) * pi[to] + if from == to { loop_p } else { 0.0 }
}

/// One-hot initialization from cluster labels: uniform priors, prior speaker
/// posteriors.
pub fn init_state(labels: &[usize], n_speakers: usize, dim: usize) -> Result<VbxState> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("no frames to initialize".into()));
    }
    if n_speakers == 0 {
        return Err(Error::invalid("speaker count must be positive"));
    }
    let t = labels.len();
    let mut gamma = Array2::<f64>::zeros((t, n_speakers));
    for (i, &l) in labels.iter().enumerate() {
        if l >= n_speakers {
            return Err(Error::invalid(format!(
                "label {l} at frame {i} out of range for {n_speakers} speakers"
            )));
        }
        gamma[(i, l)] = 1.0;
    }
    Ok(VbxState {
        gamma,
        alpha: Array2::zeros((n_speakers, dim)),
        lambda: Array2::ones((n_speakers, dim)),
        pi: Array1::from_elem(n_speakers, 1.0 / n_speakers as f64),
        elbo_trace: Vec::new(),
        active: vec![true; n_speakers],
        converged: false,
    })
}

/// Speaker posterior update given the current responsibilities: per speaker,
/// precision diagonal `1 + (fa/fb) * occupancy * phi` and mean
/// `(fa/fb) * lambda * sum_t gamma_ts * rho_t` with `rho_t = sqrt(phi) .* x_t`.
pub fn update_qy(
    state: &mut VbxState,
    x: ArrayView2<f64>,
    phi: ArrayView1<f64>,
    cfg: &VbxConfig,
) -> Result<()> {
    let ratio = cfg.fa / cfg.fb;
    let sqrt_phi = phi.mapv(f64::sqrt);
    let rho = &x * &sqrt_phi.view().insert_axis(Axis(0));
    let weighted = state.gamma.t().dot(&rho); // S x R
    let occupancy = state.gamma.sum_axis(Axis(0)); // S

    for s in 0..state.n_speakers() {
        for r in 0..phi.len() {
            let precision = 1.0 + ratio * occupancy[s] * phi[r];
            let lambda = 1.0 / precision;
            state.lambda[(s, r)] = lambda;
            state.alpha[(s, r)] = ratio * lambda * weighted[(s, r)];
        }
    }
    if state.alpha.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            iteration: 0,
            message: "non-finite speaker posterior mean".into(),
        });
    }
    Ok(())
}

/// Expected log-likelihood of one observation under one speaker posterior,
/// constants included. The `-R/2 ln 2pi - |x|^2/2` part cancels in the
/// responsibilities but must be present whenever the value feeds the ELBO.
pub fn emission_loglik(
    x_t: ArrayView1<f64>,
    alpha_s: ArrayView1<f64>,
    lambda_s: ArrayView1<f64>,
    phi: ArrayView1<f64>,
    fa: f64,
) -> f64 {
    let r = phi.len();
    let mut dot = 0.0;
    let mut quad = 0.0;
    let mut xsq = 0.0;
    for i in 0..r {
        let rho = phi[i].sqrt() * x_t[i];
        dot += alpha_s[i] * rho;
        quad += phi[i] * (lambda_s[i] + alpha_s[i] * alpha_s[i]);
        xsq += x_t[i] * x_t[i];
    }
    fa * (dot - 0.5 * quad - 0.5 * r as f64 * LN_2PI - 0.5 * xsq)
}

/// Full T x S matrix of expected log-likelihoods, constants included.
pub fn emission_matrix(
    x: ArrayView2<f64>,
    alpha: ArrayView2<f64>,
    lambda: ArrayView2<f64>,
    phi: ArrayView1<f64>,
    fa: f64,
) -> Array2<f64> {
    let (t, r) = x.dim();
    let s = alpha.nrows();
    let sqrt_phi = phi.mapv(f64::sqrt);
    let rho = &x * &sqrt_phi.view().insert_axis(Axis(0));
    let mut loglik = rho.dot(&alpha.t()); // T x S

    let mut spk_const = Array1::<f64>::zeros(s);
    for j in 0..s {
        let mut quad = 0.0;
        for i in 0..r {
            quad += phi[i] * (lambda[(j, i)] + alpha[(j, i)] * alpha[(j, i)]);
        }
        spk_const[j] = -0.5 * quad;
    }
    for ti in 0..t {
        let row = x.row(ti);
        let frame_const = -0.5 * r as f64 * LN_2PI - 0.5 * row.dot(&row);
        for j in 0..s {
            loglik[(ti, j)] = fa * (loglik[(ti, j)] + spk_const[j] + frame_const);
        }
    }
    loglik
}

/// Responsibilities plus the forward/backward tables and total
/// log-probability from one pass.
#[derive(Debug, Clone)]
pub struct ForwardBackward {
    pub gamma: Array2<f64>,
    pub log_px: f64,
    pub log_a: Array2<f64>,
    pub log_b: Array2<f64>,
}

fn logsumexp(values: impl Iterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = values.collect();
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-space forward-backward over the speaker HMM.
pub fn forward_backward(
    loglik: ArrayView2<f64>,
    pi: ArrayView1<f64>,
    loop_p: f64,
) -> Result<ForwardBackward> {
    let (t, s) = loglik.dim();
    if t == 0 {
        return Err(Error::EmptyInput("no frames for forward-backward".into()));
    }
    if pi.len() != s {
        return Err(Error::invalid(format!(
            "pi has {} entries for {s} states",
            pi.len()
        )));
    }

    let mut log_trans = Array2::<f64>::zeros((s, s));
    for from in 0..s {
        for to in 0..s {
            log_trans[(from, to)] = transition_prob(pi, loop_p, from, to).ln();
        }
    }
    let log_pi = pi.mapv(f64::ln);

    let mut log_a = Array2::<f64>::zeros((t, s));
    for j in 0..s {
        log_a[(0, j)] = log_pi[j] + loglik[(0, j)];
    }
    for ti in 1..t {
        for j in 0..s {
            let prev = (0..s).map(|k| log_a[(ti - 1, k)] + log_trans[(k, j)]);
            log_a[(ti, j)] = loglik[(ti, j)] + logsumexp(prev);
        }
    }
    let log_px = logsumexp((0..s).map(|j| log_a[(t - 1, j)]));
    if !log_px.is_finite() {
        return Err(Error::Numerical {
            iteration: 0,
            message: "total forward probability is not finite".into(),
        });
    }

    let mut log_b = Array2::<f64>::zeros((t, s));
    for ti in (0..t.saturating_sub(1)).rev() {
        for j in 0..s {
            let next = (0..s).map(|k| log_trans[(j, k)] + loglik[(ti + 1, k)] + log_b[(ti + 1, k)]);
            log_b[(ti, j)] = logsumexp(next);
        }
    }

    let mut gamma = Array2::<f64>::zeros((t, s));
    for ti in 0..t {
        for j in 0..s {
            gamma[(ti, j)] = (log_a[(ti, j)] + log_b[(ti, j)] - log_px).exp();
        }
        let total: f64 = gamma.row(ti).sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::Numerical {
                iteration: 0,
                message: format!("responsibilities at frame {ti} do not normalize"),
            });
        }
        for j in 0..s {
            gamma[(ti, j)] /= total;
        }
    }

    Ok(ForwardBackward {
        gamma,
        log_px,
        log_a,
        log_b,
    })
}

/// Type-II maximum-likelihood update of the speaker priors: the expected
/// number of entries into each speaker through the prior branch, normalized.
pub fn update_pi(
    fb_pass: &ForwardBackward,
    loglik: ArrayView2<f64>,
    pi: ArrayView1<f64>,
    loop_p: f64,
) -> Array1<f64> {
    let (t, s) = loglik.dim();
    let log_a_sum: Vec<f64> = (0..t)
        .map(|ti| logsumexp((0..s).map(|j| fb_pass.log_a[(ti, j)])))
        .collect();

    let mut log_mass = Array1::<f64>::zeros(s);
    for j in 0..s {
        let entry = fb_pass.gamma[(0, j)].ln();
        let rest = if t > 1 {
            let body = logsumexp(
                (1..t).map(|ti| log_a_sum[ti - 1] + loglik[(ti, j)] + fb_pass.log_b[(ti, j)]),
            );
            (1.0 - loop_p).ln() + pi[j].ln() - fb_pass.log_px + body
        } else {
            f64::NEG_INFINITY
        };
        log_mass[j] = logsumexp([entry, rest].into_iter());
    }

    let max = log_mass.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = log_mass.mapv(|v| (v - max).exp());
    let total = out.sum();
    out /= total;
    out
}

/// Evidence lower bound from the forward pass total and the speaker
/// posterior statistics. `log_px` must include the emission constants.
pub fn elbo(log_px: f64, alpha: ArrayView2<f64>, lambda: ArrayView2<f64>, fb: f64) -> f64 {
    let (s, r) = alpha.dim();
    let mut correction = 0.0;
    for j in 0..s {
        let mut log_det = 0.0;
        let mut trace = 0.0;
        let mut norm_sq = 0.0;
        for i in 0..r {
            log_det += lambda[(j, i)].ln();
            trace += lambda[(j, i)];
            norm_sq += alpha[(j, i)] * alpha[(j, i)];
        }
        correction += 0.5 * fb * (r as f64 + log_det - trace - norm_sq);
    }
    log_px + correction
}

/// Full inference loop: q(Y) update, forward-backward, prior update, ELBO,
/// with small-prior speakers pruned between iterations. Stops on relative
/// ELBO change below `elbo_tol` or after `max_iters`.
pub fn run(
    x: ArrayView2<f64>,
    init_labels: &[usize],
    phi: ArrayView1<f64>,
    cfg: &VbxConfig,
) -> Result<VbxState> {
    cfg.validate()?;
    let t = x.nrows();
    if t == 0 {
        return Err(Error::EmptyInput("no frames to diarize".into()));
    }
    if init_labels.len() != t {
        return Err(Error::invalid(format!(
            "{} labels for {t} frames",
            init_labels.len()
        )));
    }
    if phi.len() != x.ncols() {
        return Err(Error::invalid(format!(
            "phi has {} entries for dimension {}",
            phi.len(),
            x.ncols()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            iteration: 0,
            message: "non-finite embedding input".into(),
        });
    }

    let n_init = init_labels.iter().max().unwrap() + 1;
    let mut state = init_state(init_labels, n_init, x.ncols())?;
    // Maps current columns back to initial speaker ids for `active`.
    let mut column_ids: Vec<usize> = (0..n_init).collect();

    for iteration in 1..=cfg.max_iters {
        let tag = |e: Error| match e {
            Error::Numerical { message, .. } => Error::Numerical { iteration, message },
            other => other,
        };
        update_qy(&mut state, x, phi, cfg).map_err(tag)?;
        let loglik = emission_matrix(x, state.alpha.view(), state.lambda.view(), phi, cfg.fa);
        let pass = forward_backward(loglik.view(), state.pi.view(), cfg.loop_p).map_err(tag)?;
        state.pi = update_pi(&pass, loglik.view(), state.pi.view(), cfg.loop_p);
        let bound = elbo(pass.log_px, state.alpha.view(), state.lambda.view(), cfg.fb);
        state.elbo_trace.push(bound);
        state.gamma = pass.gamma;

        let pruned = prune(&mut state, &mut column_ids, cfg.prune_pi);
        if pruned == 0 && state.elbo_trace.len() >= 2 {
            let prev = state.elbo_trace[state.elbo_trace.len() - 2];
            if (bound - prev).abs() <= cfg.elbo_tol * bound.abs() {
                state.converged = true;
                break;
            }
        }
    }
    Ok(state)
}

/// Removes speakers whose prior fell below the threshold, renormalizing the
/// prior and the responsibilities. The largest-prior speaker always stays.
fn prune(state: &mut VbxState, column_ids: &mut Vec<usize>, threshold: f64) -> usize {
    let s = state.n_speakers();
    let mut keep: Vec<usize> = (0..s).filter(|&j| state.pi[j] >= threshold).collect();
    if keep.is_empty() {
        let mut best = 0;
        for j in 1..s {
            if state.pi[j] > state.pi[best] {
                best = j;
            }
        }
        keep.push(best);
    }
    let dropped = s - keep.len();
    if dropped == 0 {
        return 0;
    }

    for (col, &initial) in column_ids.iter().enumerate() {
        if !keep.contains(&col) {
            state.active[initial] = false;
        }
    }
    *column_ids = keep.iter().map(|&j| column_ids[j]).collect();

    let t = state.n_frames();
    let r = state.alpha.ncols();
    let mut gamma = Array2::<f64>::zeros((t, keep.len()));
    let mut alpha = Array2::<f64>::zeros((keep.len(), r));
    let mut lambda = Array2::<f64>::zeros((keep.len(), r));
    let mut pi = Array1::<f64>::zeros(keep.len());
    for (new, &old) in keep.iter().enumerate() {
        gamma.column_mut(new).assign(&state.gamma.column(old));
        alpha.row_mut(new).assign(&state.alpha.row(old));
        lambda.row_mut(new).assign(&state.lambda.row(old));
        pi[new] = state.pi[old];
    }
    for mut row in gamma.axis_iter_mut(Axis(0)) {
        let total = row.sum();
        if total > 0.0 {
            row /= total;
        }
    }
    let total = pi.sum();
    pi /= total;

    state.gamma = gamma;
    state.alpha = alpha;
    state.lambda = lambda;
    state.pi = pi;
    dropped
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn transition_prob_cases() {
        let pi = array![0.5, 0.5];
        assert_abs_diff_eq!(transition_prob(pi.view(), 0.9, 0, 0), 0.95, epsilon = 1e-15);
        assert_abs_diff_eq!(transition_prob(pi.view(), 0.9, 0, 1), 0.05, epsilon = 1e-15);

        let degenerate = array![1.0, 0.0];
        assert_abs_diff_eq!(
            transition_prob(degenerate.view(), 0.5, 1, 0),
            0.5,
            epsilon = 1e-15
        );

        // Rows of the implied transition matrix sum to one.
        let pi = array![0.2, 0.3, 0.5];
        for from in 0..3 {
            let total: f64 = (0..3)
                .map(|to| transition_prob(pi.view(), 0.7, from, to))
                .sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn init_state_one_hot() {
        let state = init_state(&[0, 0, 1], 2, 3).unwrap();
        assert_eq!(state.gamma, array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(state.pi, array![0.5, 0.5]);
        assert!(state.alpha.iter().all(|&v| v == 0.0));
        assert!(state.lambda.iter().all(|&v| v == 1.0));

        let single = init_state(&[0, 0], 1, 2).unwrap();
        assert!(single.gamma.iter().all(|&v| v == 1.0));

        assert!(init_state(&[0, 2], 2, 1).is_err());
        assert!(init_state(&[], 1, 1).is_err());
    }

    #[test]
    fn qy_update_hand_cases() {
        let cfg = VbxConfig {
            fa: 1.0,
            fb: 1.0,
            ..Default::default()
        };
        // Empty speaker keeps the prior; a fully assigned x = 2 with phi = 1
        // gives precision 2 and mean 1.
        let mut state = init_state(&[0], 2, 1).unwrap();
        state.gamma = array![[1.0, 0.0]];
        let x = array![[2.0]];
        update_qy(&mut state, x.view(), array![1.0].view(), &cfg).unwrap();
        assert_abs_diff_eq!(state.lambda[(0, 0)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(state.alpha[(0, 0)], 1.0, epsilon = 1e-15);
        assert_eq!(state.lambda[(1, 0)], 1.0);
        assert_eq!(state.alpha[(1, 0)], 0.0);
    }

    #[test]
    fn qy_update_depends_only_on_fa_fb_ratio() {
        let x = array![[0.7, -0.3], [1.2, 0.4], [-0.5, 0.9]];
        let phi = array![2.0, 0.5];
        let mut a = init_state(&[0, 1, 0], 2, 2).unwrap();
        let mut b = a.clone();
        update_qy(
            &mut a,
            x.view(),
            phi.view(),
            &VbxConfig {
                fa: 0.4,
                fb: 1.6,
                ..Default::default()
            },
        )
        .unwrap();
        update_qy(
            &mut b,
            x.view(),
            phi.view(),
            &VbxConfig {
                fa: 1.2,
                fb: 4.8,
                ..Default::default()
            },
        )
        .unwrap();
        for (u, v) in a.alpha.iter().zip(b.alpha.iter()) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-14);
        }
    }

    #[test]
    fn emission_loglik_hand_value() {
        let value = emission_loglik(
            array![2.0].view(),
            array![1.0].view(),
            array![0.5].view(),
            array![1.0].view(),
            1.0,
        );
        assert_abs_diff_eq!(value, 2.0 - 0.75 - 0.5 * LN_2PI - 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(value, -1.6689385332046727, epsilon = 1e-12);
    }

    #[test]
    fn emission_loglik_zero_mean_and_scaling() {
        let x = array![1.0, -2.0];
        let phi = array![3.0, 0.5];
        let zero = emission_loglik(
            x.view(),
            array![0.0, 0.0].view(),
            array![1.0, 1.0].view(),
            phi.view(),
            1.0,
        );
        let expect = -0.5 * phi.sum() - LN_2PI - 0.5 * x.dot(&x);
        assert_abs_diff_eq!(zero, expect, epsilon = 1e-12);

        let alpha = array![0.3, -0.1];
        let lambda = array![0.7, 0.9];
        let base = emission_loglik(x.view(), alpha.view(), lambda.view(), phi.view(), 1.0);
        let doubled = emission_loglik(x.view(), alpha.view(), lambda.view(), phi.view(), 2.0);
        assert_abs_diff_eq!(doubled, 2.0 * base, epsilon = 1e-12);
    }

    #[test]
    fn emission_matrix_matches_scalar_form() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let (t, s, r) = (4, 3, 2);
        let x = Array2::from_shape_fn((t, r), |_| StandardNormal.sample(&mut rng));
        let alpha = Array2::from_shape_fn((s, r), |_| StandardNormal.sample(&mut rng));
        let lambda = Array2::from_shape_fn((s, r), |_| rng.gen_range(0.1..1.0));
        let phi = array![1.7, 0.4];
        let m = emission_matrix(x.view(), alpha.view(), lambda.view(), phi.view(), 0.3);
        for ti in 0..t {
            for j in 0..s {
                let scalar =
                    emission_loglik(x.row(ti), alpha.row(j), lambda.row(j), phi.view(), 0.3);
                assert_abs_diff_eq!(m[(ti, j)], scalar, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn forward_backward_single_state() {
        let loglik = array![[-1.0], [-2.0], [-0.5]];
        let pass = forward_backward(loglik.view(), array![1.0].view(), 0.9).unwrap();
        assert!(pass.gamma.iter().all(|&g| (g - 1.0).abs() < 1e-15));
        assert_abs_diff_eq!(pass.log_px, -3.5, epsilon = 1e-12);
    }

    #[test]
    fn forward_backward_worked_two_by_two() {
        // Two frames, two states, per-step likelihoods (.9, .1); all four
        // paths enumerate to total probability 0.378 and gamma_t1 = 41/42.
        let loglik = array![[0.9_f64.ln(), 0.1_f64.ln()], [0.9_f64.ln(), 0.1_f64.ln()]];
        let pi = array![0.5, 0.5];
        let pass = forward_backward(loglik.view(), pi.view(), 0.8).unwrap();
        assert_abs_diff_eq!(pass.log_px, 0.378_f64.ln(), epsilon = 1e-12);
        for ti in 0..2 {
            assert_abs_diff_eq!(pass.gamma[(ti, 0)], 41.0 / 42.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn forward_backward_rejects_empty() {
        let loglik = Array2::<f64>::zeros((0, 2));
        assert!(matches!(
            forward_backward(loglik.view(), array![0.5, 0.5].view(), 0.9),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn gamma_rows_sum_to_one() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let loglik = Array2::from_shape_fn((20, 4), |_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * 3.0
        });
        let pi = array![0.1, 0.2, 0.3, 0.4];
        let pass = forward_backward(loglik.view(), pi.view(), 0.95).unwrap();
        for row in pass.gamma.axis_iter(Axis(0)) {
            assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn constant_terms_cancel_in_gamma() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let t = 15;
        let s = 3;
        let loglik = Array2::from_shape_fn((t, s), |_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z - 4.0
        });
        // Drop a per-frame constant from every row; responsibilities must not move.
        let mut shifted = loglik.clone();
        for ti in 0..t {
            let c = 1.7 + ti as f64;
            for j in 0..s {
                shifted[(ti, j)] += c;
            }
        }
        let pi = array![0.5, 0.25, 0.25];
        let a = forward_backward(loglik.view(), pi.view(), 0.9).unwrap();
        let b = forward_backward(shifted.view(), pi.view(), 0.9).unwrap();
        for (u, v) in a.gamma.iter().zip(b.gamma.iter()) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-12);
        }
    }

    #[test]
    fn pi_update_single_and_symmetric() {
        let loglik = array![[-1.0], [-2.0]];
        let pass = forward_backward(loglik.view(), array![1.0].view(), 0.9).unwrap();
        let pi = update_pi(&pass, loglik.view(), array![1.0].view(), 0.9);
        assert_abs_diff_eq!(pi[0], 1.0, epsilon = 1e-15);

        // Mirrored emissions and uniform init stay uniform.
        let loglik = array![[-1.0, -3.0], [-3.0, -1.0]];
        let start = array![0.5, 0.5];
        let pass = forward_backward(loglik.view(), start.view(), 0.8).unwrap();
        let pi = update_pi(&pass, loglik.view(), start.view(), 0.8);
        assert_abs_diff_eq!(pi[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pi[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn elbo_prior_posterior_equals_log_px() {
        let alpha = Array2::<f64>::zeros((2, 3));
        let lambda = Array2::<f64>::ones((2, 3));
        assert_abs_diff_eq!(
            elbo(-12.5, alpha.view(), lambda.view(), 7.0),
            -12.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn elbo_correction_never_positive() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..50 {
            let alpha = Array2::from_shape_fn((3, 4), |_| StandardNormal.sample(&mut rng));
            let lambda = Array2::from_shape_fn((3, 4), |_| rng.gen_range(1e-3..1.0));
            let fb = rng.gen_range(0.1..20.0);
            let value = elbo(0.0, alpha.view(), lambda.view(), fb);
            assert!(
                value <= 1e-12,
                "KL correction must be non-positive: {value}"
            );
        }
    }

    fn two_speaker_problem(seed: u64, t: usize, phi_scale: f64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let r = 4;
        let y: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..r).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let mut x = Array2::<f64>::zeros((t, r));
        let mut truth = Vec::with_capacity(t);
        let mut z = 0usize;
        for ti in 0..t {
            if rng.gen_range(0.0..1.0) > 0.9 {
                z = rng.gen_range(0..2);
            }
            truth.push(z);
            for j in 0..r {
                let noise: f64 = StandardNormal.sample(&mut rng);
                x[(ti, j)] = phi_scale.sqrt() * y[z][j] + noise;
            }
        }
        (x, truth)
    }

    #[test]
    fn run_recovers_two_well_separated_speakers() {
        let (x, truth) = two_speaker_problem(31, 120, 400.0);
        // Deliberately over-clustered initialization: each true speaker is
        // split in two by recording half, so the redundant pair is
        // asymmetric the way a real pre-clustering would be.
        let half = truth.len() / 2;
        let init: Vec<usize> = truth
            .iter()
            .enumerate()
            .map(|(i, &z)| z * 2 + usize::from(i >= half))
            .collect();
        let cfg = VbxConfig {
            fa: 1.0,
            fb: 1.0,
            loop_p: 0.9,
            ..Default::default()
        };
        let phi = Array1::from_elem(4, 400.0);
        let state = run(x.view(), &init, phi.view(), &cfg).unwrap();
        assert_eq!(state.n_speakers(), 2, "redundant speakers must collapse");
        let labels = state.hard_labels();
        let direct: usize = labels.iter().zip(&truth).filter(|(a, b)| *a == *b).count();
        let flipped = truth.len() - direct;
        assert!(
            direct == truth.len() || flipped == truth.len(),
            "labels must match ground truth up to permutation: {direct}/{}",
            truth.len()
        );
    }

    #[test]
    fn run_single_init_cluster_stays_single() {
        let (x, _) = two_speaker_problem(77, 60, 100.0);
        let init = vec![0usize; 60];
        let phi = Array1::from_elem(4, 100.0);
        let state = run(x.view(), &init, phi.view(), &VbxConfig::default()).unwrap();
        assert_eq!(state.n_speakers(), 1);
        assert!(state.hard_labels().iter().all(|&l| l == 0));
    }

    #[test]
    fn run_accepts_single_frame() {
        let x = array![[0.3, -0.2]];
        let phi = array![5.0, 2.0];
        let state = run(x.view(), &[0], phi.view(), &VbxConfig::default()).unwrap();
        assert_eq!(state.n_frames(), 1);
        assert_eq!(state.hard_labels().len(), 1);
    }

    #[test]
    fn run_rejects_non_finite_input() {
        let x = array![[f64::NAN, 0.0]];
        let phi = array![1.0, 1.0];
        assert!(matches!(
            run(x.view(), &[0], phi.view(), &VbxConfig::default()),
            Err(Error::Numerical { .. })
        ));
    }

    #[test]
    fn elbo_trace_non_decreasing_on_random_problems() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        for case in 0..20 {
            let t = rng.gen_range(2..60);
            let s = rng.gen_range(1..5);
            let r = rng.gen_range(1..5);
            let x = Array2::from_shape_fn((t, r), |_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * 2.0
            });
            let phi = Array1::from_shape_fn(r, |_| rng.gen_range(0.05..30.0));
            let labels: Vec<usize> = (0..t)
                .map(|i| if i == 0 { 0 } else { rng.gen_range(0..s) })
                .collect();
            let labels = contiguous(labels);
            let cfg = VbxConfig {
                fa: rng.gen_range(0.1..2.0),
                fb: rng.gen_range(0.5..20.0),
                loop_p: rng.gen_range(0.5..0.995),
                max_iters: 25,
                ..Default::default()
            };
            let state = run(x.view(), &labels, phi.view(), &cfg).unwrap();
            for w in state.elbo_trace.windows(2) {
                assert!(
                    w[1] - w[0] >= -1e-8 * w[1].abs(),
                    "case {case}: ELBO decreased from {} to {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    fn contiguous(labels: Vec<usize>) -> Vec<usize> {
        let mut map: Vec<usize> = Vec::new();
        labels
            .into_iter()
            .map(|l| {
                if let Some(pos) = map.iter().position(|&m| m == l) {
                    pos
                } else {
                    map.push(l);
                    map.len() - 1
                }
            })
            .collect()
    }

    #[test]
    fn labels_invariant_to_initialization_renumbering() {
        let (x, truth) = two_speaker_problem(55, 80, 200.0);
        let half = truth.len() / 2;
        let init: Vec<usize> = truth
            .iter()
            .enumerate()
            .map(|(i, &z)| z * 2 + usize::from(i >= half))
            .collect();
        // Swap speaker numbers 0<->3 and 1<->2.
        let renumbered: Vec<usize> = init.iter().map(|&l| 3 - l).collect();
        let cfg = VbxConfig {
            loop_p: 0.9,
            ..Default::default()
        };
        let phi = Array1::from_elem(4, 200.0);
        let a = run(x.view(), &init, phi.view(), &cfg)
            .unwrap()
            .hard_labels();
        let b = run(x.view(), &renumbered, phi.view(), &cfg)
            .unwrap()
            .hard_labels();
        for i in 0..a.len() {
            for j in (i + 1)..a.len() {
                assert_eq!(
                    a[i] == a[j],
                    b[i] == b[j],
                    "partition differs at pair ({i}, {j})"
                );
            }
        }
    }

    #[test]
    fn hard_label_ties_take_lowest_index() {
        let state = VbxState {
            gamma: array![[0.5, 0.5], [0.2, 0.8]],
            alpha: Array2::zeros((2, 1)),
            lambda: Array2::ones((2, 1)),
            pi: array![0.5, 0.5],
            elbo_trace: vec![],
            active: vec![true, true],
            converged: true,
        };
        assert_eq!(state.hard_labels(), vec![0, 1]);
    }
}
