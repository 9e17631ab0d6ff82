//! Bayesian non-negative matrix factorization with a Poisson likelihood
//! and Exponential priors, sampled either by reflected SGLD or by
//! change-of-variable SGLD through a positive transform.
//!
//! An observed count matrix X (I x J, sparse) is modeled as
//! X_ij ~ Poisson(sum_r W_ir H_rj) with W_ir ~ Exp(lambda_W) and
//! H_rj ~ Exp(lambda_H). Minibatch stochastic gradients realize the
//! noisy-gradient assumption by subsampling observed entries.

pub mod data;
pub mod train;

pub use data::{
    generate_synthetic, load_ratings_csv, LoadedRatings, RatingEntry, RatingsDataset,
    RatingsFormat, Split,
};
pub use train::{
    measure_step_seconds, predict_rmse, read_factors, train_nmf, write_factors, NmfSamplerKind,
    PredictiveAccumulator, RmsePoint, TrainConfig, TrainOutcome,
};

use crate::error::{Error, Result};
use crate::samplers::sgld_update;
use crate::transforms::{Transform, TransformKind};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Elementwise floor applied when a reflected entry lands exactly on zero:
/// a Poisson rate of zero with a positive observation has infinite
/// gradient.
pub const MIRROR_ZERO_FLOOR: f64 = 1e-12;

/// Proxy-space bookkeeping for the change-of-variable sampler: preimages
/// of both factor matrices, plus f'(phi) and f''/f'(phi) cached from the
/// fused transform evaluation of the most recent refresh (each parameter
/// pays one transform evaluation per step).
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyState {
    pub phi_w: Vec<f64>,
    pub phi_h_t: Vec<f64>,
    fprime_w: Vec<f64>,
    ratio_w: Vec<f64>,
    fprime_h_t: Vec<f64>,
    ratio_h_t: Vec<f64>,
}

/// Factor matrices and, for the change-of-variable sampler, their proxy
/// state. W is I x R row-major; H is kept transposed (J x R row-major) so
/// the per-entry column H_{:j} is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorState {
    pub n_users: usize,
    pub n_items: usize,
    pub rank: usize,
    pub lambda_w: f64,
    pub lambda_h: f64,
    pub w: Vec<f64>,
    pub h_t: Vec<f64>,
    pub proxy: Option<ProxyState>,
}

impl FactorState {
    /// Prior draws for the reflected sampler. Draw order: W row-major,
    /// then transposed H row-major.
    pub fn init_mirror(
        n_users: usize,
        n_items: usize,
        rank: usize,
        lambda_w: f64,
        lambda_h: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let (w, h_t) = prior_draws(n_users, n_items, rank, lambda_w, lambda_h, rng)?;
        Ok(Self { n_users, n_items, rank, lambda_w, lambda_h, w, h_t, proxy: None })
    }

    /// Prior draws pulled back through the transform. The stored factors
    /// are re-emitted as f(phi) so W = f(phi_W) holds exactly from the
    /// first step.
    pub fn init_corv(
        n_users: usize,
        n_items: usize,
        rank: usize,
        lambda_w: f64,
        lambda_h: f64,
        transform: &Transform,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let (mut w, mut h_t) = prior_draws(n_users, n_items, rank, lambda_w, lambda_h, rng)?;
        let build = |values: &mut [f64]| {
            let mut phi = Vec::with_capacity(values.len());
            let mut fprime = Vec::with_capacity(values.len());
            let mut ratio = Vec::with_capacity(values.len());
            for v in values.iter_mut() {
                let p = transform.inverse(*v);
                let fused = transform.fused_eval(p);
                phi.push(p);
                fprime.push(fused.deriv1);
                ratio.push(fused.log_deriv_ratio);
                *v = fused.value;
            }
            (phi, fprime, ratio)
        };
        let (phi_w, fprime_w, ratio_w) = build(&mut w);
        let (phi_h_t, fprime_h_t, ratio_h_t) = build(&mut h_t);
        Ok(Self {
            n_users,
            n_items,
            rank,
            lambda_w,
            lambda_h,
            w,
            h_t,
            proxy: Some(ProxyState { phi_w, phi_h_t, fprime_w, ratio_w, fprime_h_t, ratio_h_t }),
        })
    }

    /// Rebuild the derivative caches from the stored proxies (used after
    /// loading a snapshot).
    pub fn refresh_proxy_caches(&mut self, transform: &Transform) {
        if let Some(proxy) = self.proxy.as_mut() {
            for (i, &p) in proxy.phi_w.iter().enumerate() {
                let fused = transform.fused_eval(p);
                proxy.fprime_w[i] = fused.deriv1;
                proxy.ratio_w[i] = fused.log_deriv_ratio;
                self.w[i] = fused.value;
            }
            for (j, &p) in proxy.phi_h_t.iter().enumerate() {
                let fused = transform.fused_eval(p);
                proxy.fprime_h_t[j] = fused.deriv1;
                proxy.ratio_h_t[j] = fused.log_deriv_ratio;
                self.h_t[j] = fused.value;
            }
        }
    }

    #[inline]
    pub fn predict(&self, user: usize, item: usize) -> f64 {
        let r = self.rank;
        let wi = &self.w[user * r..(user + 1) * r];
        let hj = &self.h_t[item * r..(item + 1) * r];
        wi.iter().zip(hj.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn min_entry(&self) -> f64 {
        self.w.iter().chain(self.h_t.iter()).fold(f64::INFINITY, |m, &v| m.min(v))
    }
}

fn prior_draws(
    n_users: usize,
    n_items: usize,
    rank: usize,
    lambda_w: f64,
    lambda_h: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if n_users == 0 || n_items == 0 || rank == 0 {
        return Err(Error::Config("factor state needs positive dimensions".into()));
    }
    if !(lambda_w > 0.0 && lambda_h > 0.0) {
        return Err(Error::Config("prior rates must be positive".into()));
    }
    let exp_w = rand_distr::Exp::new(lambda_w).map_err(|e| Error::Config(e.to_string()))?;
    let exp_h = rand_distr::Exp::new(lambda_h).map_err(|e| Error::Config(e.to_string()))?;
    let w = (0..n_users * rank).map(|_| exp_w.sample(rng)).collect();
    let h_t = (0..n_items * rank).map(|_| exp_h.sample(rng)).collect();
    Ok((w, h_t))
}

/// Accumulate the likelihood part of the W gradient over a minibatch:
/// acc[i*R + r] += H_{r j_k} (X_k / Xhat_k - 1) for each batch entry with
/// row i. `acc` must be zeroed by the caller.
fn accumulate_w(
    state: &FactorState,
    entries: &[RatingEntry],
    batch: &[usize],
    acc: &mut [f64],
) -> Result<()> {
    let r = state.rank;
    for &k in batch {
        let e = &entries[k];
        let (i, j) = (e.user as usize, e.item as usize);
        let xhat = state.predict(i, j);
        if !(xhat > 0.0) {
            return Err(Error::Numerics(format!(
                "nonpositive predicted rate {xhat} at entry ({i}, {j})"
            )));
        }
        let c = e.value as f64 / xhat - 1.0;
        let hj = &state.h_t[j * r..(j + 1) * r];
        let ai = &mut acc[i * r..(i + 1) * r];
        for (a, h) in ai.iter_mut().zip(hj.iter()) {
            *a += h * c;
        }
    }
    Ok(())
}

/// Transposed-H counterpart of [`accumulate_w`].
fn accumulate_h(
    state: &FactorState,
    entries: &[RatingEntry],
    batch: &[usize],
    acc: &mut [f64],
) -> Result<()> {
    let r = state.rank;
    for &k in batch {
        let e = &entries[k];
        let (i, j) = (e.user as usize, e.item as usize);
        let xhat = state.predict(i, j);
        if !(xhat > 0.0) {
            return Err(Error::Numerics(format!(
                "nonpositive predicted rate {xhat} at entry ({i}, {j})"
            )));
        }
        let c = e.value as f64 / xhat - 1.0;
        let wi = &state.w[i * r..(i + 1) * r];
        let aj = &mut acc[j * r..(j + 1) * r];
        for (a, w) in aj.iter_mut().zip(wi.iter()) {
            *a += w * c;
        }
    }
    Ok(())
}

/// Stochastic gradient of the potential for one W row:
/// lambda_W - (N/|S|) * sum_{k in S, i_k = i} H_{:j_k} (X_k/Xhat_k - 1).
pub fn stochastic_gradient_w_row(
    state: &FactorState,
    entries: &[RatingEntry],
    batch: &[usize],
    n_train: usize,
    row: usize,
) -> Result<Vec<f64>> {
    let r = state.rank;
    let mut acc = vec![0.0; state.n_users * r];
    accumulate_w(state, entries, batch, &mut acc)?;
    let scale = n_train as f64 / batch.len() as f64;
    Ok(acc[row * r..(row + 1) * r].iter().map(|&a| state.lambda_w - scale * a).collect())
}

/// Symmetric formula for one H column.
pub fn stochastic_gradient_h_col(
    state: &FactorState,
    entries: &[RatingEntry],
    batch: &[usize],
    n_train: usize,
    col: usize,
) -> Result<Vec<f64>> {
    let r = state.rank;
    let mut acc = vec![0.0; state.n_items * r];
    accumulate_h(state, entries, batch, &mut acc)?;
    let scale = n_train as f64 / batch.len() as f64;
    Ok(acc[col * r..(col + 1) * r].iter().map(|&a| state.lambda_h - scale * a).collect())
}

#[inline]
fn mirror_fold(proposal: f64) -> f64 {
    let folded = proposal.abs();
    if folded == 0.0 {
        MIRROR_ZERO_FLOOR
    } else {
        folded
    }
}

/// One reflected-SGLD iteration: the W update from the current factors,
/// then the H update from the refreshed W. All entries move every
/// iteration (rows untouched by the batch keep the prior-only gradient).
/// Noise draw order: W row-major, then transposed-H row-major.
pub fn step_mirror(
    state: &mut FactorState,
    entries: &[RatingEntry],
    batch: &[usize],
    n_train: usize,
    eps: f64,
    rng: &mut ChaCha8Rng,
    scratch: &mut StepScratch,
) -> Result<()> {
    let scale = n_train as f64 / batch.len() as f64;

    scratch.acc_w.iter_mut().for_each(|a| *a = 0.0);
    accumulate_w(state, entries, batch, &mut scratch.acc_w)?;
    fill_noise(&mut scratch.eta_w, rng);
    for idx in 0..state.w.len() {
        let g = state.lambda_w - scale * scratch.acc_w[idx];
        state.w[idx] = mirror_fold(sgld_update(state.w[idx], g, eps, scratch.eta_w[idx]));
    }
    check_finite(&state.w, "W")?;

    scratch.acc_h.iter_mut().for_each(|a| *a = 0.0);
    accumulate_h(state, entries, batch, &mut scratch.acc_h)?;
    fill_noise(&mut scratch.eta_h, rng);
    for idx in 0..state.h_t.len() {
        let g = state.lambda_h - scale * scratch.acc_h[idx];
        state.h_t[idx] = mirror_fold(sgld_update(state.h_t[idx], g, eps, scratch.eta_h[idx]));
    }
    check_finite(&state.h_t, "H")?;
    Ok(())
}

fn fill_noise(buf: &mut [f64], rng: &mut ChaCha8Rng) {
    for slot in buf.iter_mut() {
        *slot = StandardNormal.sample(rng);
    }
}

fn check_finite(values: &[f64], which: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        return Ok(());
    }
    let idx = values.iter().position(|v| !v.is_finite()).unwrap();
    Err(Error::Divergence { step: 0, detail: format!("{which}[{idx}] became {}", values[idx]) })
}

/// One change-of-variable SGLD iteration on the proxy matrices, with the
/// same pass structure and noise order as [`step_mirror`]. f' and f''/f'
/// at the pre-step position come from the cache written by the previous
/// refresh, so each parameter costs one fused transform evaluation.
pub fn step_corv(
    state: &mut FactorState,
    entries: &[RatingEntry],
    batch: &[usize],
    n_train: usize,
    eps: f64,
    transform: &Transform,
    rng: &mut ChaCha8Rng,
    scratch: &mut StepScratch,
) -> Result<()> {
    let scale = n_train as f64 / batch.len() as f64;
    if state.proxy.is_none() {
        return Err(Error::Config("change-of-variable step on a state without proxies".into()));
    }

    // For the exponential map, f'(phi) is the stored factor itself and
    // f''/f' is the constant one, so the derivative caches are bypassed;
    // both branches produce bitwise-identical updates.
    let exp_path = transform.kind() == TransformKind::Exp
        && transform.codomain() == crate::interval::Interval::positive_half_line();

    scratch.acc_w.iter_mut().for_each(|a| *a = 0.0);
    accumulate_w(state, entries, batch, &mut scratch.acc_w)?;
    fill_noise(&mut scratch.eta_w, rng);
    {
        let proxy = state.proxy.as_mut().unwrap();
        if exp_path {
            for idx in 0..proxy.phi_w.len() {
                let g = state.lambda_w - scale * scratch.acc_w[idx];
                proxy.phi_w[idx] =
                    sgld_update(proxy.phi_w[idx], state.w[idx] * g - 1.0, eps, scratch.eta_w[idx]);
            }
            check_finite(&proxy.phi_w, "phi_W")?;
            transform.eval_block(&proxy.phi_w, &mut state.w);
        } else {
            for idx in 0..proxy.phi_w.len() {
                let g = state.lambda_w - scale * scratch.acc_w[idx];
                proxy.phi_w[idx] = sgld_update(
                    proxy.phi_w[idx],
                    proxy.fprime_w[idx] * g - proxy.ratio_w[idx],
                    eps,
                    scratch.eta_w[idx],
                );
            }
            check_finite(&proxy.phi_w, "phi_W")?;
            transform.fused_eval_block(
                &proxy.phi_w,
                &mut state.w,
                &mut proxy.fprime_w,
                &mut proxy.ratio_w,
            );
        }
    }

    scratch.acc_h.iter_mut().for_each(|a| *a = 0.0);
    accumulate_h(state, entries, batch, &mut scratch.acc_h)?;
    fill_noise(&mut scratch.eta_h, rng);
    {
        let proxy = state.proxy.as_mut().unwrap();
        if exp_path {
            for idx in 0..proxy.phi_h_t.len() {
                let g = state.lambda_h - scale * scratch.acc_h[idx];
                proxy.phi_h_t[idx] =
                    sgld_update(proxy.phi_h_t[idx], state.h_t[idx] * g - 1.0, eps, scratch.eta_h[idx]);
            }
            check_finite(&proxy.phi_h_t, "phi_H")?;
            transform.eval_block(&proxy.phi_h_t, &mut state.h_t);
        } else {
            for idx in 0..proxy.phi_h_t.len() {
                let g = state.lambda_h - scale * scratch.acc_h[idx];
                proxy.phi_h_t[idx] = sgld_update(
                    proxy.phi_h_t[idx],
                    proxy.fprime_h_t[idx] * g - proxy.ratio_h_t[idx],
                    eps,
                    scratch.eta_h[idx],
                );
            }
            check_finite(&proxy.phi_h_t, "phi_H")?;
            transform.fused_eval_block(
                &proxy.phi_h_t,
                &mut state.h_t,
                &mut proxy.fprime_h_t,
                &mut proxy.ratio_h_t,
            );
        }
    }
    Ok(())
}

/// Reusable gradient accumulators and noise buffers, sized for one
/// factor state.
#[derive(Debug, Clone)]
pub struct StepScratch {
    acc_w: Vec<f64>,
    acc_h: Vec<f64>,
    eta_w: Vec<f64>,
    eta_h: Vec<f64>,
}

impl StepScratch {
    pub fn for_state(state: &FactorState) -> Self {
        Self {
            acc_w: vec![0.0; state.n_users * state.rank],
            acc_h: vec![0.0; state.n_items * state.rank],
            eta_w: vec![0.0; state.n_users * state.rank],
            eta_h: vec![0.0; state.n_items * state.rank],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{step_corv as scalar_step_corv, ChainState};
    use crate::targets::GradientSource;
    use crate::transforms::TransformKind;
    use rand::{Rng, SeedableRng};

    fn one_by_one(w: f64, h: f64, x: u32) -> (FactorState, Vec<RatingEntry>) {
        let state = FactorState {
            n_users: 1,
            n_items: 1,
            rank: 1,
            lambda_w: 1.0,
            lambda_h: 1.0,
            w: vec![w],
            h_t: vec![h],
            proxy: None,
        };
        let entries = vec![RatingEntry { user: 0, item: 0, value: x, split: Split::Train }];
        (state, entries)
    }

    #[test]
    fn hand_evaluated_gradient() {
        // W = (2), H = (3), X = 12: residual factor is 12/6 - 1 = 1,
        // gradient = -(1/1) * 3 * 1 + 1 = -2.
        let (state, entries) = one_by_one(2.0, 3.0, 12);
        let g = stochastic_gradient_w_row(&state, &entries, &[0], 1, 0).unwrap();
        assert_eq!(g, vec![-2.0]);
    }

    #[test]
    fn perfect_reconstruction_leaves_prior_only() {
        let (mut state, entries) = one_by_one(1.0, 5.0, 5);
        state.lambda_w = 0.7;
        let g = stochastic_gradient_w_row(&state, &entries, &[0], 1, 0).unwrap();
        assert_eq!(g, vec![0.7]);
    }

    #[test]
    fn untouched_row_gets_prior_gradient() {
        let state = FactorState {
            n_users: 3,
            n_items: 2,
            rank: 2,
            lambda_w: 1.3,
            lambda_h: 1.0,
            w: vec![1.0; 6],
            h_t: vec![1.0; 4],
            proxy: None,
        };
        let entries = vec![RatingEntry { user: 0, item: 0, value: 2, split: Split::Train }];
        let g = stochastic_gradient_w_row(&state, &entries, &[0], 1, 2).unwrap();
        assert_eq!(g, vec![1.3, 1.3]);
    }

    #[test]
    fn gradient_matches_finite_difference_of_minibatch_potential() {
        // U_batch(W) = (N/|S|) sum_k (Xhat_k - X_k ln Xhat_k) + lambda_W sum W
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n_users, n_items, rank) = (4, 3, 2);
        let mut state =
            FactorState::init_mirror(n_users, n_items, rank, 1.0, 1.0, &mut rng).unwrap();
        state.lambda_w = 0.9;
        let entries: Vec<RatingEntry> = (0..n_users as u32)
            .flat_map(|i| {
                (0..n_items as u32).map(move |j| RatingEntry {
                    user: i,
                    item: j,
                    value: (i + 2 * j + 1),
                    split: Split::Train,
                })
            })
            .collect();
        let batch: Vec<usize> = vec![0, 5, 7, 11, 3];
        let n_train = entries.len();
        let scale = n_train as f64 / batch.len() as f64;

        let potential = |state: &FactorState| -> f64 {
            let mut u = 0.0;
            for &k in &batch {
                let e = &entries[k];
                let xhat = state.predict(e.user as usize, e.item as usize);
                u += scale * (xhat - e.value as f64 * xhat.ln());
            }
            u + state.lambda_w * state.w.iter().sum::<f64>()
        };

        for row in 0..n_users {
            let g = stochastic_gradient_w_row(&state, &entries, &batch, n_train, row).unwrap();
            for r in 0..rank {
                let idx = row * rank + r;
                let h = 1e-6;
                let mut plus = state.clone();
                plus.w[idx] += h;
                let mut minus = state.clone();
                minus.w[idx] -= h;
                let fd = (potential(&plus) - potential(&minus)) / (2.0 * h);
                assert!(
                    (g[r] - fd).abs() <= 1e-5 * (1.0 + fd.abs()),
                    "row {row} r {r}: {} vs {fd}",
                    g[r]
                );
            }
        }
    }

    #[test]
    fn minibatch_gradient_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (n_users, n_items, rank) = (6, 5, 2);
        let state = FactorState::init_mirror(n_users, n_items, rank, 1.0, 1.0, &mut rng).unwrap();
        let entries: Vec<RatingEntry> = (0..n_users as u32)
            .flat_map(|i| {
                (0..n_items as u32).map(move |j| RatingEntry {
                    user: i,
                    item: j,
                    value: i + j,
                    split: Split::Train,
                })
            })
            .collect();
        let n_train = entries.len();
        let full: Vec<usize> = (0..n_train).collect();
        let row = 2;
        let exact = stochastic_gradient_w_row(&state, &entries, &full, n_train, row).unwrap();

        let n_batches = 10_000;
        let batch_size = 6;
        let mut sums = vec![0.0; rank];
        let mut sq = vec![0.0; rank];
        for _ in 0..n_batches {
            let batch: Vec<usize> = (0..batch_size).map(|_| rng.gen_range(0..n_train)).collect();
            let g = stochastic_gradient_w_row(&state, &entries, &batch, n_train, row).unwrap();
            for r in 0..rank {
                sums[r] += g[r];
                sq[r] += g[r] * g[r];
            }
        }
        for r in 0..rank {
            let mean = sums[r] / n_batches as f64;
            let var = sq[r] / n_batches as f64 - mean * mean;
            let se = (var / n_batches as f64).sqrt();
            assert!(
                (mean - exact[r]).abs() <= 3.0 * se.max(1e-12),
                "component {r}: mean {mean} vs exact {} (se {se})",
                exact[r]
            );
        }
    }

    #[test]
    fn zero_stepsize_keeps_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = Transform::new(TransformKind::Softplus);
        let mut state = FactorState::init_corv(3, 2, 2, 1.0, 1.0, &t, &mut rng).unwrap();
        let entries = vec![RatingEntry { user: 0, item: 0, value: 3, split: Split::Train }];
        let before = state.clone();
        let mut scratch = StepScratch::for_state(&state);
        step_corv(&mut state, &entries, &[0], 1, 0.0, &t, &mut rng, &mut scratch).unwrap();
        assert_eq!(state.proxy.as_ref().unwrap().phi_w, before.proxy.as_ref().unwrap().phi_w);
        assert_eq!(state.w, before.w, "W = f(phi) is reproduced exactly");
    }

    #[test]
    fn mirror_fold_reflects_and_floors() {
        assert_eq!(mirror_fold(-0.4), 0.4);
        assert_eq!(mirror_fold(0.4), 0.4);
        assert_eq!(mirror_fold(0.0), MIRROR_ZERO_FLOOR);
        assert_eq!(mirror_fold(-0.0), MIRROR_ZERO_FLOOR);
    }

    #[test]
    fn exp_transform_has_unit_ratio_drift() {
        // with f = exp the curvature correction is the constant one
        let t = Transform::new(TransformKind::Exp);
        for phi in [-3.0, 0.0, 2.0] {
            assert_eq!(t.log_deriv_ratio(phi), 1.0);
        }
    }

    #[test]
    fn softplus_ratio_stays_finite_in_deep_tail() {
        let t = Transform::new(TransformKind::Softplus);
        assert!(t.deriv1(-20.0) < 1e-8);
        let ratio = t.log_deriv_ratio(-20.0);
        assert!((ratio - 1.0).abs() < 1e-8, "ratio {ratio}");
    }

    #[test]
    fn positivity_over_long_fuzz_runs() {
        let entries: Vec<RatingEntry> = (0..6u32)
            .flat_map(|i| {
                (0..5u32).map(move |j| RatingEntry {
                    user: i,
                    item: j,
                    value: (i * j) % 7,
                    split: Split::Train,
                })
            })
            .collect();
        let n_train = entries.len();

        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut state = FactorState::init_mirror(6, 5, 2, 1.0, 1.0, &mut rng).unwrap();
        let mut scratch = StepScratch::for_state(&state);
        for _ in 0..10_000 {
            let batch: Vec<usize> = (0..8).map(|_| rng.gen_range(0..n_train)).collect();
            step_mirror(&mut state, &entries, &batch, n_train, 3e-3, &mut rng, &mut scratch)
                .unwrap();
            debug_assert!(state.min_entry() >= 0.0);
        }
        assert!(state.min_entry() >= 0.0);

        let t = Transform::new(TransformKind::Softplus);
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let mut state = FactorState::init_corv(6, 5, 2, 1.0, 1.0, &t, &mut rng).unwrap();
        let mut scratch = StepScratch::for_state(&state);
        for _ in 0..10_000 {
            let batch: Vec<usize> = (0..8).map(|_| rng.gen_range(0..n_train)).collect();
            step_corv(&mut state, &entries, &batch, n_train, 3e-3, &t, &mut rng, &mut scratch)
                .unwrap();
        }
        assert!(state.min_entry() > 0.0, "proxy factors must stay strictly positive");
    }

    /// Gradient source reproducing the 1x1 minibatch W-gradient with the
    /// exact floating-point expression used by the elementwise step.
    struct OneCellPosterior {
        h: f64,
        x: f64,
        lambda: f64,
    }

    impl GradientSource for OneCellPosterior {
        fn sample_gradient(&self, theta: f64, _rng: &mut ChaCha8Rng) -> f64 {
            let xhat = theta * self.h;
            let c = self.x / xhat - 1.0;
            let acc = self.h * c;
            self.lambda - 1.0 * acc
        }
    }

    #[test]
    fn one_by_one_matches_scalar_sampler_bitwise() {
        for kind in [TransformKind::Softplus, TransformKind::Exp, TransformKind::Icll] {
            one_by_one_case(Transform::new(kind));
        }
    }

    fn one_by_one_case(t: Transform) {
        let seed = 4242;

        // elementwise path: W = f(phi) with cached derivative and ratio
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w0 = 1.7_f64;
        let h0 = 2.3_f64;
        let phi0 = t.inverse(w0);
        let f0 = t.fused_eval(phi0);
        let fh = t.fused_eval(t.inverse(h0));
        let mut state = FactorState {
            n_users: 1,
            n_items: 1,
            rank: 1,
            lambda_w: 1.0,
            lambda_h: 1.0,
            w: vec![f0.value],
            h_t: vec![fh.value],
            proxy: Some(ProxyState {
                phi_w: vec![phi0],
                phi_h_t: vec![t.inverse(h0)],
                fprime_w: vec![f0.deriv1],
                ratio_w: vec![f0.log_deriv_ratio],
                fprime_h_t: vec![fh.deriv1],
                ratio_h_t: vec![fh.log_deriv_ratio],
            }),
        };
        let entries = vec![RatingEntry { user: 0, item: 0, value: 4, split: Split::Train }];
        let mut scratch = StepScratch::for_state(&state);
        step_corv(&mut state, &entries, &[0], 1, 1e-3, &t, &mut rng, &mut scratch).unwrap();

        // scalar path with an identical stream; the W entry consumes the
        // first normal draw in both
        let oracle = OneCellPosterior { h: fh.value, x: 4.0, lambda: 1.0 };
        let mut chain = ChainState {
            phi: phi0,
            theta: f0.value,
            step: 0,
            stepsize: 1e-3,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        scalar_step_corv(&mut chain, &oracle, &t).unwrap();

        let proxy = state.proxy.as_ref().unwrap();
        assert_eq!(proxy.phi_w[0].to_bits(), chain.phi.to_bits(), "{} phi", t.name());
        assert_eq!(state.w[0].to_bits(), chain.theta.to_bits(), "{} theta", t.name());
    }
}
