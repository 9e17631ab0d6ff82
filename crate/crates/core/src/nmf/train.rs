//! Training loop, Bayesian predictive accumulator, RMSE evaluation,
//! factor snapshots, and per-step timing.

use super::data::{RatingsDataset, Split};
use super::{step_corv, step_mirror, FactorState, StepScratch};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::transforms::Transform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{Read, Write};
use std::path::Path;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NmfSamplerKind {
    Mirror,
    Corv(Transform),
}

impl NmfSamplerKind {
    pub fn label(&self) -> String {
        match self {
            Self::Mirror => "mirror_sgld".to_string(),
            Self::Corv(t) => format!("corv_{}", t.name()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub sampler: NmfSamplerKind,
    pub rank: usize,
    pub lambda_w: f64,
    pub lambda_h: f64,
    pub batch_size: usize,
    pub n_iters: usize,
    pub stepsize: f64,
    pub eval_interval: usize,
    /// iterations before the predictive accumulator starts collecting
    pub burn_in: usize,
    pub seed: u64,
}

/// Running mean of per-entry predictions over the kept posterior samples.
/// The stored mean equals the arithmetic mean of the accumulated
/// predictions up to floating-point rounding.
#[derive(Debug, Clone)]
pub struct PredictiveAccumulator {
    mean: Vec<f64>,
    n_accumulated: usize,
}

impl PredictiveAccumulator {
    pub fn new(len: usize) -> Self {
        Self { mean: vec![0.0; len], n_accumulated: 0 }
    }

    pub fn add(&mut self, predictions: &[f64]) {
        assert_eq!(predictions.len(), self.mean.len());
        self.n_accumulated += 1;
        let k = self.n_accumulated as f64;
        for (m, &p) in self.mean.iter_mut().zip(predictions.iter()) {
            *m += (p - *m) / k;
        }
    }

    pub fn n_accumulated(&self) -> usize {
        self.n_accumulated
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }
}

/// RMSE of the accumulated predictive mean against a split.
pub fn predict_rmse(
    acc: &PredictiveAccumulator,
    dataset: &RatingsDataset,
    split: Split,
) -> Result<f64> {
    if acc.n_accumulated == 0 {
        return Err(Error::Config("predictive accumulator is empty".into()));
    }
    rmse_of(&acc.mean, dataset, split)
}

/// RMSE of arbitrary per-entry predictions against a split.
pub fn rmse_of(predictions: &[f64], dataset: &RatingsDataset, split: Split) -> Result<f64> {
    let mut sq = 0.0;
    let mut n = 0usize;
    for (e, &p) in dataset.entries.iter().zip(predictions.iter()) {
        if e.split == split {
            sq += (p - e.value as f64).powi(2);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Config(format!("split {split:?} is empty")));
    }
    Ok((sq / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy)]
pub struct RmsePoint {
    pub iteration: usize,
    pub train_rmse: f64,
    pub valid_rmse: f64,
    pub test_rmse: f64,
    pub wall: Duration,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub curve: Vec<RmsePoint>,
    pub state: FactorState,
    pub accumulator: PredictiveAccumulator,
    pub noise_floor_rmse: Option<f64>,
}

/// Train Bayesian NMF by minibatch Langevin sampling. Deterministic given
/// the seed: one ChaCha stream drives initialization, batch subsampling
/// (uniform over training entries, with replacement), and step noise, in a
/// fixed order per iteration.
///
/// RMSE is evaluated at iteration zero and every `eval_interval`
/// iterations; from the accumulated predictive mean once the burn-in has
/// passed, from the instantaneous factors before that.
pub fn train_nmf(dataset: &RatingsDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    dataset.validate()?;
    let train_idx = dataset.split_indices(Split::Train);
    let n_train = train_idx.len();
    if n_train == 0 {
        return Err(Error::Config("training split is empty".into()));
    }
    if cfg.batch_size == 0 || cfg.batch_size > n_train {
        return Err(Error::Config(format!(
            "batch size {} must lie in 1..={n_train}",
            cfg.batch_size
        )));
    }
    if cfg.eval_interval == 0 {
        return Err(Error::Config("eval_interval must be positive".into()));
    }
    if let NmfSamplerKind::Corv(t) = &cfg.sampler {
        if t.codomain() != Interval::positive_half_line() {
            return Err(Error::Config(format!(
                "NMF needs a positive transform, {} maps onto {}",
                t.name(),
                t.codomain()
            )));
        }
    }

    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = match &cfg.sampler {
        NmfSamplerKind::Mirror => FactorState::init_mirror(
            dataset.n_users,
            dataset.n_items,
            cfg.rank,
            cfg.lambda_w,
            cfg.lambda_h,
            &mut rng,
        )?,
        NmfSamplerKind::Corv(t) => FactorState::init_corv(
            dataset.n_users,
            dataset.n_items,
            cfg.rank,
            cfg.lambda_w,
            cfg.lambda_h,
            t,
            &mut rng,
        )?,
    };
    let mut scratch = StepScratch::for_state(&state);
    let mut acc = PredictiveAccumulator::new(dataset.entries.len());
    let mut preds = vec![0.0; dataset.entries.len()];
    let mut batch = vec![0usize; cfg.batch_size];
    let mut curve = Vec::new();

    let evaluate = |state: &FactorState,
                        acc: &mut PredictiveAccumulator,
                        preds: &mut Vec<f64>,
                        iter: usize|
     -> Result<RmsePoint> {
        for (p, e) in preds.iter_mut().zip(dataset.entries.iter()) {
            *p = state.predict(e.user as usize, e.item as usize);
        }
        if iter > cfg.burn_in {
            acc.add(preds);
        }
        let source: &[f64] = if acc.n_accumulated() > 0 { acc.mean() } else { &preds[..] };
        Ok(RmsePoint {
            iteration: iter,
            train_rmse: rmse_of(source, dataset, Split::Train)?,
            valid_rmse: rmse_of(source, dataset, Split::Validation)?,
            test_rmse: rmse_of(source, dataset, Split::Test)?,
            wall: start.elapsed(),
        })
    };

    curve.push(evaluate(&state, &mut acc, &mut preds, 0)?);
    for iter in 1..=cfg.n_iters {
        for slot in batch.iter_mut() {
            *slot = train_idx[rng.gen_range(0..n_train)];
        }
        match &cfg.sampler {
            NmfSamplerKind::Mirror => step_mirror(
                &mut state,
                &dataset.entries,
                &batch,
                n_train,
                cfg.stepsize,
                &mut rng,
                &mut scratch,
            ),
            NmfSamplerKind::Corv(t) => step_corv(
                &mut state,
                &dataset.entries,
                &batch,
                n_train,
                cfg.stepsize,
                t,
                &mut rng,
                &mut scratch,
            ),
        }
        .map_err(|e| match e {
            Error::Divergence { detail, .. } => Error::Divergence { step: iter, detail },
            other => other,
        })?;
        if iter % cfg.eval_interval == 0 || iter == cfg.n_iters {
            curve.push(evaluate(&state, &mut acc, &mut preds, iter)?);
        }
    }

    Ok(TrainOutcome {
        curve,
        state,
        accumulator: acc,
        noise_floor_rmse: dataset.noise_floor_rmse,
    })
}

/// Mean wall-clock seconds per iteration, after a warmup.
pub fn measure_step_seconds(
    dataset: &RatingsDataset,
    cfg: &TrainConfig,
    warmup_steps: usize,
    timed_steps: usize,
) -> Result<f64> {
    let train_idx = dataset.split_indices(Split::Train);
    let n_train = train_idx.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = match &cfg.sampler {
        NmfSamplerKind::Mirror => FactorState::init_mirror(
            dataset.n_users,
            dataset.n_items,
            cfg.rank,
            cfg.lambda_w,
            cfg.lambda_h,
            &mut rng,
        )?,
        NmfSamplerKind::Corv(t) => FactorState::init_corv(
            dataset.n_users,
            dataset.n_items,
            cfg.rank,
            cfg.lambda_w,
            cfg.lambda_h,
            t,
            &mut rng,
        )?,
    };
    let mut scratch = StepScratch::for_state(&state);
    let mut batch = vec![0usize; cfg.batch_size];
    let mut run = |state: &mut FactorState, rng: &mut ChaCha8Rng, steps: usize| -> Result<()> {
        for _ in 0..steps {
            for slot in batch.iter_mut() {
                *slot = train_idx[rng.gen_range(0..n_train)];
            }
            match &cfg.sampler {
                NmfSamplerKind::Mirror => step_mirror(
                    state,
                    &dataset.entries,
                    &batch,
                    n_train,
                    cfg.stepsize,
                    rng,
                    &mut scratch,
                )?,
                NmfSamplerKind::Corv(t) => step_corv(
                    state,
                    &dataset.entries,
                    &batch,
                    n_train,
                    cfg.stepsize,
                    t,
                    rng,
                    &mut scratch,
                )?,
            }
        }
        Ok(())
    };
    run(&mut state, &mut rng, warmup_steps)?;
    let t0 = Instant::now();
    run(&mut state, &mut rng, timed_steps)?;
    Ok(t0.elapsed().as_secs_f64() / timed_steps as f64)
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"NMF1";

/// Write factors as a flat binary snapshot: magic, u64 dims (I, R, J),
/// a proxy-presence byte, then row-major little-endian f64 matrices
/// W (I x R), H (R x J), and the proxy matrices when present.
pub fn write_factors(state: &FactorState, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(16 + 8 * (state.w.len() + state.h_t.len()));
    out.extend_from_slice(SNAPSHOT_MAGIC);
    for dim in [state.n_users as u64, state.rank as u64, state.n_items as u64] {
        out.extend_from_slice(&dim.to_le_bytes());
    }
    out.push(u8::from(state.proxy.is_some()));
    let write_w_matrix = |out: &mut Vec<u8>, m: &[f64]| {
        for v in m {
            out.extend_from_slice(&v.to_le_bytes());
        }
    };
    // H is stored transposed in memory; the file layout is R x J row-major
    let write_h_matrix = |out: &mut Vec<u8>, m: &[f64]| {
        for r in 0..state.rank {
            for j in 0..state.n_items {
                out.extend_from_slice(&m[j * state.rank + r].to_le_bytes());
            }
        }
    };
    write_w_matrix(&mut out, &state.w);
    write_h_matrix(&mut out, &state.h_t);
    if let Some(proxy) = &state.proxy {
        write_w_matrix(&mut out, &proxy.phi_w);
        write_h_matrix(&mut out, &proxy.phi_h_t);
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

/// Read a factor snapshot written by [`write_factors`]. Prior rates are
/// configuration, not data, and are supplied by the caller. When the
/// snapshot carries proxies, call
/// [`FactorState::refresh_proxy_caches`] with the training transform
/// before stepping; the file stores only the proxies themselves.
pub fn read_factors(path: &Path, lambda_w: f64, lambda_h: f64) -> Result<FactorState> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > bytes.len() {
            return Err(Error::Data("truncated factor snapshot".into()));
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    if take(&mut pos, 4)? != SNAPSHOT_MAGIC {
        return Err(Error::Data("not a factor snapshot".into()));
    }
    let mut dims = [0u64; 3];
    for d in dims.iter_mut() {
        *d = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
    }
    let (n_users, rank, n_items) = (dims[0] as usize, dims[1] as usize, dims[2] as usize);
    let has_phi = take(&mut pos, 1)?[0] != 0;

    let read_w = |pos: &mut usize| -> Result<Vec<f64>> {
        let mut m = Vec::with_capacity(n_users * rank);
        for _ in 0..n_users * rank {
            m.push(f64::from_le_bytes(take(pos, 8)?.try_into().unwrap()));
        }
        Ok(m)
    };
    let w = read_w(&mut pos)?;
    let read_h = |pos: &mut usize| -> Result<Vec<f64>> {
        let mut m = vec![0.0; n_items * rank];
        for r in 0..rank {
            for j in 0..n_items {
                m[j * rank + r] = f64::from_le_bytes(take(pos, 8)?.try_into().unwrap());
            }
        }
        Ok(m)
    };
    let h_t = read_h(&mut pos)?;
    let proxy = if has_phi {
        let read_w2 = |pos: &mut usize| -> Result<Vec<f64>> {
            let mut m = Vec::with_capacity(n_users * rank);
            for _ in 0..n_users * rank {
                m.push(f64::from_le_bytes(take(pos, 8)?.try_into().unwrap()));
            }
            Ok(m)
        };
        let phi_w = read_w2(&mut pos)?;
        let phi_h_t = read_h(&mut pos)?;
        Some(super::ProxyState {
            fprime_w: vec![0.0; phi_w.len()],
            ratio_w: vec![0.0; phi_w.len()],
            fprime_h_t: vec![0.0; phi_h_t.len()],
            ratio_h_t: vec![0.0; phi_h_t.len()],
            phi_w,
            phi_h_t,
        })
    } else {
        None
    };
    if pos != bytes.len() {
        return Err(Error::Data("trailing bytes in factor snapshot".into()));
    }
    Ok(FactorState { n_users, n_items, rank, lambda_w, lambda_h, w, h_t, proxy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nmf::data::{generate_synthetic, RatingEntry};
    use crate::transforms::TransformKind;

    fn toy_dataset() -> RatingsDataset {
        let mut entries: Vec<RatingEntry> = (0..10u32)
            .flat_map(|i| {
                (0..8u32).map(move |j| RatingEntry {
                    user: i,
                    item: j,
                    value: (i + j) % 5,
                    split: Split::Train,
                })
            })
            .collect();
        // carve out fixed validation and test entries
        for (idx, e) in entries.iter_mut().enumerate() {
            if idx % 8 == 3 {
                e.split = Split::Validation;
            } else if idx % 8 == 6 {
                e.split = Split::Test;
            }
        }
        RatingsDataset { n_users: 10, n_items: 8, entries, noise_floor_rmse: None }
    }

    #[test]
    fn accumulator_tracks_arithmetic_mean() {
        let mut acc = PredictiveAccumulator::new(3);
        let samples = [
            vec![1.0, 2.0, 3.0],
            vec![0.5, -1.0, 2.0],
            vec![4.0, 0.25, -3.5],
            vec![2.0, 2.0, 2.0],
        ];
        for s in &samples {
            acc.add(s);
        }
        for i in 0..3 {
            let exact = samples.iter().map(|s| s[i]).sum::<f64>() / samples.len() as f64;
            let got = acc.mean()[i];
            assert!(
                (got - exact).abs() <= 1e-12 * exact.abs().max(1.0),
                "component {i}: {got} vs {exact}"
            );
        }
    }

    #[test]
    fn two_sample_accumulation_matches_halved_sum() {
        let mut acc = PredictiveAccumulator::new(2);
        let a = vec![1.0, 3.0];
        let b = vec![2.0, 5.0];
        acc.add(&a);
        acc.add(&b);
        for i in 0..2 {
            let brute = 0.5 * (a[i] + b[i]);
            assert!((acc.mean()[i] - brute).abs() <= 1e-12 * brute.abs());
        }
    }

    #[test]
    fn rmse_closed_forms() {
        let ds = RatingsDataset {
            n_users: 1,
            n_items: 2,
            entries: vec![
                RatingEntry { user: 0, item: 0, value: 0, split: Split::Test },
                RatingEntry { user: 0, item: 1, value: 2, split: Split::Test },
            ],
            noise_floor_rmse: None,
        };
        // constant predictor c against {0, 2}
        let c = 1.7;
        let got = rmse_of(&[c, c], &ds, Split::Test).unwrap();
        let expect = ((c * c + (c - 2.0) * (c - 2.0)) / 2.0).sqrt();
        assert!((got - expect).abs() < 1e-15);
        // exact predictions give zero
        assert_eq!(rmse_of(&[0.0, 2.0], &ds, Split::Test).unwrap(), 0.0);
        // empty split errors
        assert!(rmse_of(&[0.0, 2.0], &ds, Split::Train).is_err());
        // empty accumulator errors
        let acc = PredictiveAccumulator::new(2);
        assert!(predict_rmse(&acc, &ds, Split::Test).is_err());
    }

    #[test]
    fn zero_iterations_reports_initialization_only() {
        let ds = toy_dataset();
        let cfg = TrainConfig {
            sampler: NmfSamplerKind::Mirror,
            rank: 2,
            lambda_w: 1.0,
            lambda_h: 1.0,
            batch_size: 10,
            n_iters: 0,
            stepsize: 1e-3,
            eval_interval: 5,
            burn_in: 0,
            seed: 1,
        };
        let out = train_nmf(&ds, &cfg).unwrap();
        assert_eq!(out.curve.len(), 1);
        assert_eq!(out.curve[0].iteration, 0);
        assert_eq!(out.accumulator.n_accumulated(), 0);
    }

    #[test]
    fn training_is_seed_deterministic() {
        let ds = toy_dataset();
        let t = Transform::new(TransformKind::Softplus);
        let cfg = TrainConfig {
            sampler: NmfSamplerKind::Corv(t),
            rank: 2,
            lambda_w: 1.0,
            lambda_h: 1.0,
            batch_size: 10,
            n_iters: 50,
            stepsize: 1e-4,
            eval_interval: 10,
            burn_in: 10,
            seed: 9,
        };
        let a = train_nmf(&ds, &cfg).unwrap();
        let b = train_nmf(&ds, &cfg).unwrap();
        assert_eq!(a.state.w, b.state.w);
        assert_eq!(a.state.h_t, b.state.h_t);
        for (x, y) in a.curve.iter().zip(b.curve.iter()) {
            assert_eq!(x.test_rmse.to_bits(), y.test_rmse.to_bits());
        }
    }

    #[test]
    fn validates_configuration() {
        let ds = toy_dataset();
        let mut cfg = TrainConfig {
            sampler: NmfSamplerKind::Mirror,
            rank: 2,
            lambda_w: 1.0,
            lambda_h: 1.0,
            batch_size: 10_000,
            n_iters: 1,
            stepsize: 1e-3,
            eval_interval: 5,
            burn_in: 0,
            seed: 1,
        };
        assert!(train_nmf(&ds, &cfg).is_err(), "oversized batch");
        cfg.batch_size = 10;
        cfg.sampler = NmfSamplerKind::Corv(Transform::new(TransformKind::Sigmoid));
        assert!(train_nmf(&ds, &cfg).is_err(), "sigmoid does not map onto the half line");
    }

    #[test]
    fn snapshot_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = Transform::new(TransformKind::Icll);
        let state = FactorState::init_corv(4, 3, 2, 1.0, 0.5, &t, &mut rng).unwrap();
        let mut path = std::env::temp_dir();
        path.push(format!("factors_{}.bin", rand::random::<u64>()));
        write_factors(&state, &path).unwrap();
        let mut back = read_factors(&path, 1.0, 0.5).unwrap();
        std::fs::remove_file(&path).ok();
        // the snapshot stores matrices and proxies; derivative caches are
        // rebuilt against the transform
        back.refresh_proxy_caches(&t);
        assert_eq!(state, back);
    }

    #[test]
    fn rank_one_mirror_approaches_noise_floor() {
        // small rank-1 problem: reflected SGLD brings the training RMSE
        // down to the Poisson noise floor within a couple thousand
        // iterations (stepsize from a sweep over {3e-3 .. 1e-4})
        let ds = generate_synthetic(30, 20, 1, 1.0, 1.0, 11).unwrap();
        let floor = ds.noise_floor_rmse.unwrap();
        let cfg = TrainConfig {
            sampler: NmfSamplerKind::Mirror,
            rank: 1,
            lambda_w: 1.0,
            lambda_h: 1.0,
            batch_size: 100,
            n_iters: 2000,
            stepsize: 2e-4,
            eval_interval: 100,
            burn_in: 400,
            seed: 3,
        };
        let out = train_nmf(&ds, &cfg).unwrap();
        let last = out.curve.last().unwrap();
        assert!(
            last.train_rmse < 1.2 * floor,
            "train rmse {} vs floor {floor}",
            last.train_rmse
        );
    }
}


#[cfg(test)]
mod overhead_probe {
    use super::*;
    use crate::nmf::data::generate_synthetic;
    use crate::transforms::TransformKind;

    #[test]
    #[ignore = "manual overhead measurement"]
    fn overhead_measurement() {
        let dataset = generate_synthetic(200, 100, 5, 1.0, 1.0, 2024).unwrap();
        let cfg = |sampler: NmfSamplerKind| TrainConfig {
            sampler,
            rank: 20,
            lambda_w: 1.0,
            lambda_h: 1.0,
            batch_size: 2000,
            n_iters: 1,
            stepsize: 1e-5,
            eval_interval: 1,
            burn_in: 0,
            seed: 7,
        };
        let measure = |s: NmfSamplerKind| -> f64 {
            (0..3)
                .map(|_| measure_step_seconds(&dataset, &cfg(s), 100, 1200).unwrap())
                .fold(f64::INFINITY, f64::min)
        };
        let mirror = measure(NmfSamplerKind::Mirror);
        let exp = measure(NmfSamplerKind::Corv(Transform::new(TransformKind::Exp)));
        println!("mirror {:.1}us, corv_exp {:.1}us, ratio {:.3}", mirror * 1e6, exp * 1e6, exp / mirror);
    }
}
