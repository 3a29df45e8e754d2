//! Batched mean NLL and its exact gradient with respect to the raw
//! parameters.
//!
//! Trials that share an (imprint, familiar, novel) animation triple have the
//! same choice probability, so a batch is first collapsed into groups with
//! correct/incorrect counts. Each group needs two (imprint, test animation)
//! terms; those are computed once per batch, possibly in parallel, and the
//! results are summed in a fixed order so both execution modes produce the
//! same bits.
//!
//! Gradients come from the chain rule written out by hand:
//! - frame: `l_f = -D(y_f, c)` (prototype) or `LSE_x(-beta D(y_f, x))`
//!   (exemplar), with `dD/ds_i = sigma_i (y_i - x_i)^2` and `d(-beta D)/db = -beta D`;
//! - animation: `A = LSE_f(l_f) - ln F`, so `dA = sum_f softmax(l)_f dl_f`;
//! - trial: `p = sigmoid(gamma (A+ - A-))` or the mean over frame pairs of
//!   `sigmoid(gamma (l+_f - l-_g))`, with `d(gamma)/dg = gamma`;
//! - clamped trials contribute no gradient.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::data::{Stimuli, TrialRecord};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fit::config::FitConfig;
use crate::fit::params::RawParams;
use crate::similarity::{bernoulli_ll, sigmoid, Aggregation, ModelKind};

/// A trial with animation ids resolved to dense indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CompiledTrial {
    pub imprint: u32,
    pub familiar: u32,
    pub novel: u32,
    pub correct: bool,
}

#[derive(Clone, Debug)]
struct AnimationData {
    /// Row-major `frames x dim`.
    frames: Vec<f64>,
    n_frames: usize,
    centroid: Vec<f64>,
}

/// Mean NLL and, when requested, its gradient in the flat parameter layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub nll: f64,
    pub grad: Option<Vec<f64>>,
}

/// Everything needed to score trials for one model on one stimulus set.
#[derive(Clone, Debug)]
pub struct Objective {
    kind: ModelKind,
    aggregation: Aggregation,
    clamp_eps: f64,
    dim: usize,
    execution: Execution,
    animations: Vec<AnimationData>,
    index: HashMap<String, u32>,
    sq_cache: HashMap<(u32, u32), Arc<[f64]>>,
}

/// Upper bound on memory spent caching per-pair squared differences.
const PAIR_CACHE_BYTES: usize = 512 << 20;

/// Dot product with four running sums; the fixed order keeps it deterministic.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (a4, a_rest) = a.split_at(a.len() - a.len() % 4);
    let (b4, b_rest) = b.split_at(a4.len());
    for (x, y) in a4.chunks_exact(4).zip(b4.chunks_exact(4)) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in a_rest.iter().zip(b_rest) {
        total += x * y;
    }
    total
}

/// Per-frame log similarities of one test animation against one imprinting
/// category, plus what the trial level needs for gradients.
struct PairTerms {
    frame_ls: Vec<f64>,
    /// `frames x (dim + 1)`; the last column is the `b` derivative. Only
    /// filled for probability-mean aggregation with gradients.
    frame_grad: Vec<f64>,
    log_sim: f64,
    /// Gradient of `log_sim` over `[s.., b]`.
    log_sim_grad: Vec<f64>,
}

struct GroupTerms {
    ll: f64,
    /// Gradient of the summed group log-likelihood over the flat layout.
    grad: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct GroupKey {
    imprint: u32,
    familiar: u32,
    novel: u32,
}

struct Group {
    key: GroupKey,
    n_correct: f64,
    n_incorrect: f64,
}

impl Objective {
    pub fn new(
        stimuli: &Stimuli<'_>,
        kind: ModelKind,
        aggregation: Aggregation,
        clamp_eps: f64,
        execution: Execution,
    ) -> Result<Self> {
        let dim = stimuli.dim();
        if dim == 0 {
            return Err(Error::Validation("zero-dimensional features rejected".into()));
        }
        if !(clamp_eps > 0.0 && clamp_eps < 0.5) {
            return Err(Error::Config(format!("clamp_eps must be in (0, 0.5), got {clamp_eps}")));
        }
        let mut animations = Vec::new();
        let mut index = HashMap::new();
        for animation_id in stimuli.catalog.animations().keys() {
            let rows = stimuli.frames(animation_id)?;
            let n_frames = rows.len();
            if n_frames == 0 {
                return Err(Error::Empty("animation has no frames"));
            }
            let mut centroid = vec![0.0; dim];
            for row in &rows {
                for (c, v) in centroid.iter_mut().zip(row) {
                    *c += v;
                }
            }
            for c in &mut centroid {
                *c /= n_frames as f64;
            }
            index.insert(animation_id.clone(), animations.len() as u32);
            animations.push(AnimationData {
                frames: rows.concat(),
                n_frames,
                centroid,
            });
        }
        Ok(Self {
            kind,
            aggregation,
            clamp_eps,
            dim,
            execution,
            animations,
            index,
            sq_cache: HashMap::new(),
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn compile(&self, trials: &[TrialRecord]) -> Result<Vec<CompiledTrial>> {
        let lookup = |id: &str| {
            self.index
                .get(id)
                .copied()
                .ok_or_else(|| Error::UnknownAnimation(id.to_owned()))
        };
        trials
            .iter()
            .map(|t| {
                Ok(CompiledTrial {
                    imprint: lookup(&t.imprint_animation_id)?,
                    familiar: lookup(&t.familiar_animation_id)?,
                    novel: lookup(&t.novel_animation_id)?,
                    correct: t.correct,
                })
            })
            .collect()
    }

    fn check_params(&self, params: &RawParams) -> Result<()> {
        if params.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: params.dim(),
            });
        }
        if params.kind() != self.kind {
            return Err(Error::Config(format!(
                "parameters are for the {} model, objective is {}",
                params.kind(),
                self.kind
            )));
        }
        Ok(())
    }

    /// Mean negative log-likelihood of the trials, with the gradient when
    /// `with_grad` is set.
    pub fn evaluate(&self, params: &RawParams, trials: &[CompiledTrial], with_grad: bool) -> Result<Evaluation> {
        self.check_params(params)?;
        if trials.is_empty() {
            return Err(Error::Empty("trial batch"));
        }
        let groups = group_trials(trials);
        let (pairs, pair_terms) = self.pair_terms(params, &groups, with_grad);
        let pair_at = |imprint: u32, test: u32| {
            let i = pairs.binary_search(&(imprint, test)).expect("pair computed");
            &pair_terms[i]
        };
        let group_terms = self.execution.map(&groups, |g| {
            self.group_terms(
                params,
                g,
                pair_at(g.key.imprint, g.key.familiar),
                pair_at(g.key.imprint, g.key.novel),
                with_grad,
            )
        });

        let n = trials.len() as f64;
        let mut ll = 0.0;
        let mut grad = with_grad.then(|| vec![0.0; params.len()]);
        for t in &group_terms {
            ll += t.ll;
            if let Some(grad) = grad.as_mut() {
                for (acc, v) in grad.iter_mut().zip(&t.grad) {
                    *acc += v;
                }
            }
        }
        if let Some(grad) = grad.as_mut() {
            for v in grad.iter_mut() {
                *v = -*v / n;
            }
        }
        Ok(Evaluation { nll: -ll / n, grad })
    }

    /// Clamped choice probability for every trial, in input order.
    pub fn probabilities(&self, params: &RawParams, trials: &[CompiledTrial]) -> Result<Vec<f64>> {
        self.check_params(params)?;
        if trials.is_empty() {
            return Ok(Vec::new());
        }
        let groups = group_trials(trials);
        let (pairs, pair_terms) = self.pair_terms(params, &groups, false);
        let pair_at = |imprint: u32, test: u32| {
            let i = pairs.binary_search(&(imprint, test)).expect("pair computed");
            &pair_terms[i]
        };
        let gamma = params.gamma();
        let mut by_key = BTreeMap::new();
        for g in &groups {
            let pos = pair_at(g.key.imprint, g.key.familiar);
            let neg = pair_at(g.key.imprint, g.key.novel);
            let p = self.raw_probability(gamma, pos, neg);
            by_key.insert(g.key, p.clamp(self.clamp_eps, 1.0 - self.clamp_eps));
        }
        Ok(trials
            .iter()
            .map(|t| {
                by_key[&GroupKey {
                    imprint: t.imprint,
                    familiar: t.familiar,
                    novel: t.novel,
                }]
            })
            .collect())
    }

    fn raw_probability(&self, gamma: f64, pos: &PairTerms, neg: &PairTerms) -> f64 {
        match self.aggregation {
            Aggregation::SimMean => sigmoid(gamma * (pos.log_sim - neg.log_sim)),
            Aggregation::ProbMean => {
                let mut total = 0.0;
                for &a in &pos.frame_ls {
                    for &b in &neg.frame_ls {
                        total += sigmoid(gamma * (a - b));
                    }
                }
                total / (pos.frame_ls.len() * neg.frame_ls.len()) as f64
            }
        }
    }

    fn pair_terms(&self, params: &RawParams, groups: &[Group], with_grad: bool) -> (Vec<(u32, u32)>, Vec<PairTerms>) {
        let mut pairs: Vec<(u32, u32)> = groups
            .iter()
            .flat_map(|g| [(g.key.imprint, g.key.familiar), (g.key.imprint, g.key.novel)])
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        let sigma = params.sigma();
        let beta = params.beta();
        let terms = self.execution.map(&pairs, |&(imprint, test)| {
            self.compute_pair(&sigma, beta, imprint as usize, test as usize, with_grad)
        });
        (pairs, terms)
    }

    /// Elementwise squared differences for one (imprint, test) pair:
    /// `frames x dim` against the centroid, or `frames x exemplars x dim`.
    fn squared_differences(&self, imprint: usize, test: usize) -> Vec<f64> {
        let d = self.dim;
        let test_anim = &self.animations[test];
        let category = &self.animations[imprint];
        let mut out = Vec::new();
        for y in test_anim.frames.chunks_exact(d) {
            match self.kind {
                ModelKind::Prototype => {
                    out.extend(y.iter().zip(&category.centroid).map(|(a, b)| (a - b) * (a - b)));
                }
                ModelKind::Exemplar => {
                    for x in category.frames.chunks_exact(d) {
                        out.extend(y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)));
                    }
                }
            }
        }
        out
    }

    fn pair_bytes(&self, imprint: usize, test: usize) -> usize {
        let per_frame = match self.kind {
            ModelKind::Prototype => 1,
            ModelKind::Exemplar => self.animations[imprint].n_frames,
        };
        self.animations[test].n_frames * per_frame * self.dim * std::mem::size_of::<f64>()
    }

    /// Precomputes squared differences for every pair the trials touch, as
    /// long as the total stays under the cache budget. Results are the same
    /// with or without the cache.
    pub fn cache_pairs(&mut self, trials: &[CompiledTrial]) {
        let mut pairs: Vec<(u32, u32)> = trials
            .iter()
            .flat_map(|t| [(t.imprint, t.familiar), (t.imprint, t.novel)])
            .filter(|p| !self.sq_cache.contains_key(p))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        let mut used: usize = self
            .sq_cache
            .keys()
            .map(|&(i, t)| self.pair_bytes(i as usize, t as usize))
            .sum();
        let mut todo = Vec::new();
        for p in pairs {
            let bytes = self.pair_bytes(p.0 as usize, p.1 as usize);
            if used + bytes > PAIR_CACHE_BYTES {
                log::debug!("pair cache budget reached; remaining pairs computed on demand");
                break;
            }
            used += bytes;
            todo.push(p);
        }
        let computed = self
            .execution
            .map(&todo, |&(i, t)| Arc::<[f64]>::from(self.squared_differences(i as usize, t as usize)));
        self.sq_cache.extend(todo.into_iter().zip(computed));
    }

    fn compute_pair(&self, sigma: &[f64], beta: Option<f64>, imprint: usize, test: usize, with_grad: bool) -> PairTerms {
        let d = self.dim;
        let width = d + 1;
        let n_frames = self.animations[test].n_frames;
        let keep_frame_grad = with_grad && self.aggregation == Aggregation::ProbMean;
        let owned;
        let sq: &[f64] = match self.sq_cache.get(&(imprint as u32, test as u32)) {
            Some(v) => v,
            None => {
                owned = self.squared_differences(imprint, test);
                &owned
            }
        };

        let mut frame_ls = Vec::with_capacity(n_frames);
        let mut frame_grad = if with_grad { vec![0.0; n_frames * width] } else { Vec::new() };

        match self.kind {
            ModelKind::Prototype => {
                for (f, row_sq) in sq.chunks_exact(d).enumerate() {
                    frame_ls.push(-dot(sigma, row_sq));
                    if with_grad {
                        let row = &mut frame_grad[f * width..f * width + d];
                        for i in 0..d {
                            row[i] = -sigma[i] * row_sq[i];
                        }
                    }
                }
            }
            ModelKind::Exemplar => {
                let beta = beta.expect("exemplar objective has beta");
                let n_ex = self.animations[imprint].n_frames;
                let mut t = vec![0.0; n_ex];
                let mut u = vec![0.0; n_ex];
                let mut acc = vec![0.0; d];
                for (f, block) in sq.chunks_exact(n_ex * d).enumerate() {
                    for (tx, x_sq) in t.iter_mut().zip(block.chunks_exact(d)) {
                        *tx = -beta * dot(sigma, x_sq);
                    }
                    let max = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let mut z = 0.0;
                    for (ux, tx) in u.iter_mut().zip(&t) {
                        *ux = (tx - max).exp();
                        z += *ux;
                    }
                    frame_ls.push(max + z.ln());
                    if with_grad {
                        acc.iter_mut().for_each(|a| *a = 0.0);
                        let mut db = 0.0;
                        for ((ux, tx), x_sq) in u.iter().zip(&t).zip(block.chunks_exact(d)) {
                            let w = ux / z;
                            db += w * tx;
                            for (a, s) in acc.iter_mut().zip(x_sq) {
                                *a += w * s;
                            }
                        }
                        let row = &mut frame_grad[f * width..(f + 1) * width];
                        for i in 0..d {
                            row[i] = -beta * sigma[i] * acc[i];
                        }
                        row[d] = db;
                    }
                }
            }
        }

        let max = frame_ls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = frame_ls.iter().map(|l| (l - max).exp()).sum();
        let log_sim = max + z.ln() - (n_frames as f64).ln();
        let mut log_sim_grad = Vec::new();
        if with_grad {
            log_sim_grad = vec![0.0; width];
            for (f, l) in frame_ls.iter().enumerate() {
                let w = (l - max).exp() / z;
                for (acc, v) in log_sim_grad.iter_mut().zip(&frame_grad[f * width..(f + 1) * width]) {
                    *acc += w * v;
                }
            }
            if !keep_frame_grad {
                frame_grad = Vec::new();
            }
        }
        PairTerms {
            frame_ls,
            frame_grad,
            log_sim,
            log_sim_grad,
        }
    }

    fn group_terms(&self, params: &RawParams, g: &Group, pos: &PairTerms, neg: &PairTerms, with_grad: bool) -> GroupTerms {
        let gamma = params.gamma();
        let d = self.dim;
        let has_b = params.b.is_some();
        let p = self.raw_probability(gamma, pos, neg);
        let lo = self.clamp_eps;
        let hi = 1.0 - self.clamp_eps;
        let pc = p.clamp(lo, hi);
        let ll = g.n_correct * bernoulli_ll(pc, true) + g.n_incorrect * bernoulli_ll(pc, false);
        if !with_grad {
            return GroupTerms { ll, grad: Vec::new() };
        }
        let mut grad = vec![0.0; params.len()];
        if !(p > lo && p < hi) {
            return GroupTerms { ll, grad };
        }

        match self.aggregation {
            Aggregation::SimMean => {
                let z = gamma * (pos.log_sim - neg.log_sim);
                // d ll / d z for the logistic link.
                let dz = g.n_correct * (1.0 - p) - g.n_incorrect * p;
                for (gi, (a, b)) in grad[..d].iter_mut().zip(pos.log_sim_grad.iter().zip(&neg.log_sim_grad)) {
                    *gi = dz * gamma * (a - b);
                }
                grad[d] = dz * z;
                if has_b {
                    grad[d + 1] = dz * gamma * (pos.log_sim_grad[d] - neg.log_sim_grad[d]);
                }
            }
            Aggregation::ProbMean => {
                let dp = g.n_correct / p - g.n_incorrect / (1.0 - p);
                let nf = pos.frame_ls.len();
                let ng = neg.frame_ls.len();
                let scale = dp * gamma / (nf * ng) as f64;
                let width = d + 1;
                let mut row_sum = vec![0.0; nf];
                let mut col_sum = vec![0.0; ng];
                let mut dg = 0.0;
                for (f, &a) in pos.frame_ls.iter().enumerate() {
                    for (j, &b) in neg.frame_ls.iter().enumerate() {
                        let q = sigmoid(gamma * (a - b));
                        let h = q * (1.0 - q);
                        row_sum[f] += h;
                        col_sum[j] += h;
                        dg += h * (a - b);
                    }
                }
                let mut acc = vec![0.0; width];
                for (f, r) in row_sum.iter().enumerate() {
                    for (a, v) in acc.iter_mut().zip(&pos.frame_grad[f * width..(f + 1) * width]) {
                        *a += r * v;
                    }
                }
                for (j, c) in col_sum.iter().enumerate() {
                    for (a, v) in acc.iter_mut().zip(&neg.frame_grad[j * width..(j + 1) * width]) {
                        *a -= c * v;
                    }
                }
                for i in 0..d {
                    grad[i] = scale * acc[i];
                }
                grad[d] = scale * dg;
                if has_b {
                    grad[d + 1] = scale * acc[d];
                }
            }
        }
        GroupTerms { ll, grad }
    }
}

fn group_trials(trials: &[CompiledTrial]) -> Vec<Group> {
    let mut counts: BTreeMap<GroupKey, (f64, f64)> = BTreeMap::new();
    for t in trials {
        let entry = counts
            .entry(GroupKey {
                imprint: t.imprint,
                familiar: t.familiar,
                novel: t.novel,
            })
            .or_default();
        if t.correct {
            entry.0 += 1.0;
        } else {
            entry.1 += 1.0;
        }
    }
    counts
        .into_iter()
        .map(|(key, (n_correct, n_incorrect))| Group {
            key,
            n_correct,
            n_incorrect,
        })
        .collect()
}

/// Mean NLL and gradient for a batch of trial records.
///
/// Convenience wrapper that compiles the stimuli on every call; the fitting
/// loop keeps an [`Objective`] around instead.
pub fn nll_and_grad(
    params: &RawParams,
    batch: &[TrialRecord],
    stimuli: &Stimuli<'_>,
    cfg: &FitConfig,
) -> Result<(f64, Vec<f64>)> {
    let objective = Objective::new(stimuli, cfg.model_kind, cfg.aggregation, cfg.clamp_eps, cfg.execution)?;
    let compiled = objective.compile(batch)?;
    let eval = objective.evaluate(params, &compiled, true)?;
    Ok((eval.nll, eval.grad.expect("gradient requested")))
}
