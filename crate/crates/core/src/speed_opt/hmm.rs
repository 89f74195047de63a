//! Gaussian-emission hidden Markov model over weather observations.
//!
//! Emissions are diagonal Gaussians. The forward/backward passes rescale every
//! step so long voyages do not underflow; Viterbi runs in log space.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{channels, Voyage};
use crate::stats::{argmax, diag_gaussian_log_pdf, mean};

use super::SpeedProfile;

/// Lower bound on every emission variance.
pub const VARIANCE_FLOOR: f64 = 1e-6;
/// Minimum number of weather observations to fit a weather model.
pub const MIN_WEATHER_OBSERVATIONS: usize = 300;

/// An observation sequence: one feature vector per time step.
pub type Sequence = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianHmm {
    initial: Vec<f64>,
    transition: Vec<Vec<f64>>,
    means: Vec<Vec<f64>>,
    vars: Vec<Vec<f64>>,
}

/// Scaled forward pass: `alpha[t]` sums to one, `log_scale[t]` carries the mass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub log_likelihood: f64,
    alpha: Vec<Vec<f64>>,
    scale: Vec<f64>,
    emission: Vec<Vec<f64>>,
}

impl GaussianHmm {
    pub fn new(
        initial: Vec<f64>,
        transition: Vec<Vec<f64>>,
        means: Vec<Vec<f64>>,
        vars: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = initial.len();
        if n == 0 {
            return Err(Error::invalid("HMM needs at least one state"));
        }
        if transition.len() != n || means.len() != n || vars.len() != n {
            return Err(Error::invalid("HMM parameter shapes disagree"));
        }
        let dim = means[0].len();
        let stochastic = |row: &[f64]| {
            row.iter().all(|p| (0.0..=1.0).contains(p))
                && (row.iter().sum::<f64>() - 1.0).abs() < 1e-9
        };
        if !stochastic(&initial) || !transition.iter().all(|r| r.len() == n && stochastic(r)) {
            return Err(Error::invalid(
                "HMM probabilities must be stochastic within 1e-9",
            ));
        }
        if means.iter().chain(&vars).any(|r| r.len() != dim)
            || vars.iter().flatten().any(|v| !(*v > 0.0))
        {
            return Err(Error::invalid("emission parameters malformed"));
        }
        Ok(GaussianHmm {
            initial,
            transition,
            means,
            vars,
        })
    }

    pub fn n_states(&self) -> usize {
        self.initial.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn vars(&self) -> &[Vec<f64>] {
        &self.vars
    }

    /// Emission log-densities, `T x n_states`.
    pub fn emission_log(&self, obs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        obs.iter()
            .map(|x| {
                (0..self.n_states())
                    .map(|s| diag_gaussian_log_pdf(x, &self.means[s], &self.vars[s]))
                    .collect()
            })
            .collect()
    }

    pub fn forward(&self, obs: &[Vec<f64>]) -> ForwardPass {
        let n = self.n_states();
        let log_b = self.emission_log(obs);
        let mut alpha = Vec::with_capacity(obs.len());
        let mut scale = Vec::with_capacity(obs.len());
        let mut emission = Vec::with_capacity(obs.len());
        let mut ll = 0.0;
        for (t, lb) in log_b.iter().enumerate() {
            let shift = lb.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let b: Vec<f64> = lb.iter().map(|v| (v - shift).exp()).collect();
            let mut a: Vec<f64> = if t == 0 {
                (0..n).map(|i| self.initial[i] * b[i]).collect()
            } else {
                let prev: &Vec<f64> = &alpha[t - 1];
                (0..n)
                    .map(|j| {
                        let s: f64 = (0..n).map(|i| prev[i] * self.transition[i][j]).sum();
                        s * b[j]
                    })
                    .collect()
            };
            let c: f64 = a.iter().sum();
            a.iter_mut().for_each(|v| *v /= c);
            ll += c.ln() + shift;
            alpha.push(a);
            scale.push(c);
            emission.push(b);
        }
        ForwardPass {
            log_likelihood: ll,
            alpha,
            scale,
            emission,
        }
    }

    pub fn log_likelihood(&self, obs: &[Vec<f64>]) -> f64 {
        self.forward(obs).log_likelihood
    }

    fn backward(&self, fwd: &ForwardPass) -> Vec<Vec<f64>> {
        let n = self.n_states();
        let t_len = fwd.alpha.len();
        let mut beta = vec![vec![1.0; n]; t_len];
        for t in (0..t_len.saturating_sub(1)).rev() {
            for i in 0..n {
                beta[t][i] = (0..n)
                    .map(|j| self.transition[i][j] * fwd.emission[t + 1][j] * beta[t + 1][j])
                    .sum::<f64>()
                    / fwd.scale[t + 1];
            }
        }
        beta
    }

    /// Most likely state path and its joint log-probability.
    pub fn viterbi(&self, obs: &[Vec<f64>]) -> (Vec<usize>, f64) {
        let n = self.n_states();
        if obs.is_empty() {
            return (Vec::new(), 0.0);
        }
        let log_b = self.emission_log(obs);
        let log_a: Vec<Vec<f64>> = self
            .transition
            .iter()
            .map(|r| r.iter().map(|p| p.ln()).collect())
            .collect();
        let mut delta: Vec<f64> = (0..n).map(|i| self.initial[i].ln() + log_b[0][i]).collect();
        let mut back = vec![vec![0usize; n]; obs.len()];
        for t in 1..obs.len() {
            let mut next = vec![f64::NEG_INFINITY; n];
            for j in 0..n {
                let scores: Vec<f64> = (0..n).map(|i| delta[i] + log_a[i][j]).collect();
                let best = argmax(&scores);
                back[t][j] = best;
                next[j] = scores[best] + log_b[t][j];
            }
            delta = next;
        }
        let mut state = argmax(&delta);
        let score = delta[state];
        let mut path = vec![0; obs.len()];
        for t in (0..obs.len()).rev() {
            path[t] = state;
            state = back[t][state];
        }
        (path, score)
    }

    /// Joint log-probability of observations and a given state path.
    pub fn path_log_prob(&self, obs: &[Vec<f64>], path: &[usize]) -> f64 {
        let log_b = self.emission_log(obs);
        let mut lp = self.initial[path[0]].ln() + log_b[0][path[0]];
        for t in 1..path.len() {
            lp += self.transition[path[t - 1]][path[t]].ln() + log_b[t][path[t]];
        }
        lp
    }

    /// Reorder states by `order[new] = old`.
    fn permuted(&self, order: &[usize]) -> Self {
        GaussianHmm {
            initial: order.iter().map(|&o| self.initial[o]).collect(),
            transition: order
                .iter()
                .map(|&i| order.iter().map(|&j| self.transition[i][j]).collect())
                .collect(),
            means: order.iter().map(|&o| self.means[o].clone()).collect(),
            vars: order.iter().map(|&o| self.vars[o].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EmOptions {
    pub max_iter: usize,
    /// Stop once the log-likelihood improves by less than this.
    pub tol: f64,
    pub var_floor: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            max_iter: 200,
            tol: 1e-6,
            var_floor: VARIANCE_FLOOR,
        }
    }
}

/// Baum-Welch over several sequences.
///
/// Returns the fitted model and the total log-likelihood before each M-step
/// (the last entry belongs to the returned model).
pub fn baum_welch(
    init: GaussianHmm,
    sequences: &[Sequence],
    opts: EmOptions,
) -> Result<(GaussianHmm, Vec<f64>)> {
    let seqs: Vec<&Sequence> = sequences.iter().filter(|s| !s.is_empty()).collect();
    if seqs.is_empty() {
        return Err(Error::InsufficientData("no observation sequences".into()));
    }
    let n = init.n_states();
    let dim = init.dim();
    let mut model = init;
    let mut history: Vec<f64> = Vec::new();

    for _ in 0..=opts.max_iter {
        let mut ll = 0.0;
        let mut init_acc = vec![0.0; n];
        let mut trans_num = vec![vec![0.0; n]; n];
        let mut trans_den = vec![0.0; n];
        let mut occ = vec![0.0; n];
        let mut sum_x = vec![vec![0.0; dim]; n];
        let mut sum_xx = vec![vec![0.0; dim]; n];

        for obs in &seqs {
            let fwd = model.forward(obs);
            let beta = model.backward(&fwd);
            ll += fwd.log_likelihood;
            for t in 0..obs.len() {
                let mut gamma: Vec<f64> = (0..n).map(|i| fwd.alpha[t][i] * beta[t][i]).collect();
                let g: f64 = gamma.iter().sum();
                gamma.iter_mut().for_each(|v| *v /= g);
                if t == 0 {
                    for i in 0..n {
                        init_acc[i] += gamma[i];
                    }
                }
                for i in 0..n {
                    occ[i] += gamma[i];
                    for d in 0..dim {
                        sum_x[i][d] += gamma[i] * obs[t][d];
                        sum_xx[i][d] += gamma[i] * obs[t][d] * obs[t][d];
                    }
                }
                if t + 1 < obs.len() {
                    for i in 0..n {
                        trans_den[i] += gamma[i];
                        for j in 0..n {
                            trans_num[i][j] += fwd.alpha[t][i]
                                * model.transition[i][j]
                                * fwd.emission[t + 1][j]
                                * beta[t + 1][j]
                                / fwd.scale[t + 1];
                        }
                    }
                }
            }
        }
        if !ll.is_finite() {
            return Err(Error::Fit("log-likelihood is not finite".into()));
        }
        let converged = history.last().is_some_and(|prev| ll - prev < opts.tol);
        history.push(ll);
        if converged || history.len() > opts.max_iter {
            break;
        }

        // M-step; states with no occupancy keep their parameters.
        let total: f64 = init_acc.iter().sum();
        model.initial = init_acc.iter().map(|v| v / total).collect();
        for i in 0..n {
            if trans_den[i] > 1e-300 {
                let row: Vec<f64> = trans_num[i].iter().map(|v| v / trans_den[i]).collect();
                let s: f64 = row.iter().sum();
                model.transition[i] = row.iter().map(|v| v / s).collect();
            }
            if occ[i] > 1e-300 {
                for d in 0..dim {
                    let m = sum_x[i][d] / occ[i];
                    model.means[i][d] = m;
                    model.vars[i][d] = (sum_xx[i][d] / occ[i] - m * m).max(opts.var_floor);
                }
            }
        }
    }
    Ok((model, history))
}

/// Hidden weather regime, ordered by increasing mean wind speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WeatherState {
    Calm,
    Moderate,
    Rough,
}

impl WeatherState {
    pub const ALL: [WeatherState; 3] = [
        WeatherState::Calm,
        WeatherState::Moderate,
        WeatherState::Rough,
    ];

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for WeatherState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            WeatherState::Calm => "Calm",
            WeatherState::Moderate => "Moderate",
            WeatherState::Rough => "Rough",
        };
        f.write_str(s)
    }
}

/// Speed statistics of training samples decoded into one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub count: usize,
}

impl SpeedStats {
    fn from_values(v: &[f64]) -> Option<Self> {
        if v.is_empty() {
            return None;
        }
        Some(SpeedStats {
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            mean: mean(v),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            count: v.len(),
        })
    }

    /// Maximum under calm weather, mean under moderate, minimum under rough.
    pub fn suggestion(&self, state: WeatherState) -> f64 {
        match state {
            WeatherState::Calm => self.max,
            WeatherState::Moderate => self.mean,
            WeatherState::Rough => self.min,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmConfig {
    pub wind_channel: String,
    pub wave_channel: String,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for HmmConfig {
    fn default() -> Self {
        HmmConfig {
            wind_channel: channels::WIND_SPEED_ONB.to_string(),
            wave_channel: channels::WAVE_HEIGHT.to_string(),
            seed: 0,
            max_iter: 200,
            tol: 1e-6,
        }
    }
}

impl HmmConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn observation(&self, v: &Voyage) -> (Sequence, Vec<usize>) {
        let mut obs = Vec::new();
        let mut idx = Vec::new();
        for (i, s) in v.samples().iter().enumerate() {
            if let (Some(w), Some(h)) =
                (s.channel(&self.wind_channel), s.channel(&self.wave_channel))
            {
                obs.push(vec![w, h]);
                idx.push(i);
            }
        }
        (obs, idx)
    }
}

/// Three-state weather HMM with per-state speed statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeatherStateModel {
    hmm: GaussianHmm,
    config: HmmConfig,
    speeds: Vec<Option<SpeedStats>>,
    log_likelihoods: Vec<f64>,
}

impl WeatherStateModel {
    pub fn hmm(&self) -> &GaussianHmm {
        &self.hmm
    }

    pub fn speed_stats(&self, state: WeatherState) -> Option<SpeedStats> {
        self.speeds[state.index()]
    }

    /// Total log-likelihood recorded at every EM iteration.
    pub fn log_likelihoods(&self) -> &[f64] {
        &self.log_likelihoods
    }

    pub fn config(&self) -> &HmmConfig {
        &self.config
    }

    /// Viterbi states for every sample of `v`.
    pub fn decode(&self, v: &Voyage) -> Result<Vec<WeatherState>> {
        let (obs, idx) = self.config.observation(v);
        if idx.len() != v.len() {
            return Err(Error::invalid(format!(
                "voyage {} lacks weather channels {} / {}",
                v.voyage_id, self.config.wind_channel, self.config.wave_channel
            )));
        }
        let (path, _) = self.hmm.viterbi(&obs);
        Ok(path.into_iter().map(WeatherState::from_index).collect())
    }

    /// Statistics for `state`, falling back to the nearest state that has any.
    fn stats_for(&self, state: WeatherState) -> Option<SpeedStats> {
        let s = state.index() as isize;
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by_key(|&i| ((i as isize - s).abs(), i));
        order.into_iter().find_map(|i| self.speeds[i])
    }
}

fn initial_model(obs: &[Vec<f64>], seed: u64) -> Result<GaussianHmm> {
    let mut order: Vec<usize> = (0..obs.len()).collect();
    order.sort_by(|&a, &b| obs[a][0].total_cmp(&obs[b][0]).then(a.cmp(&b)));
    let n = obs.len();
    let dim = obs[0].len();
    let global_sd: Vec<f64> = (0..dim)
        .map(|d| {
            let col: Vec<f64> = obs.iter().map(|o| o[d]).collect();
            crate::stats::sample_std(&col)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = Vec::with_capacity(3);
    let mut vars = Vec::with_capacity(3);
    for g in 0..3 {
        let members = &order[g * n / 3..(g + 1) * n / 3];
        let mut m = vec![0.0; dim];
        let mut v = vec![0.0; dim];
        for d in 0..dim {
            let col: Vec<f64> = members.iter().map(|&i| obs[i][d]).collect();
            m[d] = mean(&col);
            v[d] = col.iter().map(|x| (x - m[d]).powi(2)).sum::<f64>() / col.len() as f64;
            let jitter = Normal::new(0.0, 1e-3 * global_sd[d].max(1e-9))
                .map_err(|e| Error::Fit(e.to_string()))?;
            m[d] += jitter.sample(&mut rng);
            v[d] = v[d].max(VARIANCE_FLOOR);
        }
        means.push(m);
        vars.push(v);
    }
    let transition = (0..3)
        .map(|i| (0..3).map(|j| if i == j { 0.8 } else { 0.1 }).collect())
        .collect();
    GaussianHmm::new(vec![1.0 / 3.0; 3], transition, means, vars)
}

/// Fit the three-state weather model on (wind speed, wave height) and collect
/// per-state speed statistics from the Viterbi decoding of the training voyages.
pub fn fit_weather_hmm<'a>(
    voyages: impl IntoIterator<Item = &'a Voyage>,
    config: &HmmConfig,
) -> Result<WeatherStateModel> {
    let mut sequences = Vec::new();
    let mut speeds_per_seq = Vec::new();
    for v in voyages {
        let (obs, idx) = config.observation(v);
        if obs.is_empty() {
            continue;
        }
        speeds_per_seq.push(idx.iter().map(|&i| v.samples()[i].sog).collect::<Vec<_>>());
        sequences.push(obs);
    }
    let all: Vec<Vec<f64>> = sequences.iter().flatten().cloned().collect();
    if all.len() < MIN_WEATHER_OBSERVATIONS {
        return Err(Error::InsufficientData(format!(
            "weather model needs at least {MIN_WEATHER_OBSERVATIONS} observations, got {}",
            all.len()
        )));
    }
    let varies = (0..2).any(|d| all.iter().any(|o| o[d] != all[0][d]));
    if !varies {
        return Err(Error::Fit("weather observations have zero variance".into()));
    }

    let init = initial_model(&all, config.seed)?;
    let opts = EmOptions {
        max_iter: config.max_iter,
        tol: config.tol,
        var_floor: VARIANCE_FLOOR,
    };
    let (hmm, history) = baum_welch(init, &sequences, opts)?;

    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| hmm.means[a][0].total_cmp(&hmm.means[b][0]).then(a.cmp(&b)));
    let hmm = hmm.permuted(&order);

    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); 3];
    for (obs, sog) in sequences.iter().zip(&speeds_per_seq) {
        let (path, _) = hmm.viterbi(obs);
        for (s, v) in path.into_iter().zip(sog) {
            buckets[s].push(*v);
        }
    }
    Ok(WeatherStateModel {
        hmm,
        config: config.clone(),
        speeds: buckets.iter().map(|b| SpeedStats::from_values(b)).collect(),
        log_likelihoods: history,
    })
}

/// Decode the test voyage's weather and apply the calm/moderate/rough speed rule per step.
pub fn hmm_predict(test: &Voyage, model: &WeatherStateModel) -> Result<SpeedProfile> {
    let states = model.decode(test)?;
    let sog = states
        .into_iter()
        .map(|st| {
            model
                .stats_for(st)
                .map(|s| s.suggestion(st))
                .ok_or_else(|| Error::Fit("weather model has no speed statistics".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    SpeedProfile::new(test.voyage_id.clone(), sog)
}
