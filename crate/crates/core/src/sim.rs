//! Synthetic datasets and simulated scorers.
//!
//! Positive PNR positions follow a normal distribution truncated to `[0, 1]`
//! and centered near 0.43 of the clip; negative PNR frames (from overlapping
//! clips) are uniform over the clip and Poisson in number. A simulated scorer
//! sees a "hit" whenever a window contains any PNR frame, positive or
//! negative, and draws its confidence from a Beta distribution accordingly.
//!
//! Every clip draws from its own random stream keyed by `(seed, clip index)`,
//! so results do not depend on iteration order.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Beta, Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::model::{
    fraction_to_frame, Clip, OsccAnnotation, PnrAnnotation, ScoreSeries, ScoredWindow,
};
use crate::sampling::{dense_windows, stream_rng, WindowingConfig};

fn invalid(message: impl Into<String>) -> Error {
    Error::validation("<config>", message)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_clips: usize,
    pub fps: f64,
    /// Clip durations are uniform over `[min, max]` seconds.
    pub duration_range_sec: [f64; 2],
    pub positive_mean: f64,
    /// Zero places every positive exactly at `positive_mean`.
    pub positive_sd: f64,
    /// Poisson rate of negative PNR frames per clip.
    pub negatives_lambda: f64,
    /// Share of clips labelled as containing a state change.
    pub oscc_positive_rate: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_clips: 1000,
            fps: 30.0,
            duration_range_sec: [5.0, 8.0],
            positive_mean: 0.43,
            positive_sd: 0.1,
            negatives_lambda: 2.48,
            oscc_positive_rate: 0.5,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.duration_range_sec;
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(invalid(format!("fps must be positive, got {}", self.fps)));
        }
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return Err(invalid(format!("bad duration range [{lo}, {hi}]")));
        }
        if (lo * self.fps).round() < 1.0 {
            return Err(invalid("shortest clip would have no frames"));
        }
        if !(0.0..=1.0).contains(&self.positive_mean) {
            return Err(invalid("positive_mean must lie in [0, 1]"));
        }
        if !(self.positive_sd.is_finite() && self.positive_sd >= 0.0) {
            return Err(invalid("positive_sd must be non-negative"));
        }
        if !(self.negatives_lambda.is_finite() && self.negatives_lambda >= 0.0) {
            return Err(invalid("negatives_lambda must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.oscc_positive_rate) {
            return Err(invalid("oscc_positive_rate must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    fn distribution(self) -> Result<Beta<f64>> {
        Beta::new(self.alpha, self.beta)
            .map_err(|e| invalid(format!("Beta({}, {}): {e}", self.alpha, self.beta)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerNoiseModel {
    /// Confidence of windows containing any PNR frame.
    pub hit: BetaParams,
    /// Confidence of PNR-free windows.
    pub miss: BetaParams,
    /// Probability that the simulated classifier gets a clip's OSCC label wrong.
    pub oscc_flip_prob: f64,
}

impl Default for ScorerNoiseModel {
    fn default() -> Self {
        Self {
            hit: BetaParams {
                alpha: 8.0,
                beta: 2.0,
            },
            miss: BetaParams {
                alpha: 2.0,
                beta: 5.0,
            },
            oscc_flip_prob: 0.25,
        }
    }
}

impl ScorerNoiseModel {
    pub fn validate(&self) -> Result<()> {
        self.hit.distribution()?;
        self.miss.distribution()?;
        if !(0.0..=1.0).contains(&self.oscc_flip_prob) {
            return Err(invalid("oscc_flip_prob must lie in [0, 1]"));
        }
        Ok(())
    }
}

fn truncated_normal(rng: &mut impl Rng, mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return mean;
    }
    let normal = Normal::new(mean, sd).expect("sd checked non-negative");
    loop {
        let x = normal.sample(rng);
        if (0.0..=1.0).contains(&x) {
            return x;
        }
    }
}

pub fn gen_dataset(cfg: &SimConfig) -> Result<Dataset> {
    cfg.validate()?;
    let poisson = (cfg.negatives_lambda > 0.0)
        .then(|| Poisson::new(cfg.negatives_lambda).expect("rate checked positive"));
    let [lo, hi] = cfg.duration_range_sec;
    let mut ds = Dataset::new();
    for i in 0..cfg.n_clips {
        let mut rng = stream_rng(cfg.seed, i as u64);
        let duration = if lo < hi { rng.gen_range(lo..=hi) } else { lo };
        let num_frames = ((duration * cfg.fps).round() as usize).max(1);
        let clip = Clip::new(format!("sim{i:06}"), cfg.fps, num_frames)?;

        let pos_fraction = truncated_normal(&mut rng, cfg.positive_mean, cfg.positive_sd);
        let positive = fraction_to_frame(pos_fraction, num_frames)?;
        let n_neg = match &poisson {
            Some(p) if num_frames > 1 => p.sample(&mut rng) as usize,
            _ => 0,
        };
        let mut negatives = Vec::with_capacity(n_neg);
        while negatives.len() < n_neg {
            let f = fraction_to_frame(rng.gen::<f64>(), num_frames)?;
            if f != positive {
                negatives.push(f);
            }
        }
        negatives.sort_unstable();
        let state_change = rng.gen_bool(cfg.oscc_positive_rate);

        let pnr = PnrAnnotation::new(&clip, positive, negatives)?;
        let oscc = OsccAnnotation {
            clip_id: clip.clip_id.clone(),
            state_change,
        };
        ds.insert(clip, Some(pnr), Some(oscc))?;
    }
    Ok(ds)
}

/// Dense-window confidences for every clip, hit or miss by PNR containment.
pub fn simulate_scores(
    ds: &Dataset,
    windowing: &WindowingConfig,
    noise: &ScorerNoiseModel,
    seed: u64,
) -> Result<BTreeMap<String, ScoreSeries>> {
    noise.validate()?;
    let hit = noise.hit.distribution()?;
    let miss = noise.miss.distribution()?;
    let mut out = BTreeMap::new();
    for (i, clip) in ds.clips().enumerate() {
        let mut rng = stream_rng(seed, i as u64);
        let pnr_frames: Vec<usize> = ds
            .pnr(&clip.clip_id)
            .map(|a| a.all_frames().collect())
            .unwrap_or_default();
        let mut windows = dense_windows(clip, windowing)?;
        // Repeated starts (very short clips) are scored once.
        windows.dedup();
        let scored = windows
            .into_iter()
            .map(|window| {
                let is_hit = pnr_frames.iter().any(|&f| window.contains(f));
                let confidence = if is_hit {
                    hit.sample(&mut rng)
                } else {
                    miss.sample(&mut rng)
                };
                ScoredWindow { window, confidence }
            })
            .collect();
        out.insert(
            clip.clip_id.clone(),
            ScoreSeries::new(clip.clip_id.clone(), scored)?,
        );
    }
    Ok(out)
}

/// State-change probabilities whose implied label is wrong with probability `oscc_flip_prob`.
pub fn simulate_oscc(
    ds: &Dataset,
    noise: &ScorerNoiseModel,
    seed: u64,
) -> Result<BTreeMap<String, f64>> {
    noise.validate()?;
    let mut out = BTreeMap::new();
    for (i, ann) in ds.oscc_annotations().enumerate() {
        let mut rng = stream_rng(seed, i as u64);
        let label = ann.state_change ^ rng.gen_bool(noise.oscc_flip_prob);
        let u: f64 = rng.gen();
        let prob = if label { 0.5 + 0.5 * u } else { 0.5 * u };
        out.insert(ann.clip_id.clone(), prob);
    }
    Ok(out)
}

/// One simulated scorer in a simulation file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerSpec {
    pub name: String,
    #[serde(default = "default_window_count")]
    pub windows: usize,
    #[serde(default = "default_window_len")]
    pub window_len: usize,
    #[serde(default)]
    pub noise: ScorerNoiseModel,
}

fn default_window_count() -> usize {
    32
}

fn default_window_len() -> usize {
    crate::sampling::DEFAULT_WINDOW_LEN
}

impl ScorerSpec {
    pub fn windowing(&self) -> Result<WindowingConfig> {
        WindowingConfig::new(self.windows, self.window_len, 0)
    }
}

/// Contents of a simulation config file (TOML):
///
/// ```toml
/// [dataset]
/// n_clips = 2000
/// seed = 7
///
/// [[scorer]]
/// name = "conv"
/// windows = 32
///
/// [[scorer]]
/// name = "attn"
/// windows = 16
/// noise = { hit = { alpha = 6.0, beta = 2.0 }, miss = { alpha = 2.0, beta = 6.0 }, oscc_flip_prob = 0.22 }
/// ```
///
/// Omitted fields take their defaults; with no `[[scorer]]` table a single
/// scorer named `default` is used.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub dataset: SimConfig,
    pub scorer: Vec<ScorerSpec>,
}

impl SimulationSpec {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        let mut spec: SimulationSpec = toml::from_str(text)?;
        if spec.scorer.is_empty() {
            spec.scorer.push(ScorerSpec {
                name: "default".to_string(),
                windows: default_window_count(),
                window_len: default_window_len(),
                noise: ScorerNoiseModel::default(),
            });
        }
        Ok(spec)
    }

    /// Seed for scorer `index`, kept apart from the dataset streams.
    pub fn scorer_seed(&self, index: usize) -> u64 {
        self.dataset
            .seed
            .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index as u64 + 1))
    }
}
