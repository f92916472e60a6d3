//! Seeded synthetic datasets for tests, benchmarks and the acceptance suite.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal, Zipf};

use crate::io::LabeledInstance;
use crate::movielens::{OneHotLayout, Rating};

/// Regression stream with a hidden second-order model over the first few
/// features plus Gaussian noise.
#[derive(Debug, Clone, Copy)]
pub struct RegressionStream {
    pub instances: usize,
    pub dim: u32,
    /// Probability that each feature is active in an instance.
    pub density: f64,
    /// Number of leading features that interact pairwise in the target.
    pub interacting: u32,
    pub noise: f64,
    pub seed: u64,
}

impl Default for RegressionStream {
    fn default() -> Self {
        Self {
            instances: 10_000,
            dim: 10,
            density: 0.5,
            interacting: 3,
            noise: 0.5,
            seed: 1,
        }
    }
}

impl RegressionStream {
    pub fn generate(&self) -> Vec<LabeledInstance> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let linear: Vec<f64> = (0..self.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = self.interacting.min(self.dim) as usize;
        let pairs: Vec<f64> = (0..m * m).map(|_| rng.random_range(-0.5..0.5)).collect();
        let bias = rng.random_range(-1.0..1.0);
        let noise = Normal::new(0.0, self.noise).expect("finite sd");

        (0..self.instances)
            .map(|_| {
                let mut features = Vec::new();
                for i in 1..=self.dim {
                    if rng.random_bool(self.density) {
                        features.push((i, rng.random_range(0.5..1.5)));
                    }
                }
                let mut y = bias;
                for &(i, v) in &features {
                    y += linear[i as usize - 1] * v;
                }
                for (a, &(i, vi)) in features.iter().enumerate() {
                    for &(j, vj) in &features[a + 1..] {
                        if (i as usize) <= m && (j as usize) <= m {
                            y += pairs[(i as usize - 1) * m + j as usize - 1] * vi * vj;
                        }
                    }
                }
                y += noise.sample(&mut rng);
                LabeledInstance { label: y, features }
            })
            .collect()
    }
}

/// Click-style binary stream: binary features with Zipf-distributed
/// popularity, labels drawn from a logistic model that includes
/// interactions among the most popular features.
#[derive(Debug, Clone, Copy)]
pub struct ClickStream {
    pub instances: usize,
    pub dim: u32,
    pub active: usize,
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for ClickStream {
    fn default() -> Self {
        Self {
            instances: 100_000,
            dim: 10_000,
            active: 15,
            zipf_exponent: 1.1,
            seed: 1,
        }
    }
}

impl ClickStream {
    pub fn generate(&self) -> Vec<LabeledInstance> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let zipf = Zipf::new(self.dim as f64, self.zipf_exponent).expect("valid zipf");
        let weights: Vec<f64> = (0..self.dim).map(|_| rng.random_range(-0.6..0.6)).collect();
        let top = 20usize.min(self.dim as usize);
        let pairs: Vec<f64> = (0..top * top).map(|_| rng.random_range(-0.8..0.8)).collect();
        let active = self.active.min(self.dim as usize);

        (0..self.instances)
            .map(|_| {
                let mut chosen = HashSet::with_capacity(active);
                while chosen.len() < active {
                    chosen.insert(zipf.sample(&mut rng) as u32);
                }
                let mut idx: Vec<u32> = chosen.into_iter().collect();
                idx.sort_unstable();
                let mut margin = -1.5;
                for &i in &idx {
                    margin += weights[i as usize - 1];
                }
                for (a, &i) in idx.iter().enumerate() {
                    for &j in &idx[a + 1..] {
                        if (i as usize) <= top && (j as usize) <= top {
                            margin += pairs[(i as usize - 1) * top + j as usize - 1];
                        }
                    }
                }
                let p = 1.0 / (1.0 + (-margin).exp());
                let label = if rng.random_bool(p) { 1.0 } else { -1.0 };
                LabeledInstance {
                    label,
                    features: idx.into_iter().map(|i| (i, 1.0)).collect(),
                }
            })
            .collect()
    }
}

/// Rating data shaped like MovieLens-100K (943 users, 1682 items, 100 000
/// ratings on a 1-5 scale, at least 20 ratings per user, heavy-tailed item
/// popularity). Ratings come from user and item biases, a latent factor
/// model and a user taste for popular items, plus noise, rounded and clamped
/// to the scale.
#[derive(Debug, Clone, Copy)]
pub struct RatingSurrogate {
    pub users: u32,
    pub items: u32,
    pub ratings: usize,
    pub min_per_user: usize,
    pub seed: u64,
}

impl Default for RatingSurrogate {
    fn default() -> Self {
        Self {
            users: 943,
            items: 1682,
            ratings: 100_000,
            min_per_user: 20,
            seed: 100,
        }
    }
}

impl RatingSurrogate {
    pub fn layout(&self) -> OneHotLayout {
        OneHotLayout {
            users: self.users,
            items: self.items,
        }
    }

    pub fn generate(&self) -> Vec<Rating> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let users = self.users as usize;
        let items = self.items as usize;

        // item popularity: power law over a random ranking
        let mut ranks: Vec<usize> = (0..items).collect();
        ranks.shuffle(&mut rng);
        let popularity: Vec<f64> = ranks.iter().map(|&r| (r as f64 + 10.0).powf(-1.1)).collect();
        let log_pop: Vec<f64> = popularity.iter().map(|p| p.ln()).collect();
        let mean = log_pop.iter().sum::<f64>() / items as f64;
        let sd = (log_pop.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / items as f64).sqrt();
        let mainstream: Vec<f64> = log_pop.iter().map(|l| (l - mean) / sd).collect();

        // per-user rating counts
        let activity = LogNormal::new(0.0, 1.0).expect("valid");
        let raw: Vec<f64> = (0..users).map(|_| activity.sample(&mut rng)).collect();
        let total_raw: f64 = raw.iter().sum();
        let extra = self.ratings.saturating_sub(users * self.min_per_user) as f64;
        let cap = items.min(700);
        let mut counts: Vec<usize> = raw
            .iter()
            .map(|w| (self.min_per_user + (extra * w / total_raw).round() as usize).min(cap))
            .collect();
        let mut assigned: usize = counts.iter().sum();
        while assigned != self.ratings {
            let u = rng.random_range(0..users);
            if assigned < self.ratings && counts[u] < cap {
                counts[u] += 1;
                assigned += 1;
            } else if assigned > self.ratings && counts[u] > self.min_per_user {
                counts[u] -= 1;
                assigned -= 1;
            }
        }

        let gauss = |sd: f64| Normal::new(0.0, sd).expect("valid");
        let user_bias: Vec<f64> = (0..users).map(|_| gauss(0.35).sample(&mut rng)).collect();
        let taste: Vec<f64> = (0..users).map(|_| gauss(0.3).sample(&mut rng)).collect();
        let item_bias: Vec<f64> = (0..items)
            .map(|i| gauss(0.45).sample(&mut rng) + 0.35 * mainstream[i])
            .collect();
        const FACTORS: usize = 2;
        let uf: Vec<f64> = (0..users * FACTORS)
            .map(|_| gauss(0.5).sample(&mut rng))
            .collect();
        let vf: Vec<f64> = (0..items * FACTORS)
            .map(|_| gauss(0.5).sample(&mut rng))
            .collect();
        let noise = gauss(0.75);

        let picker = WeightedIndex::new(&popularity).expect("positive weights");
        let mut out = Vec::with_capacity(self.ratings);
        for (u, &count) in counts.iter().enumerate() {
            let mut seen = HashSet::with_capacity(count);
            while seen.len() < count {
                let i = picker.sample(&mut rng);
                if !seen.insert(i) {
                    continue;
                }
                let latent: f64 = (0..FACTORS)
                    .map(|f| uf[u * FACTORS + f] * vf[i * FACTORS + f])
                    .sum();
                let score = 3.15
                    + user_bias[u]
                    + item_bias[i]
                    + taste[u] * mainstream[i]
                    + latent
                    + noise.sample(&mut rng);
                out.push(Rating {
                    user: u as u32 + 1,
                    item: i as u32 + 1,
                    rating: score.round().clamp(1.0, 5.0),
                });
            }
        }
        out.shuffle(&mut rng);
        out
    }
}
