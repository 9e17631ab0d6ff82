//! Ratings data: synthetic Poisson-count generation and ingestion of
//! tab-separated or headered-CSV rating files.

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingEntry {
    pub user: u32,
    pub item: u32,
    pub value: u32,
    pub split: Split,
}

/// Sparse nonnegative-count matrix with per-entry split tags.
#[derive(Debug, Clone)]
pub struct RatingsDataset {
    pub n_users: usize,
    pub n_items: usize,
    pub entries: Vec<RatingEntry>,
    /// RMSE of the generating mean matrix against the sampled counts on the
    /// test split; present for synthetic data only.
    pub noise_floor_rmse: Option<f64>,
}

impl RatingsDataset {
    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.split == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn split_len(&self, split: Split) -> usize {
        self.entries.iter().filter(|e| e.split == split).count()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, e) in self.entries.iter().enumerate() {
            if e.user as usize >= self.n_users || e.item as usize >= self.n_items {
                return Err(Error::Data(format!("entry {i} indexes out of range")));
            }
        }
        let total = self.entries.len();
        let tagged = self.split_len(Split::Train)
            + self.split_len(Split::Validation)
            + self.split_len(Split::Test);
        if total != tagged {
            return Err(Error::Data("split tags do not cover all entries".into()));
        }
        Ok(())
    }
}

/// 75 : 12.5 : 12.5 split by a seeded shuffle of entry positions.
fn assign_splits(entries: &mut [RatingEntry], seed: u64) {
    let n = entries.len();
    let n_test = n / 8;
    let n_valid = n / 8;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    for (rank, &pos) in order.iter().enumerate() {
        entries[pos].split = if rank < n - n_test - n_valid {
            Split::Train
        } else if rank < n - n_test {
            Split::Validation
        } else {
            Split::Test
        };
    }
}

/// Draw factor matrices from Exponential(rate) priors, emit Poisson counts
/// at an observed-cell density, and record the irreducible test RMSE of
/// the generating means.
pub fn generate_synthetic(
    n_users: usize,
    n_items: usize,
    rank_true: usize,
    lambda: f64,
    density: f64,
    seed: u64,
) -> Result<RatingsDataset> {
    if n_users == 0 || n_items == 0 {
        return Err(Error::Config("synthetic data needs positive dimensions".into()));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("prior rate must be positive, got {lambda}")));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::Config(format!("observed density must lie in [0,1], got {density}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exp = Exp::new(lambda).map_err(|e| Error::Config(e.to_string()))?;
    let w: Vec<f64> = (0..n_users * rank_true).map(|_| exp.sample(&mut rng)).collect();
    let h: Vec<f64> = (0..rank_true * n_items).map(|_| exp.sample(&mut rng)).collect();

    let mut entries = Vec::new();
    let mut means = Vec::new();
    for i in 0..n_users {
        for j in 0..n_items {
            if density < 1.0 && rng.gen::<f64>() >= density {
                continue;
            }
            let mean: f64 = (0..rank_true).map(|r| w[i * rank_true + r] * h[r * n_items + j]).sum();
            let count = if mean > 0.0 {
                Poisson::new(mean).map_err(|e| Error::Numerics(e.to_string()))?.sample(&mut rng)
                    as u32
            } else {
                0
            };
            entries.push(RatingEntry {
                user: i as u32,
                item: j as u32,
                value: count,
                split: Split::Train,
            });
            means.push(mean);
        }
    }
    assign_splits(&mut entries, seed ^ 0xD5_AF_17);

    let mut sq = 0.0;
    let mut n_test = 0usize;
    for (e, &m) in entries.iter().zip(means.iter()) {
        if e.split == Split::Test {
            sq += (e.value as f64 - m).powi(2);
            n_test += 1;
        }
    }
    let noise_floor = if n_test > 0 { Some((sq / n_test as f64).sqrt()) } else { None };

    Ok(RatingsDataset { n_users, n_items, entries, noise_floor_rmse: noise_floor })
}

/// Supported rating-file layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatingsFormat {
    /// user \t item \t rating \t timestamp (timestamp optional, ignored)
    MlTab,
    /// headered CSV: userId,movieId,rating[,...]
    CsvHeader,
}

impl RatingsFormat {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "ml_tab" => Ok(Self::MlTab),
            "csv_header" => Ok(Self::CsvHeader),
            other => Err(Error::Config(format!("unknown ratings format: {other:?}"))),
        }
    }
}

#[derive(Debug)]
pub struct LoadedRatings {
    pub dataset: RatingsDataset,
    /// duplicate (user, item) pairs replaced by their last occurrence
    pub duplicates_replaced: usize,
}

/// Read a ratings file, reindex users and items contiguously by first
/// appearance, round ratings to the nearest nonnegative integer
/// (half away from zero), and split 75:12.5:12.5 with a seeded shuffle.
/// Duplicate (user, item) pairs keep the last occurrence.
pub fn load_ratings_csv(
    path: &Path,
    format: RatingsFormat,
    split_seed: u64,
) -> Result<LoadedRatings> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);

    let mut user_ids: HashMap<u64, u32> = HashMap::new();
    let mut item_ids: HashMap<u64, u32> = HashMap::new();
    let mut positions: HashMap<(u32, u32), usize> = HashMap::new();
    let mut entries: Vec<RatingEntry> = Vec::new();
    let mut duplicates = 0usize;

    let skip_header = matches!(format, RatingsFormat::CsvHeader);
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if idx == 0 && skip_header {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let sep = match format {
            RatingsFormat::MlTab => '\t',
            RatingsFormat::CsvHeader => ',',
        };
        let fields: Vec<&str> = line.split(sep).collect();
        if fields.len() < 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected at least 3 fields, got {}", fields.len()),
            });
        }
        let parse_u64 = |s: &str, what: &str| -> Result<u64> {
            s.trim().parse::<u64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("bad {what}: {s:?}"),
            })
        };
        let raw_user = parse_u64(fields[0], "user id")?;
        let raw_item = parse_u64(fields[1], "item id")?;
        let rating: f64 = fields[2].trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("bad rating: {:?}", fields[2]),
        })?;
        if rating < 0.0 || !rating.is_finite() {
            return Err(Error::Data(format!("negative rating at line {line_no}: {rating}")));
        }
        let value = rating.round() as u32;

        let next_user = user_ids.len() as u32;
        let user = *user_ids.entry(raw_user).or_insert(next_user);
        let next_item = item_ids.len() as u32;
        let item = *item_ids.entry(raw_item).or_insert(next_item);

        match positions.get(&(user, item)) {
            Some(&pos) => {
                entries[pos].value = value;
                duplicates += 1;
            }
            None => {
                positions.insert((user, item), entries.len());
                entries.push(RatingEntry { user, item, value, split: Split::Train });
            }
        }
    }

    assign_splits(&mut entries, split_seed);
    let dataset = RatingsDataset {
        n_users: user_ids.len(),
        n_items: item_ids.len(),
        entries,
        noise_floor_rmse: None,
    };
    dataset.validate()?;
    Ok(LoadedRatings { dataset, duplicates_replaced: duplicates })
}
