//! Exploration dataset generation and JSON-lines storage.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::ObjectSpec;
use crate::simulator::{run_episode, InteractionRecord, Mode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub mode: Mode,
    /// Episodes are generated until at least this many records exist.
    pub target_records: usize,
    /// Hard cap on episodes; zero produces an empty dataset.
    pub max_episodes: usize,
    pub min_inventory: usize,
    pub max_inventory: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { seed: 42, mode: Mode::Linear, target_records: 5000, max_episodes: 100_000, min_inventory: 4, max_inventory: 8 }
    }
}

/// Per-episode seed derived from the run seed.
pub fn episode_seed(seed: u64, episode: u64) -> u64 {
    let mut z = seed ^ episode.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Random exploration episodes over random inventories drawn from `catalog`.
pub fn generate(catalog: &[ObjectSpec], config: &GenConfig) -> Vec<InteractionRecord> {
    let mut records = Vec::new();
    let hi = config.max_inventory.min(catalog.len()).max(1);
    let lo = config.min_inventory.clamp(1, hi);
    for e in 0..config.max_episodes as u64 {
        if records.len() >= config.target_records {
            break;
        }
        let seed = episode_seed(config.seed, e);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(lo..=hi);
        let inventory: Vec<ObjectSpec> = catalog.choose_multiple(&mut rng, n).copied().collect();
        let mut episode = run_episode(seed, &inventory, config.mode);
        for r in &mut episode {
            r.episode = e;
        }
        records.extend(episode);
    }
    records
}

pub fn write_jsonl(path: &Path, records: &[InteractionRecord]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<InteractionRecord>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Record counts keyed by tower size.
pub fn size_histogram(records: &[InteractionRecord]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for r in records {
        *h.entry(r.tower_size()).or_insert(0) += 1;
    }
    h
}

/// Splits by episode id: roughly `fraction` of episodes go to validation.
pub fn split_by_episode(records: &[InteractionRecord], fraction: f64, seed: u64) -> (Vec<InteractionRecord>, Vec<InteractionRecord>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for r in records {
        let u = (episode_seed(seed ^ 0x51_1d, r.episode) >> 11) as f64 / (1u64 << 53) as f64;
        if u < fraction {
            val.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    (train, val)
}
