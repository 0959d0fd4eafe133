use std::collections::HashSet;
use std::time::Instant;

use amq_core::store::IoCounters;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Structure, WorkloadConfig};
use crate::error::{config_err, Result};
use crate::filter::AnyFilter;
use crate::stats::{wilson_interval, Z95};

const INSERT_STREAM: u64 = 0;
const UNIFORM_STREAM: u64 = 1;
const SAMPLE_STREAM: u64 = 2;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Columns whose values depend on the machine rather than the seed.
pub const WALL_CLOCK_PREFIX: &str = "wall_";

/// One row of `bench` output. Counters are cumulative since the start of the run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckpointRecord {
    pub structure: Structure,
    pub pct_complete: u32,
    pub inserts: u64,
    pub uniform_lookups: u64,
    pub false_positives: u64,
    pub fp_rate: f64,
    pub successful_lookups: u64,
    pub successful_misses: u64,
    pub page_reads: u64,
    pub page_writes: u64,
    pub sequential_reads: u64,
    pub random_reads: u64,
    pub sequential_writes: u64,
    pub random_writes: u64,
    pub events: u64,
    pub level_loads: String,
    pub wall_insert_ops_per_sec: f64,
    pub wall_uniform_lookup_ops_per_sec: f64,
    pub wall_successful_lookup_ops_per_sec: f64,
}

fn rate(ops: u64, started: Instant) -> f64 {
    let secs = started.elapsed().as_secs_f64();
    if secs > 0.0 {
        ops as f64 / secs
    } else {
        0.0
    }
}

/// Inserts uniform 64-bit keys; at every checkpoint runs `lookups` uniform
/// lookups and `lookups` lookups of keys sampled from those inserted.
pub fn run_bench(config: &WorkloadConfig) -> Result<Vec<CheckpointRecord>> {
    let mut filter = AnyFilter::build(config)?;
    let mut keys_rng = rng(config.seed, INSERT_STREAM);
    let mut uniform_rng = rng(config.seed, UNIFORM_STREAM);
    let mut sample_rng = rng(config.seed, SAMPLE_STREAM);
    let mut keys = Vec::with_capacity(config.inserts as usize);
    let mut present = HashSet::with_capacity(config.inserts as usize);
    let mut records = Vec::new();

    for cp in 1..=config.checkpoints() {
        let target = config.inserts_at(cp);
        let started = Instant::now();
        let batch = target - keys.len() as u64;
        while (keys.len() as u64) < target {
            let key: u64 = keys_rng.gen();
            filter.insert(key)?;
            keys.push(key);
            present.insert(key);
        }
        let insert_rate = rate(batch, started);

        let started = Instant::now();
        let (mut negatives, mut false_positives) = (0, 0);
        for _ in 0..config.lookups {
            let key: u64 = uniform_rng.gen();
            let hit = filter.may_contain(key)?;
            if !present.contains(&key) {
                negatives += 1;
                false_positives += hit as u64;
            }
        }
        let uniform_rate = rate(config.lookups, started);

        let started = Instant::now();
        let mut misses = 0;
        for _ in 0..config.lookups {
            let key = keys[sample_rng.gen_range(0..keys.len())];
            misses += !filter.may_contain(key)? as u64;
        }
        let successful_rate = rate(config.lookups, started);

        let c = filter.counters();
        records.push(CheckpointRecord {
            structure: config.structure,
            pct_complete: cp * config.checkpoint_pct,
            inserts: target,
            uniform_lookups: negatives,
            false_positives,
            fp_rate: if negatives > 0 {
                false_positives as f64 / negatives as f64
            } else {
                0.0
            },
            successful_lookups: config.lookups,
            successful_misses: misses,
            page_reads: c.page_reads,
            page_writes: c.page_writes,
            sequential_reads: c.sequential_reads,
            random_reads: c.random_reads,
            sequential_writes: c.sequential_writes,
            random_writes: c.random_writes,
            events: filter.events(),
            level_loads: filter.level_loads(),
            wall_insert_ops_per_sec: insert_rate,
            wall_uniform_lookup_ops_per_sec: uniform_rate,
            wall_successful_lookup_ops_per_sec: successful_rate,
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FpReport {
    pub structure: Structure,
    pub inserts: u64,
    pub queries: u64,
    pub false_positives: u64,
    pub fp_rate: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub expected_fp_rate: f64,
}

/// Inserts `config.inserts` keys, then measures the false positive rate over
/// `config.lookups` fresh uniform keys.
pub fn run_fp_test(config: &WorkloadConfig) -> Result<FpReport> {
    if config.lookups == 0 {
        return Err(config_err(
            "--lookups must be at least 1 for a false positive test",
        ));
    }
    let mut filter = AnyFilter::build(config)?;
    let mut keys_rng = rng(config.seed, INSERT_STREAM);
    let mut present = HashSet::with_capacity(config.inserts as usize);
    for _ in 0..config.inserts {
        let key: u64 = keys_rng.gen();
        filter.insert(key)?;
        present.insert(key);
    }
    let mut uniform_rng = rng(config.seed, UNIFORM_STREAM);
    let (mut queries, mut false_positives) = (0, 0);
    while queries < config.lookups {
        let key: u64 = uniform_rng.gen();
        if present.contains(&key) {
            continue;
        }
        queries += 1;
        false_positives += filter.may_contain(key)? as u64;
    }
    let (ci95_low, ci95_high) = wilson_interval(false_positives, queries, Z95);
    Ok(FpReport {
        structure: config.structure,
        inserts: config.inserts,
        queries,
        false_positives,
        fp_rate: false_positives as f64 / queries as f64,
        ci95_low,
        ci95_high,
        expected_fp_rate: filter.expected_fp_rate(present.len() as u64),
    })
}

/// One row of `io` output: cumulative counters plus the change since the
/// previous checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IoRecord {
    pub structure: Structure,
    pub pct_complete: u32,
    pub inserts: u64,
    pub events: u64,
    pub page_reads: u64,
    pub page_writes: u64,
    pub sequential_reads: u64,
    pub random_reads: u64,
    pub sequential_writes: u64,
    pub random_writes: u64,
    pub delta_events: u64,
    pub delta_page_reads: u64,
    pub delta_page_writes: u64,
    pub delta_random_writes: u64,
}

/// Insert-only workload on a simulated store, reporting page I/O.
pub fn run_io_report(config: &WorkloadConfig) -> Result<Vec<IoRecord>> {
    if !matches!(config.structure, Structure::Bqf | Structure::Cf) {
        return Err(config_err(format!(
            "the io report needs an on-store structure (bqf or cf), not {}",
            config.structure
        )));
    }
    if config.store != crate::config::StoreSpec::Sim {
        return Err(config_err("the io report runs on the simulated store only"));
    }
    let mut filter = AnyFilter::build(config)?;
    let mut keys_rng = rng(config.seed, INSERT_STREAM);
    let mut inserted = 0;
    let (mut prev, mut prev_events) = (IoCounters::default(), 0);
    let mut records = Vec::new();
    for cp in 1..=config.checkpoints() {
        let target = config.inserts_at(cp);
        while inserted < target {
            filter.insert(keys_rng.gen())?;
            inserted += 1;
        }
        let c = filter.counters();
        let d = c - prev;
        let events = filter.events();
        records.push(IoRecord {
            structure: config.structure,
            pct_complete: cp * config.checkpoint_pct,
            inserts: inserted,
            events,
            page_reads: c.page_reads,
            page_writes: c.page_writes,
            sequential_reads: c.sequential_reads,
            random_reads: c.random_reads,
            sequential_writes: c.sequential_writes,
            random_writes: c.random_writes,
            delta_events: events - prev_events,
            delta_page_reads: d.page_reads,
            delta_page_writes: d.page_writes,
            delta_random_writes: d.random_writes,
        });
        prev = c;
        prev_events = events;
    }
    Ok(records)
}

/// Writes `rows` as CSV with one header row.
pub fn write_csv<W: std::io::Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
