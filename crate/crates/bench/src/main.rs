use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use amq_bench::config::{StoreSpec, Structure, WorkloadConfig};
use amq_bench::{run_bench, run_fp_test, run_io_report, write_csv, BenchError, Plan};
use amq_core::LoadFactor;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "amq-bench",
    version,
    about = "Benchmarks for quotient, Bloom, buffered and cascade filters"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Insert keys, with uniform and successful lookups at every checkpoint.
    Bench(Flags),
    /// Fill a structure, then measure its false positive rate.
    Fp(Flags),
    /// Insert-only run reporting page I/O of bqf or cf on the simulated store.
    Io(Flags),
}

#[derive(Args)]
struct Flags {
    #[arg(long, value_enum, default_value_t = Structure::Qf)]
    structure: Structure,
    /// Keys to insert. `fp` defaults to filling a qf (or a bqf with --q) to its load limit.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    inserts: Option<u64>,
    /// Quotient bits of a qf, or of the bqf disk filter (derived from --inserts if omitted).
    #[arg(long)]
    q: Option<u32>,
    /// Remainder bits of a qf.
    #[arg(long, default_value_t = 12)]
    r: u32,
    /// Fingerprint width of bqf and cf.
    #[arg(long, default_value_t = 32)]
    p: u32,
    #[arg(long, default_value_t = 2)]
    fanout: u32,
    /// Slots in the in-memory filter of bqf and cf; a power of two.
    #[arg(long, default_value_t = 1 << 14)]
    buffer_slots: u64,
    #[arg(long, default_value_t = 0.75, value_parser = parse_load)]
    max_load: f64,
    /// Bloom filter bits per inserted key.
    #[arg(long, default_value_t = 8)]
    bits_per_key: u32,
    #[arg(long, default_value_t = 4096)]
    page_size: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    checkpoint_pct: u32,
    /// Lookups per phase per checkpoint (`bench`) or false positive queries (`fp`).
    #[arg(long)]
    lookups: Option<u64>,
    /// `sim` or `file:PATH`.
    #[arg(long, default_value = "sim")]
    store: StoreSpec,
    /// Write CSV here instead of standard output.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn parse_load(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    LoadFactor::from_f64(x).map_err(|e| e.to_string())?;
    Ok(x)
}

impl Flags {
    fn config(
        &self,
        default_inserts: u64,
        default_lookups: u64,
    ) -> Result<WorkloadConfig, BenchError> {
        let max_load =
            LoadFactor::from_f64(self.max_load).map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(WorkloadConfig {
            structure: self.structure,
            inserts: self.inserts.unwrap_or(default_inserts),
            q: self.q,
            r: self.r,
            p: self.p,
            fanout: self.fanout,
            buffer_slots: self.buffer_slots,
            max_load,
            bits_per_key: self.bits_per_key,
            page_size: self.page_size,
            seed: self.seed,
            checkpoint_pct: self.checkpoint_pct,
            lookups: self.lookups.unwrap_or(default_lookups),
            store: self.store.clone(),
        })
    }

    fn emit<T: Serialize>(&self, rows: &[T]) -> Result<(), BenchError> {
        match &self.csv {
            Some(path) => write_csv(BufWriter::new(File::create(path)?), rows),
            None => write_csv(io::stdout().lock(), rows),
        }
    }
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Bench(flags) => {
            let config = flags.config(100_000, 10_000)?;
            let rows = run_bench(&config)?;
            flags.emit(&rows)?;
            if let Some(last) = rows.last() {
                eprintln!(
                    "{}: {} inserts, fp rate {:.3e}, {} successful-lookup misses, {} page writes",
                    config.structure,
                    last.inserts,
                    last.fp_rate,
                    last.successful_misses,
                    last.page_writes
                );
            }
        }
        Command::Fp(flags) => {
            let mut config = flags.config(100_000, 1_000_000)?;
            if flags.inserts.is_none() {
                let mut probe = config.clone();
                probe.inserts = 1;
                match probe.plan()? {
                    Plan::Qf(g) => config.inserts = g.capacity(),
                    Plan::Bqf { disk, .. } if flags.q.is_some() => config.inserts = disk.capacity(),
                    _ => {}
                }
            }
            let report = run_fp_test(&config)?;
            flags.emit(std::slice::from_ref(&report))?;
            eprintln!(
                "{}: fp rate {:.3e} (95% CI {:.3e}..{:.3e}), expected {:.3e}",
                report.structure,
                report.fp_rate,
                report.ci95_low,
                report.ci95_high,
                report.expected_fp_rate
            );
        }
        Command::Io(flags) => {
            let config = flags.config(100_000, 0)?;
            let rows = run_io_report(&config)?;
            flags.emit(&rows)?;
            if let Some(last) = rows.last() {
                eprintln!(
                    "{}: {} inserts, {} flushes/merges, {} page writes ({} random), {} page reads",
                    config.structure,
                    last.inserts,
                    last.events,
                    last.page_writes,
                    last.random_writes,
                    last.page_reads
                );
            }
        }
    }
    io::stdout().flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("amq-bench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
