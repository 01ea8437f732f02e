//! Time-series metrics and run summaries.
//!
//! `metrics.csv` columns (schema version [`SCHEMA_VERSION`]):
//!
//! | column | meaning |
//! |---|---|
//! | `schema` | schema version |
//! | `experiment` | experiment id |
//! | `scheme` | scheme name |
//! | `seed` | replication index |
//! | `sweep` | swept parameter name, or `none` |
//! | `sweep_value` | its value |
//! | `t` | slot index |
//! | `delay`, `energy` | per-slot `D^`, `E^` |
//! | `avg_delay`, `avg_energy` | running time averages |
//! | `q` | energy-deficit backlog after the slot |
//! | `demand` | total regional demand in the slot |
//! | `flagged` | 1 if the slot fell back to the empty cache |
//! | `iterations` | sampler iterations (0 for non-sampling schemes) |
//! | `cache` | per-BS cache bitmaps, service 0 first, `;`-separated |
//! | `cycles` | per-BS locally processed Gcycles/s, `;`-separated |
//!
//! Wall-clock time is deliberately left out so identical runs produce
//! identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::SlotOutcome;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub schema: u32,
    pub experiment: String,
    pub scheme: String,
    pub seed: u64,
    pub sweep: String,
    pub sweep_value: f64,
    pub t: usize,
    pub delay: f64,
    pub energy: f64,
    pub avg_delay: f64,
    pub avg_energy: f64,
    pub q: f64,
    pub demand: f64,
    pub flagged: u8,
    pub iterations: usize,
    pub cache: String,
    pub cycles: String,
}

impl MetricsRow {
    pub fn from_outcome(
        experiment: &str,
        scheme: &str,
        seed: u64,
        sweep: (&str, f64),
        o: &SlotOutcome,
        n_services: usize,
    ) -> Self {
        let cache = o.cache.iter().map(|s| s.to_bit_string(n_services)).collect::<Vec<_>>().join(";");
        let cycles = o.local_cycles.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";");
        MetricsRow {
            schema: SCHEMA_VERSION,
            experiment: experiment.to_string(),
            scheme: scheme.to_string(),
            seed,
            sweep: sweep.0.to_string(),
            sweep_value: sweep.1,
            t: o.t,
            delay: o.delay,
            energy: o.energy,
            avg_delay: o.avg_delay,
            avg_energy: o.avg_energy,
            q: o.q,
            demand: o.demand,
            flagged: o.flagged as u8,
            iterations: o.iterations,
            cache,
            cycles,
        }
    }

    pub fn cycles_vec(&self) -> Vec<f64> {
        self.cycles.split(';').filter(|s| !s.is_empty()).filter_map(|s| s.parse().ok()).collect()
    }
}

/// Column order of `metrics.csv`; matches the field order of [`MetricsRow`].
pub const COLUMNS: [&str; 17] = [
    "schema",
    "experiment",
    "scheme",
    "seed",
    "sweep",
    "sweep_value",
    "t",
    "delay",
    "energy",
    "avg_delay",
    "avg_energy",
    "q",
    "demand",
    "flagged",
    "iterations",
    "cache",
    "cycles",
];

/// Writes the header even when `rows` is empty.
pub fn write_rows(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    for col in ["scheme", "t", "avg_delay", "avg_energy"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Schema(format!("metrics file lacks column `{col}`")));
        }
    }
    r.deserialize().map(|row| row.map_err(|e| Error::Schema(e.to_string()))).collect()
}

/// Time averages of one `(scheme, sweep point)` cell across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheme: String,
    pub sweep: String,
    pub sweep_value: f64,
    pub delay: MeanSd,
    pub energy: MeanSd,
    pub final_q: MeanSd,
    pub flagged: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl MeanSd {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return MeanSd { mean: f64::NAN, sd: f64::NAN, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
        MeanSd { mean, sd, n }
    }
}

/// Groups by scheme and sweep point using each seed's last slot.
pub fn summarize(rows: &[MetricsRow]) -> Vec<SummaryRow> {
    // (sweep_value bits, scheme) -> seed -> last row
    let mut last: BTreeMap<(String, u64, String), BTreeMap<u64, &MetricsRow>> = BTreeMap::new();
    let mut flagged: BTreeMap<(String, u64, String), usize> = BTreeMap::new();
    for r in rows {
        let key = (r.sweep.clone(), r.sweep_value.to_bits(), r.scheme.clone());
        *flagged.entry(key.clone()).or_default() += r.flagged as usize;
        let slot = last.entry(key).or_default().entry(r.seed).or_insert(r);
        if r.t >= slot.t {
            *slot = r;
        }
    }
    let mut out: Vec<SummaryRow> = last
        .into_iter()
        .map(|(key, seeds)| {
            let col = |f: fn(&MetricsRow) -> f64| MeanSd::of(&seeds.values().map(|r| f(r)).collect::<Vec<_>>());
            SummaryRow {
                scheme: key.2.clone(),
                sweep: key.0.clone(),
                sweep_value: f64::from_bits(key.1),
                delay: col(|r| r.avg_delay),
                energy: col(|r| r.avg_energy),
                final_q: col(|r| r.q),
                flagged: flagged[&key],
            }
        })
        .collect();
    out.sort_by(|a, b| a.sweep_value.total_cmp(&b.sweep_value).then_with(|| a.scheme.cmp(&b.scheme)));
    out
}

pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<14} {:>10} {:>22} {:>22} {:>20} {:>7}",
        "scheme", "sweep", "avg delay", "avg energy", "final q", "flagged"
    );
    for r in rows {
        let sweep = if r.sweep == "none" { "-".to_string() } else { format!("{}={}", r.sweep, r.sweep_value) };
        let _ = writeln!(
            s,
            "{:<14} {:>10} {:>12.4} ± {:<8.4} {:>12.4} ± {:<8.4} {:>10.2} ± {:<7.2} {:>7}",
            r.scheme,
            sweep,
            r.delay.mean,
            r.delay.sd,
            r.energy.mean,
            r.energy.sd,
            r.final_q.mean,
            r.final_q.sd,
            r.flagged
        );
    }
    s
}

pub fn write_summary_csv<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record([
        "scheme",
        "sweep",
        "sweep_value",
        "delay_mean",
        "delay_sd",
        "energy_mean",
        "energy_sd",
        "q_mean",
        "q_sd",
        "seeds",
        "flagged",
    ])?;
    for r in rows {
        w.write_record([
            r.scheme.clone(),
            r.sweep.clone(),
            r.sweep_value.to_string(),
            r.delay.mean.to_string(),
            r.delay.sd.to_string(),
            r.energy.mean.to_string(),
            r.energy.sd.to_string(),
            r.final_q.mean.to_string(),
            r.final_q.sd.to_string(),
            r.delay.n.to_string(),
            r.flagged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(scheme: &str, seed: u64, t: usize, d: f64) -> MetricsRow {
        MetricsRow {
            schema: SCHEMA_VERSION,
            experiment: "fig2_3".into(),
            scheme: scheme.into(),
            seed,
            sweep: "none".into(),
            sweep_value: 0.0,
            t,
            delay: d,
            energy: 1.0,
            avg_delay: d,
            avg_energy: 1.0,
            q: 0.0,
            demand: 3.0,
            flagged: 0,
            iterations: 5,
            cache: "10;01".into(),
            cycles: "0.5;1.5".into(),
        }
    }

    #[test]
    fn header_matches_serde_field_order() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(row("oreo", 0, 0, 1.0)).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(text.lines().next().unwrap(), COLUMNS.join(","));
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let rows = vec![row("oreo", 0, 0, 1.0), row("myopic", 1, 3, 2.5)];
        write_rows(&p, &rows).unwrap();
        assert_eq!(read_rows(&p).unwrap(), rows);
        assert_eq!(rows[1].cycles_vec(), vec![0.5, 1.5]);
    }

    #[test]
    fn summary_uses_last_slot_of_each_seed() {
        let rows = vec![row("oreo", 0, 0, 10.0), row("oreo", 0, 1, 4.0), row("oreo", 1, 0, 6.0)];
        let s = summarize(&rows);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].delay.mean, 5.0);
    }
}
