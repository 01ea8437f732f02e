//! Reshapes experiment output into one CSV per figure, one series per
//! column. Values are means over seeds.
//!
//! | figure | input | columns |
//! |---|---|---|
//! | `fig2` | `metrics.csv` | `t`, running-average delay per scheme |
//! | `fig3` | `metrics.csv` | `t`, running-average energy per scheme, `Q` |
//! | `fig4` | `convergence.csv` | `iteration`, current objective per `tau` |
//! | `fig5` | `metrics.csv` | `C`, time-average delay per scheme |
//! | `fig6` | `metrics.csv` | `C`, time-average energy per scheme |
//! | `fig7` | `metrics.csv` | `Q`, time-average delay per scheme |
//! | `fig8` | `metrics.csv` | `t`, total demand, services cached per BS (OREO) |
//! | `fig9` | `metrics.csv` | `t`, locally processed Gcycles/s per scheme |

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

use super::experiments::ConvergenceRow;
use super::metrics::{read_rows, summarize, MetricsRow};

pub const FIGURES: [&str; 8] = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9"];

/// A rectangular table ready to be written as CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlotTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PlotTable {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|x| x.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

fn schemes(rows: &[MetricsRow]) -> Vec<String> {
    let mut s: Vec<String> = rows.iter().map(|r| r.scheme.clone()).collect();
    s.sort();
    s.dedup();
    s
}

/// `key -> scheme -> seed-mean of value`.
fn pivot(
    rows: &[MetricsRow],
    key: impl Fn(&MetricsRow) -> f64,
    value: impl Fn(&MetricsRow) -> f64,
) -> BTreeMap<u64, BTreeMap<String, (f64, usize)>> {
    let mut acc: BTreeMap<u64, BTreeMap<String, (f64, usize)>> = BTreeMap::new();
    for r in rows {
        let e = acc.entry(key(r).to_bits()).or_default().entry(r.scheme.clone()).or_insert((0.0, 0));
        e.0 += value(r);
        e.1 += 1;
    }
    acc
}

fn series_table(
    first: &str,
    rows: &[MetricsRow],
    key: impl Fn(&MetricsRow) -> f64,
    value: impl Fn(&MetricsRow) -> f64,
) -> PlotTable {
    let names = schemes(rows);
    let mut header = vec![first.to_string()];
    header.extend(names.iter().cloned());
    // Keys are non-negative, so their bit patterns sort like the values.
    let rows = pivot(rows, key, value)
        .into_iter()
        .map(|(k, cols)| {
            let mut r = vec![f64::from_bits(k)];
            r.extend(names.iter().map(|s| cols.get(s).map_or(f64::NAN, |(sum, n)| sum / *n as f64)));
            r
        })
        .collect();
    PlotTable { header, rows }
}

fn sweep_table(first: &str, rows: &[MetricsRow], energy: bool) -> PlotTable {
    let names = schemes(rows);
    let mut header = vec![first.to_string()];
    header.extend(names.iter().cloned());
    let mut by_point: BTreeMap<u64, BTreeMap<String, f64>> = BTreeMap::new();
    for s in summarize(rows) {
        let v = if energy { s.energy.mean } else { s.delay.mean };
        by_point.entry(s.sweep_value.to_bits()).or_default().insert(s.scheme, v);
    }
    let rows = by_point
        .into_iter()
        .map(|(k, cols)| {
            let mut r = vec![f64::from_bits(k)];
            r.extend(names.iter().map(|s| cols.get(s).copied().unwrap_or(f64::NAN)));
            r
        })
        .collect();
    PlotTable { header, rows }
}

/// Builds the table for `figure` from metrics rows.
pub fn plot_table(figure: &str, rows: &[MetricsRow], q_budget: Option<f64>) -> Result<PlotTable> {
    Ok(match figure {
        "fig2" => series_table("t", rows, |r| r.t as f64, |r| r.avg_delay),
        "fig3" => {
            let mut t = series_table("t", rows, |r| r.t as f64, |r| r.avg_energy);
            let q = q_budget.unwrap_or(f64::NAN);
            t.header.push("Q".into());
            t.rows.iter_mut().for_each(|r| r.push(q));
            t
        }
        "fig5" | "fig6" => sweep_table("C", rows, figure == "fig6"),
        "fig7" => sweep_table("Q", rows, false),
        "fig8" => {
            let oreo: Vec<&MetricsRow> = rows.iter().filter(|r| r.scheme == "oreo").collect();
            let seed = oreo.iter().map(|r| r.seed).min();
            let picked: Vec<&MetricsRow> = oreo.into_iter().filter(|r| Some(r.seed) == seed).collect();
            let n_bs = picked.first().map_or(0, |r| r.cache.split(';').count());
            let mut header = vec!["t".to_string(), "demand".to_string()];
            header.extend((0..n_bs).map(|n| format!("bs{n}")));
            let rows = picked
                .iter()
                .map(|r| {
                    let mut row = vec![r.t as f64, r.demand];
                    row.extend(r.cache.split(';').map(|b| b.bytes().filter(|&c| c == b'1').count() as f64));
                    row
                })
                .collect();
            PlotTable { header, rows }
        }
        "fig9" => series_table("t", rows, |r| r.t as f64, |r| r.cycles_vec().iter().sum()),
        "fig4" => return Err(Error::Schema("fig4 is built from convergence.csv".into())),
        other => return Err(Error::Config(format!("unknown figure `{other}`"))),
    })
}

pub fn convergence_table(rows: &[ConvergenceRow]) -> PlotTable {
    let mut taus: Vec<f64> = rows.iter().map(|r| r.tau).collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    let mut header = vec!["iteration".to_string()];
    header.extend(taus.iter().map(|t| format!("tau={t}")));
    let mut acc: BTreeMap<usize, Vec<(f64, usize)>> = BTreeMap::new();
    for r in rows {
        let i = taus.iter().position(|&t| t == r.tau).unwrap();
        let e = &mut acc.entry(r.iteration).or_insert_with(|| vec![(0.0, 0); taus.len()])[i];
        e.0 += r.current_f;
        e.1 += 1;
    }
    let rows = acc
        .into_iter()
        .map(|(it, cols)| {
            let mut r = vec![it as f64];
            r.extend(cols.iter().map(|(s, n)| if *n == 0 { f64::NAN } else { s / *n as f64 }));
            r
        })
        .collect();
    PlotTable { header, rows }
}

/// Reads an experiment output file and writes the table for `figure`.
pub fn emit_plotdata(input: &Path, figure: &str, output: &Path, q_budget: Option<f64>) -> Result<PlotTable> {
    if !FIGURES.contains(&figure) {
        return Err(Error::Config(format!("unknown figure `{figure}`; expected one of {FIGURES:?}")));
    }
    let table = if figure == "fig4" {
        let mut r = csv::Reader::from_path(input)?;
        let headers = r.headers()?.clone();
        for col in ["tau", "iteration", "current_f"] {
            if !headers.iter().any(|h| h == col) {
                return Err(Error::Schema(format!("convergence file lacks column `{col}`")));
            }
        }
        let rows = r.deserialize().collect::<std::result::Result<Vec<ConvergenceRow>, _>>()?;
        convergence_table(&rows)
    } else {
        plot_table(figure, &read_rows(input)?, q_budget)?
    };
    table.write(output)?;
    Ok(table)
}
