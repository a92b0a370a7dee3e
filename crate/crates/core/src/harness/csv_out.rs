//! CSV emitters. All files use `,` separators, `.` decimal points, LF line
//! endings and at most 10 significant digits.

use std::path::Path;

use crate::channel::CorrelationHistogram;
use crate::harness::config::{RunMode, ScenarioConfig};
use crate::harness::sweep::{AggregateRow, RunFailure, RunRow};
use crate::{Result, SimError};

pub const RUN_HEADER: [&str; 8] = [
    "sweep_point",
    "realization",
    "seed",
    "mode",
    "n_packets",
    "p_tx_dbm",
    "mask",
    "wall_time_s",
];
pub const AGGREGATE_HEADER: [&str; 5] = [
    "sweep_point",
    "mode",
    "mean_n_packets",
    "mean_p_tx_dbm",
    "n_realizations",
];
pub const HISTOGRAM_HEADER: [&str; 4] = ["bin_low", "bin_high", "intra_prob", "inter_prob"];
pub const PATTERN_HEADER: [&str; 2] = ["angle_deg", "magnitude"];

/// Formats `x` with 10 significant digits, dropping trailing zeros.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (9 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_zeros(&s)
    } else {
        let s = format!("{x:.9e}");
        let (mantissa, exponent) = s
            .split_once('e')
            .expect("scientific format has an exponent");
        format!("{}e{exponent}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> SimError {
    SimError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| io_err(path, e))
}

fn write_all<const N: usize>(
    path: &Path,
    header: [&str; N],
    rows: impl Iterator<Item = [String; N]>,
) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Per-run table. Wall-clock time is written as 0 unless `record_timing`
/// is set, so that repeated runs produce identical bytes.
pub fn write_runs(path: &Path, rows: &[RunRow], record_timing: bool) -> Result<()> {
    write_all(
        path,
        RUN_HEADER,
        rows.iter().map(|r| {
            [
                r.sweep_point.to_string(),
                r.realization.to_string(),
                r.seed.to_string(),
                r.mode.as_str().to_string(),
                r.n_packets.to_string(),
                format_sig(r.p_tx_dbm),
                r.mask.clone(),
                format_sig(if record_timing { r.wall_time_s } else { 0.0 }),
            ]
        }),
    )
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    write_all(
        path,
        AGGREGATE_HEADER,
        rows.iter().map(|r| {
            [
                r.sweep_point.to_string(),
                r.mode.as_str().to_string(),
                format_sig(r.mean_n_packets),
                format_sig(r.mean_p_tx_dbm),
                r.n_realizations.to_string(),
            ]
        }),
    )
}

/// Parameters of every sweep point.
pub fn write_points(path: &Path, points: &[ScenarioConfig]) -> Result<()> {
    let header = [
        "sweep_point",
        "n_tx",
        "n_rx",
        "n_rf",
        "gamma_db",
        "n_iter",
        "n_rand",
        "beta_hybrid",
        "label",
    ];
    write_all(
        path,
        header,
        points.iter().enumerate().map(|(i, p)| {
            [
                i.to_string(),
                p.n_tx.to_string(),
                p.n_rx.to_string(),
                p.n_rf.to_string(),
                format_sig(p.gamma_db[0]),
                p.n_iter.to_string(),
                p.n_rand_value().map(|n| n.to_string()).unwrap_or_default(),
                format_sig(p.beta_for(RunMode::Hybrid)),
                p.name.clone(),
            ]
        }),
    )
}

pub fn write_failures(path: &Path, failures: &[RunFailure]) -> Result<()> {
    write_all(
        path,
        ["sweep_point", "realization", "mode", "error"],
        failures.iter().map(|f| {
            [
                f.sweep_point.to_string(),
                f.realization.to_string(),
                f.mode.as_str().to_string(),
                f.message.clone(),
            ]
        }),
    )
}

pub fn write_histogram(path: &Path, hist: &CorrelationHistogram) -> Result<()> {
    write_all(
        path,
        HISTOGRAM_HEADER,
        (0..hist.intra.len()).map(|b| {
            [
                format_sig(hist.edges[b]),
                format_sig(hist.edges[b + 1]),
                format_sig(hist.intra[b]),
                format_sig(hist.inter[b]),
            ]
        }),
    )
}

pub fn write_pattern(path: &Path, pattern: &[(f64, f64)]) -> Result<()> {
    write_all(
        path,
        PATTERN_HEADER,
        pattern.iter().map(|&(a, m)| [format_sig(a), format_sig(m)]),
    )
}

/// Reads an aggregate table back.
pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let field = |i: usize| rec.get(i).unwrap_or("").to_string();
        let bad = |what: &str| io_err(path, format!("malformed {what} in aggregate row"));
        let mode = match field(1).as_str() {
            "hybrid" => RunMode::Hybrid,
            "digital" => RunMode::Digital,
            _ => return Err(bad("mode")),
        };
        rows.push(AggregateRow {
            sweep_point: field(0).parse().map_err(|_| bad("sweep_point"))?,
            mode,
            mean_n_packets: field(2).parse().map_err(|_| bad("mean_n_packets"))?,
            mean_p_tx_dbm: field(3).parse().map_err(|_| bad("mean_p_tx_dbm"))?,
            n_realizations: field(4).parse().map_err(|_| bad("n_realizations"))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(33.01029995663981), "33.01029996");
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(2.5), "2.5");
        assert_eq!(format_sig(-1.0 / 3.0), "-0.3333333333");
        assert_eq!(format_sig(1e-7 / 3.0), "3.333333333e-8");
        assert_eq!(format_sig(f64::NEG_INFINITY), "-inf");
        assert_eq!(format_sig(12288.0), "12288");
    }

    #[test]
    fn empty_table_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agg.csv");
        write_aggregate(&path, &[]).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "sweep_point,mode,mean_n_packets,mean_p_tx_dbm,n_realizations\n"
        );
    }
}
