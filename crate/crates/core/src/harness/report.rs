//! CSV schema, per-`N` aggregation and the run manifest.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{ExperimentConfig, RunRow};
use crate::error::{Error, Result};

pub const ROW_HEADER: [&str; 10] =
    ["N", "rep", "t", "Q_total", "Q_kinetic", "Q_density", "besov_S", "besov_V", "stopped", "tau_m"];
pub const AGGREGATE_HEADER: [&str; 6] = ["N", "E_supQ", "E_supQ_sq", "scaled_N2delta", "ci_lo", "ci_hi"];

// `Display` for f64 is the shortest string that parses back to the same value.
fn num(x: f64) -> String {
    format!("{x}")
}

fn parse(field: &str, what: &str) -> Result<f64> {
    match field {
        "inf" => Ok(f64::INFINITY),
        s => s.parse().map_err(|_| Error::Format(format!("{what}: '{s}' is not a number"))),
    }
}

pub fn write_rows_csv<W: Write>(w: W, rows: &[RunRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(ROW_HEADER)?;
    for r in rows {
        out.write_record([
            r.n.to_string(),
            r.rep.to_string(),
            num(r.t),
            num(r.q_total),
            num(r.q_kinetic),
            num(r.q_density),
            num(r.besov_s),
            num(r.besov_v),
            u8::from(r.stopped).to_string(),
            num(r.tau_m),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_rows_csv<R: Read>(r: R) -> Result<Vec<RunRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().ne(ROW_HEADER) {
        return Err(Error::Format(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let int = |i: usize| -> Result<usize> {
            rec[i].parse().map_err(|_| Error::Format(format!("{}: '{}' is not an integer", ROW_HEADER[i], &rec[i])))
        };
        let f = |i: usize| parse(&rec[i], ROW_HEADER[i]);
        rows.push(RunRow {
            n: int(0)?,
            rep: int(1)?,
            t: f(2)?,
            q_total: f(3)?,
            q_kinetic: f(4)?,
            q_density: f(5)?,
            besov_s: f(6)?,
            besov_v: f(7)?,
            stopped: match &rec[8] {
                "0" => false,
                "1" => true,
                s => return Err(Error::Format(format!("stopped: '{s}' is not 0 or 1"))),
            },
            tau_m: f(9)?,
        });
    }
    Ok(rows)
}

/// Monte-Carlo statistics for one particle count.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub n: usize,
    pub replications: usize,
    /// Mean over replications of `sup_t Q`.
    pub e_sup_q: f64,
    pub e_sup_q_sq: f64,
    /// `N^{2δ} E[(sup Q)²]`.
    pub scaled: f64,
    /// 95% Student-t interval for `E[sup Q]`.
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Means over replications of `sup_t` of each distance.
    pub e_sup_besov_s: f64,
    pub e_sup_besov_v: f64,
}

/// Folds sorted raw rows into per-`N` statistics.
pub fn aggregate(rows: &[RunRow], delta: f64) -> Result<Vec<Aggregate>> {
    // (N, rep) -> (sup Q, sup besov_S, sup besov_V)
    let mut sups: BTreeMap<(usize, usize), (f64, f64, f64)> = BTreeMap::new();
    for r in rows {
        let e = sups.entry((r.n, r.rep)).or_insert((0.0, 0.0, 0.0));
        e.0 = e.0.max(r.q_total);
        e.1 = e.1.max(r.besov_s);
        e.2 = e.2.max(r.besov_v);
    }
    let mut by_n: BTreeMap<usize, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for ((n, _), v) in sups {
        by_n.entry(n).or_default().push(v);
    }
    let mut out = Vec::with_capacity(by_n.len());
    for (n, v) in by_n {
        let r = v.len();
        if r < 2 {
            return Err(Error::InsufficientReplications(format!("N = {n} has {r} replication(s)")));
        }
        let rf = r as f64;
        let mean = v.iter().map(|x| x.0).sum::<f64>() / rf;
        let mean_sq = v.iter().map(|x| x.0 * x.0).sum::<f64>() / rf;
        let var = v.iter().map(|x| (x.0 - mean).powi(2)).sum::<f64>() / (rf - 1.0);
        let t = StudentsT::new(0.0, 1.0, rf - 1.0)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .inverse_cdf(0.975);
        let half = t * (var / rf).sqrt();
        out.push(Aggregate {
            n,
            replications: r,
            e_sup_q: mean,
            e_sup_q_sq: mean_sq,
            scaled: (n as f64).powf(2.0 * delta) * mean_sq,
            ci_lo: mean - half,
            ci_hi: mean + half,
            e_sup_besov_s: v.iter().map(|x| x.1).sum::<f64>() / rf,
            e_sup_besov_v: v.iter().map(|x| x.2).sum::<f64>() / rf,
        });
    }
    Ok(out)
}

pub fn write_aggregate_csv<W: Write>(w: W, aggs: &[Aggregate]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(AGGREGATE_HEADER)?;
    for a in aggs {
        out.write_record([a.n.to_string(), num(a.e_sup_q), num(a.e_sup_q_sq), num(a.scaled), num(a.ci_lo), num(a.ci_hi)])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads the published aggregate columns; the distance means are not part of that file.
pub fn read_aggregate_csv<R: Read>(r: R) -> Result<Vec<Aggregate>> {
    let mut rdr = csv::Reader::from_reader(r);
    if rdr.headers()?.iter().ne(AGGREGATE_HEADER) {
        return Err(Error::Format("unexpected aggregate header".into()));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let f = |i: usize| parse(&rec[i], AGGREGATE_HEADER[i]);
        out.push(Aggregate {
            n: rec[0].parse().map_err(|_| Error::Format(format!("N: '{}'", &rec[0])))?,
            replications: 0,
            e_sup_q: f(1)?,
            e_sup_q_sq: f(2)?,
            scaled: f(3)?,
            ci_lo: f(4)?,
            ci_hi: f(5)?,
            e_sup_besov_s: f64::NAN,
            e_sup_besov_v: f64::NAN,
        });
    }
    Ok(out)
}

/// Trend checks over an `N`-sorted aggregate list.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyFlags {
    /// Least-squares slope of `log E[sup Q]` against `log N`.
    pub slope: f64,
    /// `E[sup Q]` strictly decreasing across the schedule.
    pub monotone_decay: bool,
    /// `N^{2δ} E[(sup Q)²]` non-increasing over the top half of the schedule.
    pub scaled_non_increasing: bool,
    pub besov_s_decreasing: bool,
    pub besov_v_decreasing: bool,
}

fn strictly_decreasing(v: impl Iterator<Item = f64>) -> bool {
    let v: Vec<f64> = v.collect();
    v.windows(2).all(|w| w[1] < w[0])
}

impl StudyFlags {
    pub fn from_aggregates(aggs: &[Aggregate]) -> Self {
        let (lx, ly): (Vec<f64>, Vec<f64>) = aggs.iter().map(|a| ((a.n as f64).ln(), a.e_sup_q.ln())).unzip();
        let k = lx.len() as f64;
        let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
        let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
        // at least the two largest N
        let top = &aggs[(aggs.len() / 2).min(aggs.len().saturating_sub(2))..];
        Self {
            slope: sxy / sxx,
            monotone_decay: strictly_decreasing(aggs.iter().map(|a| a.e_sup_q)),
            scaled_non_increasing: top.windows(2).all(|w| w[1].scaled <= w[0].scaled),
            besov_s_decreasing: strictly_decreasing(aggs.iter().map(|a| a.e_sup_besov_s)),
            besov_v_decreasing: strictly_decreasing(aggs.iter().map(|a| a.e_sup_besov_v)),
        }
    }
}

/// Everything needed to replay a study.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub code_version: String,
    pub deterministic: bool,
    pub config: String,
}

impl Manifest {
    pub fn for_config(cfg: &ExperimentConfig) -> Self {
        Self {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            deterministic: cfg.deterministic,
            config: cfg.canonical_text().to_string(),
        }
    }

    /// `key = value` header followed by the full canonical configuration.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "config_hash = {}", self.config_hash)?;
        writeln!(w, "seed = {}", self.seed)?;
        writeln!(w, "code_version = {}", self.code_version)?;
        writeln!(w, "deterministic = {}", self.deterministic)?;
        writeln!(w, "\n# configuration")?;
        for line in self.config.lines() {
            let (k, v) = line.split_once('=').unwrap_or((line, ""));
            writeln!(w, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: usize, rep: usize, t: f64, q: f64) -> RunRow {
        RunRow {
            n,
            rep,
            t,
            q_total: q,
            q_kinetic: 0.25 * q,
            q_density: 0.75 * q,
            besov_s: q.sqrt(),
            besov_v: 0.1 * q,
            stopped: false,
            tau_m: f64::INFINITY,
        }
    }

    #[test]
    fn rows_round_trip() {
        let mut rows = vec![row(256, 0, 0.0, 0.1), row(256, 0, 0.5, 1.0 / 3.0)];
        rows[1].stopped = true;
        rows[1].tau_m = 0.42;
        let mut buf = Vec::new();
        write_rows_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("N,rep,t,Q_total,Q_kinetic,Q_density,besov_S,besov_V,stopped,tau_m\n"));
        assert!(text.contains(",0,inf\n"));
        assert_eq!(read_rows_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn aggregate_statistics() {
        // sups per rep: 1, 2, 3, 4 at N = 16; 0.5 each at N = 64
        let mut rows = Vec::new();
        for rep in 0..4 {
            rows.push(row(16, rep, 0.0, 0.5));
            rows.push(row(16, rep, 1.0, rep as f64 + 1.0));
            rows.push(row(64, rep, 1.0, 0.5));
        }
        let a = aggregate(&rows, 0.25).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].e_sup_q, 2.5);
        assert_eq!(a[0].e_sup_q_sq, 7.5);
        assert!((a[0].scaled - 4.0 * 7.5).abs() < 1e-12);
        // t_{0.975, 3} = 3.182446305
        let half = 3.182446305284263 * (5.0f64 / 3.0 / 4.0).sqrt();
        assert!((a[0].ci_hi - 2.5 - half).abs() < 1e-8);
        assert_eq!(a[1].ci_lo, 0.5);
        let flags = StudyFlags::from_aggregates(&a);
        assert!(flags.monotone_decay && flags.scaled_non_increasing);
        assert!((flags.slope - (0.5f64 / 2.5).ln() / 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_replication_rejected() {
        assert!(aggregate(&[row(16, 0, 0.0, 1.0)], 0.2).is_err());
    }

    #[test]
    fn aggregate_round_trip() {
        let rows: Vec<RunRow> = (0..4).map(|r| row(32, r, 0.0, 0.1 * (r + 1) as f64)).collect();
        let a = aggregate(&rows, 0.2).unwrap();
        let mut buf = Vec::new();
        write_aggregate_csv(&mut buf, &a).unwrap();
        let back = read_aggregate_csv(&buf[..]).unwrap();
        assert_eq!(back[0].e_sup_q, a[0].e_sup_q);
        assert_eq!(back[0].ci_hi, a[0].ci_hi);
    }
}
