//! CSV emission. All decimals use 17 significant digits in scientific
//! notation, fields are comma separated and lines end with LF.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::run::RunTrace;

pub const RUN_HEADER: &str = "run,seed,t,player,x,regret_lin,dist_eq,grad_energy_cum,gamma_hat,gamma";
pub const AGGREGATE_HEADER: &str = "t,player,regret_lin_mean,regret_lin_std,dist_eq_mean,dist_eq_std,\
grad_energy_cum_mean,grad_energy_cum_std,n_runs";

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn run_file_name(run: usize, seed: u64) -> String {
    format!("run_{run:03}_seed_{seed}.csv")
}

/// Writes every `(t, player)` record of `trace` to `w`, header first.
pub fn write_run_csv<W: Write>(trace: &RunTrace, w: &mut W) -> Result<()> {
    writeln!(w, "{RUN_HEADER}")?;
    for t in 1..=trace.rounds() {
        let dist = fmt_f64(trace.dist_eq(t));
        for i in 0..trace.players() {
            let x: Vec<String> = trace.played(t, i).iter().map(|v| fmt_f64(*v)).collect();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                trace.run,
                trace.seed,
                t,
                i,
                x.join(";"),
                fmt_f64(trace.regret(t, i)),
                dist,
                fmt_f64(trace.grad_energy(t, i)),
                fmt_f64(trace.gamma_hat(t, i)),
                fmt_f64(trace.gamma(t, i)),
            )?;
        }
    }
    Ok(())
}

/// Creates `path` (which must not exist yet) and writes `trace` into it.
pub fn save_run_csv(trace: &RunTrace, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(create_new(path)?);
    write_run_csv(trace, &mut w)?;
    w.flush()?;
    Ok(())
}

fn create_new(path: &Path) -> Result<File> {
    File::options().write(true).create_new(true).open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AlreadyExists {
            Error::Usage(format!("refusing to overwrite existing file {}", path.display()))
        } else {
            Error::Io(e)
        }
    })
}

/// Per-round, per-player sample mean and standard deviation over runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub rounds: usize,
    pub players: usize,
    pub n_runs: usize,
    /// Indexed `[(t − 1) * players + player]`; each entry is `(mean, std)`.
    pub regret: Vec<(f64, f64)>,
    pub dist_eq: Vec<(f64, f64)>,
    pub grad_energy: Vec<(f64, f64)>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl Aggregate {
    /// Aggregates runs of identical shape. The runs are summed in the order
    /// given, so callers wanting seed-order invariance pass them sorted.
    pub fn from_runs(runs: &[RunTrace]) -> Result<Self> {
        let first = runs.first().ok_or_else(|| Error::Runtime {
            round: 0,
            player: 0,
            message: "no successful runs to aggregate".into(),
        })?;
        let (rounds, players) = (first.rounds(), first.players());
        if runs.iter().any(|r| r.rounds() != rounds || r.players() != players) {
            return Err(Error::Contract("aggregated runs differ in shape".into()));
        }
        let mut agg = Aggregate {
            rounds,
            players,
            n_runs: runs.len(),
            regret: Vec::with_capacity(rounds * players),
            dist_eq: Vec::with_capacity(rounds * players),
            grad_energy: Vec::with_capacity(rounds * players),
        };
        let mut buf = vec![0.0; runs.len()];
        let mut stat = |f: &dyn Fn(&RunTrace) -> f64| {
            for (b, r) in buf.iter_mut().zip(runs) {
                *b = f(r);
            }
            mean_std(&buf)
        };
        for t in 1..=rounds {
            let dist = stat(&|r| r.dist_eq(t));
            for i in 0..players {
                agg.regret.push(stat(&|r| r.regret(t, i)));
                agg.dist_eq.push(dist);
                agg.grad_energy.push(stat(&|r| r.grad_energy(t, i)));
            }
        }
        Ok(agg)
    }

    fn idx(&self, t: usize, player: usize) -> usize {
        (t - 1) * self.players + player
    }

    pub fn regret(&self, t: usize, player: usize) -> (f64, f64) {
        self.regret[self.idx(t, player)]
    }

    pub fn dist_eq(&self, t: usize) -> (f64, f64) {
        self.dist_eq[self.idx(t, 0)]
    }

    pub fn grad_energy(&self, t: usize, player: usize) -> (f64, f64) {
        self.grad_energy[self.idx(t, player)]
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{AGGREGATE_HEADER}")?;
        for t in 1..=self.rounds {
            for i in 0..self.players {
                let k = self.idx(t, i);
                let cols = [self.regret[k], self.dist_eq[k], self.grad_energy[k]];
                let stats: Vec<String> = cols.iter().flat_map(|(m, s)| [fmt_f64(*m), fmt_f64(*s)]).collect();
                writeln!(w, "{t},{i},{},{}", stats.join(","), self.n_runs)?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(create_new(path)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

pub fn aggregate_path(dir: &Path) -> PathBuf {
    dir.join("aggregate.csv")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        assert_eq!(fmt_f64(0.0), "0.0000000000000000e0");
        for v in [std::f64::consts::PI, 1.0 / 3.0, 6.02e23, -1e-300] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn sample_std() {
        assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn file_names() {
        assert_eq!(run_file_name(3, 42), "run_003_seed_42.csv");
    }
}
