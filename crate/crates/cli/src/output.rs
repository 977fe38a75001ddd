//! CSV and JSON writers. Every CSV opens with the config banner line.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use collusion_core::engine::SessionResult;
use collusion_core::games::GameSpec;
use collusion_core::metrics::{pair_price, AggregateReport};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const SESSIONS_HEADER: &str =
    "session,seed,converged,action1,action2,price1,price2,cycle_length,cycle,periods,window_price,final_action1,final_action2";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Cycle as `a-b;c-d` with 1-based actions.
pub fn format_cycle(pairs: &[(usize, usize)]) -> String {
    pairs.iter().map(|(a, b)| format!("{}-{}", a + 1, b + 1)).collect::<Vec<_>>().join(";")
}

/// Actions are written 1-based.
pub fn sessions_csv(banner: &str, results: &[SessionResult], game: &GameSpec) -> String {
    let mut s = String::new();
    writeln!(s, "{banner}\n{SESSIONS_HEADER}").unwrap();
    for r in results {
        let (a1, a2, p1, p2) = match r.convergent_actions {
            Some((a, b)) => {
                let g = game.grid();
                (Some(a + 1), Some(b + 1), Some(g.value(a)), Some(g.value(b)))
            }
            None => (None, None, None, None),
        };
        let cycle = r.cycle.as_ref().map(|c| format_cycle(&c.pairs)).unwrap_or_default();
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.session,
            r.seed,
            r.converged,
            opt(a1),
            opt(a2),
            opt(p1),
            opt(p2),
            opt(r.cycle_length()),
            cycle,
            r.periods_elapsed,
            opt(r.window_weighted_price),
            r.final_profile.0 + 1,
            r.final_profile.1 + 1
        )
        .unwrap();
    }
    s
}

pub fn q_final_csv(banner: &str, result: &SessionResult) -> String {
    let mut buf = Vec::new();
    writeln!(buf, "{banner}\nagent,obs,action,q").unwrap();
    for (i, q) in result.final_q.iter().enumerate() {
        q.write_csv_rows(i, &mut buf).unwrap();
    }
    String::from_utf8(buf).expect("ascii csv")
}

pub fn trace_csv(banner: &str, result: &SessionResult) -> Option<String> {
    let trace = result.trace.as_ref()?;
    let mut buf = Vec::new();
    writeln!(buf, "{banner}").unwrap();
    trace.write_csv(&mut buf).unwrap();
    Some(String::from_utf8(buf).expect("ascii csv"))
}

pub fn cycles_csv(banner: &str, report: &AggregateReport) -> String {
    let mut s = format!("{banner}\ncycle_length,count\n");
    for (len, count) in &report.cycle_length_histogram {
        writeln!(s, "{len},{count}").unwrap();
    }
    s
}

/// One sweep cell. `status` is `ok`, `no_converged` or `error: …`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub cell: Vec<f64>,
    pub mean_price: Option<f64>,
    pub std_error: Option<f64>,
    pub share_converged: f64,
    /// share of all sessions that settled on both agents playing the top grid action
    pub share_top: f64,
    pub collusion_index: Option<f64>,
    pub n_sessions: usize,
    pub status: String,
}

impl SweepRow {
    pub fn from_results(cell: Vec<f64>, results: &[SessionResult], game: &GameSpec, report: &AggregateReport) -> Self {
        let top = game.k() - 1;
        let at_top = results.iter().filter(|r| r.convergent_actions == Some((top, top))).count();
        let n = results.len().max(1) as f64;
        let status = if report.mean_price.is_some() { "ok" } else { "no_converged" };
        Self {
            cell,
            mean_price: report.mean_price,
            std_error: report.std_error,
            share_converged: report.share_converged,
            share_top: at_top as f64 / n,
            collusion_index: report.collusion_index,
            n_sessions: results.len(),
            status: status.to_string(),
        }
    }

    pub fn failed(cell: Vec<f64>, message: &str) -> Self {
        Self {
            cell,
            mean_price: None,
            std_error: None,
            share_converged: 0.0,
            share_top: 0.0,
            collusion_index: None,
            n_sessions: 0,
            status: format!("error: {}", message.replace([',', '\n'], ";")),
        }
    }

    /// 95% normal half-width.
    pub fn ci(&self) -> Option<f64> {
        self.std_error.map(|se| 1.96 * se)
    }
}

pub fn sweep_csv(banner: &str, axes: &[String], rows: &[SweepRow]) -> String {
    let mut s = format!(
        "{banner}\n{}{}mean_price,ci,std_error,share_converged,share_top,collusion_index,n_sessions,status\n",
        axes.join(","),
        if axes.is_empty() { "" } else { "," }
    );
    for r in rows {
        for v in &r.cell {
            write!(s, "{v},").unwrap();
        }
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            opt(r.mean_price),
            opt(r.ci()),
            opt(r.std_error),
            r.share_converged,
            r.share_top,
            opt(r.collusion_index),
            r.n_sessions,
            r.status
        )
        .unwrap();
    }
    s
}

#[derive(Serialize)]
pub struct Summary<'a> {
    pub config: &'a ExperimentConfig,
    pub config_hash: String,
    pub master_seed: u64,
    pub scaled: bool,
    pub aggregate: &'a AggregateReport,
    /// mean price of each converged session's final profile, for reference
    pub convergent_prices: Vec<Option<f64>>,
    pub sessions: &'a [SessionResult],
}

impl<'a> Summary<'a> {
    pub fn new(config: &'a ExperimentConfig, aggregate: &'a AggregateReport, sessions: &'a [SessionResult]) -> Self {
        let game = &config.sim.game;
        Self {
            config,
            config_hash: config.hash(),
            master_seed: config.sim.master_seed,
            scaled: config.scaled,
            aggregate,
            convergent_prices: sessions.iter().map(|r| r.convergent_actions.map(|p| pair_price(game, p))).collect(),
            sessions,
        }
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    write_file(path, &(text + "\n"))
}
