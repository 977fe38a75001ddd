//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if
//! any criterion fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use collusion_cli::presets::{baseline_game, baseline_sim};
use collusion_cli::{cmd_simulate, simulate, ExperimentConfig};
use collusion_core::agents::{EpsilonSchedule, Mode, PolicySpec, QState, UpdateKind, UpdateRuleSpec};
use collusion_core::engine::{skip_update_closed_form, Horizon, SimConfig};
use collusion_core::games::{check_assumptions, make_bertrand, make_mixed_auction, make_prisoners_dilemma};
use collusion_core::stability::{scan_valid_perturbations, shipped_instances, valid_perturbations_auction, verify};

const SEED: u64 = 20_240_601;

// criterion tolerances
const C2_REL_ERR: f64 = 1e-9;
const C3_MIN_PRICE: f64 = 0.55;
const C4_MAX_PRICE: f64 = 0.25;
const C5_DELTAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 0.95];
const C5_MAX_INVERSION: f64 = 0.05;
const C6_LOW_DELTA: f64 = 0.5;
const C6_LOW_MAX: f64 = 0.15;
const C6_HIGH_DELTA: f64 = 0.9;
const C6_HIGH_MIN: f64 = 0.45;
const C7_MIN_PRICES: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
const C7_KNEE: f64 = 0.4;
const C7_TOL: f64 = 0.05;
const C8_LOW_OMEGA: f64 = 0.3;
const C8_LOW_SHARE: f64 = 0.8;
const C8_HIGH_OMEGA: f64 = 0.9;
const C8_HIGH_SHARE: f64 = 0.5;
const C9_SYNC_MAX: f64 = 0.15;

struct Outcome {
    pass: bool,
    detail: String,
}

fn experiment(sim: SimConfig) -> ExperimentConfig {
    ExperimentConfig { sim, sweep: Vec::new(), threads: None, preset: None, scaled: true }
}

/// Scaled baseline: δ = 0.95, α = 0.15, β = 1e-4, 30 sessions, window 1e4, horizon 1e7.
fn baseline(delta: f64) -> SimConfig {
    let mut sim = baseline_sim(baseline_game(), true);
    sim.update.delta = delta;
    sim.master_seed = SEED;
    sim
}

fn mean_price(sim: SimConfig) -> Option<f64> {
    simulate(&experiment(sim), threads()).ok()?.report.mean_price
}

fn threads() -> usize {
    collusion_cli::resolve_threads(None, None)
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "none".into())
}

fn c1() -> Outcome {
    let mut games = vec![
        ("bertrand", make_bertrand(10, 0.1, 1.0, 0.0).unwrap()),
        ("pd", make_prisoners_dilemma(0.0, 1.0, 2.0, 3.0).unwrap()),
    ];
    for omega in [0.0, 0.25, 0.5, 0.75, 1.0] {
        games.push(("auction", make_mixed_auction(10, 1.0, omega).unwrap()));
    }
    let failed: Vec<String> = games
        .iter()
        .filter(|(_, g)| !check_assumptions(g).pass)
        .map(|(n, g)| format!("{n}:{:?}", g.param("omega")))
        .collect();
    Outcome { pass: failed.is_empty(), detail: format!("{} games checked, failures {failed:?}", games.len()) }
}

fn c2() -> Outcome {
    let game = baseline_game();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let a = rng.random_range(0..10);
        let alpha = rng.random_range(0.01..=1.0);
        let delta = rng.random_range(0.0..0.99);
        let fixed = game.payoff(a, a) / (1.0 - delta);
        let q0 = fixed + rng.random_range(-0.9..5.0) * fixed.max(0.05);
        let tau = rng.random_range(1..2_000u64);
        let rule = UpdateRuleSpec::new(UpdateKind::Asynchronous, alpha, delta).unwrap();
        let mut q = QState::filled(10, Mode::Memoryless, q0.min(fixed) - 1.0);
        q.set(0, a, q0);
        for _ in 0..tau {
            q.update_async(0, a, a, 0, &game, &rule);
        }
        let closed = skip_update_closed_form(q0, game.payoff(a, a), alpha, delta, tau);
        worst = worst.max((closed - q.get(0, a)).abs() / q.get(0, a).abs().max(1e-12));
    }
    Outcome {
        pass: worst < C2_REL_ERR,
        detail: format!("10000 tuples, worst relative error {worst:.2e} (< {C2_REL_ERR:e})"),
    }
}

fn c3(async_mean: Option<f64>) -> Outcome {
    Outcome {
        pass: async_mean.is_some_and(|p| p >= C3_MIN_PRICE),
        detail: format!("δ=0.95 mean convergent price {} (≥ {C3_MIN_PRICE})", fmt(async_mean)),
    }
}

fn c4() -> Outcome {
    let m = mean_price(baseline(0.0));
    Outcome {
        pass: m.is_some_and(|p| p <= C4_MAX_PRICE),
        detail: format!("δ=0 mean convergent price {} (≤ {C4_MAX_PRICE})", fmt(m)),
    }
}

fn c5() -> Outcome {
    let means: Vec<Option<f64>> = C5_DELTAS.iter().map(|&d| mean_price(baseline(d))).collect();
    let detail = format!(
        "means {:?} over δ {:?} (one inversion ≤ {C5_MAX_INVERSION} allowed)",
        means.iter().map(|m| fmt(*m)).collect::<Vec<_>>(),
        C5_DELTAS
    );
    let Some(m): Option<Vec<f64>> = means.into_iter().collect() else {
        return Outcome { pass: false, detail };
    };
    let drops: Vec<f64> = m.windows(2).map(|w| w[0] - w[1]).filter(|&d| d > 0.0).collect();
    let pass = drops.is_empty() || (drops.len() == 1 && drops[0] <= C5_MAX_INVERSION);
    Outcome { pass, detail }
}

fn constant_sim(delta: f64) -> SimConfig {
    let mut sim = baseline(delta);
    sim.policy = PolicySpec::EpsilonGreedy { schedule: EpsilonSchedule::Constant { epsilon: 1e-4 } };
    sim.horizon = Horizon::Constant { explorations: 1e4 };
    sim.sessions = 20;
    sim
}

fn c6() -> Outcome {
    let lo = mean_price(constant_sim(C6_LOW_DELTA));
    let hi = mean_price(constant_sim(C6_HIGH_DELTA));
    Outcome {
        pass: lo.is_some_and(|p| p <= C6_LOW_MAX) && hi.is_some_and(|p| p >= C6_HIGH_MIN),
        detail: format!(
            "ε=1e-4 T=1e4: δ={C6_LOW_DELTA} window price {} (≤ {C6_LOW_MAX}), δ={C6_HIGH_DELTA} {} (≥ {C6_HIGH_MIN})",
            fmt(lo),
            fmt(hi)
        ),
    }
}

fn c7() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for &min in &C7_MIN_PRICES {
        let mut sim = baseline(0.95);
        sim.game = make_bertrand(10, min, 1.0, 0.0).unwrap();
        let m = mean_price(sim);
        if min >= C7_KNEE - 1e-12 {
            pass &= m.is_some_and(|p| (p - min).abs() <= C7_TOL);
        }
        parts.push(format!("{min}→{}", fmt(m)));
    }
    Outcome { pass, detail: format!("{} (|price − min| ≤ {C7_TOL} for min ≥ {C7_KNEE})", parts.join(", ")) }
}

fn top_share(omega: f64) -> Option<f64> {
    let mut sim = baseline(0.95);
    sim.game = make_mixed_auction(10, 1.0, omega).unwrap();
    let top = sim.game.k() - 1;
    let out = simulate(&experiment(sim), threads()).ok()?;
    let hits = out.results.iter().filter(|r| r.convergent_actions == Some((top, top))).count();
    Some(hits as f64 / out.results.len() as f64)
}

fn c8() -> Outcome {
    let lo = top_share(C8_LOW_OMEGA);
    let hi = top_share(C8_HIGH_OMEGA);
    Outcome {
        pass: lo.is_some_and(|s| s >= C8_LOW_SHARE) && hi.is_some_and(|s| s < C8_HIGH_SHARE),
        detail: format!(
            "share at bid 0.9: ω={C8_LOW_OMEGA} {} (≥ {C8_LOW_SHARE}), ω={C8_HIGH_OMEGA} {} (< {C8_HIGH_SHARE})",
            fmt(lo),
            fmt(hi)
        ),
    }
}

fn c9(async_mean: Option<f64>) -> Outcome {
    let mut sync = baseline(0.95);
    sync.update.kind = UpdateKind::Synchronous;
    let mut down = baseline(0.95);
    down.update.kind = UpdateKind::SynchronousDownward;
    let s = mean_price(sync);
    let d = mean_price(down);
    let pass = s.is_some_and(|p| p <= C9_SYNC_MAX) && matches!((d, async_mean), (Some(d), Some(a)) if d < a);
    Outcome {
        pass,
        detail: format!(
            "synchronous {} (≤ {C9_SYNC_MAX}), downward {} (< asynchronous {})",
            fmt(s),
            fmt(d),
            fmt(async_mean)
        ),
    }
}

fn c10() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for cfg in shipped_instances() {
        let name = cfg.name.clone().unwrap_or_default();
        let t = Instant::now();
        match verify(&cfg) {
            Ok(r) => {
                let ok = r.pass
                    && r.all_singletons
                    && r.absorbing_characterization_ok
                    && r.nash_escape_ok
                    && r.order.irreflexive
                    && r.order.transitive
                    && r.order.descent_ok
                    && r.stable_set == vec![r.s_n];
                pass &= ok;
                parts.push(format!(
                    "{name}: {} states {} absorbing {} in {:.1?}",
                    r.state_count,
                    r.absorbing.len(),
                    if ok { "ok" } else { "FAIL" },
                    t.elapsed()
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: error {e}"));
            }
        }
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn c11() -> Outcome {
    let mut cells = 0;
    let mut mismatches = Vec::new();
    for k in 2..=10 {
        for step in 0..=10 {
            let omega = step as f64 / 10.0;
            for b in 0..k - 1 {
                cells += 1;
                let closed = valid_perturbations_auction(k, 1.0, omega, b).map(|p| p.grid_indices);
                let scan = scan_valid_perturbations(k, 1.0, omega, b);
                if closed.ok() != scan.ok() {
                    mismatches.push((k, omega, b));
                }
            }
        }
    }
    Outcome { pass: mismatches.is_empty(), detail: format!("{cells} cells, mismatches {mismatches:?}") }
}

fn c12() -> Outcome {
    let mut sim = baseline(0.95);
    sim.sessions = 8;
    let cfg = experiment(sim);
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let runs: Vec<Option<Vec<u8>>> = dirs
        .iter()
        .zip([1, 4, threads()])
        .map(|(d, n)| {
            cmd_simulate(&cfg, d.path(), n).ok()?;
            std::fs::read(d.path().join("sessions.csv")).ok()
        })
        .collect();
    let pass = runs[0].is_some() && runs.iter().all(|r| r == &runs[0]);
    let bytes = runs[0].as_ref().map_or(0, Vec::len);
    Outcome {
        pass,
        detail: format!("3 runs (1, 4, {} threads), sessions.csv {bytes} bytes identical={pass}", threads()),
    }
}

fn main() {
    // cargo passes harness flags such as --nocapture; filters are not supported
    let started = Instant::now();
    let mut async_mean = None;
    let mut failures = 0;
    for id in 1..=12 {
        let t = Instant::now();
        let out = match id {
            1 => c1(),
            2 => c2(),
            3 => {
                async_mean = mean_price(baseline(0.95));
                c3(async_mean)
            }
            4 => c4(),
            5 => c5(),
            6 => c6(),
            7 => c7(),
            8 => c8(),
            9 => c9(async_mean),
            10 => c10(),
            11 => c11(),
            _ => c12(),
        };
        if !out.pass {
            failures += 1;
        }
        println!("{} criterion {id}: {} [{:.1?}]", if out.pass { "PASS" } else { "FAIL" }, out.detail, t.elapsed());
    }
    println!("acceptance: {} passed, {failures} failed in {:.1?}", 12 - failures, started.elapsed());
    if failures > 0 {
        std::process::exit(1);
    }
}
