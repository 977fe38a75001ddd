use rand::Rng;

use super::cycle::orbit_cycle;
use super::schedule::{fuzzy_ceil, ExplorationClock};
use super::skip::{skip_profile, skip_update_closed_form};
use super::{session_seed, stream_rng, Cycle, EngineError, Horizon, SessionResult, SimConfig, Trace, TraceRow};
use crate::agents::{greedy_action, init_q, select_action, Mode, QState, UpdateKind};
use crate::games::GameSpec;
use crate::metrics::windowed_weighted_price;

/// Dispatches on the configured horizon.
pub fn run_session(cfg: &SimConfig, session_index: usize) -> Result<SessionResult, EngineError> {
    match cfg.horizon {
        Horizon::Decay { .. } => run_decay_session(cfg, session_index),
        Horizon::Constant { .. } => run_constant_session(cfg, session_index),
    }
}

fn init_pair<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Result<[QState; 2], EngineError> {
    let a = init_q(&cfg.game, &cfg.update, &cfg.init, cfg.mode, rng)?;
    let b = init_q(&cfg.game, &cfg.update, &cfg.init, cfg.mode, rng)?;
    Ok([a, b])
}

/// Memory agents start from a uniformly drawn action pair.
fn initial_obs<R: Rng + ?Sized>(mode: Mode, k: usize, rng: &mut R) -> [usize; 2] {
    match mode {
        Mode::Memoryless => [0, 0],
        Mode::Memory => {
            let p0 = rng.random_range(0..k);
            let p1 = rng.random_range(0..k);
            [p0 * k + p1, p1 * k + p0]
        }
    }
}

fn trace_row(
    t: u64,
    actions: (usize, usize),
    q: &[QState; 2],
    obs: [usize; 2],
    game: &GameSpec,
    delta: f64,
) -> TraceRow {
    let s0 = q[0].second_highest(obs[0]);
    let s1 = q[1].second_highest(obs[1]);
    TraceRow {
        t,
        actions,
        prices: (game.grid().value(actions.0), game.grid().value(actions.1)),
        argmax: (q[0].first_argmax(obs[0]), q[1].first_argmax(obs[1])),
        q2nd: (s0, s1),
        sustainable: ((1.0 - delta) * s0, (1.0 - delta) * s1),
        stationary: 2.0 * (1.0 - delta) * s0.max(s1),
    }
}

struct Recorder {
    stride: Option<u64>,
    rows: Vec<TraceRow>,
}

impl Recorder {
    fn new(stride: Option<u64>) -> Self {
        Self { stride, rows: Vec::new() }
    }

    #[inline]
    fn due(&self, t: u64) -> bool {
        matches!(self.stride, Some(s) if t.is_multiple_of(s))
    }

    fn finish(self) -> Option<Trace> {
        self.stride.map(|stride| Trace { stride, rows: self.rows })
    }
}

/// Counts consecutive periods without a change in the greedy policy.
enum Tracker {
    Memoryless { masks: [u64; 2], stable: u64 },
    Memory { k: usize, greedy: [Vec<u16>; 2], cycle: Vec<usize>, on_cycle: Vec<bool>, stable: u64 },
}

impl Tracker {
    fn new(q: &[QState; 2], joint: usize) -> Self {
        match q[0].mode() {
            Mode::Memoryless => Tracker::Memoryless { masks: [q[0].argmax_mask(0), q[1].argmax_mask(0)], stable: 0 },
            Mode::Memory => {
                let k = q[0].k();
                let greedy = [super::cycle::greedy_table(&q[0]), super::cycle::greedy_table(&q[1])];
                let cycle = orbit_cycle(&greedy[0], &greedy[1], k, joint);
                let mut on_cycle = vec![false; k * k];
                for &j in &cycle {
                    on_cycle[j] = true;
                }
                Tracker::Memory { k, greedy, cycle, on_cycle, stable: 0 }
            }
        }
    }

    /// Updates after a period whose updates touched rows `rows`; `joint` is
    /// the new joint observation `a0 * K + a1`. Returns the stable count.
    fn observe(&mut self, q: &[QState; 2], rows: [usize; 2], joint: usize) -> u64 {
        match self {
            Tracker::Memoryless { masks, stable } => {
                let now = [q[0].argmax_mask(0), q[1].argmax_mask(0)];
                if now == *masks {
                    *stable += 1;
                } else {
                    *masks = now;
                    *stable = 0;
                }
                *stable
            }
            Tracker::Memory { k, greedy, cycle, on_cycle, stable } => {
                let mut dirty = false;
                for i in 0..2 {
                    let g = q[i].first_argmax(rows[i]) as u16;
                    if greedy[i][rows[i]] != g {
                        greedy[i][rows[i]] = g;
                        dirty = true;
                    }
                }
                if dirty || !on_cycle[joint] {
                    let fresh = orbit_cycle(&greedy[0], &greedy[1], *k, joint);
                    if fresh != *cycle {
                        for &j in cycle.iter() {
                            on_cycle[j] = false;
                        }
                        for &j in &fresh {
                            on_cycle[j] = true;
                        }
                        *cycle = fresh;
                        *stable = 0;
                        return 0;
                    }
                }
                *stable += 1;
                *stable
            }
        }
    }

    fn cycle(&self, k: usize) -> Vec<(usize, usize)> {
        match self {
            Tracker::Memoryless { masks, .. } => {
                vec![(masks[0].trailing_zeros() as usize, masks[1].trailing_zeros() as usize)]
            }
            Tracker::Memory { cycle, .. } => cycle.iter().map(|&j| (j / k, j % k)).collect(),
        }
    }
}

/// Decaying-exploration session: play until each agent's greedy policy (on
/// the greedy orbit, for memory agents) has been unchanged for
/// `convergence_window` consecutive periods, or until the horizon.
pub fn run_decay_session(cfg: &SimConfig, session_index: usize) -> Result<SessionResult, EngineError> {
    cfg.validate()?;
    let max_periods = match cfg.horizon {
        Horizon::Decay { max_periods } => max_periods,
        Horizon::Constant { .. } => return Err(EngineError::Config("decay session needs a decay horizon".into())),
    };
    let game = &cfg.game;
    let rule = &cfg.update;
    let k = game.k();
    let mode = cfg.mode;
    let seed = session_seed(cfg.master_seed, session_index);
    let mut rng = stream_rng(seed, 0);
    let mut q = init_pair(cfg, &mut rng)?;
    let mut obs = initial_obs(mode, k, &mut rng);
    let mut tracker = Tracker::new(&q, obs[0]);
    let mut rec = Recorder::new(cfg.trace_stride);

    let mut t = 0u64;
    let mut converged = false;
    while t < max_periods {
        let a0 = select_action(&q[0], obs[0], &cfg.policy, t, &mut rng);
        let a1 = select_action(&q[1], obs[1], &cfg.policy, t, &mut rng);
        let next = [mode.next_obs(k, a0, a1), mode.next_obs(k, a1, a0)];
        q[0].apply_update(obs[0], a0, a1, next[0], game, rule)?;
        q[1].apply_update(obs[1], a1, a0, next[1], game, rule)?;
        let rows = obs;
        obs = next;
        if rec.due(t) {
            rec.rows.push(trace_row(t, (a0, a1), &q, obs, game, rule.delta));
        }
        t += 1;
        if tracker.observe(&q, rows, a0 * k + a1) >= cfg.convergence_window {
            converged = true;
            break;
        }
    }

    let (convergent_actions, cycle) = if converged {
        let pairs = tracker.cycle(k);
        if pairs.len() == 1 {
            (Some(pairs[0]), None)
        } else {
            (None, Some(Cycle { pairs }))
        }
    } else {
        (None, None)
    };
    Ok(SessionResult {
        session: session_index,
        seed,
        converged,
        convergent_actions,
        cycle,
        periods_elapsed: t,
        window_weighted_price: None,
        window_occupancy: None,
        final_profile: (q[0].first_argmax(obs[0]), q[1].first_argmax(obs[1])),
        final_q: q.to_vec(),
        trace: rec.finish(),
    })
}

/// Constant-ε session of `⌈T/ε⌉` periods with scheduled exploration events
/// and skip-ahead over quiet stretches at a stable symmetric profile.
pub fn run_constant_session(cfg: &SimConfig, session_index: usize) -> Result<SessionResult, EngineError> {
    run_constant_session_with(cfg, session_index, true)
}

/// As [`run_constant_session`], optionally without skip-ahead. Greedy play
/// at a strict argmax consumes no randomness, so both variants follow the
/// same random path and differ only by floating-point rounding.
pub fn run_constant_session_with(
    cfg: &SimConfig,
    session_index: usize,
    allow_skip: bool,
) -> Result<SessionResult, EngineError> {
    cfg.validate()?;
    let (eps, total) = match (cfg.policy.constant_epsilon(), cfg.constant_periods()) {
        (Some(eps), Some(total)) => (eps, total),
        _ => return Err(EngineError::Config("constant session needs a constant ε and horizon".into())),
    };
    let game = &cfg.game;
    let rule = &cfg.update;
    let k = game.k();
    let mode = cfg.mode;
    let seed = session_seed(cfg.master_seed, session_index);
    let mut rng = stream_rng(seed, 0);
    let mut clocks = [
        ExplorationClock::new(stream_rng(seed, 1), eps, total),
        ExplorationClock::new(stream_rng(seed, 2), eps, total),
    ];
    let mut q = init_pair(cfg, &mut rng)?;
    let mut obs = initial_obs(mode, k, &mut rng);
    let mut rec = Recorder::new(cfg.trace_stride);

    let window_len = fuzzy_ceil(cfg.window_explorations / eps).min(total);
    let window_start = total - window_len;
    let mut occupancy = vec![0u64; k * k];
    let skip_ok = allow_skip && mode == Mode::Memoryless && rule.kind == UpdateKind::Asynchronous;

    let mut t = 0u64;
    while t < total {
        let e0 = clocks[0].peek().unwrap_or(total);
        let e1 = clocks[1].peek().unwrap_or(total);
        let quiet_until = e0.min(e1);
        if skip_ok && t < quiet_until {
            if let Some(a) = skip_profile(&q, game, rule) {
                let payoff = game.payoff(a, a);
                if let Some(stride) = rec.stride {
                    let mut m = t.div_ceil(stride) * stride;
                    while m < quiet_until {
                        let mut snap = q.clone();
                        for qi in snap.iter_mut() {
                            let v = skip_update_closed_form(qi.get(0, a), payoff, rule.alpha, rule.delta, m - t + 1);
                            qi.set(0, a, v);
                        }
                        rec.rows.push(trace_row(m, (a, a), &snap, [0, 0], game, rule.delta));
                        m += stride;
                    }
                }
                let tau = quiet_until - t;
                for qi in q.iter_mut() {
                    let v = skip_update_closed_form(qi.get(0, a), payoff, rule.alpha, rule.delta, tau);
                    qi.set(0, a, v);
                }
                let lo = t.max(window_start);
                if quiet_until > lo {
                    occupancy[a * k + a] += quiet_until - lo;
                }
                t = quiet_until;
                continue;
            }
        }

        let mut actions = [0usize; 2];
        for i in 0..2 {
            actions[i] = if clocks[i].peek() == Some(t) {
                clocks[i].advance();
                rng.random_range(0..k)
            } else {
                greedy_action(&q[i], obs[i], &mut rng)
            };
        }
        let (a0, a1) = (actions[0], actions[1]);
        let next = [mode.next_obs(k, a0, a1), mode.next_obs(k, a1, a0)];
        q[0].apply_update(obs[0], a0, a1, next[0], game, rule)?;
        q[1].apply_update(obs[1], a1, a0, next[1], game, rule)?;
        obs = next;
        if t >= window_start {
            occupancy[a0 * k + a1] += 1;
        }
        if rec.due(t) {
            rec.rows.push(trace_row(t, (a0, a1), &q, obs, game, rule.delta));
        }
        t += 1;
    }

    let window_weighted_price =
        if total == 0 { None } else { windowed_weighted_price(&occupancy, game, cfg.symmetric_window_only).ok() };
    Ok(SessionResult {
        session: session_index,
        seed,
        converged: false,
        convergent_actions: None,
        cycle: None,
        periods_elapsed: t,
        window_weighted_price,
        window_occupancy: if total == 0 { None } else { Some(occupancy) },
        final_profile: (q[0].first_argmax(obs[0]), q[1].first_argmax(obs[1])),
        final_q: q.to_vec(),
        trace: rec.finish(),
    })
}
