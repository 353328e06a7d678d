//! Which sinks are reachable right now, and simulators for tests.
//!
//! Script format: one line per tick. Each line holds whitespace-separated
//! `sink=up` / `sink=down` flags; `*` sets every sink not named on that line.
//! Sinks not covered by a flag are down. Blank lines are ticks with
//! everything down; `#` starts a comment. After the last line the final
//! state persists.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, RwLock};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::SyncError;
use crate::model::SinkId;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectivityState {
    /// State of sinks with no explicit flag.
    pub default_up: bool,
    pub sinks: BTreeMap<SinkId, bool>,
}

impl ConnectivityState {
    pub fn all_up() -> Self {
        ConnectivityState {
            default_up: true,
            sinks: BTreeMap::new(),
        }
    }

    pub fn all_down() -> Self {
        ConnectivityState::default()
    }

    pub fn only(up: impl IntoIterator<Item = SinkId>) -> Self {
        ConnectivityState {
            default_up: false,
            sinks: up.into_iter().map(|s| (s, true)).collect(),
        }
    }

    pub fn is_up(&self, sink: &SinkId) -> bool {
        self.sinks.get(sink).copied().unwrap_or(self.default_up)
    }

    pub fn set(&mut self, sink: SinkId, up: bool) {
        self.sinks.insert(sink, up);
    }

    /// Parse one script line.
    pub fn parse_line(line: &str) -> Result<Self, String> {
        let line = line.split('#').next().unwrap_or("");
        let mut state = ConnectivityState::all_down();
        for token in line.split_whitespace() {
            let (name, flag) = token
                .split_once('=')
                .ok_or_else(|| format!("expected sink=up|down, got `{token}`"))?;
            let up = match flag {
                "up" => true,
                "down" => false,
                other => return Err(format!("flag must be up or down, got `{other}`")),
            };
            if name == "*" {
                state.default_up = up;
            } else if name.is_empty() {
                return Err(format!("missing sink name in `{token}`"));
            } else {
                state.set(SinkId::from(name), up);
            }
        }
        Ok(state)
    }

    /// Per-sink view for the given sinks.
    pub fn resolve<'a>(&self, sinks: impl IntoIterator<Item = &'a SinkId>) -> BTreeMap<SinkId, bool> {
        sinks.into_iter().map(|s| (s.clone(), self.is_up(s))).collect()
    }
}

/// Source of connectivity readings. Probing never touches the queue.
pub trait ConnectivityProbe: Send + Sync {
    fn probe(&self) -> ConnectivityState;
}

impl ConnectivityProbe for ConnectivityState {
    fn probe(&self) -> ConnectivityState {
        self.clone()
    }
}

/// Replays a tick script, one line per probe.
#[derive(Debug)]
pub struct ScriptedConnectivity {
    ticks: Vec<ConnectivityState>,
    cursor: AtomicUsize,
}

impl ScriptedConnectivity {
    pub fn parse(script: &str) -> Result<Self, SyncError> {
        let ticks = script
            .lines()
            .enumerate()
            .map(|(i, line)| {
                ConnectivityState::parse_line(line).map_err(|message| SyncError::Script { line: i + 1, message })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ScriptedConnectivity {
            ticks,
            cursor: AtomicUsize::new(0),
        })
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }
}

impl ConnectivityProbe for ScriptedConnectivity {
    fn probe(&self) -> ConnectivityState {
        let i = self.cursor.fetch_add(1, Ordering::SeqCst);
        match self.ticks.len() {
            0 => ConnectivityState::all_down(),
            n => self.ticks[i.min(n - 1)].clone(),
        }
    }
}

/// Each listed sink is independently up with probability `p_up` per probe.
#[derive(Debug)]
pub struct RandomConnectivity {
    sinks: BTreeSet<SinkId>,
    p_up: f64,
    rng: Mutex<StdRng>,
}

impl RandomConnectivity {
    pub fn new(sinks: impl IntoIterator<Item = SinkId>, p_up: f64, seed: u64) -> Self {
        RandomConnectivity {
            sinks: sinks.into_iter().collect(),
            p_up,
            rng: Mutex::new(StdRng::seed_from_u64(seed)),
        }
    }
}

impl ConnectivityProbe for RandomConnectivity {
    fn probe(&self) -> ConnectivityState {
        let mut rng = self.rng.lock().unwrap();
        let mut state = ConnectivityState::all_down();
        for sink in &self.sinks {
            state.set(sink.clone(), rng.gen_bool(self.p_up));
        }
        state
    }
}

/// Connectivity that an operator (or the HTTP API) flips by hand.
#[derive(Debug, Default)]
pub struct SharedConnectivity {
    state: RwLock<ConnectivityState>,
}

impl SharedConnectivity {
    pub fn new(initial: ConnectivityState) -> Self {
        SharedConnectivity {
            state: RwLock::new(initial),
        }
    }

    pub fn replace(&self, state: ConnectivityState) {
        *self.state.write().unwrap() = state;
    }

    pub fn set(&self, sink: SinkId, up: bool) {
        self.state.write().unwrap().set(sink, up);
    }
}

impl ConnectivityProbe for SharedConnectivity {
    fn probe(&self) -> ConnectivityState {
        self.state.read().unwrap().clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_lines_parse() {
        let script = "\
# warm-up: nothing reachable

*=up public_microblog=down
private_db=up   # only the team database
";
        let sim = ScriptedConnectivity::parse(script).unwrap();
        assert_eq!(sim.len(), 4);
        let comment = sim.probe();
        assert!(!comment.is_up(&SinkId::PrivateDb));
        let blank = sim.probe();
        assert!(!blank.is_up(&SinkId::PrivateDb));
        let third = sim.probe();
        assert!(third.is_up(&SinkId::RawRepo));
        assert!(!third.is_up(&SinkId::PublicMicroblog));
        let fourth = sim.probe();
        assert!(fourth.is_up(&SinkId::PrivateDb) && !fourth.is_up(&SinkId::RawRepo));
        // Past the end the last line holds.
        assert_eq!(sim.probe(), fourth);
    }

    #[test]
    fn bad_script_lines_report_their_number() {
        match ScriptedConnectivity::parse("*=up\nprivate_db=maybe\n") {
            Err(SyncError::Script { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(ConnectivityState::parse_line("private_db").is_err());
        assert!(ConnectivityState::parse_line("=up").is_err());
    }

    #[test]
    fn random_connectivity_is_seeded() {
        let sinks = [SinkId::PrivateDb, SinkId::ContextRepo];
        let a = RandomConnectivity::new(sinks.clone(), 0.3, 5);
        let b = RandomConnectivity::new(sinks, 0.3, 5);
        let ups: usize = (0..1000)
            .map(|_| {
                let (x, y) = (a.probe(), b.probe());
                assert_eq!(x, y);
                usize::from(x.is_up(&SinkId::PrivateDb))
            })
            .sum();
        assert!((230..370).contains(&ups), "{ups}");
    }
}
