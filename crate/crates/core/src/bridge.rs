//! Line-delimited JSON endpoint exposing one environment to an external
//! process.
//!
//! Each request is a single JSON object on one line with a `kind` and an
//! optional `id`; each gets exactly one reply line echoing the `id`:
//!
//! ```text
//! {"id":1,"kind":"spaces"}            -> {"id":1,"kind":"spaces_reply","state_len":..,"action_len":..,..}
//! {"id":2,"kind":"reset","seed":7}    -> {"id":2,"kind":"state_reply","state":[..]}
//! {"id":3,"kind":"step","action":[..]} -> {"id":3,"kind":"step_reply","state":[..],"reward":..,"done":..,"info":{..}}
//! {"id":4,"kind":"close"}             -> {"id":4,"kind":"closed"}
//! ```
//!
//! Anything that cannot be served yields `{"kind":"error","message":..}` and
//! the session carries on. Floats are written in shortest round-trip form,
//! so a client decoding with a correctly rounding parser sees the exact
//! values the simulator produced.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::env::{EnvConfig, HetNetEnv, StepOutcome};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Request {
    Reset { seed: u64 },
    Step { action: Vec<f64> },
    // Empty braces so unknown fields are rejected like the other kinds.
    Spaces {},
    Close {},
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireInfo {
    pub fairness: f64,
    pub total_power_mw: f64,
    pub sum_throughput_mbps: f64,
    pub mean_band_fraction: f64,
    pub mean_power_norm: f64,
    pub mean_sched_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reply {
    StateReply {
        state: Vec<f64>,
    },
    StepReply {
        state: Vec<f64>,
        reward: f64,
        done: bool,
        info: WireInfo,
    },
    SpacesReply {
        state_len: usize,
        action_len: usize,
        n_stations: usize,
        n_users: usize,
        horizon: usize,
        action_low: f64,
        action_high: f64,
    },
    Closed,
    Error {
        message: String,
    },
}

#[derive(Serialize)]
struct Envelope<'a> {
    id: &'a Value,
    #[serde(flatten)]
    reply: &'a Reply,
}

fn step_reply(o: StepOutcome) -> Reply {
    Reply::StepReply {
        info: WireInfo {
            fairness: o.info.fairness,
            total_power_mw: o.info.total_power_mw,
            sum_throughput_mbps: o.info.sum_throughput_mbps(),
            mean_band_fraction: o.info.mean_band_fraction,
            mean_power_norm: o.info.mean_power_norm,
            mean_sched_score: o.info.mean_sched_score,
        },
        state: o.next_state,
        reward: o.reward,
        done: o.done,
    }
}

/// One environment behind the protocol.
pub struct Session {
    env: HetNetEnv,
    closed: bool,
}

impl Session {
    pub fn new(config: EnvConfig) -> Result<Self> {
        Ok(Session {
            env: HetNetEnv::new(config)?,
            closed: false,
        })
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn handle(&mut self, req: Request) -> Reply {
        match req {
            Request::Reset { seed } => Reply::StateReply {
                state: self.env.reset(seed),
            },
            Request::Step { action } => match self.env.step(&action) {
                Ok(o) => step_reply(o),
                Err(e) => Reply::Error { message: e.to_string() },
            },
            Request::Spaces {} => {
                let l = self.env.layout();
                Reply::SpacesReply {
                    state_len: l.state_len(),
                    action_len: l.action_len(),
                    n_stations: l.n_stations,
                    n_users: l.n_users,
                    horizon: self.env.horizon(),
                    action_low: 0.0,
                    action_high: 1.0,
                }
            }
            Request::Close {} => {
                self.closed = true;
                Reply::Closed
            }
        }
    }

    /// Answers one request line; the returned line has no trailing newline.
    pub fn handle_line(&mut self, line: &str) -> String {
        let (id, reply) = match serde_json::from_str::<Value>(line) {
            Err(e) => (Value::Null, Reply::Error {
                message: format!("malformed JSON: {e}"),
            }),
            Ok(mut v) => {
                let id = v.as_object_mut().and_then(|o| o.remove("id")).unwrap_or(Value::Null);
                let reply = match serde_json::from_value::<Request>(v) {
                    Ok(req) => self.handle(req),
                    Err(e) => Reply::Error {
                        message: format!("bad request: {e}"),
                    },
                };
                (id, reply)
            }
        };
        serde_json::to_string(&Envelope { id: &id, reply: &reply }).expect("replies serialize")
    }
}

/// Serves requests until `close` or end of input. Blank lines are skipped.
pub fn serve<R: BufRead, W: Write>(config: EnvConfig, reader: R, mut writer: W) -> Result<()> {
    let mut session = Session::new(config)?;
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io("<bridge input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let out = session.handle_line(&line);
        writeln!(writer, "{out}")
            .and_then(|_| writer.flush())
            .map_err(|e| Error::io("<bridge output>", e))?;
        if session.is_closed() {
            break;
        }
    }
    Ok(())
}
