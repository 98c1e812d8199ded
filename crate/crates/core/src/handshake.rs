//! Worst-case handshake latency and a cycle-level four-phase handshake
//! simulator used to validate it.
//!
//! Clock order everywhere is `[sender FSM, handshake-out, handshake-in, receiver FSM]`.

use crate::error::{DseError, Result};

pub const SENDER: usize = 0;
pub const HS_OUT: usize = 1;
pub const HS_IN: usize = 2;
pub const RECEIVER: usize = 3;

/// Worst-case handshake latency in cycles of the receiver and sender clocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HandshakeBounds {
    pub receiver: u64,
    pub sender: u64,
}

/// Closed-form worst-case cycle counts:
/// `L_r = ceil((P_s + 2 P_ho + P_hi + P_r) / P_r)`,
/// `L_s = ceil((2 P_s + 4 P_ho + 2 P_hi + P_r) / P_s)`.
pub fn handshake_bounds(p_s: f64, p_ho: f64, p_hi: f64, p_r: f64) -> HandshakeBounds {
    let receiver = ceil_snapped((p_s + 2.0 * p_ho + p_hi + p_r) / p_r);
    let sender = ceil_snapped((2.0 * p_s + 4.0 * p_ho + 2.0 * p_hi + p_r) / p_s);
    HandshakeBounds {
        receiver: receiver as u64,
        sender: sender as u64,
    }
}

/// Ceiling that treats values within a few ulps of an integer as that integer,
/// so period ratios like `5P / P` do not round up to 6.
fn ceil_snapped(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Cycles elapsed on each FSM clock from request issue to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HandshakeCycles {
    /// Receiver clock edges until the receiver FSM observes the event.
    pub receiver: u64,
    /// Sender clock edges until the sender FSM observes completion.
    pub sender: u64,
}

/// Simulates one four-phase handshake with integer tick periods and phase
/// offsets (`0 <= offset < period`). Each clock `c` has edges at
/// `offset[c] + k * period[c]`; a signal driven at an edge is sampled at the
/// strictly later edges of other clocks.
///
/// Sequence: the sender FSM issues the request at its first edge and drives
/// it one cycle later; handshake-out samples it and drives `req` one of its
/// cycles later; handshake-in samples `req` and raises the event; the
/// receiver FSM samples the event, processes it and raises `done` at the
/// same edge; handshake-in samples `done` and raises `ack`; handshake-out
/// samples `ack` and drives `complete` one cycle later; the sender FSM
/// samples `complete`.
pub fn simulate_handshake_ticks(periods: [u64; 4], offsets: [u64; 4]) -> Result<HandshakeCycles> {
    for c in 0..4 {
        if periods[c] == 0 {
            return Err(DseError::Contract("handshake clock period must be positive".into()));
        }
        if offsets[c] >= periods[c] {
            return Err(DseError::Contract(format!(
                "phase offset {} not below period {}",
                offsets[c], periods[c]
            )));
        }
    }
    let next = |c: usize, t: u64| -> u64 {
        let (p, off) = (periods[c], offsets[c]);
        if t < off {
            off
        } else {
            off + ((t - off) / p + 1) * p
        }
    };
    // Edges of clock `c` in the half-open interval (a, b].
    let count = |c: usize, a: u64, b: u64| -> u64 {
        let edges_upto = |t: u64| -> u64 {
            let (p, off) = (periods[c], offsets[c]);
            if t < off {
                0
            } else {
                (t - off) / p + 1
            }
        };
        edges_upto(b) - edges_upto(a)
    };

    let issue = offsets[SENDER];
    let send_req = issue + periods[SENDER];
    let req = next(HS_OUT, send_req) + periods[HS_OUT];
    let event = next(HS_IN, req);
    let seen = next(RECEIVER, event);
    let ack = next(HS_IN, seen);
    let complete = next(HS_OUT, ack) + periods[HS_OUT];
    let finished = next(SENDER, complete);

    let cycles = HandshakeCycles {
        receiver: count(RECEIVER, issue, seen),
        sender: count(SENDER, issue, finished),
    };

    let p = periods.map(|v| v as f64);
    let bound = handshake_bounds(p[SENDER], p[HS_OUT], p[HS_IN], p[RECEIVER]);
    if cycles.receiver > 10 * bound.receiver || cycles.sender > 10 * bound.sender {
        return Err(DseError::ProtocolModel(format!(
            "{cycles:?} exceeds ten times the analytic bound {bound:?}"
        )));
    }
    Ok(cycles)
}

/// Simulates with periods and offsets in seconds. Times are quantized to
/// `min(period) / 2^20` before running the integer simulator.
pub fn simulate_handshake(periods: [f64; 4], offsets: [f64; 4]) -> Result<HandshakeCycles> {
    for c in 0..4 {
        if !(periods[c] > 0.0) || !periods[c].is_finite() {
            return Err(DseError::Contract(format!(
                "handshake period must be positive, got {}",
                periods[c]
            )));
        }
        if !(offsets[c] >= 0.0 && offsets[c] < periods[c]) {
            return Err(DseError::Contract(format!(
                "phase offset {} outside [0, {})",
                offsets[c], periods[c]
            )));
        }
    }
    let quantum = periods.iter().copied().fold(f64::INFINITY, f64::min) / f64::from(1u32 << 20);
    let ticks = periods.map(|p| ((p / quantum).round() as u64).max(1));
    let mut offs = offsets.map(|o| (o / quantum).round() as u64);
    for c in 0..4 {
        offs[c] = offs[c].min(ticks[c] - 1);
    }
    simulate_handshake_ticks(ticks, offs)
}
