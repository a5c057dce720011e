//! Lossy, delaying message bus in virtual time.

use rand::Rng;

use crate::geometry::{PiecewiseTrajectory, Vec3};

use super::RobotState;

/// Address of the centralized long-horizon planner.
pub const CENTRAL: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    PlanSuccess { robot: usize, stamp: f64 },
    DesiredTrajectory { robot: usize, task_id: u64, goal: Vec3, trajectory: PiecewiseTrajectory },
    StateReport { state: RobotState, time: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusMessage {
    pub sender: usize,
    pub receiver: usize,
    pub payload: Payload,
    pub send_time: f64,
    pub deliver_time: f64,
    seq: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BusStats {
    pub sent: u64,
    pub dropped: u64,
    pub delivered: u64,
}

#[derive(Debug, Clone)]
pub struct MessageBus {
    pub drop_probability: f64,
    pub delay_low: f64,
    pub delay_high: f64,
    in_flight: Vec<BusMessage>,
    next_seq: u64,
    stats: BusStats,
}

impl MessageBus {
    pub fn new(drop_probability: f64, delay_low: f64, delay_high: f64) -> Self {
        assert!((0.0..=1.0).contains(&drop_probability), "drop probability out of range");
        assert!(0.0 <= delay_low && delay_low <= delay_high, "invalid delay bounds");
        Self { drop_probability, delay_low, delay_high, in_flight: Vec::new(), next_seq: 0, stats: BusStats::default() }
    }

    pub fn stats(&self) -> BusStats {
        self.stats
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    fn sample_delay<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.delay_high > self.delay_low {
            rng.random_range(self.delay_low..=self.delay_high)
        } else {
            self.delay_low
        }
    }

    /// Sends with a sampled delay. Returns `false` if the message was dropped.
    pub fn send<R: Rng>(&mut self, sender: usize, receiver: usize, payload: Payload, now: f64, rng: &mut R) -> bool {
        let delay = self.sample_delay(rng);
        self.send_with_delay(sender, receiver, payload, now, delay, rng)
    }

    /// Sends with an explicit delay; the drop decision is still random.
    pub fn send_with_delay<R: Rng>(
        &mut self,
        sender: usize,
        receiver: usize,
        payload: Payload,
        now: f64,
        delay: f64,
        rng: &mut R,
    ) -> bool {
        self.stats.sent += 1;
        // always draw so the random stream does not depend on the drop setting
        let roll: f64 = rng.random();
        if roll < self.drop_probability {
            self.stats.dropped += 1;
            return false;
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.in_flight.push(BusMessage { sender, receiver, payload, send_time: now, deliver_time: now + delay, seq });
        true
    }

    /// Sends an independent copy to every receiver in `receivers` except the sender.
    pub fn broadcast<R: Rng>(
        &mut self,
        sender: usize,
        receivers: impl IntoIterator<Item = usize>,
        payload: Payload,
        now: f64,
        rng: &mut R,
    ) {
        for r in receivers {
            if r != sender {
                self.send(sender, r, payload.clone(), now, rng);
            }
        }
    }

    /// Removes and returns all messages for `receiver` due by `now`, in
    /// delivery-time order (send order breaks ties).
    pub fn poll(&mut self, receiver: usize, now: f64) -> Vec<BusMessage> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.in_flight.len() {
            let m = &self.in_flight[i];
            if m.receiver == receiver && m.deliver_time <= now {
                out.push(self.in_flight.swap_remove(i));
            } else {
                i += 1;
            }
        }
        out.sort_by(|a, b| a.deliver_time.total_cmp(&b.deliver_time).then(a.seq.cmp(&b.seq)));
        self.stats.delivered += out.len() as u64;
        out
    }
}
