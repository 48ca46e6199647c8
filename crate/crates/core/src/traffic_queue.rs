//! Bursty arrivals and FCFS hard-deadline queues.
//!
//! Sizes are integer bits so that bit accounting is exact. A packet that
//! arrives at slot `a` may be served during slots `a..a + D` and is dropped
//! at the start of slot `a + D` if anything of it remains.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

pub const BITS_PER_KBIT: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub arrival_slot: u64,
    pub original_bits: u64,
    pub remaining_bits: u64,
}

impl Packet {
    pub fn new(arrival_slot: u64, original_bits: u64) -> Self {
        assert!(original_bits > 0, "packets must carry at least one bit");
        Self {
            arrival_slot,
            original_bits,
            remaining_bits: original_bits,
        }
    }

    pub fn transmitted_bits(&self) -> u64 {
        self.original_bits - self.remaining_bits
    }

    pub fn age(&self, slot: u64) -> u64 {
        slot - self.arrival_slot
    }
}

/// Packet-size distribution in Kbit.
pub trait PacketSizes {
    fn sample_kbit<R: Rng + ?Sized>(&self, rng: &mut R) -> u64;
}

/// Poisson(lambda) Kbit; zero draws are redrawn.
#[derive(Debug, Clone, Copy)]
pub struct PoissonSizes {
    dist: Poisson<f64>,
}

impl PoissonSizes {
    pub fn new(mean_kbit: f64) -> Option<Self> {
        Poisson::new(mean_kbit).ok().map(|dist| Self { dist })
    }
}

impl PacketSizes for PoissonSizes {
    fn sample_kbit<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        loop {
            let k = self.dist.sample(rng) as u64;
            if k > 0 {
                return k;
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedSize(pub u64);

impl PacketSizes for FixedSize {
    fn sample_kbit<R: Rng + ?Sized>(&self, _rng: &mut R) -> u64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserQueue {
    user: usize,
    deadline: usize,
    packets: VecDeque<Packet>,
}

/// A packet completed in one slot, with the FCFS backlog that was ahead of it
/// and its remaining size at the start of service.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub slot: u64,
    pub user: usize,
    pub packet: Packet,
    pub backlog_ahead: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Expired {
    pub slot: u64,
    pub user: usize,
    pub packet: Packet,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ServeResult {
    pub delivered: Vec<Delivery>,
    pub bits_served: u64,
}

impl UserQueue {
    pub fn new(user: usize, deadline: usize) -> Self {
        assert!(deadline > 0, "deadline must be at least one slot");
        Self {
            user,
            deadline,
            packets: VecDeque::with_capacity(deadline),
        }
    }

    pub fn user(&self) -> usize {
        self.user
    }

    pub fn deadline(&self) -> usize {
        self.deadline
    }

    pub fn packets(&self) -> impl Iterator<Item = &Packet> {
        self.packets.iter()
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn remaining_bits(&self) -> u64 {
        self.packets.iter().map(|p| p.remaining_bits).sum()
    }

    /// Appends a packet; arrival slots must be strictly increasing.
    pub fn push(&mut self, packet: Packet) {
        if let Some(last) = self.packets.back() {
            assert!(
                packet.arrival_slot > last.arrival_slot,
                "at most one arrival per user per slot"
            );
        }
        self.packets.push_back(packet);
        debug_assert!(self.packets.len() <= self.deadline);
    }

    /// One Bernoulli(`arrival_prob`) arrival at the start of `slot`.
    pub fn arrive<R: Rng + ?Sized, S: PacketSizes>(
        &mut self,
        slot: u64,
        rng: &mut R,
        arrival_prob: f64,
        sizes: &S,
    ) -> Option<Packet> {
        if arrival_prob <= 0.0 {
            return None;
        }
        if rng.random::<f64>() >= arrival_prob {
            return None;
        }
        let packet = Packet::new(slot, sizes.sample_kbit(rng) * BITS_PER_KBIT);
        self.push(packet);
        Some(packet)
    }

    /// Head-first service with `budget` bits. A packet is delivered iff the
    /// backlog ahead of it plus its remaining bits fit in the budget; the first
    /// packet that does not fit absorbs the leftover.
    pub fn serve_fcfs(&mut self, slot: u64, budget: u64) -> ServeResult {
        let mut left = budget;
        let mut backlog = 0u64;
        let mut result = ServeResult::default();
        while let Some(head) = self.packets.front_mut() {
            if head.remaining_bits <= left {
                let packet = *head;
                self.packets.pop_front();
                left -= packet.remaining_bits;
                result.delivered.push(Delivery {
                    slot,
                    user: self.user,
                    packet,
                    backlog_ahead: backlog,
                });
                backlog += packet.remaining_bits;
            } else {
                head.remaining_bits -= left;
                left = 0;
                break;
            }
        }
        result.bits_served = budget - left;
        result
    }

    /// Removes the packet that reached its deadline at the start of `slot`.
    pub fn expire(&mut self, slot: u64) -> Option<Expired> {
        let head = self.packets.front()?;
        if head.age(slot) >= self.deadline as u64 {
            debug_assert_eq!(head.age(slot), self.deadline as u64);
            debug_assert!(head.remaining_bits > 0);
            let packet = self.packets.pop_front().unwrap();
            return Some(Expired {
                slot,
                user: self.user,
                packet,
            });
        }
        None
    }
}

/// Everything that happened to the queues during one transition.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SlotOutcome {
    pub delivered: Vec<Delivery>,
    pub dropped: Vec<Expired>,
    pub arrived: Vec<(usize, Packet)>,
    /// Per-user service budget `R_i τ` in bits.
    pub budgets: Vec<u64>,
    pub bits_served: Vec<u64>,
}

/// Instantaneous effective throughput: original sizes of the packets
/// delivered in the slot, divided by the slot length `tau` (slots).
pub fn hlc_et_reward(outcome: &SlotOutcome, tau: f64) -> f64 {
    outcome
        .delivered
        .iter()
        .map(|d| d.packet.original_bits as f64)
        .sum::<f64>()
        / tau
}

/// Fixed-length `(Q, Q̄)` vectors: user-major, oldest age first, zero where no
/// packet of that age is queued.
pub fn queue_state_vectors(queues: &[UserQueue], slot: u64) -> (Vec<u64>, Vec<u64>) {
    let total: usize = queues.iter().map(|q| q.deadline).sum();
    let mut remaining = vec![0u64; total];
    let mut original = vec![0u64; total];
    let mut offset = 0;
    for q in queues {
        for p in &q.packets {
            let age = p.age(slot) as usize;
            assert!(age < q.deadline, "queue holds a packet past its deadline");
            let idx = offset + q.deadline - 1 - age;
            remaining[idx] = p.remaining_bits;
            original[idx] = p.original_bits;
        }
        offset += q.deadline;
    }
    (remaining, original)
}

/// Inverse of [`queue_state_vectors`].
pub fn decode_queue_state(
    remaining: &[u64],
    original: &[u64],
    deadlines: &[usize],
    slot: u64,
) -> Vec<UserQueue> {
    let mut offset = 0;
    let mut queues = Vec::with_capacity(deadlines.len());
    for (user, &d) in deadlines.iter().enumerate() {
        let mut q = UserQueue::new(user, d);
        for pos in 0..d {
            let idx = offset + pos;
            if original[idx] > 0 {
                let age = (d - 1 - pos) as u64;
                q.push(Packet {
                    arrival_slot: slot - age,
                    original_bits: original[idx],
                    remaining_bits: remaining[idx],
                });
            }
        }
        offset += d;
        queues.push(q);
    }
    queues
}
