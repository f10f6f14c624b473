//! Deterministic discrete-event network fabric.
//!
//! A single virtual clock orders packet deliveries and entity timers. Loss
//! is drawn from one pseudo-random substream per link, derived from the run
//! seed and the link id, so adding a link never perturbs the others. Every
//! send is offered to the registered taps together with its outcome.

mod clock;
mod link;
mod tap;

use std::collections::BTreeMap;
use std::net::Ipv4Addr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use clock::SimClock;
pub use link::{EntityAddr, Link, LinkId};
pub use tap::{TapId, TapLog, TapOutcome, TapRecord, TapSink};

use crate::wirefmt::SimPacket;

/// Virtual milliseconds.
pub type Millis = u64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("unknown link `{0}`")]
    UnknownLink(String),
    #[error("packet {src} -> {dst} does not match the endpoints of link `{link}`")]
    EndpointMismatch {
        link: String,
        src: Ipv4Addr,
        dst: Ipv4Addr,
    },
    #[error("invalid link `{link}`: {reason}")]
    InvalidLink { link: String, reason: String },
    #[error("link `{0}` already exists")]
    DuplicateLink(String),
    #[error("time {requested} is before the clock ({now})")]
    TimeRegression { now: Millis, requested: Millis },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SendOutcome {
    Delivered { at: Millis },
    Dropped,
    /// Scheduled for a later send time; the outcome is decided then.
    Deferred { at: Millis },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone)]
pub struct Delivery {
    pub link: LinkId,
    pub from: EntityAddr,
    pub to: EntityAddr,
    pub packet: Arc<SimPacket>,
    pub sent_at: Millis,
}

/// What the event loop hands to the caller.
#[derive(Debug, Clone)]
pub enum Fired<T> {
    Delivery(Delivery),
    Timer(T),
}

enum NetEvent<T> {
    Delivery(Delivery),
    Timer(T),
    DeferredSend { link: LinkId, packet: SimPacket },
}

struct LinkState {
    link: Link,
    rng: ChaCha8Rng,
    stats: LinkStats,
}

/// Seed for a link's loss substream.
pub fn link_seed(run_seed: u64, link: &LinkId) -> u64 {
    // FNV-1a over the id, then a splitmix64 finaliser
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in link.as_str().bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = run_seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub struct Network<T = ()> {
    seed: u64,
    clock: SimClock<NetEvent<T>>,
    links: BTreeMap<LinkId, LinkState>,
    by_pair: BTreeMap<(Ipv4Addr, Ipv4Addr), Vec<LinkId>>,
    taps: Vec<(TapId, Box<dyn TapSink>)>,
    next_tap: u64,
    records: u64,
    sends: u64,
    pending_deliveries: usize,
}

impl<T> Network<T> {
    pub fn new(seed: u64) -> Self {
        Network {
            seed,
            clock: SimClock::new(),
            links: BTreeMap::new(),
            by_pair: BTreeMap::new(),
            taps: Vec::new(),
            next_tap: 0,
            records: 0,
            sends: 0,
            pending_deliveries: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn now(&self) -> Millis {
        self.clock.now()
    }

    pub fn add_link(&mut self, link: Link) -> Result<(), NetError> {
        if self.links.contains_key(&link.id) {
            return Err(NetError::DuplicateLink(link.id.to_string()));
        }
        let rng = ChaCha8Rng::seed_from_u64(link_seed(self.seed, &link.id));
        self.by_pair
            .entry(pair_key(link.endpoint_a.ip, link.endpoint_b.ip))
            .or_default()
            .push(link.id.clone());
        self.links.insert(
            link.id.clone(),
            LinkState {
                link,
                rng,
                stats: LinkStats::default(),
            },
        );
        Ok(())
    }

    pub fn link(&self, id: &LinkId) -> Option<&Link> {
        self.links.get(id).map(|s| &s.link)
    }

    pub fn links(&self) -> impl Iterator<Item = &Link> {
        self.links.values().map(|s| &s.link)
    }

    /// First link (in insertion order) joining two addresses.
    pub fn link_between(&self, a: Ipv4Addr, b: Ipv4Addr) -> Option<&LinkId> {
        self.by_pair.get(&pair_key(a, b)).and_then(|v| v.first())
    }

    pub fn link_stats(&self, id: &LinkId) -> Option<LinkStats> {
        self.links.get(id).map(|s| s.stats)
    }

    pub fn total_sends(&self) -> u64 {
        self.sends
    }

    pub fn pending_deliveries(&self) -> usize {
        self.pending_deliveries
    }

    pub fn queue_len(&self) -> usize {
        self.clock.len()
    }

    pub fn next_event_time(&self) -> Option<Millis> {
        self.clock.peek_time()
    }

    pub fn register_tap(&mut self, sink: Box<dyn TapSink>) -> TapId {
        let id = TapId(self.next_tap);
        self.next_tap += 1;
        self.taps.push((id, sink));
        id
    }

    pub fn unregister_tap(&mut self, id: TapId) -> bool {
        let before = self.taps.len();
        self.taps.retain(|(t, _)| *t != id);
        before != self.taps.len()
    }

    pub fn schedule_timer(&mut self, at: Millis, timer: T) -> Result<(), NetError> {
        self.clock.schedule(at, NetEvent::Timer(timer))
    }

    /// Sends `packet` over `link` now.
    pub fn send(&mut self, link: &LinkId, packet: SimPacket) -> Result<SendOutcome, NetError> {
        let now = self.now();
        self.send_at(link, packet, now)
    }

    /// Sends `packet` over `link` at time `at` (not before the clock).
    pub fn send_at(
        &mut self,
        link: &LinkId,
        packet: SimPacket,
        at: Millis,
    ) -> Result<SendOutcome, NetError> {
        let state = self
            .links
            .get(link)
            .ok_or_else(|| NetError::UnknownLink(link.to_string()))?;
        if state.link.direction(packet.src_ip, packet.dst_ip).is_none() {
            return Err(NetError::EndpointMismatch {
                link: link.to_string(),
                src: packet.src_ip,
                dst: packet.dst_ip,
            });
        }
        let now = self.now();
        if at < now {
            return Err(NetError::TimeRegression { now, requested: at });
        }
        if at > now {
            self.clock.schedule(
                at,
                NetEvent::DeferredSend {
                    link: link.clone(),
                    packet,
                },
            )?;
            self.pending_deliveries += 1;
            return Ok(SendOutcome::Deferred { at });
        }
        Ok(self.transmit(link, packet))
    }

    fn transmit(&mut self, link_id: &LinkId, packet: SimPacket) -> SendOutcome {
        let now = self.now();
        let state = self.links.get_mut(link_id).expect("link checked by caller");
        let (from, to) = state
            .link
            .direction(packet.src_ip, packet.dst_ip)
            .map(|(f, t)| (f.clone(), t.clone()))
            .expect("direction checked by caller");
        let dropped = if state.link.reliable {
            false
        } else {
            // one draw per send keeps the substream aligned across runs
            let draw: f64 = state.rng.gen();
            draw < state.link.loss_prob
        };
        state.stats.sent += 1;
        self.sends += 1;
        let packet = Arc::new(packet);
        let outcome = if dropped {
            state.stats.dropped += 1;
            SendOutcome::Dropped
        } else {
            state.stats.delivered += 1;
            let at = now + state.link.latency_ms;
            self.clock
                .schedule(
                    at,
                    NetEvent::Delivery(Delivery {
                        link: link_id.clone(),
                        from: from.clone(),
                        to: to.clone(),
                        packet: Arc::clone(&packet),
                        sent_at: now,
                    }),
                )
                .expect("delivery is never in the past");
            self.pending_deliveries += 1;
            SendOutcome::Delivered { at }
        };
        let tap_outcome = match outcome {
            SendOutcome::Delivered { at } => TapOutcome::Delivered { at },
            _ => TapOutcome::Dropped,
        };
        self.offer(TapRecord {
            seq: 0,
            ts: now,
            link: link_id.clone(),
            from,
            to,
            packet,
            outcome: tap_outcome,
        });
        outcome
    }

    /// Reports that a delivered packet was discarded as a redundant copy.
    pub fn report_elimination(&mut self, delivery: &Delivery) {
        self.offer(TapRecord {
            seq: 0,
            ts: self.now(),
            link: delivery.link.clone(),
            from: delivery.from.clone(),
            to: delivery.to.clone(),
            packet: Arc::clone(&delivery.packet),
            outcome: TapOutcome::EliminatedDuplicate,
        });
    }

    /// Reports that a delivered packet was discarded by its receiver.
    pub fn report_discard(&mut self, delivery: &Delivery, reason: &'static str) {
        self.offer(TapRecord {
            seq: 0,
            ts: self.now(),
            link: delivery.link.clone(),
            from: delivery.from.clone(),
            to: delivery.to.clone(),
            packet: Arc::clone(&delivery.packet),
            outcome: TapOutcome::Discarded { reason },
        });
    }

    fn offer(&mut self, mut record: TapRecord) {
        record.seq = self.records;
        self.records += 1;
        for (_, sink) in &mut self.taps {
            sink.observe(&record);
        }
    }

    /// Processes the next due event (at or before `t_end`). Deferred sends
    /// are performed internally and reported as `None` inside `Some`.
    fn pop_fired(&mut self, t_end: Millis) -> Option<Option<Fired<T>>> {
        let (_, event) = self.clock.pop_due(t_end)?;
        Some(match event {
            NetEvent::Delivery(d) => {
                self.pending_deliveries -= 1;
                Some(Fired::Delivery(d))
            }
            NetEvent::Timer(t) => Some(Fired::Timer(t)),
            NetEvent::DeferredSend { link, packet } => {
                self.pending_deliveries -= 1;
                self.transmit(&link, packet);
                None
            }
        })
    }

    /// Processes one event due at or before `t_end`; returns false when none
    /// is due.
    pub fn step<F>(&mut self, t_end: Millis, handler: &mut F) -> bool
    where
        F: FnMut(&mut Self, Fired<T>),
    {
        match self.pop_fired(t_end) {
            None => false,
            Some(None) => true,
            Some(Some(fired)) => {
                handler(self, fired);
                true
            }
        }
    }

    /// Processes every event with timestamp `<= t_end` in order, then sets
    /// the clock to `t_end`. Returns the number of events processed.
    pub fn run_until<F>(&mut self, t_end: Millis, mut handler: F) -> Result<usize, NetError>
    where
        F: FnMut(&mut Self, Fired<T>),
    {
        if t_end < self.now() {
            return Err(NetError::TimeRegression {
                now: self.now(),
                requested: t_end,
            });
        }
        let mut processed = 0;
        while self.step(t_end, &mut handler) {
            processed += 1;
        }
        self.clock.advance_to(t_end)?;
        Ok(processed)
    }
}

fn pair_key(a: Ipv4Addr, b: Ipv4Addr) -> (Ipv4Addr, Ipv4Addr) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wirefmt::Protocol;

    fn addr(name: &str, last: u8) -> EntityAddr {
        EntityAddr::new(name, Ipv4Addr::new(192, 168, 0, last))
    }

    fn pkt(src: u8, dst: u8) -> SimPacket {
        SimPacket::new(
            Protocol::Sbi,
            (Ipv4Addr::new(192, 168, 0, src), 7777),
            (Ipv4Addr::new(192, 168, 0, dst), 7777),
            vec![1, 2, 3],
        )
    }

    fn net_with(loss: f64, latency: Millis, reliable: bool) -> (Network, LinkId) {
        let mut net = Network::new(7);
        let link = Link::new("A-B", addr("A", 1), addr("B", 2), latency, loss, reliable).unwrap();
        let id = link.id.clone();
        net.add_link(link).unwrap();
        (net, id)
    }

    #[test]
    fn lossless_delivery_after_latency() {
        let (mut net, id) = net_with(0.0, 5, false);
        net.run_until(10, |_, _| {}).unwrap();
        assert_eq!(
            net.send(&id, pkt(1, 2)).unwrap(),
            SendOutcome::Delivered { at: 15 }
        );
        let mut seen = Vec::new();
        net.run_until(20, |n, f| {
            if let Fired::Delivery(d) = f {
                seen.push((n.now(), d.to.name.to_string()));
            }
        })
        .unwrap();
        assert_eq!(seen, vec![(15, "B".to_string())]);
        assert_eq!(net.now(), 20);
    }

    #[test]
    fn certain_loss_is_tapped() {
        let (mut net, id) = net_with(1.0, 5, false);
        let log = TapLog::new();
        net.register_tap(Box::new(log.clone()));
        assert_eq!(net.send(&id, pkt(2, 1)).unwrap(), SendOutcome::Dropped);
        assert_eq!(net.run_until(100, |_, _| {}).unwrap(), 0);
        let records = log.records();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].outcome, TapOutcome::Dropped);
        assert_eq!(&*records[0].from.name, "B");
    }

    #[test]
    fn reliable_links_ignore_loss() {
        let (mut net, id) = net_with(1.0, 1, true);
        for _ in 0..100 {
            assert!(matches!(
                net.send(&id, pkt(1, 2)).unwrap(),
                SendOutcome::Delivered { .. }
            ));
        }
    }

    #[test]
    fn errors() {
        let (mut net, id) = net_with(0.0, 1, false);
        assert!(matches!(
            net.send(&LinkId::new("nope"), pkt(1, 2)),
            Err(NetError::UnknownLink(_))
        ));
        assert!(matches!(
            net.send(&id, pkt(3, 4)),
            Err(NetError::EndpointMismatch { .. })
        ));
        assert!(Link::new("x", addr("A", 1), addr("B", 2), 1, 1.5, false).is_err());
    }

    #[test]
    fn empty_queue_advances_clock() {
        let mut net: Network = Network::new(0);
        assert_eq!(net.run_until(1234, |_, _| {}).unwrap(), 0);
        assert_eq!(net.now(), 1234);
        assert!(net.run_until(1000, |_, _| {}).is_err());
    }

    #[test]
    fn same_time_timers_fire_in_scheduling_order() {
        let mut net: Network<u32> = Network::new(0);
        for t in [3, 1, 2] {
            net.schedule_timer(50, t).unwrap();
        }
        let mut order = Vec::new();
        net.run_until(50, |_, f| {
            if let Fired::Timer(t) = f {
                order.push(t)
            }
        })
        .unwrap();
        assert_eq!(order, vec![3, 1, 2]);
    }

    #[test]
    fn deferred_send_is_tapped_at_its_time() {
        let (mut net, id) = net_with(0.0, 2, false);
        let log = TapLog::new();
        net.register_tap(Box::new(log.clone()));
        assert_eq!(
            net.send_at(&id, pkt(1, 2), 30).unwrap(),
            SendOutcome::Deferred { at: 30 }
        );
        assert!(log.is_empty());
        let mut delivered_at = None;
        net.run_until(40, |n, f| {
            if matches!(f, Fired::Delivery(_)) {
                delivered_at = Some(n.now())
            }
        })
        .unwrap();
        assert_eq!(delivered_at, Some(32));
        assert_eq!(log.records()[0].ts, 30);
    }

    #[test]
    fn link_substreams_do_not_depend_on_other_links() {
        let run = |extra: bool| {
            let mut net: Network = Network::new(99);
            if extra {
                net.add_link(Link::new("Z-Y", addr("Z", 9), addr("Y", 8), 1, 0.5, false).unwrap())
                    .unwrap();
            }
            net.add_link(Link::new("A-B", addr("A", 1), addr("B", 2), 1, 0.5, false).unwrap())
                .unwrap();
            let id = LinkId::new("A-B");
            (0..200)
                .map(|_| net.send(&id, pkt(1, 2)).unwrap() == SendOutcome::Dropped)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(false), run(true));
    }
}
