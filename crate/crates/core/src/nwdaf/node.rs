use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use super::{kpi_report, KpiKind, KpiReport, Window};
use crate::core_cp::{decode_sbi, NfAgent};
use crate::sim::{Ctx, TimerAction};
use crate::simnet::{Delivery, Millis};
use crate::wirefmt::{MsgKind, Protocol, Tag, TlvMessage};

/// Receiver of periodic reports inside the analytics function.
pub trait ReportSink {
    fn name(&self) -> &'static str;
    fn receive(&mut self, report: &KpiReport);
}

/// Analytics logical function. Interface only: counts what it is given.
#[derive(Debug, Clone, Default)]
pub struct Anlf {
    pub reports: u64,
}

impl ReportSink for Anlf {
    fn name(&self) -> &'static str {
        "AnLF"
    }

    fn receive(&mut self, _report: &KpiReport) {
        self.reports += 1;
    }
}

/// Model training logical function. Interface only.
#[derive(Debug, Clone, Default)]
pub struct Mtlf {
    pub reports: u64,
}

impl ReportSink for Mtlf {
    fn name(&self) -> &'static str {
        "MTLF"
    }

    fn receive(&mut self, _report: &KpiReport) {
        self.reports += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subscription {
    pub id: u32,
    pub consumer: String,
    pub consumer_addr: Ipv4Addr,
    pub kind: KpiKind,
    pub period_ms: Millis,
    pub last_at: Millis,
    pub notifications: u64,
}

/// The analytics function as a network participant: registers with the
/// NRF and serves periodic KPI subscriptions over SBI.
#[derive(Debug, Clone)]
pub struct NwdafNode {
    pub(crate) agent: NfAgent,
    subscriptions: BTreeMap<u32, Subscription>,
    next_id: u32,
    pub anlf: Anlf,
    pub mtlf: Mtlf,
}

impl NwdafNode {
    pub(crate) fn new(agent: NfAgent) -> Self {
        NwdafNode {
            agent,
            subscriptions: BTreeMap::new(),
            next_id: 1,
            anlf: Anlf::default(),
            mtlf: Mtlf::default(),
        }
    }

    pub fn name(&self) -> &str {
        &self.agent.profile.nf_id
    }

    pub fn subscriptions(&self) -> impl Iterator<Item = &Subscription> {
        self.subscriptions.values()
    }

    pub(crate) fn on_timer(&mut self, ctx: &mut Ctx, action: TimerAction) {
        let TimerAction::AnalyticsNotify(id) = action else {
            self.agent.on_timer(ctx, action);
            return;
        };
        let Some(sub) = self.subscriptions.get_mut(&id) else { return };
        let now = ctx.now();
        let window = Window::new(sub.last_at, now);
        let report = kpi_report(ctx.analytics.store().events(), window);
        sub.last_at = now;
        sub.notifications += 1;
        let (packets, bytes) = match sub.kind {
            KpiKind::PacketCounts => (report.delivered_events, 0),
            KpiKind::Throughput => (0, report.delivered_bytes),
        };
        let msg = TlvMessage::new(MsgKind::AnalyticsNotify)
            .with_u32(Tag::SubscriptionId, id)
            .with_u8(Tag::KpiKind, sub.kind.code())
            .with(Tag::WindowStart, window.start.to_be_bytes().to_vec())
            .with(Tag::WindowEnd, window.end.to_be_bytes().to_vec())
            .with(Tag::Packets, packets.to_be_bytes().to_vec())
            .with(Tag::Bytes, bytes.to_be_bytes().to_vec());
        let (to, period) = (sub.consumer_addr, sub.period_ms);
        ctx.send_msg(self.agent.ip(), to, Protocol::Sbi, &msg);
        self.anlf.receive(&report);
        self.mtlf.receive(&report);
        ctx.timer(now + period, self.agent.ip(), TimerAction::AnalyticsNotify(id));
    }

    pub(crate) fn on_delivery(&mut self, ctx: &mut Ctx, d: &Delivery) {
        let Some(msg) = decode_sbi(ctx, d) else { return };
        if self.agent.handle(ctx, d, &msg) {
            return;
        }
        if msg.msg_kind() != Some(MsgKind::AnalyticsSubscribeReq) {
            ctx.discard(d, "unsupported message");
            return;
        }
        let consumer = msg.get_str(Tag::NfId).unwrap_or("").to_string();
        let kind = msg.get_u8(Tag::KpiKind).and_then(KpiKind::from_code);
        let period = msg.get_u32(Tag::Period).unwrap_or(0) as Millis;
        let mut resp = TlvMessage::new(MsgKind::AnalyticsSubscribeResp);
        match kind {
            Some(kind) if period > 0 => {
                let id = self.next_id;
                self.next_id += 1;
                let now = ctx.now();
                self.subscriptions.insert(
                    id,
                    Subscription {
                        id,
                        consumer,
                        consumer_addr: d.packet.src_ip,
                        kind,
                        period_ms: period,
                        last_at: now,
                        notifications: 0,
                    },
                );
                resp = resp.with_u32(Tag::SubscriptionId, id);
                ctx.timer(now + period, self.agent.ip(), TimerAction::AnalyticsNotify(id));
            }
            _ => resp = resp.with_str(Tag::Cause, "invalid subscription"),
        }
        ctx.send_msg(self.agent.ip(), d.packet.src_ip, Protocol::Sbi, &resp);
    }
}
