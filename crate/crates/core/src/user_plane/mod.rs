//! User plane: UPF forwarding rules and tunnel handling, plus the
//! data-network application server.

mod app;
mod rules;
mod upf;

pub use app::{document_content, document_digest, segment_document, AppServer};
pub use rules::{Direction, ForwardingRule, RuleAction, SeqPolicy, RULE_LEN};
pub use upf::{FlowCounters, Upf};
