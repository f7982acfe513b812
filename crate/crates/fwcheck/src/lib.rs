//! Conformance checking for distributed firewall deployments.
//!
//! Given a declarative security policy, the zones of a network, and the
//! ordered rule tables of every firewall, this crate decides whether the
//! deployed firewalls enforce the policy on every possible traffic path. It
//! also checks the policy itself for internal conflicts, and every negative
//! verdict comes with a concrete witness packet plus the offending rule or
//! the leaked packet set.
//!
//! The main pieces:
//!
//! * [`packetspace`] - exact set algebra over packet headers.
//! * [`firewall`] - first-match rule semantics and effective rule domains.
//! * [`policy`] - directives, exceptions, priorities, coherence.
//! * [`topology`] - zones and the per-zone-pair path catalog.
//! * [`engine`] - the per-firewall and per-path conformance checks.
//! * [`oracle`] - exhaustive enumeration on downscaled universes, used as
//!   independent ground truth.
//! * [`input`], [`job`], [`report`] - document loading, the verification
//!   workflow, and report emission for the `fwcheck` binary.

pub mod engine;
pub mod firewall;
pub mod input;
pub mod job;
pub mod oracle;
pub mod packetspace;
pub mod policy;
pub mod report;
pub mod topology;
