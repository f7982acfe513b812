//! Security policies: accept/deny directives over traffic patterns, with
//! exceptions, administrator-declared priorities, and coherence checking.
//!
//! A policy is flattened into *elements*: one element per simple directive,
//! one remainder element per complex directive (its condition minus its
//! exceptions), and one element per exception with the opposite action.
//! Conflict detection runs on raw element domains; the priority relation
//! then shapes *effective* domains, and the policy is coherent when no
//! effective accept domain meets an effective deny domain.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::firewall::Action;
use crate::packetspace::{HeaderCube, HeaderPoint, PacketSet, PortRange, ProtocolSet};
use crate::topology::ZoneTable;

/// One side of a traffic pattern: a zone (or inline address set placed
/// inside a zone) resolved to concrete address intervals.
#[derive(Debug, Clone)]
pub struct Endpoint {
    /// Zone the endpoint belongs to, for path catalog lookup.
    pub zone: String,
    pub addresses: Vec<crate::packetspace::AddrRange>,
}

/// A resolved traffic pattern: who talks to whom, over what.
#[derive(Debug, Clone)]
pub struct TrafficPattern {
    pub src: Endpoint,
    pub dst: Endpoint,
    pub protocols: ProtocolSet,
    pub ports: PortRange,
}

impl TrafficPattern {
    /// The packet set matched by the pattern: the cross product of the two
    /// address sets with the protocol and port constraints.
    pub fn domain(&self) -> PacketSet {
        let mut cubes = Vec::new();
        for &src in &self.src.addresses {
            for &dst in &self.dst.addresses {
                cubes.push(HeaderCube::new(src, dst, self.protocols, self.ports));
            }
        }
        PacketSet::from_cubes(cubes)
    }
}

/// An exception carved out of a complex directive's condition.
#[derive(Debug, Clone)]
pub struct Exception {
    pub id: String,
    pub pattern: TrafficPattern,
}

/// A security directive: a condition pattern, an action, and optional
/// exceptions that take the opposite action.
#[derive(Debug, Clone)]
pub struct SecurityDirective {
    pub id: String,
    pub action: Action,
    pub condition: TrafficPattern,
    pub exceptions: Vec<Exception>,
}

/// How a policy element came to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    /// A directive without exceptions.
    SimpleDirective,
    /// What remains of a complex directive after removing its exceptions.
    DirectiveRemainder,
    /// An exception, carrying the action opposite to its directive.
    Exception,
}

impl ElementKind {
    pub fn name(self) -> &'static str {
        match self {
            ElementKind::SimpleDirective => "simple-directive",
            ElementKind::DirectiveRemainder => "directive-remainder",
            ElementKind::Exception => "exception",
        }
    }
}

/// One flattened policy element with its raw (pre-priority) domain.
#[derive(Debug, Clone)]
pub struct PolicyElement {
    pub id: String,
    pub source_directive: String,
    pub kind: ElementKind,
    pub action: Action,
    pub raw_domain: PacketSet,
    pub src_zone: String,
    pub dst_zone: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("duplicate element id '{0}'")]
    DuplicateElement(String),
    #[error("exception '{exception}' of directive '{directive}' does not intersect the directive's condition")]
    ExceptionOutsideCondition { directive: String, exception: String },
    #[error("priorities reference unknown element '{0}'")]
    UnknownElement(String),
    #[error("priority relation contains a cycle: {}", cycle.join(" -> "))]
    PriorityCycle { cycle: Vec<String> },
}

/// Flattens directives into policy elements.
///
/// Exceptions flip the directive's action; an exception whose domain does
/// not meet the condition carves nothing and is rejected.
pub fn extract_elements(directives: &[SecurityDirective]) -> Result<Vec<PolicyElement>, PolicyError> {
    let mut elements = Vec::new();
    let mut seen = BTreeSet::new();
    for d in directives {
        let condition = d.condition.domain();
        let mut carved = PacketSet::empty();
        let mut exception_elements = Vec::new();
        for e in &d.exceptions {
            let dom = e.pattern.domain();
            if dom.intersect(&condition).is_empty() {
                return Err(PolicyError::ExceptionOutsideCondition {
                    directive: d.id.clone(),
                    exception: e.id.clone(),
                });
            }
            carved = carved.union(&dom);
            exception_elements.push(PolicyElement {
                id: e.id.clone(),
                source_directive: d.id.clone(),
                kind: ElementKind::Exception,
                action: d.action.flipped(),
                raw_domain: dom,
                src_zone: e.pattern.src.zone.clone(),
                dst_zone: e.pattern.dst.zone.clone(),
            });
        }
        let kind = if d.exceptions.is_empty() {
            ElementKind::SimpleDirective
        } else {
            ElementKind::DirectiveRemainder
        };
        elements.push(PolicyElement {
            id: d.id.clone(),
            source_directive: d.id.clone(),
            kind,
            action: d.action,
            raw_domain: condition.difference(&carved),
            src_zone: d.condition.src.zone.clone(),
            dst_zone: d.condition.dst.zone.clone(),
        });
        elements.extend(exception_elements);
    }
    for e in &elements {
        if !seen.insert(e.id.clone()) {
            return Err(PolicyError::DuplicateElement(e.id.clone()));
        }
    }
    Ok(elements)
}

/// A pair of elements that impose contradictory actions on common packets.
#[derive(Debug, Clone)]
pub struct Conflict {
    pub accept_id: String,
    pub deny_id: String,
    pub intersection: PacketSet,
    pub witness: HeaderPoint,
}

/// All (accept, deny) element pairs whose raw domains intersect, each with
/// the shared packet set and a witness packet.
pub fn detect_conflicts(elements: &[PolicyElement]) -> Vec<Conflict> {
    let mut conflicts = Vec::new();
    for a in elements.iter().filter(|e| e.action == Action::Accept) {
        for d in elements.iter().filter(|e| e.action == Action::Deny) {
            let common = a.raw_domain.intersect(&d.raw_domain);
            if let Some(witness) = common.witness() {
                conflicts.push(Conflict {
                    accept_id: a.id.clone(),
                    deny_id: d.id.clone(),
                    intersection: common,
                    witness,
                });
            }
        }
    }
    conflicts
}

/// The administrator-declared priority relation: for each element, the set
/// of elements that take priority over it.
#[derive(Debug, Clone, Default)]
pub struct PriorityRelation {
    before: BTreeMap<String, BTreeSet<String>>,
}

impl PriorityRelation {
    pub fn empty() -> PriorityRelation {
        PriorityRelation::default()
    }

    /// Declares that `winner` takes priority over `element`.
    pub fn add(&mut self, element: &str, winner: &str) {
        self.before
            .entry(element.to_string())
            .or_default()
            .insert(winner.to_string());
    }

    pub fn before_of(&self, element: &str) -> impl Iterator<Item = &str> {
        self.before
            .get(element)
            .into_iter()
            .flat_map(|s| s.iter().map(String::as_str))
    }

    pub fn is_empty(&self) -> bool {
        self.before.is_empty()
    }

    pub fn referenced_ids(&self) -> BTreeSet<&str> {
        self.before
            .iter()
            .flat_map(|(k, v)| std::iter::once(k.as_str()).chain(v.iter().map(String::as_str)))
            .collect()
    }
}

/// An element after priority resolution.
#[derive(Debug, Clone)]
pub struct EffectiveElement {
    pub id: String,
    pub source_directive: String,
    pub kind: ElementKind,
    pub action: Action,
    pub domain: PacketSet,
    pub src_zone: String,
    pub dst_zone: String,
}

/// The policy with effective accept and deny domains.
#[derive(Debug, Clone)]
pub struct EffectivePolicy {
    pub elements: Vec<EffectiveElement>,
}

impl EffectivePolicy {
    pub fn accept_elements(&self) -> impl Iterator<Item = &EffectiveElement> {
        self.elements.iter().filter(|e| e.action == Action::Accept)
    }

    pub fn deny_elements(&self) -> impl Iterator<Item = &EffectiveElement> {
        self.elements.iter().filter(|e| e.action == Action::Deny)
    }
}

/// Resolves priorities into effective domains.
///
/// Each element's effective domain is its raw domain minus the union of the
/// *effective* domains of the elements before it; evaluation runs in
/// topological order over the priority graph, so a higher-priority element
/// that was itself restricted only subtracts what it actually kept.
pub fn effective_domains(
    elements: &[PolicyElement],
    priorities: &PriorityRelation,
) -> Result<EffectivePolicy, PolicyError> {
    let ids: BTreeSet<&str> = elements.iter().map(|e| e.id.as_str()).collect();
    for id in priorities.referenced_ids() {
        if !ids.contains(id) {
            return Err(PolicyError::UnknownElement(id.to_string()));
        }
    }
    let order = topological_order(elements, priorities)?;
    let by_id: BTreeMap<&str, &PolicyElement> =
        elements.iter().map(|e| (e.id.as_str(), e)).collect();
    let mut effective: BTreeMap<&str, PacketSet> = BTreeMap::new();
    for id in &order {
        let elem = by_id[id.as_str()];
        let mut domain = elem.raw_domain.clone();
        for winner in priorities.before_of(id) {
            domain = domain.difference(&effective[winner]);
        }
        effective.insert(id.as_str(), domain);
    }
    Ok(EffectivePolicy {
        elements: elements
            .iter()
            .map(|e| EffectiveElement {
                id: e.id.clone(),
                source_directive: e.source_directive.clone(),
                kind: e.kind,
                action: e.action,
                domain: effective[e.id.as_str()].clone(),
                src_zone: e.src_zone.clone(),
                dst_zone: e.dst_zone.clone(),
            })
            .collect(),
    })
}

/// Orders element ids so that every element appears after all elements
/// before it; reports a cycle when the relation admits no such order.
fn topological_order(
    elements: &[PolicyElement],
    priorities: &PriorityRelation,
) -> Result<Vec<String>, PolicyError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Unvisited,
        InProgress,
        Done,
    }

    fn visit(
        id: &str,
        priorities: &PriorityRelation,
        marks: &mut BTreeMap<String, Mark>,
        stack: &mut Vec<String>,
        order: &mut Vec<String>,
    ) -> Result<(), PolicyError> {
        match marks.get(id).copied().unwrap_or(Mark::Unvisited) {
            Mark::Done => return Ok(()),
            Mark::InProgress => {
                let start = stack.iter().position(|s| s == id).unwrap_or(0);
                let mut cycle: Vec<String> = stack[start..].to_vec();
                cycle.push(id.to_string());
                return Err(PolicyError::PriorityCycle { cycle });
            }
            Mark::Unvisited => {}
        }
        marks.insert(id.to_string(), Mark::InProgress);
        stack.push(id.to_string());
        for winner in priorities.before_of(id) {
            visit(winner, priorities, marks, stack, order)?;
        }
        stack.pop();
        marks.insert(id.to_string(), Mark::Done);
        order.push(id.to_string());
        Ok(())
    }

    let mut marks = BTreeMap::new();
    let mut order = Vec::new();
    let mut stack = Vec::new();
    for e in elements {
        visit(&e.id, priorities, &mut marks, &mut stack, &mut order)?;
    }
    Ok(order)
}

/// Outcome of the coherence test over effective domains.
#[derive(Debug, Clone)]
pub struct CoherenceReport {
    pub conflicts: Vec<Conflict>,
}

impl CoherenceReport {
    pub fn is_coherent(&self) -> bool {
        self.conflicts.is_empty()
    }
}

/// The policy is coherent iff every effective accept domain is disjoint
/// from every effective deny domain.
pub fn check_coherence(policy: &EffectivePolicy) -> CoherenceReport {
    let mut conflicts = Vec::new();
    for a in policy.accept_elements() {
        for d in policy.deny_elements() {
            let common = a.domain.intersect(&d.domain);
            if let Some(witness) = common.witness() {
                conflicts.push(Conflict {
                    accept_id: a.id.clone(),
                    deny_id: d.id.clone(),
                    intersection: common,
                    witness,
                });
            }
        }
    }
    CoherenceReport { conflicts }
}

/// Convenience used by zone-based endpoint construction.
pub fn zone_endpoint(zones: &ZoneTable, id: &str) -> Option<Endpoint> {
    zones.get(id).map(|z| Endpoint {
        zone: z.id.clone(),
        addresses: z.addresses.clone(),
    })
}
