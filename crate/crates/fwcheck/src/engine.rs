//! The conformance engine: per-firewall checks for positive directives and
//! per-path chained checks for restrictive directives.
//!
//! A positive element (traffic that must be accepted) passes only if every
//! firewall on every declared path accepts its whole effective domain. A
//! restrictive element (traffic that must be denied) passes a path if some
//! firewall along it blocks everything that earlier firewalls let through.
//!
//! Both checks scan each rule table once, maintaining the set `D` of packets
//! already claimed by earlier rules so each rule only acts on its effective
//! domain. Failures carry the residual packet set and a concrete witness.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::firewall::{Action, FirewallConfig};
use crate::packetspace::{HeaderPoint, PacketSet};
use crate::policy::{check_coherence, CoherenceReport, EffectiveElement, EffectivePolicy};
use crate::topology::{PathCatalog, TopologyError, ZoneTable};

/// Why a positive check failed.
#[derive(Debug, Clone)]
pub enum PositiveFailure {
    /// A deny rule's effective domain meets the directive's domain: the
    /// firewall actively drops traffic the policy requires.
    DenyRuleClash { rule: usize, clash: PacketSet },
    /// With a deny default, part of the directive's domain is covered by no
    /// accept rule and falls through to the default.
    UncoveredResidual { residual: PacketSet },
}

/// Verdict of checking one firewall against one positive element.
#[derive(Debug, Clone)]
pub enum PositiveVerdict {
    Success,
    Failure { cause: PositiveFailure, witness: HeaderPoint },
}

impl PositiveVerdict {
    pub fn is_success(&self) -> bool {
        matches!(self, PositiveVerdict::Success)
    }
}

/// Checks that `firewall` accepts all of `domain`.
///
/// Scans rules in order keeping `processed` (the packets earlier rules
/// already match) and, for deny-default firewalls, the residual of `domain`
/// not yet covered by an accept rule. The first deny rule whose effective
/// domain meets `domain` fails the check immediately; a nonempty residual
/// after the scan fails it on the default.
pub fn positive_check(firewall: &FirewallConfig, domain: &PacketSet) -> PositiveVerdict {
    let mut processed = PacketSet::empty();
    let mut residual = domain.clone();
    for (idx, rule) in firewall.rules.iter().enumerate() {
        let rule_domain = PacketSet::from_cube(rule.filter);
        let effective = rule_domain.difference(&processed);
        match rule.action {
            Action::Deny => {
                let clash = effective.intersect(domain);
                if let Some(witness) = clash.witness() {
                    return PositiveVerdict::Failure {
                        cause: PositiveFailure::DenyRuleClash { rule: idx + 1, clash },
                        witness,
                    };
                }
            }
            Action::Accept => {
                if firewall.default_action == Action::Deny {
                    residual = residual.difference(&effective);
                }
            }
        }
        processed = processed.union(&rule_domain);
    }
    if firewall.default_action == Action::Deny {
        if let Some(witness) = residual.witness() {
            return PositiveVerdict::Failure {
                cause: PositiveFailure::UncoveredResidual { residual },
                witness,
            };
        }
    }
    PositiveVerdict::Success
}

/// Verdict of checking one path against one restrictive element.
#[derive(Debug, Clone)]
pub enum RestrictiveVerdict {
    /// Some firewall blocked the whole carried residual. `blocked_at` is its
    /// 1-based position on the path; `None` only for the vacuous case of an
    /// empty domain on an empty path.
    Success { blocked_at: Option<usize> },
    /// The leaked set traverses the whole path unchallenged.
    Failure { leaked: PacketSet, witness: HeaderPoint },
}

impl RestrictiveVerdict {
    pub fn is_success(&self) -> bool {
        matches!(self, RestrictiveVerdict::Success { .. })
    }
}

/// Checks that every packet of `domain` is denied somewhere along `path`.
///
/// Carries the still-unblocked residual from firewall to firewall. At each
/// firewall the accepted part of the carried set is computed from the rule
/// table (accept rules accumulate under a deny default, deny rules subtract
/// under an accept default). An empty residual means the directive is
/// enforced at that firewall; a nonempty residual at the last firewall is
/// the leak.
pub fn restrictive_check(path: &[&FirewallConfig], domain: &PacketSet) -> RestrictiveVerdict {
    if path.is_empty() {
        return match domain.witness() {
            Some(witness) => RestrictiveVerdict::Failure { leaked: domain.clone(), witness },
            None => RestrictiveVerdict::Success { blocked_at: None },
        };
    }
    let mut carried = domain.clone();
    for (pos, firewall) in path.iter().enumerate() {
        let mut processed = PacketSet::empty();
        let mut accepted = match firewall.default_action {
            Action::Deny => PacketSet::empty(),
            Action::Accept => carried.clone(),
        };
        for rule in &firewall.rules {
            let rule_domain = PacketSet::from_cube(rule.filter);
            let effective = rule_domain.difference(&processed);
            match (rule.action, firewall.default_action) {
                (Action::Accept, Action::Deny) => accepted = accepted.union(&effective),
                (Action::Deny, Action::Accept) => accepted = accepted.difference(&effective),
                _ => {}
            }
            processed = processed.union(&rule_domain);
        }
        let residual = match firewall.default_action {
            Action::Accept => accepted,
            Action::Deny => carried.intersect(&accepted),
        };
        debug_assert!(residual.is_subset_of(&carried));
        match residual.witness() {
            None => return RestrictiveVerdict::Success { blocked_at: Some(pos + 1) },
            Some(witness) => {
                if pos + 1 < path.len() {
                    carried = residual;
                } else {
                    return RestrictiveVerdict::Failure { leaked: residual, witness };
                }
            }
        }
    }
    unreachable!("loop returns on the last firewall")
}

/// Per-firewall verdicts along one path for a positive element.
#[derive(Debug, Clone)]
pub struct PositivePathCheck {
    pub path: Vec<String>,
    pub verdicts: Vec<(String, PositiveVerdict)>,
}

/// One path's verdict for a restrictive element, with the rules that let
/// the witness through when it leaks.
#[derive(Debug, Clone)]
pub struct RestrictivePathCheck {
    pub path: Vec<String>,
    pub verdict: RestrictiveVerdict,
    /// For failures: per firewall, the 1-based rule that first matched the
    /// witness (`None` when the default action accepted it).
    pub accepted_by: Vec<(String, Option<usize>)>,
}

#[derive(Debug, Clone)]
pub enum ElementChecks {
    Positive(Vec<PositivePathCheck>),
    Restrictive(Vec<RestrictivePathCheck>),
}

/// Result of checking one policy element over all its paths.
#[derive(Debug, Clone)]
pub struct ElementCheck {
    pub element: EffectiveElement,
    /// The element's effective domain was empty: trivially enforced, worth a
    /// warning.
    pub vacuous: bool,
    pub checks: ElementChecks,
}

impl ElementCheck {
    pub fn conforms(&self) -> bool {
        match &self.checks {
            ElementChecks::Positive(paths) => paths
                .iter()
                .all(|p| p.verdicts.iter().all(|(_, v)| v.is_success())),
            ElementChecks::Restrictive(paths) => {
                paths.iter().all(|p| p.verdict.is_success())
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("policy is incoherent; resolve the listed conflicts before conformance checking")]
    IncoherentPolicy(CoherenceReport),
    #[error("element '{element}': {source}")]
    UnresolvedPaths {
        element: String,
        #[source]
        source: TopologyError,
    },
    #[error("path references unknown firewall '{0}'")]
    UnknownFirewall(String),
}

/// Checks one element against every declared path for its zone pair.
///
/// Positive elements are checked on every firewall of every path;
/// restrictive elements once per path with the residual carried along it.
pub fn check_directive(
    element: &EffectiveElement,
    catalog: &PathCatalog,
    zones: &ZoneTable,
    firewalls: &BTreeMap<String, FirewallConfig>,
) -> Result<ElementCheck, EngineError> {
    if element.domain.is_empty() {
        let checks = match element.action {
            Action::Accept => ElementChecks::Positive(Vec::new()),
            Action::Deny => ElementChecks::Restrictive(Vec::new()),
        };
        return Ok(ElementCheck { element: element.clone(), vacuous: true, checks });
    }
    let routes = catalog
        .paths_for(zones, &element.src_zone, &element.dst_zone)
        .map_err(|source| EngineError::UnresolvedPaths { element: element.id.clone(), source })?;
    let resolve = |route: &[String]| -> Result<Vec<&FirewallConfig>, EngineError> {
        route
            .iter()
            .map(|id| {
                firewalls
                    .get(id)
                    .ok_or_else(|| EngineError::UnknownFirewall(id.clone()))
            })
            .collect()
    };
    let checks = match element.action {
        Action::Accept => {
            let mut paths = Vec::new();
            for route in routes {
                let fws = resolve(route)?;
                let verdicts: Vec<(String, PositiveVerdict)> = fws
                    .iter()
                    .map(|fw| (fw.id.clone(), positive_check(fw, &element.domain)))
                    .collect();
                // every reported witness really is mishandled
                debug_assert!(verdicts.iter().zip(&fws).all(|((_, v), fw)| match v {
                    PositiveVerdict::Failure { witness, .. } =>
                        fw.first_match_action(*witness) == Action::Deny,
                    PositiveVerdict::Success => true,
                }));
                paths.push(PositivePathCheck { path: route.clone(), verdicts });
            }
            ElementChecks::Positive(paths)
        }
        Action::Deny => {
            let mut paths = Vec::new();
            for route in routes {
                let fws = resolve(route)?;
                let verdict = restrictive_check(&fws, &element.domain);
                let accepted_by = match &verdict {
                    RestrictiveVerdict::Failure { witness, .. } => {
                        debug_assert_eq!(
                            crate::oracle::simulate_path(&fws, *witness),
                            crate::oracle::PathOutcome::Accepted
                        );
                        fws.iter()
                            .map(|fw| (fw.id.clone(), fw.first_match_rule(*witness)))
                            .collect()
                    }
                    RestrictiveVerdict::Success { .. } => Vec::new(),
                };
                paths.push(RestrictivePathCheck { path: route.clone(), verdict, accepted_by });
            }
            ElementChecks::Restrictive(paths)
        }
    };
    Ok(ElementCheck { element: element.clone(), vacuous: false, checks })
}

/// Advisory notes attached to a conformance report.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Warning {
    /// The rule can never be the first match; earlier rules cover it.
    ShadowedRule { firewall: String, rule: usize },
    /// The element's effective domain is empty after priority resolution.
    EmptyElementDomain { element: String },
}

/// The full conformance outcome over a coherent policy.
#[derive(Debug)]
pub struct ConformanceCheck {
    pub elements: Vec<ElementCheck>,
    pub warnings: Vec<Warning>,
}

impl ConformanceCheck {
    pub fn conforms(&self) -> bool {
        self.elements.iter().all(ElementCheck::conforms)
    }
}

/// Runs every element of the policy against the deployed configuration.
///
/// Refuses incoherent policies: contradictory directives make any verdict
/// meaningless, so the conflicts are returned for resolution instead.
/// Element reports are ordered by element id; shadowing warnings cover every
/// firewall referenced by the catalog.
pub fn check_conformance(
    policy: &EffectivePolicy,
    catalog: &PathCatalog,
    zones: &ZoneTable,
    firewalls: &BTreeMap<String, FirewallConfig>,
) -> Result<ConformanceCheck, EngineError> {
    let coherence = check_coherence(policy);
    if !coherence.is_coherent() {
        return Err(EngineError::IncoherentPolicy(coherence));
    }
    let mut elements = Vec::new();
    let mut warnings = Vec::new();
    let mut ordered: Vec<&EffectiveElement> = policy.elements.iter().collect();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));
    for element in ordered {
        let check = check_directive(element, catalog, zones, firewalls)?;
        if check.vacuous {
            warnings.push(Warning::EmptyElementDomain { element: element.id.clone() });
        }
        elements.push(check);
    }
    for fw in firewalls.values() {
        for rule in fw.shadowed_rules() {
            warnings.push(Warning::ShadowedRule { firewall: fw.id.clone(), rule });
        }
    }
    warnings.sort();
    Ok(ConformanceCheck { elements, warnings })
}
