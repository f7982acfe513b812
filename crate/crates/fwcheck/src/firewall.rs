//! Firewall configurations: ordered filtering rules with an explicit default
//! action and first-match semantics.
//!
//! A rule is decisive for the packets in its *effective domain*: its own
//! filter domain minus everything an earlier rule already matches. The
//! accepted/denied set characterization below is built from these effective
//! domains and agrees pointwise with [`FirewallConfig::first_match_action`].

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::packetspace::{HeaderCube, HeaderPoint, PacketSet};

/// What a firewall does with a matched packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Accept,
    Deny,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::Accept => "accept",
            Action::Deny => "deny",
        }
    }

    pub fn flipped(self) -> Action {
        match self {
            Action::Accept => Action::Deny,
            Action::Deny => Action::Accept,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown action '{0}' (expected 'accept' or 'deny')")]
pub struct UnknownAction(pub String);

impl FromStr for Action {
    type Err = UnknownAction;

    fn from_str(s: &str) -> Result<Self, UnknownAction> {
        match s {
            "accept" => Ok(Action::Accept),
            "deny" => Ok(Action::Deny),
            other => Err(UnknownAction(other.to_string())),
        }
    }
}

/// One filtering rule. Its 1-based order is its position in the
/// configuration's rule sequence.
#[derive(Debug, Clone)]
pub struct FilteringRule {
    pub filter: HeaderCube,
    pub action: Action,
}

/// An ordered rule table plus the default action applied when no rule
/// matches. The default is always explicit input, never inferred.
#[derive(Debug, Clone)]
pub struct FirewallConfig {
    pub id: String,
    pub rules: Vec<FilteringRule>,
    pub default_action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("rule index {index} out of range (firewall has {len} rules)")]
pub struct RuleIndexError {
    pub index: usize,
    pub len: usize,
}

impl FirewallConfig {
    pub fn new(id: impl Into<String>, rules: Vec<FilteringRule>, default_action: Action) -> Self {
        FirewallConfig { id: id.into(), rules, default_action }
    }

    /// The set of packets for which rule `order` (1-based) is the first
    /// match: its domain minus the union of all earlier rule domains.
    pub fn effective_domain(&self, order: usize) -> Result<PacketSet, RuleIndexError> {
        if order == 0 || order > self.rules.len() {
            return Err(RuleIndexError { index: order, len: self.rules.len() });
        }
        let mut earlier = PacketSet::empty();
        for rule in &self.rules[..order - 1] {
            earlier = earlier.union(&PacketSet::from_cube(rule.filter));
        }
        Ok(PacketSet::from_cube(self.rules[order - 1].filter).difference(&earlier))
    }

    /// 1-based order of the first rule matching `p`, or `None` when the
    /// default action applies.
    pub fn first_match_rule(&self, p: HeaderPoint) -> Option<usize> {
        self.rules
            .iter()
            .position(|r| r.filter.contains(p))
            .map(|i| i + 1)
    }

    /// The action the firewall takes for `p` under first-match semantics.
    pub fn first_match_action(&self, p: HeaderPoint) -> Action {
        match self.first_match_rule(p) {
            Some(order) => self.rules[order - 1].action,
            None => self.default_action,
        }
    }

    /// Union of the effective domains of all rules carrying `action`.
    fn effective_union(&self, action: Action) -> PacketSet {
        let mut seen = PacketSet::empty();
        let mut marked = PacketSet::empty();
        for rule in &self.rules {
            let dom = PacketSet::from_cube(rule.filter);
            if rule.action == action {
                marked = marked.union(&dom.difference(&seen));
            }
            seen = seen.union(&dom);
        }
        marked
    }

    /// All packets the firewall accepts. With a deny default this is the
    /// union of the accept rules' effective domains; with an accept default
    /// it is the complement of the deny rules' effective domains.
    pub fn accepted_set(&self) -> PacketSet {
        match self.default_action {
            Action::Deny => self.effective_union(Action::Accept),
            Action::Accept => PacketSet::full().difference(&self.effective_union(Action::Deny)),
        }
    }

    /// All packets the firewall denies; complementary to `accepted_set`.
    pub fn denied_set(&self) -> PacketSet {
        match self.default_action {
            Action::Accept => self.effective_union(Action::Deny),
            Action::Deny => PacketSet::full().difference(&self.effective_union(Action::Accept)),
        }
    }

    /// 1-based orders of rules whose effective domain is empty: they can
    /// never be the first match, earlier rules cover them entirely.
    pub fn shadowed_rules(&self) -> Vec<usize> {
        let mut seen = PacketSet::empty();
        let mut shadowed = Vec::new();
        for (i, rule) in self.rules.iter().enumerate() {
            let dom = PacketSet::from_cube(rule.filter);
            if dom.difference(&seen).is_empty() {
                shadowed.push(i + 1);
            }
            seen = seen.union(&dom);
        }
        shadowed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packetspace::{
        cube_of, AddrRange, PortRange, Protocol, ProtocolSet, UniverseSpec,
    };
    use proptest::prelude::*;

    /// The two-rule configuration where an early broad accept shadows a
    /// narrow worm-port deny.
    fn shadowing_firewall() -> FirewallConfig {
        FirewallConfig::new(
            "FW",
            vec![
                FilteringRule {
                    filter: cube_of("214.0.0.0/8", "*", "tcp", "*").unwrap(),
                    action: Action::Accept,
                },
                FilteringRule {
                    filter: cube_of("214.65.0.0/16", "*", "tcp", "445").unwrap(),
                    action: Action::Deny,
                },
            ],
            Action::Deny,
        )
    }

    fn worm_packet() -> HeaderPoint {
        HeaderPoint::new(
            u32::from(std::net::Ipv4Addr::new(214, 65, 0, 1)),
            0,
            Protocol::Tcp,
            445,
        )
    }

    #[test]
    fn fully_shadowed_rule_has_empty_effective_domain() {
        let fw = shadowing_firewall();
        assert!(fw.effective_domain(2).unwrap().is_empty());
        assert!(!fw.effective_domain(1).unwrap().is_empty());
        assert_eq!(fw.shadowed_rules(), vec![2]);
    }

    #[test]
    fn first_rule_effective_domain_is_unchanged() {
        let fw = shadowing_firewall();
        let dom = PacketSet::from_cube(fw.rules[0].filter);
        assert!(fw.effective_domain(1).unwrap().set_eq(&dom));
    }

    #[test]
    fn effective_domain_index_out_of_range() {
        let fw = shadowing_firewall();
        assert!(fw.effective_domain(0).is_err());
        assert!(fw.effective_domain(3).is_err());
    }

    #[test]
    fn shadowed_deny_never_fires() {
        let fw = shadowing_firewall();
        assert_eq!(fw.first_match_action(worm_packet()), Action::Accept);
    }

    #[test]
    fn swapping_the_rules_closes_the_hole() {
        let mut fw = shadowing_firewall();
        fw.rules.swap(0, 1);
        assert_eq!(fw.first_match_action(worm_packet()), Action::Deny);
        assert!(fw.shadowed_rules().is_empty());
    }

    #[test]
    fn empty_rule_list_applies_default() {
        let accept_all = FirewallConfig::new("A", vec![], Action::Accept);
        let deny_all = FirewallConfig::new("D", vec![], Action::Deny);
        let p = HeaderPoint::new(1, 2, Protocol::Udp, 3);
        assert_eq!(accept_all.first_match_action(p), Action::Accept);
        assert_eq!(deny_all.first_match_action(p), Action::Deny);
        assert!(accept_all.accepted_set().set_eq(&PacketSet::full()));
        assert!(deny_all.accepted_set().is_empty());
        assert!(deny_all.denied_set().set_eq(&PacketSet::full()));
    }

    #[test]
    fn unmatched_packet_hits_default_deny() {
        // F2 of the case study: no rule matches DNS traffic from zone 3
        let f2 = FirewallConfig::new(
            "F2",
            vec![
                FilteringRule {
                    filter: cube_of("193.95.0.0/16", "10.1.1.2", "tcp", "23").unwrap(),
                    action: Action::Accept,
                },
                FilteringRule {
                    filter: cube_of("10.0.0.0/8", "192.168.2.2", "tcp", "22").unwrap(),
                    action: Action::Accept,
                },
                FilteringRule {
                    filter: cube_of("193.95.0.0/16", "192.168.2.0/24", "*", "*").unwrap(),
                    action: Action::Accept,
                },
            ],
            Action::Deny,
        );
        let dns = HeaderPoint::new(
            u32::from(std::net::Ipv4Addr::new(10, 96, 0, 1)),
            u32::from(std::net::Ipv4Addr::new(192, 168, 2, 1)),
            Protocol::Udp,
            53,
        );
        assert_eq!(f2.first_match_rule(dns), None);
        assert_eq!(f2.first_match_action(dns), Action::Deny);
    }

    #[test]
    fn non_overlapping_earlier_rule_leaves_effective_domain_intact() {
        // telnet (port 23) and the ssh deny (port 22) do not overlap, so the
        // second rule keeps its full domain
        let f3 = FirewallConfig::new(
            "F3",
            vec![
                FilteringRule {
                    filter: cube_of("193.95.0.0/16", "192.168.2.0/24", "tcp", "22").unwrap(),
                    action: Action::Deny,
                },
                FilteringRule {
                    filter: cube_of("193.95.0.0/16", "10.1.1.2", "tcp", "23").unwrap(),
                    action: Action::Accept,
                },
            ],
            Action::Accept,
        );
        let raw = PacketSet::from_cube(f3.rules[1].filter);
        assert!(f3.effective_domain(2).unwrap().set_eq(&raw));
    }

    #[test]
    fn accept_default_accepted_set_is_complement_of_effective_denies() {
        let f1 = FirewallConfig::new(
            "F1",
            vec![
                FilteringRule {
                    filter: cube_of("193.95.0.0/16", "10.1.1.2", "tcp", "23").unwrap(),
                    action: Action::Accept,
                },
                FilteringRule {
                    filter: cube_of("193.95.0.0/16", "10.0.0.0/8", "*", "*").unwrap(),
                    action: Action::Deny,
                },
                FilteringRule {
                    filter: cube_of("10.0.0.0/8", "192.168.2.1", "udp", "53").unwrap(),
                    action: Action::Accept,
                },
            ],
            Action::Accept,
        );
        let expected = PacketSet::full().difference(&f1.effective_domain(2).unwrap());
        assert!(f1.accepted_set().set_eq(&expected));
    }

    #[test]
    fn denied_set_of_shadowing_firewall_is_complement_of_first_rule() {
        let fw = shadowing_firewall();
        let expected = PacketSet::full().difference(&PacketSet::from_cube(fw.rules[0].filter));
        assert!(fw.denied_set().set_eq(&expected));
    }

    fn small_universe() -> UniverseSpec {
        UniverseSpec::new(
            4,
            4,
            ProtocolSet::singleton(Protocol::Tcp).with(Protocol::Udp),
            3,
        )
        .unwrap()
    }

    fn arb_firewall() -> impl Strategy<Value = FirewallConfig> {
        let rule = (
            (0u32..16, 0u32..16),
            (0u32..16, 0u32..16),
            1u8..4,
            (0u16..8, 0u16..8),
            any::<bool>(),
        )
            .prop_map(|((s1, s2), (d1, d2), protos, (p1, p2), accept)| {
                let protos = [Protocol::Tcp, Protocol::Udp]
                    .into_iter()
                    .enumerate()
                    .filter(|(i, _)| protos & (1 << i) != 0)
                    .map(|(_, p)| p)
                    .collect::<ProtocolSet>();
                FilteringRule {
                    filter: HeaderCube::new(
                        AddrRange::new(s1.min(s2), s1.max(s2)),
                        AddrRange::new(d1.min(d2), d1.max(d2)),
                        protos,
                        PortRange::new(p1.min(p2), p1.max(p2)),
                    ),
                    action: if accept { Action::Accept } else { Action::Deny },
                }
            });
        (proptest::collection::vec(rule, 0..5), any::<bool>()).prop_map(|(rules, accept)| {
            FirewallConfig::new(
                "FW",
                rules,
                if accept { Action::Accept } else { Action::Deny },
            )
        })
    }

    proptest! {
        #[test]
        fn accepted_and_denied_sets_are_complementary(fw in arb_firewall()) {
            let acc = fw.accepted_set();
            let den = fw.denied_set();
            prop_assert!(acc.intersect(&den).is_empty());
            prop_assert!(acc.union(&den).set_eq(&PacketSet::full()));
        }

        #[test]
        fn accepted_set_agrees_with_first_match(fw in arb_firewall()) {
            let acc = fw.accepted_set();
            for p in small_universe().points() {
                prop_assert_eq!(acc.member(p), fw.first_match_action(p) == Action::Accept);
            }
        }

        #[test]
        fn effective_domains_partition_the_matched_space(fw in arb_firewall()) {
            let doms: Vec<PacketSet> = (1..=fw.rules.len())
                .map(|i| fw.effective_domain(i).unwrap())
                .collect();
            for (i, a) in doms.iter().enumerate() {
                for b in &doms[i + 1..] {
                    prop_assert!(a.intersect(b).is_empty());
                }
            }
            let union_eff = doms.iter().fold(PacketSet::empty(), |acc, d| acc.union(d));
            let union_raw = fw
                .rules
                .iter()
                .fold(PacketSet::empty(), |acc, r| acc.union(&PacketSet::from_cube(r.filter)));
            prop_assert!(union_eff.set_eq(&union_raw));
        }
    }
}
