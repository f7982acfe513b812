//! Input documents (TOML) and their validation.
//!
//! A verification job is described by two or three documents: a topology
//! document (zones, firewall rule tables, declared paths, optional
//! adjacency), a policy document (directives with optional exceptions), and
//! an optional priorities document. Validation resolves every cross
//! reference before any check runs and reports all problems together rather
//! than one at a time.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Deserialize;

use crate::firewall::{Action, FilteringRule, FirewallConfig};
use crate::job::VerificationJob;
use crate::packetspace::{cube_of, parse_addr_spec, parse_port_spec, parse_protocol_spec};
use crate::policy::{
    effective_domains, extract_elements, Endpoint, Exception, PriorityRelation,
    SecurityDirective, TrafficPattern,
};
use crate::topology::{AdjacencyGraph, PathCatalog, Zone, ZoneTable, DEFAULT_PATH_CAP};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDoc {
    #[serde(default)]
    pub zones: Vec<ZoneDoc>,
    #[serde(default)]
    pub firewalls: Vec<FirewallDoc>,
    /// Additional firewall tables in separate files, relative to this
    /// document.
    #[serde(default)]
    pub firewall_files: Vec<String>,
    #[serde(default)]
    pub paths: Vec<PathDoc>,
    #[serde(default)]
    pub adjacency: Vec<EdgeDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneDoc {
    pub id: String,
    pub addresses: Vec<String>,
    #[serde(default)]
    pub parent: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirewallDoc {
    pub id: String,
    /// Mandatory; a missing default is a validation error, never inferred.
    #[serde(default)]
    pub default: Option<String>,
    #[serde(default)]
    pub rules: Vec<RuleDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleDoc {
    pub src: String,
    pub dst: String,
    pub protocol: String,
    pub port: String,
    pub action: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathDoc {
    pub src: String,
    pub dst: String,
    pub routes: Vec<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDoc {
    pub a: String,
    pub b: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirewallFileDoc {
    pub firewalls: Vec<FirewallDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyDoc {
    pub directives: Vec<DirectiveDoc>,
}

fn star() -> String {
    "*".to_string()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectiveDoc {
    pub id: String,
    pub action: String,
    pub src: String,
    pub dst: String,
    #[serde(default = "star")]
    pub protocol: String,
    #[serde(default = "star")]
    pub port: String,
    #[serde(default)]
    pub exceptions: Vec<ExceptionDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExceptionDoc {
    pub id: String,
    pub src: String,
    pub dst: String,
    #[serde(default = "star")]
    pub protocol: String,
    #[serde(default = "star")]
    pub port: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrioritiesDoc {
    #[serde(default)]
    pub priorities: Vec<PriorityDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorityDoc {
    pub element: String,
    /// Elements that take priority over `element`.
    pub before: Vec<String>,
}

/// Every validation problem found while loading a job, reported together.
#[derive(Debug)]
pub struct LoadError {
    pub issues: Vec<String>,
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for LoadError {}

struct Collector {
    issues: Vec<String>,
}

impl Collector {
    fn new() -> Collector {
        Collector { issues: Vec::new() }
    }

    fn push(&mut self, issue: String) {
        self.issues.push(issue);
    }

    fn finish(self) -> Result<(), LoadError> {
        if self.issues.is_empty() {
            Ok(())
        } else {
            Err(LoadError { issues: self.issues })
        }
    }
}

fn read_doc<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|e| LoadError {
        issues: vec![format!("{what} document {}: {e}", path.display())],
    })?;
    toml::from_str(&text).map_err(|e| LoadError {
        issues: vec![format!("{what} document {}: {e}", path.display())],
    })
}

/// An endpoint spec is either a zone id or an inline address spec; inline
/// addresses are placed in the smallest zone containing them.
fn resolve_endpoint(
    spec: &str,
    zones: &ZoneTable,
    locus: &str,
    issues: &mut Collector,
) -> Option<Endpoint> {
    let looks_like_address = spec == "*" || spec.contains('.') || spec.contains('/');
    if looks_like_address {
        match parse_addr_spec(spec) {
            Ok(range) => match zones.smallest_zone_containing(&[range]) {
                Some(zone) => {
                    return Some(Endpoint { zone: zone.id.clone(), addresses: vec![range] })
                }
                None => issues.push(format!("{locus}: no zone contains address '{spec}'")),
            },
            Err(e) => issues.push(format!("{locus}: {e}")),
        }
        return None;
    }
    match zones.get(spec) {
        Some(zone) => Some(Endpoint { zone: zone.id.clone(), addresses: zone.addresses.clone() }),
        None => {
            issues.push(format!("{locus}: unknown zone '{spec}'"));
            None
        }
    }
}

fn resolve_pattern(
    src: &str,
    dst: &str,
    protocol: &str,
    port: &str,
    zones: &ZoneTable,
    locus: &str,
    issues: &mut Collector,
) -> Option<TrafficPattern> {
    let src = resolve_endpoint(src, zones, &format!("{locus} src"), issues);
    let dst = resolve_endpoint(dst, zones, &format!("{locus} dst"), issues);
    let protocols = match parse_protocol_spec(protocol) {
        Ok(p) => Some(p),
        Err(e) => {
            issues.push(format!("{locus} protocol: {e}"));
            None
        }
    };
    let ports = match parse_port_spec(port) {
        Ok(p) => Some(p),
        Err(e) => {
            issues.push(format!("{locus} port: {e}"));
            None
        }
    };
    Some(TrafficPattern { src: src?, dst: dst?, protocols: protocols?, ports: ports? })
}

fn build_firewall(doc: &FirewallDoc, issues: &mut Collector) -> Option<FirewallConfig> {
    let mut rules = Vec::new();
    let mut ok = true;
    for (i, r) in doc.rules.iter().enumerate() {
        let locus = format!("firewall '{}' rule {}", doc.id, i + 1);
        match cube_of(&r.src, &r.dst, &r.protocol, &r.port) {
            Ok(filter) => match r.action.parse::<Action>() {
                Ok(action) => rules.push(FilteringRule { filter, action }),
                Err(e) => {
                    issues.push(format!("{locus}: {e}"));
                    ok = false;
                }
            },
            Err(e) => {
                issues.push(format!("{locus}: {e}"));
                ok = false;
            }
        }
    }
    let default = match &doc.default {
        Some(d) => match d.parse::<Action>() {
            Ok(a) => Some(a),
            Err(e) => {
                issues.push(format!("firewall '{}': default action: {e}", doc.id));
                None
            }
        },
        None => {
            issues.push(format!("firewall '{}': missing default action", doc.id));
            None
        }
    };
    if ok {
        Some(FirewallConfig::new(doc.id.clone(), rules, default?))
    } else {
        None
    }
}

/// Loads and fully validates a verification job.
///
/// Parse failures, dangling references, missing defaults, vacuous
/// exceptions, missing path entries and priority cycles are all collected
/// and reported in one shot.
pub fn load_job(
    policy_path: &Path,
    topology_path: &Path,
    priorities_path: Option<&Path>,
) -> Result<VerificationJob, LoadError> {
    let topology: TopologyDoc = read_doc(topology_path, "topology")?;
    let policy: PolicyDoc = read_doc(policy_path, "policy")?;
    let priorities_doc: Option<PrioritiesDoc> = match priorities_path {
        Some(p) => Some(read_doc(p, "priorities")?),
        None => None,
    };

    let mut issues = Collector::new();

    // zones
    let mut zones_vec = Vec::new();
    for z in &topology.zones {
        let mut addresses = Vec::new();
        for a in &z.addresses {
            match parse_addr_spec(a) {
                Ok(r) => addresses.push(r),
                Err(e) => issues.push(format!("zone '{}': {e}", z.id)),
            }
        }
        zones_vec.push(Zone { id: z.id.clone(), addresses, parent: z.parent.clone() });
    }
    let zones = match ZoneTable::new(zones_vec) {
        Ok(t) => t,
        Err(e) => {
            issues.push(format!("topology: {e}"));
            ZoneTable::default()
        }
    };

    // firewall tables, inline and included
    let mut firewall_docs: Vec<FirewallDoc> = topology.firewalls;
    let base_dir = topology_path.parent().unwrap_or_else(|| Path::new("."));
    for file in &topology.firewall_files {
        match read_doc::<FirewallFileDoc>(&base_dir.join(file), "firewall") {
            Ok(doc) => firewall_docs.extend(doc.firewalls),
            Err(e) => issues.issues.extend(e.issues),
        }
    }
    let mut firewalls: BTreeMap<String, FirewallConfig> = BTreeMap::new();
    for doc in &firewall_docs {
        if firewalls.contains_key(&doc.id) {
            issues.push(format!("duplicate firewall id '{}'", doc.id));
            continue;
        }
        if let Some(fw) = build_firewall(doc, &mut issues) {
            firewalls.insert(fw.id.clone(), fw);
        }
    }

    // declared paths
    let mut catalog = PathCatalog::new();
    for p in &topology.paths {
        for zone in [&p.src, &p.dst] {
            if zones.get(zone).is_none() {
                issues.push(format!("path entry ({}, {}): unknown zone '{zone}'", p.src, p.dst));
            }
        }
        for route in &p.routes {
            for fw in route {
                if !firewalls.contains_key(fw) {
                    issues.push(format!(
                        "path entry ({}, {}): unknown firewall '{fw}'",
                        p.src, p.dst
                    ));
                }
            }
        }
        catalog.insert(&p.src, &p.dst, p.routes.clone());
    }

    // optional adjacency, for deriving path entries not declared explicitly
    let mut adjacency = AdjacencyGraph::new(firewalls.keys().cloned());
    for e in &topology.adjacency {
        for node in [&e.a, &e.b] {
            if zones.get(node).is_none() && !firewalls.contains_key(node) {
                issues.push(format!("adjacency edge ({}, {}): unknown node '{node}'", e.a, e.b));
            }
        }
        adjacency.add_edge(&e.a, &e.b);
    }

    // directives
    let mut directives = Vec::new();
    for d in &policy.directives {
        let locus = format!("directive '{}'", d.id);
        let action = match d.action.parse::<Action>() {
            Ok(a) => a,
            Err(e) => {
                issues.push(format!("{locus}: {e}"));
                continue;
            }
        };
        let Some(condition) =
            resolve_pattern(&d.src, &d.dst, &d.protocol, &d.port, &zones, &locus, &mut issues)
        else {
            continue;
        };
        let mut exceptions = Vec::new();
        let mut ok = true;
        for e in &d.exceptions {
            let elocus = format!("{locus} exception '{}'", e.id);
            match resolve_pattern(&e.src, &e.dst, &e.protocol, &e.port, &zones, &elocus, &mut issues)
            {
                Some(pattern) => exceptions.push(Exception { id: e.id.clone(), pattern }),
                None => ok = false,
            }
        }
        if ok {
            directives.push(SecurityDirective { id: d.id.clone(), action, condition, exceptions });
        }
    }

    // priorities
    let mut priorities = PriorityRelation::empty();
    if let Some(doc) = &priorities_doc {
        for p in &doc.priorities {
            for winner in &p.before {
                priorities.add(&p.element, winner);
            }
        }
    }

    // element extraction, priority resolution and path coverage are
    // validated now so that nothing can fail later in the run
    match extract_elements(&directives) {
        Ok(elements) => {
            if let Err(e) = effective_domains(&elements, &priorities) {
                issues.push(format!("priorities: {e}"));
            }
            for element in &elements {
                if catalog.paths_for(&zones, &element.src_zone, &element.dst_zone).is_ok() {
                    continue;
                }
                // fall back to the adjacency graph before reporting
                if !adjacency.is_empty() {
                    match adjacency.enumerate_paths(
                        &element.src_zone,
                        &element.dst_zone,
                        DEFAULT_PATH_CAP,
                    ) {
                        Ok(routes) if !routes.is_empty() => {
                            catalog.insert(&element.src_zone, &element.dst_zone, routes);
                            continue;
                        }
                        _ => {}
                    }
                }
                issues.push(format!(
                    "element '{}' (from directive '{}'): no path entry for zone pair ({}, {})",
                    element.id, element.source_directive, element.src_zone, element.dst_zone
                ));
            }
        }
        Err(e) => issues.push(format!("policy: {e}")),
    }

    issues.finish()?;
    Ok(VerificationJob { zones, firewalls, catalog, directives, priorities })
}
