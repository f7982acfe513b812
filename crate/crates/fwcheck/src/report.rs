//! Machine and human report emission.
//!
//! The machine report is a single JSON document with deterministic field
//! and record ordering, so identical inputs produce byte-identical output.
//! Cube lists in the report reconstruct the exact packet sets they were
//! built from.

use std::fmt::Write as _;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::engine::{
    ConformanceCheck, ElementChecks, PositiveFailure, PositiveVerdict, RestrictiveVerdict,
    Warning,
};
use crate::packetspace::{
    parse_addr_spec, parse_port_spec, HeaderCube, HeaderPoint, PacketSet, Protocol, ProtocolSet,
};
use crate::policy::{CoherenceReport, Conflict};

pub const HINT_ADD_ACCEPT_RULE: &str = "add-accept-rule";
pub const HINT_REORDER_OR_REMOVE: &str = "reorder-or-remove";
pub const HINT_FLIP_OR_ADD_DENY: &str = "flip-or-add-deny";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Coherent,
    Incoherent,
    Conform,
    NonConform,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MachineReport {
    pub status: Status,
    pub coherence: CoherenceSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conformance: Option<ConformanceSection>,
    pub warnings: Vec<WarningRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoherenceSection {
    pub coherent: bool,
    pub conflicts: Vec<ConflictRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConflictRecord {
    pub accept_element: String,
    pub deny_element: String,
    pub intersection: Vec<CubeRecord>,
    pub witness: PacketRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeRecord {
    /// Inclusive address interval as dotted quads: [low, high].
    pub src: [String; 2],
    pub dst: [String; 2],
    pub protocols: Vec<String>,
    /// Inclusive port interval: [low, high].
    pub ports: [u16; 2],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub src: String,
    pub dst: String,
    pub protocol: String,
    pub port: u16,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConformanceSection {
    pub conform: bool,
    pub elements: Vec<ElementRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElementRecord {
    pub element: String,
    pub directive: String,
    pub kind: String,
    pub action: String,
    pub conform: bool,
    pub vacuous: bool,
    pub paths: Vec<PathRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case")]
pub enum PathRecord {
    /// Per-firewall verdicts: the element's domain must be accepted by each
    /// of them.
    Positive { path: Vec<String>, firewalls: Vec<FirewallCheckRecord> },
    /// One verdict for the chained walk along the path.
    Restrictive {
        path: Vec<String>,
        verdict: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        blocked_at: Option<usize>,
        #[serde(skip_serializing_if = "Option::is_none")]
        leaked: Option<Vec<CubeRecord>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        witness: Option<PacketRecord>,
        #[serde(skip_serializing_if = "Option::is_none")]
        accepted_by: Option<Vec<AcceptedByRecord>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        hint: Option<String>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FirewallCheckRecord {
    pub firewall: String,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub set: Option<Vec<CubeRecord>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<PacketRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcceptedByRecord {
    pub firewall: String,
    /// First-matching rule for the witness; absent when the default action
    /// let it through.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WarningRecord {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub firewall: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub element: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleSection {
    pub universe: String,
    pub agreement: bool,
    pub elements: Vec<OracleElementRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleElementRecord {
    pub element: String,
    pub engine_conform: bool,
    pub oracle_conform: bool,
}

impl MachineReport {
    /// Exit code for the whole run; a pure function of the report.
    pub fn exit_code(&self) -> i32 {
        if let Some(oracle) = &self.oracle {
            if !oracle.agreement {
                return 1;
            }
        }
        match self.status {
            Status::Coherent | Status::Conform => 0,
            Status::NonConform => 1,
            Status::Incoherent => 2,
        }
    }
}

pub fn packet_record(p: HeaderPoint) -> PacketRecord {
    PacketRecord {
        src: Ipv4Addr::from(p.src).to_string(),
        dst: Ipv4Addr::from(p.dst).to_string(),
        protocol: p.protocol.name().to_string(),
        port: p.port,
    }
}

pub fn cube_record(c: &HeaderCube) -> CubeRecord {
    CubeRecord {
        src: [Ipv4Addr::from(c.src.lo()).to_string(), Ipv4Addr::from(c.src.hi()).to_string()],
        dst: [Ipv4Addr::from(c.dst.lo()).to_string(), Ipv4Addr::from(c.dst.hi()).to_string()],
        protocols: c.protocols.iter().map(|p| p.name().to_string()).collect(),
        ports: [c.ports.lo(), c.ports.hi()],
    }
}

pub fn cube_records(set: &PacketSet) -> Vec<CubeRecord> {
    set.cubes().iter().map(cube_record).collect()
}

/// Rebuilds the exact packet set a cube record list was emitted from.
pub fn packet_set_from_records(records: &[CubeRecord]) -> Result<PacketSet, String> {
    let mut cubes = Vec::new();
    for r in records {
        let src = parse_addr_spec(&format!("{}-{}", r.src[0], r.src[1]))
            .map_err(|e| e.to_string())?;
        let dst = parse_addr_spec(&format!("{}-{}", r.dst[0], r.dst[1]))
            .map_err(|e| e.to_string())?;
        let mut protocols = ProtocolSet::EMPTY;
        for name in &r.protocols {
            protocols = protocols.with(name.parse::<Protocol>().map_err(|e| e.to_string())?);
        }
        let ports = parse_port_spec(&format!("{}-{}", r.ports[0], r.ports[1]))
            .map_err(|e| e.to_string())?;
        cubes.push(HeaderCube::new(src, dst, protocols, ports));
    }
    Ok(PacketSet::from_cubes(cubes))
}

fn conflict_record(c: &Conflict) -> ConflictRecord {
    ConflictRecord {
        accept_element: c.accept_id.clone(),
        deny_element: c.deny_id.clone(),
        intersection: cube_records(&c.intersection),
        witness: packet_record(c.witness),
    }
}

pub fn coherence_section(report: &CoherenceReport) -> CoherenceSection {
    CoherenceSection {
        coherent: report.is_coherent(),
        conflicts: report.conflicts.iter().map(conflict_record).collect(),
    }
}

pub fn warning_record(w: &Warning) -> WarningRecord {
    match w {
        Warning::ShadowedRule { firewall, rule } => WarningRecord {
            kind: "shadowed-rule".into(),
            firewall: Some(firewall.clone()),
            rule: Some(*rule),
            element: None,
        },
        Warning::EmptyElementDomain { element } => WarningRecord {
            kind: "empty-element-domain".into(),
            firewall: None,
            rule: None,
            element: Some(element.clone()),
        },
    }
}

pub fn conformance_section(check: &ConformanceCheck) -> ConformanceSection {
    let mut elements = Vec::new();
    for ec in &check.elements {
        let paths = match &ec.checks {
            ElementChecks::Positive(paths) => paths
                .iter()
                .map(|p| PathRecord::Positive {
                    path: p.path.clone(),
                    firewalls: p
                        .verdicts
                        .iter()
                        .map(|(fw, v)| firewall_check_record(fw, v))
                        .collect(),
                })
                .collect(),
            ElementChecks::Restrictive(paths) => paths
                .iter()
                .map(|p| match &p.verdict {
                    RestrictiveVerdict::Success { blocked_at } => PathRecord::Restrictive {
                        path: p.path.clone(),
                        verdict: "success".into(),
                        blocked_at: *blocked_at,
                        leaked: None,
                        witness: None,
                        accepted_by: None,
                        hint: None,
                    },
                    RestrictiveVerdict::Failure { leaked, witness } => PathRecord::Restrictive {
                        path: p.path.clone(),
                        verdict: "failure".into(),
                        blocked_at: None,
                        leaked: Some(cube_records(leaked)),
                        witness: Some(packet_record(*witness)),
                        accepted_by: Some(
                            p.accepted_by
                                .iter()
                                .map(|(fw, rule)| AcceptedByRecord {
                                    firewall: fw.clone(),
                                    rule: *rule,
                                })
                                .collect(),
                        ),
                        hint: Some(HINT_FLIP_OR_ADD_DENY.into()),
                    },
                })
                .collect(),
        };
        elements.push(ElementRecord {
            element: ec.element.id.clone(),
            directive: ec.element.source_directive.clone(),
            kind: ec.element.kind.name().into(),
            action: ec.element.action.name().into(),
            conform: ec.conforms(),
            vacuous: ec.vacuous,
            paths,
        });
    }
    ConformanceSection { conform: check.conforms(), elements }
}

fn firewall_check_record(firewall: &str, verdict: &PositiveVerdict) -> FirewallCheckRecord {
    match verdict {
        PositiveVerdict::Success => FirewallCheckRecord {
            firewall: firewall.into(),
            verdict: "success".into(),
            kind: None,
            rule: None,
            set: None,
            witness: None,
            hint: None,
        },
        PositiveVerdict::Failure { cause, witness } => {
            let (kind, rule, set, hint) = match cause {
                PositiveFailure::DenyRuleClash { rule, clash } => (
                    "deny-rule-clash",
                    Some(*rule),
                    cube_records(clash),
                    HINT_REORDER_OR_REMOVE,
                ),
                PositiveFailure::UncoveredResidual { residual } => (
                    "uncovered-residual",
                    None,
                    cube_records(residual),
                    HINT_ADD_ACCEPT_RULE,
                ),
            };
            FirewallCheckRecord {
                firewall: firewall.into(),
                verdict: "failure".into(),
                kind: Some(kind.into()),
                rule,
                set: Some(set),
                witness: Some(packet_record(*witness)),
                hint: Some(hint.into()),
            }
        }
    }
}

pub fn render_json(report: &MachineReport) -> String {
    let mut out = serde_json::to_string_pretty(report).expect("report serializes");
    out.push('\n');
    out
}

fn write_cubes(out: &mut String, label: &str, cubes: &[CubeRecord]) {
    let _ = writeln!(out, "    {label}:");
    for c in cubes {
        let src = if c.src[0] == c.src[1] { c.src[0].clone() } else { format!("{}-{}", c.src[0], c.src[1]) };
        let dst = if c.dst[0] == c.dst[1] { c.dst[0].clone() } else { format!("{}-{}", c.dst[0], c.dst[1]) };
        let ports = if c.ports[0] == c.ports[1] {
            format!("{}", c.ports[0])
        } else {
            format!("{}-{}", c.ports[0], c.ports[1])
        };
        let _ = writeln!(out, "      {src} -> {dst} {} port {ports}", c.protocols.join(","));
    }
}

fn write_packet(out: &mut String, label: &str, p: &PacketRecord) {
    let _ = writeln!(out, "    {label}: ({}, {}, {}, {})", p.src, p.dst, p.protocol, p.port);
}

fn hint_sentence(record: &FirewallCheckRecord) -> String {
    match record.kind.as_deref() {
        Some("deny-rule-clash") => format!(
            "reorder or remove deny rule {} of {}",
            record.rule.unwrap_or(0),
            record.firewall
        ),
        _ => format!("add an accept rule to {} covering the residual", record.firewall),
    }
}

/// One violation block per finding, with the corrective hint class.
pub fn render_human(report: &MachineReport) -> String {
    let mut out = String::new();
    let status = match report.status {
        Status::Coherent => "COHERENT",
        Status::Incoherent => "INCOHERENT",
        Status::Conform => "CONFORM",
        Status::NonConform => "NON-CONFORM",
    };
    let _ = writeln!(out, "{status}");

    for c in &report.coherence.conflicts {
        let _ = writeln!(
            out,
            "\nconflict: accept '{}' and deny '{}' overlap",
            c.accept_element, c.deny_element
        );
        write_cubes(&mut out, "common packets", &c.intersection);
        write_packet(&mut out, "witness", &c.witness);
    }

    if let Some(conformance) = &report.conformance {
        for e in &conformance.elements {
            for p in &e.paths {
                match p {
                    PathRecord::Positive { path, firewalls } => {
                        for f in firewalls {
                            if f.verdict == "success" {
                                continue;
                            }
                            let _ = writeln!(
                                out,
                                "\nviolation: element '{}' ({}) on path {}: firewall {}: {}",
                                e.element,
                                e.action,
                                path.join(" -> "),
                                f.firewall,
                                f.kind.as_deref().unwrap_or("failure"),
                            );
                            if let Some(set) = &f.set {
                                let label = match f.kind.as_deref() {
                                    Some("deny-rule-clash") => "clashing packets",
                                    _ => "residual",
                                };
                                write_cubes(&mut out, label, set);
                            }
                            if let Some(w) = &f.witness {
                                write_packet(&mut out, "witness", w);
                            }
                            let _ = writeln!(
                                out,
                                "    hint [{}]: {}",
                                f.hint.as_deref().unwrap_or(""),
                                hint_sentence(f)
                            );
                        }
                    }
                    PathRecord::Restrictive {
                        path,
                        verdict,
                        leaked,
                        witness,
                        accepted_by,
                        ..
                    } => {
                        if verdict == "success" {
                            continue;
                        }
                        let _ = writeln!(
                            out,
                            "\nviolation: element '{}' ({}) leaks through path {}",
                            e.element,
                            e.action,
                            path.join(" -> "),
                        );
                        if let Some(leaked) = leaked {
                            write_cubes(&mut out, "leaked", leaked);
                        }
                        if let Some(w) = witness {
                            write_packet(&mut out, "witness", w);
                        }
                        let mut last_rule: Option<&AcceptedByRecord> = None;
                        if let Some(accepted_by) = accepted_by {
                            let trail: Vec<String> = accepted_by
                                .iter()
                                .map(|a| match a.rule {
                                    Some(r) => format!("{} (rule {r})", a.firewall),
                                    None => format!("{} (default)", a.firewall),
                                })
                                .collect();
                            let _ = writeln!(out, "    accepted by: {}", trail.join(", "));
                            last_rule = accepted_by.last();
                        }
                        let sentence = match last_rule {
                            Some(AcceptedByRecord { firewall, rule: Some(r) }) => {
                                format!("change rule {r} of {firewall} to deny")
                            }
                            Some(AcceptedByRecord { firewall, rule: None }) => {
                                format!("add a deny rule to {firewall} covering the leak")
                            }
                            None => "add a deny rule on the path".to_string(),
                        };
                        let _ =
                            writeln!(out, "    hint [{HINT_FLIP_OR_ADD_DENY}]: {sentence}");
                    }
                }
            }
        }
    }

    if !report.warnings.is_empty() {
        let _ = writeln!(out, "\nwarnings:");
        for w in &report.warnings {
            match w.kind.as_str() {
                "shadowed-rule" => {
                    let _ = writeln!(
                        out,
                        "  shadowed rule: {} rule {}",
                        w.firewall.as_deref().unwrap_or("?"),
                        w.rule.unwrap_or(0)
                    );
                }
                _ => {
                    let _ = writeln!(
                        out,
                        "  empty effective domain: element '{}'",
                        w.element.as_deref().unwrap_or("?")
                    );
                }
            }
        }
    }

    if let Some(oracle) = &report.oracle {
        let _ = writeln!(
            out,
            "\noracle: {} on {} ({} elements checked)",
            if oracle.agreement { "agreement" } else { "DISAGREEMENT" },
            oracle.universe,
            oracle.elements.len()
        );
        if !oracle.agreement {
            for e in oracle.elements.iter().filter(|e| e.engine_conform != e.oracle_conform) {
                let _ = writeln!(
                    out,
                    "  mismatch: element '{}': engine {} vs oracle {}",
                    e.element, e.engine_conform, e.oracle_conform
                );
            }
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packetspace::cube_of;

    #[test]
    fn cube_records_roundtrip_to_the_same_set() {
        let set = PacketSet::from_cubes([
            cube_of("10.0.0.0/8", "192.168.2.2", "tcp", "22").unwrap(),
            cube_of("193.95.0.0/16", "10.0.0.0/8", "*", "0-1023").unwrap(),
        ]);
        let records = cube_records(&set);
        let back = packet_set_from_records(&records).unwrap();
        assert!(back.set_eq(&set));
        // cube-exact, not merely set-equal
        assert_eq!(cube_records(&back), records);
    }

    #[test]
    fn exit_codes_are_a_function_of_status() {
        let mut report = MachineReport {
            status: Status::Conform,
            coherence: CoherenceSection { coherent: true, conflicts: vec![] },
            conformance: None,
            warnings: vec![],
            oracle: None,
        };
        assert_eq!(report.exit_code(), 0);
        report.status = Status::Coherent;
        assert_eq!(report.exit_code(), 0);
        report.status = Status::NonConform;
        assert_eq!(report.exit_code(), 1);
        report.status = Status::Incoherent;
        assert_eq!(report.exit_code(), 2);
        report.status = Status::Conform;
        report.oracle = Some(OracleSection {
            universe: "tiny".into(),
            agreement: false,
            elements: vec![],
        });
        assert_eq!(report.exit_code(), 1);
    }

    #[test]
    fn json_rendering_is_deterministic() {
        let report = MachineReport {
            status: Status::Coherent,
            coherence: CoherenceSection { coherent: true, conflicts: vec![] },
            conformance: None,
            warnings: vec![],
            oracle: None,
        };
        assert_eq!(render_json(&report), render_json(&report));
        // and parses back
        let parsed: MachineReport = serde_json::from_str(&render_json(&report)).unwrap();
        assert_eq!(parsed.status, Status::Coherent);
    }
}
