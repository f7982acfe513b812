//! The verification workflow: coherence first, then conformance, with an
//! optional exhaustive oracle cross-check on a downscaled twin of the job.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::engine::{check_conformance, EngineError};
use crate::firewall::{Action, FirewallConfig};
use crate::oracle::{
    check_positive, check_restrictive, DownscaledModel, OracleError, Vocabulary,
};
use crate::packetspace::PacketSet;
use crate::policy::{
    check_coherence, effective_domains, extract_elements, PolicyError, PriorityRelation,
    SecurityDirective, TrafficPattern,
};
use crate::report::{
    coherence_section, conformance_section, render_human, render_json, warning_record,
    MachineReport, OracleElementRecord, OracleSection, Status,
};
use crate::topology::{PathCatalog, ZoneTable};

/// A fully resolved and validated verification input.
#[derive(Debug)]
pub struct VerificationJob {
    pub zones: ZoneTable,
    pub firewalls: BTreeMap<String, FirewallConfig>,
    pub catalog: PathCatalog,
    pub directives: Vec<SecurityDirective>,
    pub priorities: PriorityRelation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    CoherenceOnly,
    Full,
}

#[derive(Debug, Error)]
pub enum JobError {
    #[error("policy: {0}")]
    Policy(#[from] PolicyError),
    #[error("engine: {0}")]
    Engine(#[from] EngineError),
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
}

/// Outcome of one verification run.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: MachineReport,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.report.exit_code()
    }

    pub fn human(&self) -> String {
        render_human(&self.report)
    }

    pub fn json(&self) -> String {
        render_json(&self.report)
    }
}

/// Runs the verification workflow on a loaded job.
///
/// Coherence is always checked first; conformance only runs on a coherent
/// policy. With `with_oracle`, the whole job is translated onto a
/// downscaled universe and every element verdict is re-derived by
/// exhaustive enumeration; the report then carries the agreement outcome.
pub fn run(job: &VerificationJob, mode: Mode, with_oracle: bool) -> Result<RunOutcome, JobError> {
    let elements = extract_elements(&job.directives)?;
    let policy = effective_domains(&elements, &job.priorities)?;
    let coherence = check_coherence(&policy);

    if mode == Mode::CoherenceOnly {
        let status = if coherence.is_coherent() { Status::Coherent } else { Status::Incoherent };
        return Ok(RunOutcome {
            report: MachineReport {
                status,
                coherence: coherence_section(&coherence),
                conformance: None,
                warnings: Vec::new(),
                oracle: None,
            },
        });
    }

    if !coherence.is_coherent() {
        return Ok(RunOutcome {
            report: MachineReport {
                status: Status::Incoherent,
                coherence: coherence_section(&coherence),
                conformance: None,
                warnings: Vec::new(),
                oracle: None,
            },
        });
    }

    let check = check_conformance(&policy, &job.catalog, &job.zones, &job.firewalls)?;
    let oracle = if with_oracle { Some(run_oracle(job, &check)?) } else { None };
    let status = if check.conforms() { Status::Conform } else { Status::NonConform };
    Ok(RunOutcome {
        report: MachineReport {
            status,
            coherence: coherence_section(&coherence),
            conformance: Some(conformance_section(&check)),
            warnings: check.warnings.iter().map(warning_record).collect(),
            oracle,
        },
    })
}

fn add_pattern(vocabulary: &mut Vocabulary, pattern: &TrafficPattern) {
    for &a in &pattern.src.addresses {
        vocabulary.add_addr(a);
    }
    for &a in &pattern.dst.addresses {
        vocabulary.add_addr(a);
    }
    vocabulary.add_ports(pattern.ports);
    vocabulary.add_protocols(pattern.protocols);
}

/// Everything the job mentions in any address, port or protocol position.
pub fn job_vocabulary(job: &VerificationJob) -> Vocabulary {
    let mut vocabulary = Vocabulary::new();
    for fw in job.firewalls.values() {
        vocabulary.add_firewall(fw);
    }
    for id in job.zones.ids() {
        for &a in &job.zones.get(id).unwrap().addresses {
            vocabulary.add_addr(a);
        }
    }
    for d in &job.directives {
        add_pattern(&mut vocabulary, &d.condition);
        for e in &d.exceptions {
            add_pattern(&mut vocabulary, &e.pattern);
        }
    }
    vocabulary
}

/// Re-derives every element verdict by exhaustive enumeration on the
/// downscaled twin of the job and compares with the engine's verdicts.
fn run_oracle(
    job: &VerificationJob,
    check: &crate::engine::ConformanceCheck,
) -> Result<OracleSection, JobError> {
    let model = DownscaledModel::from_vocabulary(job_vocabulary(job))?;
    let mut scaled_firewalls: BTreeMap<String, FirewallConfig> = BTreeMap::new();
    for (id, fw) in &job.firewalls {
        scaled_firewalls.insert(id.clone(), model.map_firewall(fw)?);
    }

    let mut records = Vec::new();
    for ec in &check.elements {
        let element = &ec.element;
        let engine_conform = ec.conforms();
        let oracle_conform = if element.domain.is_empty() {
            true
        } else {
            let domain = model.map_set(&element.domain)?;
            let routes = job
                .catalog
                .paths_for(&job.zones, &element.src_zone, &element.dst_zone)
                .map_err(|source| EngineError::UnresolvedPaths {
                    element: element.id.clone(),
                    source,
                })?;
            let paths: Vec<Vec<&FirewallConfig>> = routes
                .iter()
                .map(|route| route.iter().map(|id| &scaled_firewalls[id]).collect())
                .collect();
            match element.action {
                Action::Accept => check_positive(&domain, &paths, model.universe())?.is_none(),
                Action::Deny => check_restrictive(&domain, &paths, model.universe())?.is_none(),
            }
        };
        records.push(OracleElementRecord {
            element: element.id.clone(),
            engine_conform,
            oracle_conform,
        });
    }
    Ok(OracleSection {
        universe: model.universe().to_string(),
        agreement: records.iter().all(|r| r.engine_conform == r.oracle_conform),
        elements: records,
    })
}

/// The effective domain of one element of a job, by element id.
pub fn effective_domain_of(job: &VerificationJob, id: &str) -> Result<PacketSet, JobError> {
    let elements = extract_elements(&job.directives)?;
    let policy = effective_domains(&elements, &job.priorities)?;
    Ok(policy
        .elements
        .iter()
        .find(|e| e.id == id)
        .map(|e| e.domain.clone())
        .unwrap_or_else(PacketSet::empty))
}
