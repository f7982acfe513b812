//! Acceptance suite: one test per criterion, each printing a pass line and
//! enforcing its runtime budget.

use std::collections::BTreeMap;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fwcheck::engine::{
    check_directive, positive_check, ElementChecks, PositiveVerdict, RestrictiveVerdict,
};
use fwcheck::firewall::{Action, FilteringRule, FirewallConfig};
use fwcheck::input::load_job;
use fwcheck::job::{job_vocabulary, run, Mode, VerificationJob};
use fwcheck::oracle::{
    check_positive as oracle_positive, check_restrictive as oracle_restrictive, simulate_path,
    DownscaledModel, PathOutcome,
};
use fwcheck::packetspace::{
    cube_of, AddrRange, HeaderCube, HeaderPoint, PacketSet, PortRange, Protocol, ProtocolSet,
    UniverseSpec,
};
use fwcheck::policy::{
    check_coherence, detect_conflicts, effective_domains, extract_elements, Endpoint, Exception,
    PriorityRelation, SecurityDirective, TrafficPattern,
};
use fwcheck::report::{packet_set_from_records, PathRecord, Status};
use fwcheck::topology::{PathCatalog, Zone, ZoneTable};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn load(policy: &str, topology: &str, priorities: Option<&str>) -> VerificationJob {
    load_job(
        &fixture(policy),
        &fixture(topology),
        priorities.map(fixture).as_deref(),
    )
    .expect("fixture loads")
}

fn finish(criterion: &str, started: Instant, budget: Duration) {
    let elapsed = started.elapsed();
    assert!(
        elapsed < budget,
        "{criterion} took {elapsed:?}, budget {budget:?}"
    );
    println!("{criterion}: PASS ({elapsed:?})");
}

fn addr(s: &str) -> u32 {
    u32::from(s.parse::<Ipv4Addr>().unwrap())
}

#[test]
fn criterion_1_shadowing_regression() {
    let started = Instant::now();
    let mut fw = FirewallConfig::new(
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
    );
    assert!(fw.effective_domain(2).unwrap().is_empty());
    let probe = HeaderPoint::new(addr("214.65.0.1"), addr("1.2.3.4"), Protocol::Tcp, 445);
    assert_eq!(fw.first_match_action(probe), Action::Accept);
    fw.rules.swap(0, 1);
    assert_eq!(fw.first_match_action(probe), Action::Deny);
    finish("criterion 1 (shadowing regression)", started, Duration::from_secs(1));
}

#[test]
fn criterion_2_coherence_detection() {
    let started = Instant::now();

    let job = load("policy_original.toml", "topology_fig5.toml", None);
    let outcome = run(&job, Mode::CoherenceOnly, false).unwrap();
    assert_eq!(outcome.report.status, Status::Incoherent);
    assert_eq!(outcome.exit_code(), 2);
    let conflicts = &outcome.report.coherence.conflicts;
    assert_eq!(conflicts.len(), 1, "exactly one conflicting pair");
    assert_eq!(conflicts[0].deny_element, "sd1");
    assert_eq!(conflicts[0].accept_element, "sd3");
    let w = &conflicts[0].witness;
    let src = addr(&w.src);
    assert!(AddrRange::cidr(addr("193.95.0.0"), 16).unwrap().contains(src));
    assert_eq!(w.dst, "10.1.1.2");
    assert_eq!(w.protocol, "tcp");
    assert_eq!(w.port, 23);

    // replacing sd1 with its telnet-excepted form resolves the conflict
    let fixed = load("policy_fixed.toml", "topology_fig5.toml", None);
    let outcome = run(&fixed, Mode::CoherenceOnly, false).unwrap();
    assert_eq!(outcome.report.status, Status::Coherent);
    assert_eq!(outcome.exit_code(), 0);

    finish("criterion 2 (coherence detection)", started, Duration::from_secs(1));
}

#[test]
fn criterion_3_lan_example_conflict_and_priorities() {
    let started = Instant::now();

    let job = load("lan_policy.toml", "lan_topology.toml", None);
    let elements = extract_elements(&job.directives).unwrap();
    let conflicts = detect_conflicts(&elements);
    assert_eq!(conflicts.len(), 1, "exactly the pair (sd1, e22)");
    assert_eq!(conflicts[0].deny_id, "sd1");
    assert_eq!(conflicts[0].accept_id, "e22");
    // the shared machines of the two overlapping sub-zones
    let m = AddrRange::new(addr("10.0.1.8"), addr("10.0.1.15"));
    assert!(m.contains(conflicts[0].witness.src));

    let with_priorities =
        load("lan_policy.toml", "lan_topology.toml", Some("lan_priorities.toml"));
    let outcome = run(&with_priorities, Mode::CoherenceOnly, false).unwrap();
    assert_eq!(outcome.report.status, Status::Coherent);

    finish("criterion 3 (two-LAN conflict and priorities)", started, Duration::from_secs(1));
}

/// The sd4 element record of a finished verify run, as (path, firewall
/// records) pairs.
fn element_paths(report: &fwcheck::report::MachineReport, element: &str) -> Vec<PathRecord> {
    report
        .conformance
        .as_ref()
        .unwrap()
        .elements
        .iter()
        .find(|e| e.element == element)
        .unwrap_or_else(|| panic!("element {element} present"))
        .paths
        .clone()
}

#[test]
fn criterion_4_spa2_nonconformance() {
    let started = Instant::now();

    let job = load("policy_fixed.toml", "topology_fig5.toml", None);
    let outcome = run(&job, Mode::Full, true).unwrap();
    assert_eq!(outcome.report.status, Status::NonConform);
    assert_eq!(outcome.exit_code(), 1);

    // positive violation for sd4 at path (F1, F2), firewall position 2
    let paths = element_paths(&outcome.report, "sd4");
    let mut found = false;
    for p in &paths {
        let PathRecord::Positive { path, firewalls } = p else {
            panic!("sd4 is a positive element")
        };
        if path == &["F1".to_string(), "F2".to_string()] {
            assert_eq!(firewalls[0].verdict, "success");
            let f2 = &firewalls[1];
            assert_eq!(f2.firewall, "F2");
            assert_eq!(f2.verdict, "failure");
            assert_eq!(f2.kind.as_deref(), Some("uncovered-residual"));
            let residual = packet_set_from_records(f2.set.as_ref().unwrap()).unwrap();
            let probe =
                HeaderPoint::new(addr("10.96.0.1"), addr("192.168.2.1"), Protocol::Udp, 53);
            assert!(residual.member(probe), "residual contains the reported packet");
            // the witness satisfies the same field constraints
            let w = f2.witness.as_ref().unwrap();
            assert!(AddrRange::cidr(addr("10.0.0.0"), 8).unwrap().contains(addr(&w.src)));
            assert_eq!(w.dst, "192.168.2.1");
            assert_eq!(w.protocol, "udp");
            assert_eq!(w.port, 53);
            found = true;
        }
    }
    assert!(found, "violation located at path (F1, F2)");

    // the fixture defaults (F1 accept, F2 deny, F3 accept) are confirmed by
    // the exhaustive oracle run bundled into the report
    let oracle = outcome.report.oracle.as_ref().unwrap();
    assert!(oracle.agreement);
    let sd4 = oracle.elements.iter().find(|e| e.element == "sd4").unwrap();
    assert!(!sd4.oracle_conform);

    // the oracle's own counterexample sits at the same location: first
    // declared (Z3, Z2) path, second firewall
    let model = DownscaledModel::from_vocabulary(job_vocabulary(&job)).unwrap();
    let scaled: BTreeMap<String, FirewallConfig> = job
        .firewalls
        .iter()
        .map(|(id, fw)| (id.clone(), model.map_firewall(fw).unwrap()))
        .collect();
    let domain = model
        .map_set(&fwcheck::job::effective_domain_of(&job, "sd4").unwrap())
        .unwrap();
    let routes = job.catalog.paths_for(&job.zones, "Z3", "Z2").unwrap();
    let dpaths: Vec<Vec<&FirewallConfig>> =
        routes.iter().map(|r| r.iter().map(|id| &scaled[id]).collect()).collect();
    let ce = oracle_positive(&domain, &dpaths, model.universe()).unwrap().unwrap();
    assert_eq!((ce.path_index, ce.firewall_pos), (0, 2));

    finish("criterion 4 (spa2 non-conformance)", started, Duration::from_secs(1));
}

#[test]
fn criterion_5_spd2_nonconformance() {
    let started = Instant::now();

    let job = load("policy_fixed.toml", "topology_fig5.toml", None);
    let outcome = run(&job, Mode::Full, false).unwrap();

    let expected_leak =
        PacketSet::from_cube(cube_of("10.0.0.0/8", "192.168.2.2", "tcp", "22").unwrap());
    let paths = element_paths(&outcome.report, "sd2");
    let mut checked = 0;
    for p in &paths {
        let PathRecord::Restrictive { path, verdict, leaked, accepted_by, .. } = p else {
            panic!("sd2 is a restrictive element")
        };
        assert_eq!(verdict, "failure", "sd2 leaks on every Z3->Z2 path");
        let leaked = packet_set_from_records(leaked.as_ref().unwrap()).unwrap();
        assert!(leaked.set_eq(&expected_leak), "exact leaked set on {path:?}");
        // the accepting rule is F2's rule 2
        let last = accepted_by.as_ref().unwrap().last().unwrap();
        assert_eq!(last.firewall, "F2");
        assert_eq!(last.rule, Some(2));
        checked += 1;
    }
    assert_eq!(checked, 2, "both declared Z3->Z2 paths leak");

    finish("criterion 5 (spd2 non-conformance)", started, Duration::from_secs(1));
}

#[test]
fn criterion_6_corrected_configuration() {
    let started = Instant::now();

    let job = load("policy_fixed.toml", "topology_fig9.toml", None);
    let outcome = run(&job, Mode::Full, true).unwrap();

    let oracle = outcome.report.oracle.as_ref().unwrap();
    assert!(oracle.agreement, "engine and oracle agree on every element");
    let verdict = |id: &str| {
        let rec = oracle.elements.iter().find(|e| e.element == id).unwrap();
        assert_eq!(rec.engine_conform, rec.oracle_conform);
        rec.engine_conform
    };

    // spa1, spa2, the sd5 remainder, spd1 and spd2 all conform
    for id in ["sd3", "sd4", "sd5", "sd1", "sd2"] {
        assert!(verdict(id), "element {id} conforms in the corrected configuration");
    }

    // spd3 (the SSH exception) does not: both engine and oracle report the
    // leak on path (F1, F2) through F2's rule 3
    assert!(!verdict("e5_1"));
    let paths = element_paths(&outcome.report, "e5_1");
    for p in &paths {
        let PathRecord::Restrictive { path, verdict, accepted_by, blocked_at, .. } = p else {
            panic!("e5_1 is a restrictive element")
        };
        if path == &["F1".to_string(), "F2".to_string()] {
            assert_eq!(verdict, "failure");
            let last = accepted_by.as_ref().unwrap().last().unwrap();
            assert_eq!(last.firewall, "F2");
            assert_eq!(last.rule, Some(3));
        } else {
            assert_eq!(path, &["F1".to_string(), "F3".to_string(), "F2".to_string()]);
            assert_eq!(verdict, "success");
            assert_eq!(*blocked_at, Some(2), "F3 blocks the SSH exception");
        }
    }

    // independent oracle route: downscale the job by hand and re-derive the
    // leaking path
    let model = DownscaledModel::from_vocabulary(job_vocabulary(&job)).unwrap();
    let scaled: BTreeMap<String, FirewallConfig> = job
        .firewalls
        .iter()
        .map(|(id, fw)| (id.clone(), model.map_firewall(fw).unwrap()))
        .collect();
    let domain = model
        .map_set(&fwcheck::job::effective_domain_of(&job, "e5_1").unwrap())
        .unwrap();
    let routes = job.catalog.paths_for(&job.zones, "Z1", "Z2").unwrap();
    let paths: Vec<Vec<&FirewallConfig>> =
        routes.iter().map(|r| r.iter().map(|id| &scaled[id]).collect()).collect();
    let ce = oracle_restrictive(&domain, &paths, model.universe()).unwrap().unwrap();
    assert_eq!(ce.path_index, 0, "the (F1, F2) path leaks");
    assert_eq!(scaled["F2"].first_match_rule(ce.packet), Some(3));

    // the corrected tables contain no shadowed rules
    assert!(outcome.report.warnings.is_empty());

    finish("criterion 6 (corrected configuration)", started, Duration::from_secs(2));
}

// Randomized instance generation for the engine-vs-oracle equivalence run.

fn tiny_universe() -> UniverseSpec {
    UniverseSpec::new(
        4,
        4,
        ProtocolSet::singleton(Protocol::Tcp).with(Protocol::Udp),
        3,
    )
    .unwrap()
}

fn rand_addr_range(rng: &mut ChaCha8Rng, max: u32) -> AddrRange {
    let a = rng.gen_range(0..=max);
    let b = rng.gen_range(0..=max);
    AddrRange::new(a.min(b), a.max(b))
}

fn rand_sub_addr(rng: &mut ChaCha8Rng, outer: AddrRange) -> AddrRange {
    let a = rng.gen_range(outer.lo()..=outer.hi());
    let b = rng.gen_range(outer.lo()..=outer.hi());
    AddrRange::new(a.min(b), a.max(b))
}

fn rand_port_range(rng: &mut ChaCha8Rng, max: u16) -> PortRange {
    let a = rng.gen_range(0..=max);
    let b = rng.gen_range(0..=max);
    PortRange::new(a.min(b), a.max(b))
}

fn rand_sub_ports(rng: &mut ChaCha8Rng, outer: PortRange) -> PortRange {
    let a = rng.gen_range(outer.lo()..=outer.hi());
    let b = rng.gen_range(outer.lo()..=outer.hi());
    PortRange::new(a.min(b), a.max(b))
}

fn rand_protocols(rng: &mut ChaCha8Rng) -> ProtocolSet {
    match rng.gen_range(0..3) {
        0 => ProtocolSet::singleton(Protocol::Tcp),
        1 => ProtocolSet::singleton(Protocol::Udp),
        _ => ProtocolSet::singleton(Protocol::Tcp).with(Protocol::Udp),
    }
}

fn rand_sub_protocols(rng: &mut ChaCha8Rng, outer: ProtocolSet) -> ProtocolSet {
    let members: Vec<Protocol> = outer.iter().collect();
    if members.len() == 1 {
        return outer;
    }
    match rng.gen_range(0..3) {
        0 => ProtocolSet::singleton(members[0]),
        1 => ProtocolSet::singleton(members[1]),
        _ => outer,
    }
}

fn rand_action(rng: &mut ChaCha8Rng) -> Action {
    if rng.gen_bool(0.5) {
        Action::Deny
    } else {
        Action::Accept
    }
}

struct RandomInstance {
    firewalls: BTreeMap<String, FirewallConfig>,
    zones: ZoneTable,
    catalog: PathCatalog,
    directives: Vec<SecurityDirective>,
}

fn random_instance(rng: &mut ChaCha8Rng) -> RandomInstance {
    let nf = rng.gen_range(1..=3);
    let mut firewalls = BTreeMap::new();
    for i in 1..=nf {
        let id = format!("F{i}");
        let nrules = rng.gen_range(0..=5);
        let rules = (0..nrules)
            .map(|_| FilteringRule {
                filter: HeaderCube::new(
                    rand_addr_range(rng, 15),
                    rand_addr_range(rng, 15),
                    rand_protocols(rng),
                    rand_port_range(rng, 7),
                ),
                action: rand_action(rng),
            })
            .collect();
        firewalls.insert(id.clone(), FirewallConfig::new(id, rules, rand_action(rng)));
    }
    let fw_ids: Vec<String> = firewalls.keys().cloned().collect();

    let nz = rng.gen_range(2..=3);
    let zones: Vec<Zone> = (1..=nz)
        .map(|i| Zone {
            id: format!("Z{i}"),
            addresses: vec![rand_addr_range(rng, 15)],
            parent: None,
        })
        .collect();
    let zone_ids: Vec<String> = zones.iter().map(|z| z.id.clone()).collect();
    let zones = ZoneTable::new(zones).unwrap();

    let mut catalog = PathCatalog::new();
    for s in &zone_ids {
        for d in &zone_ids {
            let npaths = rng.gen_range(1..=3);
            let routes = (0..npaths)
                .map(|_| {
                    let len = rng.gen_range(1..=fw_ids.len().min(3));
                    let mut pool = fw_ids.clone();
                    let mut route = Vec::new();
                    for _ in 0..len {
                        let k = rng.gen_range(0..pool.len());
                        route.push(pool.swap_remove(k));
                    }
                    route
                })
                .collect();
            catalog.insert(s, d, routes);
        }
    }

    let nd = rng.gen_range(1..=4);
    let mut directives = Vec::new();
    for i in 1..=nd {
        let src_zone = zone_ids[rng.gen_range(0..zone_ids.len())].clone();
        let dst_zone = zone_ids[rng.gen_range(0..zone_ids.len())].clone();
        let src_range = zones.get(&src_zone).unwrap().addresses[0];
        let dst_range = zones.get(&dst_zone).unwrap().addresses[0];
        let protocols = rand_protocols(rng);
        let ports = rand_port_range(rng, 7);
        let condition = TrafficPattern {
            src: Endpoint { zone: src_zone.clone(), addresses: vec![src_range] },
            dst: Endpoint { zone: dst_zone.clone(), addresses: vec![dst_range] },
            protocols,
            ports,
        };
        let nexc = rng.gen_range(0..=2);
        let exceptions = (0..nexc)
            .map(|j| Exception {
                id: format!("sd{i}_e{j}"),
                pattern: TrafficPattern {
                    src: Endpoint {
                        zone: src_zone.clone(),
                        addresses: vec![rand_sub_addr(rng, src_range)],
                    },
                    dst: Endpoint {
                        zone: dst_zone.clone(),
                        addresses: vec![rand_sub_addr(rng, dst_range)],
                    },
                    protocols: rand_sub_protocols(rng, protocols),
                    ports: rand_sub_ports(rng, ports),
                },
            })
            .collect();
        directives.push(SecurityDirective {
            id: format!("sd{i}"),
            action: rand_action(rng),
            condition,
            exceptions,
        });
    }
    RandomInstance { firewalls, zones, catalog, directives }
}

#[test]
fn criterion_7_engine_oracle_equivalence() {
    let started = Instant::now();
    let universe = tiny_universe();
    let mut rng = ChaCha8Rng::seed_from_u64(0x05EC_F1AE);
    let mut failures_seen = 0u32;

    for instance_no in 0..1000 {
        let instance = random_instance(&mut rng);
        let elements = extract_elements(&instance.directives).unwrap();

        // totally order every conflicting pair: earlier element wins
        let index_of: BTreeMap<&str, usize> =
            elements.iter().enumerate().map(|(i, e)| (e.id.as_str(), i)).collect();
        let mut priorities = PriorityRelation::empty();
        for c in detect_conflicts(&elements) {
            if index_of[c.accept_id.as_str()] < index_of[c.deny_id.as_str()] {
                priorities.add(&c.deny_id, &c.accept_id);
            } else {
                priorities.add(&c.accept_id, &c.deny_id);
            }
        }
        let policy = effective_domains(&elements, &priorities).unwrap();
        assert!(
            check_coherence(&policy).is_coherent(),
            "instance {instance_no}: total priority order yields coherence"
        );

        for element in &policy.elements {
            let check =
                check_directive(element, &instance.catalog, &instance.zones, &instance.firewalls)
                    .unwrap();
            let engine_conform = check.conforms();

            let routes = instance
                .catalog
                .paths_for(&instance.zones, &element.src_zone, &element.dst_zone)
                .unwrap();
            let paths: Vec<Vec<&FirewallConfig>> = routes
                .iter()
                .map(|r| r.iter().map(|id| &instance.firewalls[id]).collect())
                .collect();
            let oracle_conform = match element.action {
                Action::Accept => {
                    oracle_positive(&element.domain, &paths, &universe).unwrap().is_none()
                }
                Action::Deny => {
                    oracle_restrictive(&element.domain, &paths, &universe).unwrap().is_none()
                }
            };
            assert_eq!(
                engine_conform, oracle_conform,
                "instance {instance_no}, element {}: engine vs oracle",
                element.id
            );

            // every failure witness is confirmed by direct simulation
            match &check.checks {
                ElementChecks::Positive(paths) => {
                    for p in paths {
                        for (fw_id, verdict) in &p.verdicts {
                            if let PositiveVerdict::Failure { cause, witness } = verdict {
                                failures_seen += 1;
                                assert!(element.domain.member(*witness));
                                let fw = &instance.firewalls[fw_id];
                                assert_eq!(fw.first_match_action(*witness), Action::Deny);
                                match cause {
                                    fwcheck::engine::PositiveFailure::DenyRuleClash {
                                        clash,
                                        ..
                                    } => {
                                        assert!(!clash.is_empty());
                                        assert!(clash.is_subset_of(&element.domain));
                                        assert!(clash.member(*witness));
                                    }
                                    fwcheck::engine::PositiveFailure::UncoveredResidual {
                                        residual,
                                    } => {
                                        assert!(!residual.is_empty());
                                        assert!(residual.is_subset_of(&element.domain));
                                        assert!(residual.member(*witness));
                                    }
                                }
                            }
                        }
                    }
                }
                ElementChecks::Restrictive(path_checks) => {
                    for (p, fws) in path_checks.iter().zip(&paths) {
                        if let RestrictiveVerdict::Failure { leaked, witness } = &p.verdict {
                            failures_seen += 1;
                            assert!(!leaked.is_empty());
                            assert!(leaked.is_subset_of(&element.domain));
                            assert!(leaked.member(*witness));
                            assert_eq!(simulate_path(fws, *witness), PathOutcome::Accepted);
                        }
                    }
                }
            }
        }
    }
    assert!(failures_seen > 100, "generator produces a healthy mix of failures");
    finish("criterion 7 (engine-oracle equivalence, 1000 instances)", started, Duration::from_secs(60));
}

#[test]
fn criterion_8_set_algebra_properties() {
    let started = Instant::now();
    let universe = tiny_universe();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5E7A_19E8);

    let rand_set = |rng: &mut ChaCha8Rng| {
        let n = rng.gen_range(0..=4);
        PacketSet::from_cubes((0..n).map(|_| {
            HeaderCube::new(
                rand_addr_range(rng, 15),
                rand_addr_range(rng, 15),
                rand_protocols(rng),
                rand_port_range(rng, 7),
            )
        }))
    };

    for round in 0..10_000 {
        let a = rand_set(&mut rng);
        let b = rand_set(&mut rng);
        let c = rand_set(&mut rng);

        let union = a.union(&b);
        let inter = a.intersect(&b);
        let diff = a.difference(&b);
        assert!(union.is_canonical() && inter.is_canonical() && diff.is_canonical());

        // membership agrees with the boolean combination on every point
        for p in universe.points() {
            let (ma, mb) = (a.member(p), b.member(p));
            assert_eq!(union.member(p), ma || mb, "round {round}: union at {p}");
            assert_eq!(inter.member(p), ma && mb, "round {round}: intersect at {p}");
            assert_eq!(diff.member(p), ma && !mb, "round {round}: difference at {p}");
        }

        assert!(union.set_eq(&b.union(&a)));
        assert!(inter.set_eq(&b.intersect(&a)));
        assert!(union.union(&c).set_eq(&a.union(&b.union(&c))));
        assert!(inter.intersect(&c).set_eq(&a.intersect(&b.intersect(&c))));
        assert!(a.difference(&a).is_empty());
        assert!(diff.intersect(&b).is_empty());

        match a.witness() {
            Some(w) => {
                assert!(!a.is_empty());
                assert!(a.member(w));
            }
            None => assert!(a.is_empty()),
        }
        let card_a = a.cardinality(&universe).unwrap();
        assert_eq!(card_a == 0, a.is_empty());
        let lhs = union.cardinality(&universe).unwrap() + inter.cardinality(&universe).unwrap();
        assert_eq!(lhs, card_a + b.cardinality(&universe).unwrap());
    }

    finish("criterion 8 (set-algebra properties, 10000 triples)", started, Duration::from_secs(30));
}

#[test]
fn criterion_9_report_determinism() {
    let started = Instant::now();
    let job = load("policy_fixed.toml", "topology_fig5.toml", None);
    let first = run(&job, Mode::Full, true).unwrap().json();
    let job_again = load("policy_fixed.toml", "topology_fig5.toml", None);
    let second = run(&job_again, Mode::Full, true).unwrap().json();
    assert_eq!(first, second, "byte-identical machine reports");
    finish("criterion 9 (report determinism)", started, Duration::from_secs(5));
}

/// The positive check decomposes firewall-wise: success iff the element
/// domain is inside the firewall's accepted set.
#[test]
fn positive_check_decomposition_holds_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xDEC0_0001);
    for _ in 0..200 {
        let instance = random_instance(&mut rng);
        let elements = extract_elements(&instance.directives).unwrap();
        for e in &elements {
            for fw in instance.firewalls.values() {
                let success = positive_check(fw, &e.raw_domain).is_success();
                assert_eq!(success, e.raw_domain.is_subset_of(&fw.accepted_set()));
            }
        }
    }
}
