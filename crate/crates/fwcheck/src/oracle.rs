//! Brute-force reference checker on downscaled universes.
//!
//! The oracle never touches the set-algebra engine: it simulates every
//! packet of a directive's domain through every declared path with plain
//! first-match lookups and tests the two conformance definitions literally.
//! That makes it the independent ground truth the engine is validated
//! against.
//!
//! Real IPv4 universes are far too large to enumerate, so fixtures are
//! translated onto a small twin universe by a [`DownscaledModel`]: an
//! order-preserving collapse of every address and port interval the fixture
//! mentions. Distinct blocks stay distinct, nested blocks stay nested, and
//! every Boolean combination of fixture sets is empty exactly when its
//! downscaled image is, so engine verdicts carry over unchanged.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::firewall::{Action, FirewallConfig};
use crate::packetspace::{
    AddrRange, HeaderCube, HeaderPoint, PacketSet, PortRange, Protocol, ProtocolSet,
    UniverseError, UniverseSpec,
};

/// Enumeration refuses universes with more points than this.
pub const ENUMERATION_CAP: u128 = 1 << 20;

/// End-to-end outcome of one packet on one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathOutcome {
    Accepted,
    /// Denied by the firewall at this 1-based position.
    DeniedAt(usize),
}

/// Applies first-match filtering at each firewall in order; the first deny
/// wins, otherwise the packet traverses the path.
pub fn simulate_path(path: &[&FirewallConfig], p: HeaderPoint) -> PathOutcome {
    for (pos, fw) in path.iter().enumerate() {
        if fw.first_match_action(p) == Action::Deny {
            return PathOutcome::DeniedAt(pos + 1);
        }
    }
    PathOutcome::Accepted
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("universe has {0} points, above the enumeration cap of {ENUMERATION_CAP}; use a smaller model")]
    UniverseTooLarge(u128),
    #[error(transparent)]
    Universe(#[from] UniverseError),
    #[error("address range {0} is not expressible in the downscaled model")]
    UnmappableAddress(AddrRange),
    #[error("port range {0} is not expressible in the downscaled model")]
    UnmappablePorts(PortRange),
    #[error("protocol set {{{0}}} does not respect the downscaled model's protocol classes")]
    UnmappableProtocols(ProtocolSet),
    #[error("downscaled model needs a nonempty vocabulary")]
    EmptyVocabulary,
}

/// A packet of the domain that some firewall on some path denies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PositiveCounterexample {
    pub packet: HeaderPoint,
    /// 0-based index into the supplied path list.
    pub path_index: usize,
    /// 1-based position of the denying firewall on that path.
    pub firewall_pos: usize,
}

/// A packet of the domain that traverses a whole path unchallenged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RestrictiveCounterexample {
    pub packet: HeaderPoint,
    /// 0-based index into the supplied path list.
    pub path_index: usize,
}

/// Fixed-size bitmask over the enumerated universe points.
struct PointMask {
    words: Vec<u64>,
}

impl PointMask {
    fn zeros(points: u64) -> PointMask {
        PointMask { words: vec![0; points.div_ceil(64) as usize] }
    }

    fn set(&mut self, i: u64) {
        self.words[(i / 64) as usize] |= 1 << (i % 64);
    }

    fn first_and_not(&self, other: &PointMask) -> Option<u64> {
        for (w, (a, b)) in self.words.iter().zip(&other.words).enumerate() {
            let bits = a & !b;
            if bits != 0 {
                return Some(w as u64 * 64 + bits.trailing_zeros() as u64);
            }
        }
        None
    }

    fn and_assign(&mut self, other: &PointMask) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    fn first_set(&self) -> Option<u64> {
        for (w, a) in self.words.iter().enumerate() {
            if *a != 0 {
                return Some(w as u64 * 64 + a.trailing_zeros() as u64);
            }
        }
        None
    }
}

fn checked_points(universe: &UniverseSpec) -> Result<u64, OracleError> {
    let points = universe.point_count();
    if points > ENUMERATION_CAP {
        return Err(OracleError::UniverseTooLarge(points));
    }
    Ok(points as u64)
}

fn domain_mask(
    domain: &PacketSet,
    universe: &UniverseSpec,
    points: u64,
) -> Result<PointMask, OracleError> {
    for cube in domain.cubes() {
        universe.check_cube(cube)?;
    }
    let mut mask = PointMask::zeros(points);
    for (rank, p) in universe.points().enumerate() {
        if domain.member(p) {
            mask.set(rank as u64);
        }
    }
    Ok(mask)
}

fn accept_mask(fw: &FirewallConfig, universe: &UniverseSpec, points: u64) -> PointMask {
    let mut mask = PointMask::zeros(points);
    for (rank, p) in universe.points().enumerate() {
        if fw.first_match_action(p) == Action::Accept {
            mask.set(rank as u64);
        }
    }
    mask
}

fn accept_masks<'a>(
    paths: &[Vec<&'a FirewallConfig>],
    universe: &UniverseSpec,
    points: u64,
) -> BTreeMap<&'a str, PointMask> {
    let mut masks = BTreeMap::new();
    for path in paths {
        for fw in path {
            masks
                .entry(fw.id.as_str())
                .or_insert_with(|| accept_mask(fw, universe, points));
        }
    }
    masks
}

/// Tests the positive conformance definition literally: every enumerated
/// member of `domain` must be accepted by every firewall on every path.
/// Returns the counterexample smallest by (packet, path, firewall), if any.
pub fn check_positive(
    domain: &PacketSet,
    paths: &[Vec<&FirewallConfig>],
    universe: &UniverseSpec,
) -> Result<Option<PositiveCounterexample>, OracleError> {
    let points = checked_points(universe)?;
    let dom = domain_mask(domain, universe, points)?;
    let masks = accept_masks(paths, universe, points);
    let mut best: Option<(u64, usize, usize)> = None;
    for (pi, path) in paths.iter().enumerate() {
        for (pos, fw) in path.iter().enumerate() {
            if let Some(rank) = dom.first_and_not(&masks[fw.id.as_str()]) {
                let candidate = (rank, pi, pos + 1);
                if best.is_none_or(|b| candidate < b) {
                    best = Some(candidate);
                }
            }
        }
    }
    Ok(best.map(|(rank, path_index, firewall_pos)| PositiveCounterexample {
        packet: universe.point_at(rank),
        path_index,
        firewall_pos,
    }))
}

/// Tests the restrictive conformance definition literally: every enumerated
/// member of `domain` must be denied by at least one firewall on every
/// path. Returns the counterexample smallest by (packet, path), if any.
pub fn check_restrictive(
    domain: &PacketSet,
    paths: &[Vec<&FirewallConfig>],
    universe: &UniverseSpec,
) -> Result<Option<RestrictiveCounterexample>, OracleError> {
    let points = checked_points(universe)?;
    let dom = domain_mask(domain, universe, points)?;
    let masks = accept_masks(paths, universe, points);
    let mut best: Option<(u64, usize)> = None;
    for (pi, path) in paths.iter().enumerate() {
        let mut leak = PointMask::zeros(points);
        for (i, w) in dom.words.iter().enumerate() {
            leak.words[i] = *w;
        }
        for fw in path {
            leak.and_assign(&masks[fw.id.as_str()]);
        }
        if let Some(rank) = leak.first_set() {
            let candidate = (rank, pi);
            if best.is_none_or(|b| candidate < b) {
                best = Some(candidate);
            }
        }
    }
    Ok(best.map(|(rank, path_index)| RestrictiveCounterexample {
        packet: universe.point_at(rank),
        path_index,
    }))
}

/// Sorted, deduplicated interval atoms over one numeric dimension.
///
/// The atoms are the finest segments induced by a vocabulary of intervals;
/// atom `i` collapses to the single downscaled value `i`. Any interval that
/// is a union of consecutive atoms maps to the covering downscaled interval,
/// which preserves every disjointness and nesting relation of the
/// vocabulary.
#[derive(Debug, Clone)]
struct AtomMap {
    atoms: Vec<(u64, u64)>,
}

impl AtomMap {
    fn build(intervals: impl Iterator<Item = (u64, u64)>, max_value: u64) -> AtomMap {
        let intervals: Vec<(u64, u64)> = intervals.collect();
        let mut cuts: BTreeSet<u64> = BTreeSet::new();
        for &(lo, hi) in &intervals {
            cuts.insert(lo);
            if hi < max_value {
                cuts.insert(hi + 1);
            }
        }
        cuts.insert(max_value); // sentinel upper bound handled below
        let bounds: Vec<u64> = cuts.into_iter().collect();
        let mut atoms = Vec::new();
        let covered =
            |lo: u64, hi: u64| intervals.iter().any(|&(a, b)| a <= lo && hi <= b);
        for pair in bounds.windows(2) {
            let (lo, hi) = (pair[0], pair[1] - 1);
            if covered(lo, hi) {
                atoms.push((lo, hi));
            }
        }
        // the final segment up to max_value is cut off by the sentinel
        if let Some(&last) = bounds.last() {
            if covered(last, max_value) {
                atoms.push((last, max_value));
            }
        }
        AtomMap { atoms }
    }

    fn len(&self) -> usize {
        self.atoms.len()
    }

    /// Maps an interval that tiles exactly onto consecutive atoms.
    fn map(&self, lo: u64, hi: u64) -> Option<(u64, u64)> {
        let start = self.atoms.binary_search_by_key(&lo, |a| a.0).ok()?;
        let mut end = start;
        while self.atoms[end].1 < hi {
            let next = end + 1;
            if next >= self.atoms.len() || self.atoms[next].0 != self.atoms[end].1 + 1 {
                return None;
            }
            end = next;
        }
        (self.atoms[end].1 == hi).then_some((start as u64, end as u64))
    }
}

fn bits_for(n: usize, max_bits: u8) -> u8 {
    let mut bits = 1u8;
    while (1u64 << bits) < n as u64 && bits < max_bits {
        bits += 1;
    }
    bits
}

/// Everything a fixture mentions, per dimension: the input vocabulary a
/// downscaled model is derived from.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    addresses: BTreeSet<(u32, u32)>,
    ports: BTreeSet<(u16, u16)>,
    protocol_sets: BTreeSet<ProtocolSet>,
}

impl Vocabulary {
    pub fn new() -> Vocabulary {
        Vocabulary::default()
    }

    pub fn add_addr(&mut self, r: AddrRange) {
        self.addresses.insert((r.lo(), r.hi()));
    }

    pub fn add_ports(&mut self, r: PortRange) {
        self.ports.insert((r.lo(), r.hi()));
    }

    pub fn add_protocols(&mut self, s: ProtocolSet) {
        self.protocol_sets.insert(s);
    }

    pub fn add_cube(&mut self, cube: &HeaderCube) {
        self.add_addr(cube.src);
        self.add_addr(cube.dst);
        self.add_ports(cube.ports);
        self.add_protocols(cube.protocols);
    }

    pub fn add_firewall(&mut self, fw: &FirewallConfig) {
        for rule in &fw.rules {
            self.add_cube(&rule.filter);
        }
    }
}

/// Structure-preserving translation from fixture scale onto a small
/// enumerable universe.
#[derive(Debug, Clone)]
pub struct DownscaledModel {
    universe: UniverseSpec,
    addr_atoms: AtomMap,
    port_atoms: AtomMap,
    /// Representative protocol per behavior class.
    representatives: ProtocolSet,
    /// Class representative for each protocol.
    rep_of: BTreeMap<Protocol, Protocol>,
    vocabulary: Vocabulary,
}

impl DownscaledModel {
    /// Derives the model from a vocabulary.
    ///
    /// Addresses and ports are collapsed atom-wise. Protocols are grouped
    /// into classes that appear in exactly the same vocabulary sets; one
    /// representative per class survives, so a wildcard-only protocol stays
    /// distinguishable from explicitly named ones.
    pub fn from_vocabulary(vocabulary: Vocabulary) -> Result<DownscaledModel, OracleError> {
        if vocabulary.addresses.is_empty()
            || vocabulary.ports.is_empty()
            || vocabulary.protocol_sets.is_empty()
        {
            return Err(OracleError::EmptyVocabulary);
        }
        let addr_atoms = AtomMap::build(
            vocabulary
                .addresses
                .iter()
                .map(|&(lo, hi)| (u64::from(lo), u64::from(hi))),
            u64::from(u32::MAX),
        );
        let port_atoms = AtomMap::build(
            vocabulary
                .ports
                .iter()
                .map(|&(lo, hi)| (u64::from(lo), u64::from(hi))),
            u64::from(u16::MAX),
        );

        let signature = |p: Protocol| -> Vec<bool> {
            vocabulary.protocol_sets.iter().map(|s| s.contains(p)).collect()
        };
        let mut rep_of = BTreeMap::new();
        let mut representatives = ProtocolSet::EMPTY;
        for p in Protocol::ALL {
            let rep = Protocol::ALL
                .into_iter()
                .find(|q| signature(*q) == signature(p))
                .unwrap_or(p);
            rep_of.insert(p, rep);
            if rep == p {
                representatives = representatives.with(p);
            }
        }

        let addr_bits = bits_for(addr_atoms.len(), 32);
        let port_bits = bits_for(port_atoms.len(), 16);
        let universe = UniverseSpec::new(addr_bits, addr_bits, representatives, port_bits)?;
        Ok(DownscaledModel {
            universe,
            addr_atoms,
            port_atoms,
            representatives,
            rep_of,
            vocabulary,
        })
    }

    pub fn universe(&self) -> &UniverseSpec {
        &self.universe
    }

    /// Fixture interval to downscaled interval, per vocabulary entry.
    pub fn address_map(&self) -> Vec<(AddrRange, AddrRange)> {
        self.vocabulary
            .addresses
            .iter()
            .map(|&(lo, hi)| {
                let src = AddrRange::new(lo, hi);
                (src, self.map_addr(src).expect("vocabulary entries always map"))
            })
            .collect()
    }

    pub fn map_addr(&self, r: AddrRange) -> Result<AddrRange, OracleError> {
        self.addr_atoms
            .map(u64::from(r.lo()), u64::from(r.hi()))
            .map(|(lo, hi)| AddrRange::new(lo as u32, hi as u32))
            .ok_or(OracleError::UnmappableAddress(r))
    }

    pub fn map_ports(&self, r: PortRange) -> Result<PortRange, OracleError> {
        self.port_atoms
            .map(u64::from(r.lo()), u64::from(r.hi()))
            .map(|(lo, hi)| PortRange::new(lo as u16, hi as u16))
            .ok_or(OracleError::UnmappablePorts(r))
    }

    pub fn map_protocols(&self, s: ProtocolSet) -> Result<ProtocolSet, OracleError> {
        // the set must be a union of whole classes
        for p in Protocol::ALL {
            if s.contains(p) != s.contains(self.rep_of[&p]) {
                return Err(OracleError::UnmappableProtocols(s));
            }
        }
        Ok(s.intersect(self.representatives))
    }

    pub fn map_cube(&self, cube: &HeaderCube) -> Result<HeaderCube, OracleError> {
        Ok(HeaderCube::new(
            self.map_addr(cube.src)?,
            self.map_addr(cube.dst)?,
            self.map_protocols(cube.protocols)?,
            self.map_ports(cube.ports)?,
        ))
    }

    pub fn map_set(&self, set: &PacketSet) -> Result<PacketSet, OracleError> {
        let cubes: Result<Vec<HeaderCube>, OracleError> =
            set.cubes().iter().map(|c| self.map_cube(c)).collect();
        Ok(PacketSet::from_cubes(cubes?))
    }

    pub fn map_firewall(&self, fw: &FirewallConfig) -> Result<FirewallConfig, OracleError> {
        let rules = fw
            .rules
            .iter()
            .map(|r| {
                Ok(crate::firewall::FilteringRule {
                    filter: self.map_cube(&r.filter)?,
                    action: r.action,
                })
            })
            .collect::<Result<Vec<_>, OracleError>>()?;
        Ok(FirewallConfig::new(fw.id.clone(), rules, fw.default_action))
    }
}
