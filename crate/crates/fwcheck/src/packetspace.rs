//! Exact set algebra over the packet-header universe.
//!
//! Every domain computation in the checker reduces to Boolean operations on
//! [`PacketSet`] values: finite unions of pairwise-disjoint four-dimensional
//! header cubes (source address, destination address, protocol, destination
//! port). Keeping the cubes disjoint makes emptiness, membership and witness
//! extraction decidable by plain interval arithmetic, with no approximation
//! anywhere.
//!
//! Address ranges are closed intervals rather than CIDR blocks only, because
//! set differences of CIDR blocks produce intervals that no single prefix can
//! describe.

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use thiserror::Error;

/// Transport protocols distinguished by the model.
///
/// The derived order (`Tcp < Udp < Icmp`) is the tie-break order used by
/// [`PacketSet::witness`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Protocol {
    Tcp,
    Udp,
    Icmp,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Tcp, Protocol::Udp, Protocol::Icmp];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Tcp => "tcp",
            Protocol::Udp => "udp",
            Protocol::Icmp => "icmp",
        }
    }

    fn bit(self) -> u8 {
        match self {
            Protocol::Tcp => 1,
            Protocol::Udp => 2,
            Protocol::Icmp => 4,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = FieldError;

    fn from_str(s: &str) -> Result<Self, FieldError> {
        match s {
            "tcp" => Ok(Protocol::Tcp),
            "udp" => Ok(Protocol::Udp),
            "icmp" => Ok(Protocol::Icmp),
            other => Err(FieldError::UnknownProtocol(other.to_string())),
        }
    }
}

/// A subset of the three protocols, stored as a bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProtocolSet(u8);

impl ProtocolSet {
    pub const EMPTY: ProtocolSet = ProtocolSet(0);
    pub const FULL: ProtocolSet = ProtocolSet(0b111);

    pub fn singleton(p: Protocol) -> ProtocolSet {
        ProtocolSet(p.bit())
    }

    pub fn contains(self, p: Protocol) -> bool {
        self.0 & p.bit() != 0
    }

    pub fn with(self, p: Protocol) -> ProtocolSet {
        ProtocolSet(self.0 | p.bit())
    }

    pub fn union(self, other: ProtocolSet) -> ProtocolSet {
        ProtocolSet(self.0 | other.0)
    }

    pub fn intersect(self, other: ProtocolSet) -> ProtocolSet {
        ProtocolSet(self.0 & other.0)
    }

    pub fn difference(self, other: ProtocolSet) -> ProtocolSet {
        ProtocolSet(self.0 & !other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_full(self) -> bool {
        self.0 == Self::FULL.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Protocol> {
        Protocol::ALL.into_iter().filter(move |p| self.contains(*p))
    }

    /// Smallest member in witness order, if any.
    pub fn min(self) -> Option<Protocol> {
        self.iter().next()
    }
}

impl fmt::Display for ProtocolSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_full() {
            return f.write_str("*");
        }
        let mut first = true;
        for p in self.iter() {
            if !first {
                f.write_str(",")?;
            }
            f.write_str(p.name())?;
            first = false;
        }
        Ok(())
    }
}

impl FromIterator<Protocol> for ProtocolSet {
    fn from_iter<I: IntoIterator<Item = Protocol>>(iter: I) -> Self {
        iter.into_iter()
            .fold(ProtocolSet::EMPTY, ProtocolSet::with)
    }
}

/// Closed interval of IPv4 addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AddrRange {
    lo: u32,
    hi: u32,
}

impl AddrRange {
    pub const FULL: AddrRange = AddrRange { lo: 0, hi: u32::MAX };

    /// Panics if `lo > hi`; parsed input goes through [`parse_addr_spec`]
    /// which reports inverted ranges as errors instead.
    pub fn new(lo: u32, hi: u32) -> AddrRange {
        assert!(lo <= hi, "inverted address range");
        AddrRange { lo, hi }
    }

    pub fn single(addr: u32) -> AddrRange {
        AddrRange { lo: addr, hi: addr }
    }

    /// The interval covered by `base/mask_len`, host bits of `base` cleared.
    pub fn cidr(base: u32, mask_len: u8) -> Result<AddrRange, FieldError> {
        if mask_len > 32 {
            return Err(FieldError::MaskOutOfRange(mask_len));
        }
        let host = if mask_len == 0 {
            u32::MAX
        } else {
            (1u32 << (32 - u32::from(mask_len))) - 1
        };
        let net = base & !host;
        Ok(AddrRange { lo: net, hi: net | host })
    }

    pub fn lo(self) -> u32 {
        self.lo
    }

    pub fn hi(self) -> u32 {
        self.hi
    }

    pub fn contains(self, addr: u32) -> bool {
        self.lo <= addr && addr <= self.hi
    }

    pub fn contains_range(self, other: AddrRange) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersect(self, other: AddrRange) -> Option<AddrRange> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(AddrRange { lo, hi })
    }

    pub fn width(self) -> u64 {
        u64::from(self.hi) - u64::from(self.lo) + 1
    }
}

impl fmt::Display for AddrRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == AddrRange::FULL {
            f.write_str("*")
        } else if self.lo == self.hi {
            write!(f, "{}", Ipv4Addr::from(self.lo))
        } else {
            write!(f, "{}-{}", Ipv4Addr::from(self.lo), Ipv4Addr::from(self.hi))
        }
    }
}

/// Closed interval of destination ports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PortRange {
    lo: u16,
    hi: u16,
}

impl PortRange {
    pub const FULL: PortRange = PortRange { lo: 0, hi: u16::MAX };

    pub fn new(lo: u16, hi: u16) -> PortRange {
        assert!(lo <= hi, "inverted port range");
        PortRange { lo, hi }
    }

    pub fn single(port: u16) -> PortRange {
        PortRange { lo: port, hi: port }
    }

    pub fn lo(self) -> u16 {
        self.lo
    }

    pub fn hi(self) -> u16 {
        self.hi
    }

    pub fn contains(self, port: u16) -> bool {
        self.lo <= port && port <= self.hi
    }

    pub fn intersect(self, other: PortRange) -> Option<PortRange> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(PortRange { lo, hi })
    }

    pub fn width(self) -> u64 {
        u64::from(self.hi) - u64::from(self.lo) + 1
    }
}

impl fmt::Display for PortRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == PortRange::FULL {
            f.write_str("*")
        } else if self.lo == self.hi {
            write!(f, "{}", self.lo)
        } else {
            write!(f, "{}-{}", self.lo, self.hi)
        }
    }
}

/// One concrete packet header: a single point of the universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HeaderPoint {
    pub src: u32,
    pub dst: u32,
    pub protocol: Protocol,
    pub port: u16,
}

impl HeaderPoint {
    pub fn new(src: u32, dst: u32, protocol: Protocol, port: u16) -> HeaderPoint {
        HeaderPoint { src, dst, protocol, port }
    }
}

impl fmt::Display for HeaderPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            Ipv4Addr::from(self.src),
            Ipv4Addr::from(self.dst),
            self.protocol,
            self.port
        )
    }
}

/// Axis-aligned box in the four header dimensions.
///
/// The protocol set is always nonempty; constructors enforce it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HeaderCube {
    pub src: AddrRange,
    pub dst: AddrRange,
    pub protocols: ProtocolSet,
    pub ports: PortRange,
}

impl HeaderCube {
    pub const FULL: HeaderCube = HeaderCube {
        src: AddrRange::FULL,
        dst: AddrRange::FULL,
        protocols: ProtocolSet::FULL,
        ports: PortRange::FULL,
    };

    pub fn new(src: AddrRange, dst: AddrRange, protocols: ProtocolSet, ports: PortRange) -> HeaderCube {
        assert!(!protocols.is_empty(), "cube with empty protocol set");
        HeaderCube { src, dst, protocols, ports }
    }

    pub fn contains(&self, p: HeaderPoint) -> bool {
        self.src.contains(p.src)
            && self.dst.contains(p.dst)
            && self.protocols.contains(p.protocol)
            && self.ports.contains(p.port)
    }

    pub fn intersect(&self, other: &HeaderCube) -> Option<HeaderCube> {
        let src = self.src.intersect(other.src)?;
        let dst = self.dst.intersect(other.dst)?;
        let protocols = self.protocols.intersect(other.protocols);
        if protocols.is_empty() {
            return None;
        }
        let ports = self.ports.intersect(other.ports)?;
        Some(HeaderCube { src, dst, protocols, ports })
    }

    /// Splits `self \ other` into disjoint cubes, carving dimension by
    /// dimension in the fixed order src, dst, protocol, port. The fully
    /// overlapped core is dropped.
    fn subtract(&self, other: &HeaderCube) -> Vec<HeaderCube> {
        if self.intersect(other).is_none() {
            return vec![*self];
        }
        let mut pieces = Vec::new();
        let mut rest = *self;

        let olap = rest.src.intersect(other.src).expect("checked overlap");
        if rest.src.lo < olap.lo {
            pieces.push(HeaderCube { src: AddrRange::new(rest.src.lo, olap.lo - 1), ..rest });
        }
        if olap.hi < rest.src.hi {
            pieces.push(HeaderCube { src: AddrRange::new(olap.hi + 1, rest.src.hi), ..rest });
        }
        rest.src = olap;

        let olap = rest.dst.intersect(other.dst).expect("checked overlap");
        if rest.dst.lo < olap.lo {
            pieces.push(HeaderCube { dst: AddrRange::new(rest.dst.lo, olap.lo - 1), ..rest });
        }
        if olap.hi < rest.dst.hi {
            pieces.push(HeaderCube { dst: AddrRange::new(olap.hi + 1, rest.dst.hi), ..rest });
        }
        rest.dst = olap;

        let keep = rest.protocols.difference(other.protocols);
        if !keep.is_empty() {
            pieces.push(HeaderCube { protocols: keep, ..rest });
        }
        rest.protocols = rest.protocols.intersect(other.protocols);

        let olap = rest.ports.intersect(other.ports).expect("checked overlap");
        if rest.ports.lo < olap.lo {
            pieces.push(HeaderCube { ports: PortRange::new(rest.ports.lo, olap.lo - 1), ..rest });
        }
        if olap.hi < rest.ports.hi {
            pieces.push(HeaderCube { ports: PortRange::new(olap.hi + 1, rest.ports.hi), ..rest });
        }

        pieces
    }

    pub fn point_count(&self) -> u128 {
        u128::from(self.src.width())
            * u128::from(self.dst.width())
            * self.protocols.len() as u128
            * u128::from(self.ports.width())
    }

    fn sort_key(&self) -> (u32, u32, u32, u32, u8, u16, u16) {
        (
            self.src.lo,
            self.src.hi,
            self.dst.lo,
            self.dst.hi,
            self.protocols.0,
            self.ports.lo,
            self.ports.hi,
        )
    }
}

impl fmt::Display for HeaderCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {} {} port {}", self.src, self.dst, self.protocols, self.ports)
    }
}

/// Field-level parse failure for rule and directive patterns.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("malformed address '{0}'")]
    MalformedAddress(String),
    #[error("CIDR mask {0} out of range (must be 0-32)")]
    MaskOutOfRange(u8),
    #[error("inverted range '{0}' (low end above high end)")]
    InvertedRange(String),
    #[error("unknown protocol '{0}'")]
    UnknownProtocol(String),
    #[error("malformed port '{0}'")]
    MalformedPort(String),
}

/// A [`FieldError`] tagged with the offending field name.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{field}: {source}")]
pub struct CubeError {
    pub field: &'static str,
    #[source]
    pub source: FieldError,
}

/// Parses an address specification: `*`, `a.b.c.d`, `a.b.c.d/m`, or
/// `a.b.c.d-e.f.g.h`.
pub fn parse_addr_spec(spec: &str) -> Result<AddrRange, FieldError> {
    let spec = spec.trim();
    if spec == "*" {
        return Ok(AddrRange::FULL);
    }
    if let Some((base, mask)) = spec.split_once('/') {
        let base: Ipv4Addr = base
            .parse()
            .map_err(|_| FieldError::MalformedAddress(spec.to_string()))?;
        let mask: u8 = mask
            .parse()
            .map_err(|_| FieldError::MalformedAddress(spec.to_string()))?;
        return AddrRange::cidr(u32::from(base), mask);
    }
    if let Some((lo, hi)) = spec.split_once('-') {
        let lo: Ipv4Addr = lo
            .trim()
            .parse()
            .map_err(|_| FieldError::MalformedAddress(spec.to_string()))?;
        let hi: Ipv4Addr = hi
            .trim()
            .parse()
            .map_err(|_| FieldError::MalformedAddress(spec.to_string()))?;
        let (lo, hi) = (u32::from(lo), u32::from(hi));
        if lo > hi {
            return Err(FieldError::InvertedRange(spec.to_string()));
        }
        return Ok(AddrRange::new(lo, hi));
    }
    let addr: Ipv4Addr = spec
        .parse()
        .map_err(|_| FieldError::MalformedAddress(spec.to_string()))?;
    Ok(AddrRange::single(u32::from(addr)))
}

/// Parses a protocol specification: a protocol name or `*`.
pub fn parse_protocol_spec(spec: &str) -> Result<ProtocolSet, FieldError> {
    let spec = spec.trim();
    if spec == "*" {
        return Ok(ProtocolSet::FULL);
    }
    Ok(ProtocolSet::singleton(spec.parse()?))
}

/// Parses a port specification: `n`, `n-m`, or `*`.
pub fn parse_port_spec(spec: &str) -> Result<PortRange, FieldError> {
    let spec = spec.trim();
    if spec == "*" {
        return Ok(PortRange::FULL);
    }
    if let Some((lo, hi)) = spec.split_once('-') {
        let lo: u16 = lo
            .trim()
            .parse()
            .map_err(|_| FieldError::MalformedPort(spec.to_string()))?;
        let hi: u16 = hi
            .trim()
            .parse()
            .map_err(|_| FieldError::MalformedPort(spec.to_string()))?;
        if lo > hi {
            return Err(FieldError::InvertedRange(spec.to_string()));
        }
        return Ok(PortRange::new(lo, hi));
    }
    let port: u16 = spec
        .parse()
        .map_err(|_| FieldError::MalformedPort(spec.to_string()))?;
    Ok(PortRange::single(port))
}

/// Builds the cube whose membership is the conjunction of the four field
/// predicates. Errors carry the offending field name.
pub fn cube_of(src: &str, dst: &str, protocol: &str, port: &str) -> Result<HeaderCube, CubeError> {
    let src = parse_addr_spec(src).map_err(|source| CubeError { field: "src", source })?;
    let dst = parse_addr_spec(dst).map_err(|source| CubeError { field: "dst", source })?;
    let protocols =
        parse_protocol_spec(protocol).map_err(|source| CubeError { field: "protocol", source })?;
    let ports = parse_port_spec(port).map_err(|source| CubeError { field: "port", source })?;
    Ok(HeaderCube::new(src, dst, protocols, ports))
}

/// A finite union of pairwise-disjoint header cubes.
///
/// The empty set is the empty cube sequence; every operation returns a value
/// in the same canonical (disjoint, sorted) form.
#[derive(Debug, Clone)]
pub struct PacketSet {
    cubes: Vec<HeaderCube>,
}

impl PacketSet {
    pub fn empty() -> PacketSet {
        PacketSet { cubes: Vec::new() }
    }

    pub fn full() -> PacketSet {
        PacketSet { cubes: vec![HeaderCube::FULL] }
    }

    pub fn from_cube(cube: HeaderCube) -> PacketSet {
        PacketSet { cubes: vec![cube] }
    }

    /// Canonicalizes an arbitrary (possibly overlapping) cube collection.
    pub fn from_cubes<I: IntoIterator<Item = HeaderCube>>(cubes: I) -> PacketSet {
        cubes
            .into_iter()
            .fold(PacketSet::empty(), |acc, c| acc.union(&PacketSet::from_cube(c)))
    }

    pub fn cubes(&self) -> &[HeaderCube] {
        &self.cubes
    }

    fn sorted(mut cubes: Vec<HeaderCube>) -> PacketSet {
        cubes.sort_by_key(HeaderCube::sort_key);
        PacketSet { cubes }
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn member(&self, p: HeaderPoint) -> bool {
        self.cubes.iter().any(|c| c.contains(p))
    }

    pub fn union(&self, other: &PacketSet) -> PacketSet {
        let mut cubes = self.cubes.clone();
        cubes.extend(other.difference(self).cubes);
        Self::sorted(cubes)
    }

    pub fn intersect(&self, other: &PacketSet) -> PacketSet {
        let mut cubes = Vec::new();
        for a in &self.cubes {
            for b in &other.cubes {
                if let Some(c) = a.intersect(b) {
                    cubes.push(c);
                }
            }
        }
        Self::sorted(cubes)
    }

    pub fn difference(&self, other: &PacketSet) -> PacketSet {
        let mut cubes = Vec::new();
        for a in &self.cubes {
            let mut pieces = vec![*a];
            for b in &other.cubes {
                if pieces.is_empty() {
                    break;
                }
                pieces = pieces.iter().flat_map(|p| p.subtract(b)).collect();
            }
            cubes.extend(pieces);
        }
        Self::sorted(cubes)
    }

    /// True iff the two sets have the same members, regardless of how they
    /// are cut into cubes.
    pub fn set_eq(&self, other: &PacketSet) -> bool {
        self.difference(other).is_empty() && other.difference(self).is_empty()
    }

    pub fn is_subset_of(&self, other: &PacketSet) -> bool {
        self.difference(other).is_empty()
    }

    /// Lexicographically smallest member under (src, dst, protocol, port),
    /// or `None` for the empty set.
    pub fn witness(&self) -> Option<HeaderPoint> {
        if self.cubes.is_empty() {
            return None;
        }
        let src = self.cubes.iter().map(|c| c.src.lo).min().unwrap();
        let at_src: Vec<&HeaderCube> = self.cubes.iter().filter(|c| c.src.lo == src).collect();
        let dst = at_src.iter().map(|c| c.dst.lo).min().unwrap();
        let at_dst: Vec<&&HeaderCube> = at_src.iter().filter(|c| c.dst.lo == dst).collect();
        let protocol = at_dst
            .iter()
            .filter_map(|c| c.protocols.min())
            .min()
            .unwrap();
        let port = at_dst
            .iter()
            .filter(|c| c.protocols.contains(protocol))
            .map(|c| c.ports.lo)
            .min()
            .unwrap();
        Some(HeaderPoint { src, dst, protocol, port })
    }

    /// Exact member count within `universe`. All cubes must lie inside the
    /// universe bounds.
    pub fn cardinality(&self, universe: &UniverseSpec) -> Result<u128, UniverseError> {
        let mut total = 0u128;
        for c in &self.cubes {
            universe.check_cube(c)?;
            total += c.point_count();
        }
        Ok(total)
    }

    /// Canonical-form check: no two cubes share a point.
    pub fn is_canonical(&self) -> bool {
        for (i, a) in self.cubes.iter().enumerate() {
            for b in &self.cubes[i + 1..] {
                if a.intersect(b).is_some() {
                    return false;
                }
            }
        }
        true
    }
}

/// Bounds of a (possibly downscaled) packet universe.
///
/// Full IPv4 scale is `UniverseSpec::ipv4()`; the enumeration-based oracle
/// runs on small universes built by [`crate::oracle::DownscaledModel`] or by
/// test generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniverseSpec {
    src_bits: u8,
    dst_bits: u8,
    protocols: ProtocolSet,
    port_bits: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UniverseError {
    #[error("address width {0} out of range (must be 1-32)")]
    AddrBitsOutOfRange(u8),
    #[error("port width {0} out of range (must be 1-16)")]
    PortBitsOutOfRange(u8),
    #[error("universe protocol set is empty")]
    EmptyProtocols,
    #[error("cube {0} lies outside the universe")]
    CubeOutsideUniverse(HeaderCube),
}

impl fmt::Display for UniverseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-bit src x {}-bit dst x {{{}}} x {}-bit port",
            self.src_bits, self.dst_bits, self.protocols, self.port_bits
        )
    }
}

impl UniverseSpec {
    pub fn new(
        src_bits: u8,
        dst_bits: u8,
        protocols: ProtocolSet,
        port_bits: u8,
    ) -> Result<UniverseSpec, UniverseError> {
        if src_bits == 0 || src_bits > 32 {
            return Err(UniverseError::AddrBitsOutOfRange(src_bits));
        }
        if dst_bits == 0 || dst_bits > 32 {
            return Err(UniverseError::AddrBitsOutOfRange(dst_bits));
        }
        if port_bits == 0 || port_bits > 16 {
            return Err(UniverseError::PortBitsOutOfRange(port_bits));
        }
        if protocols.is_empty() {
            return Err(UniverseError::EmptyProtocols);
        }
        Ok(UniverseSpec { src_bits, dst_bits, protocols, port_bits })
    }

    /// The real packet universe: full 32-bit addresses, all protocols,
    /// 16-bit ports.
    pub fn ipv4() -> UniverseSpec {
        UniverseSpec { src_bits: 32, dst_bits: 32, protocols: ProtocolSet::FULL, port_bits: 16 }
    }

    pub fn protocols(&self) -> ProtocolSet {
        self.protocols
    }

    pub fn max_src(&self) -> u32 {
        (((1u64 << self.src_bits) - 1) & 0xFFFF_FFFF) as u32
    }

    pub fn max_dst(&self) -> u32 {
        (((1u64 << self.dst_bits) - 1) & 0xFFFF_FFFF) as u32
    }

    pub fn max_port(&self) -> u16 {
        (((1u32 << self.port_bits) - 1) & 0xFFFF) as u16
    }

    pub fn full_cube(&self) -> HeaderCube {
        HeaderCube::new(
            AddrRange::new(0, self.max_src()),
            AddrRange::new(0, self.max_dst()),
            self.protocols,
            PortRange::new(0, self.max_port()),
        )
    }

    pub fn point_count(&self) -> u128 {
        self.full_cube().point_count()
    }

    pub fn contains_point(&self, p: HeaderPoint) -> bool {
        self.full_cube().contains(p)
    }

    pub fn check_cube(&self, cube: &HeaderCube) -> Result<(), UniverseError> {
        let full = self.full_cube();
        let inside = full.src.contains_range(cube.src)
            && full.dst.contains_range(cube.dst)
            && cube.protocols.difference(full.protocols).is_empty()
            && cube.ports.lo >= full.ports.lo
            && cube.ports.hi <= full.ports.hi;
        if inside {
            Ok(())
        } else {
            Err(UniverseError::CubeOutsideUniverse(*cube))
        }
    }

    /// All points of the universe in lexicographic (src, dst, protocol,
    /// port) order.
    pub fn points(&self) -> impl Iterator<Item = HeaderPoint> + '_ {
        let protos: Vec<Protocol> = self.protocols.iter().collect();
        let (max_src, max_dst, max_port) = (self.max_src(), self.max_dst(), self.max_port());
        (0..=max_src).flat_map(move |src| {
            let protos = protos.clone();
            (0..=max_dst).flat_map(move |dst| {
                let protos = protos.clone();
                protos.into_iter().flat_map(move |protocol| {
                    (0..=max_port).map(move |port| HeaderPoint { src, dst, protocol, port })
                })
            })
        })
    }

    /// Inverse of the lexicographic enumeration index used by `points`.
    pub fn point_at(&self, rank: u64) -> HeaderPoint {
        let protos: Vec<Protocol> = self.protocols.iter().collect();
        let ports = u64::from(self.max_port()) + 1;
        let nproto = protos.len() as u64;
        let dsts = u64::from(self.max_dst()) + 1;
        let port = (rank % ports) as u16;
        let rank = rank / ports;
        let protocol = protos[(rank % nproto) as usize];
        let rank = rank / nproto;
        let dst = (rank % dsts) as u32;
        let src = (rank / dsts) as u32;
        HeaderPoint { src, dst, protocol, port }
    }
}
