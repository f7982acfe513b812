//! Zones, their address sets, and the catalog of firewall paths between
//! zone pairs.
//!
//! The path catalog is primary input: it lists, per (source zone,
//! destination zone) pair, every ordered firewall sequence traffic may
//! traverse. An adjacency graph can optionally derive missing entries, but a
//! declared entry always wins over anything derivable.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::packetspace::AddrRange;

/// A named network zone: a set of address intervals, optionally nested
/// inside a parent zone.
#[derive(Debug, Clone)]
pub struct Zone {
    pub id: String,
    pub addresses: Vec<AddrRange>,
    pub parent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("duplicate zone id '{0}'")]
    DuplicateZone(String),
    #[error("zone '{zone}' references unknown parent '{parent}'")]
    UnknownParent { zone: String, parent: String },
    #[error("zone '{zone}' is not contained in its parent '{parent}'")]
    NotInsideParent { zone: String, parent: String },
    #[error("no path entry for zone pair ({src}, {dst}) or any ancestor pair")]
    NoPathEntry { src: String, dst: String },
    #[error("unknown zone '{0}'")]
    UnknownZone(String),
    #[error("path enumeration found more than {cap} simple paths between '{src}' and '{dst}'; declare the catalog explicitly")]
    PathCapExceeded { src: String, dst: String, cap: usize },
}

/// True iff every interval of `a` is covered by the union of `b`.
fn addr_set_subset(a: &[AddrRange], b: &[AddrRange]) -> bool {
    // subtract b from each interval of a; anything left is uncovered
    for &ival in a {
        let mut pieces = vec![ival];
        for &cover in b {
            let mut next = Vec::new();
            for p in pieces {
                match p.intersect(cover) {
                    None => next.push(p),
                    Some(olap) => {
                        if p.lo() < olap.lo() {
                            next.push(AddrRange::new(p.lo(), olap.lo() - 1));
                        }
                        if olap.hi() < p.hi() {
                            next.push(AddrRange::new(olap.hi() + 1, p.hi()));
                        }
                    }
                }
            }
            pieces = next;
            if pieces.is_empty() {
                break;
            }
        }
        if !pieces.is_empty() {
            return false;
        }
    }
    true
}

/// All declared zones, with parent links validated.
#[derive(Debug, Clone, Default)]
pub struct ZoneTable {
    zones: BTreeMap<String, Zone>,
}

impl ZoneTable {
    pub fn new(zones: Vec<Zone>) -> Result<ZoneTable, TopologyError> {
        let mut table = BTreeMap::new();
        for z in zones {
            if table.insert(z.id.clone(), z.clone()).is_some() {
                return Err(TopologyError::DuplicateZone(z.id));
            }
        }
        for z in table.values() {
            if let Some(parent) = &z.parent {
                let p = table
                    .get(parent)
                    .ok_or_else(|| TopologyError::UnknownParent {
                        zone: z.id.clone(),
                        parent: parent.clone(),
                    })?;
                if !addr_set_subset(&z.addresses, &p.addresses) {
                    return Err(TopologyError::NotInsideParent {
                        zone: z.id.clone(),
                        parent: parent.clone(),
                    });
                }
            }
        }
        Ok(ZoneTable { zones: table })
    }

    pub fn get(&self, id: &str) -> Option<&Zone> {
        self.zones.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.zones.keys().map(String::as_str)
    }

    /// The zone itself followed by its ancestors, outermost last.
    pub fn ancestors<'a>(&'a self, id: &'a str) -> Vec<&'a str> {
        let mut chain = vec![id];
        let mut current = id;
        while let Some(parent) = self.zones.get(current).and_then(|z| z.parent.as_deref()) {
            // guard against degenerate parent loops in hand-written input
            if chain.contains(&parent) {
                break;
            }
            chain.push(parent);
            current = parent;
        }
        chain
    }

    /// The smallest zone whose address set covers all of `addrs`; ties are
    /// broken by zone id. Used to place inline address patterns for path
    /// lookup.
    pub fn smallest_zone_containing(&self, addrs: &[AddrRange]) -> Option<&Zone> {
        self.zones
            .values()
            .filter(|z| addr_set_subset(addrs, &z.addresses))
            .min_by_key(|z| {
                let width: u64 = z.addresses.iter().map(|r| r.width()).sum();
                (width, z.id.clone())
            })
    }
}

/// Declared firewall paths per ordered zone pair.
#[derive(Debug, Clone, Default)]
pub struct PathCatalog {
    entries: BTreeMap<(String, String), Vec<Vec<String>>>,
}

impl PathCatalog {
    pub fn new() -> PathCatalog {
        PathCatalog::default()
    }

    pub fn insert(&mut self, src: &str, dst: &str, routes: Vec<Vec<String>>) {
        self.entries.insert((src.to_string(), dst.to_string()), routes);
    }

    pub fn contains(&self, src: &str, dst: &str) -> bool {
        self.entries.contains_key(&(src.to_string(), dst.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The declared paths for `(src, dst)`. Sub-zones without an entry of
    /// their own inherit the nearest ancestor pair's entry.
    pub fn paths_for(
        &self,
        zones: &ZoneTable,
        src: &str,
        dst: &str,
    ) -> Result<&[Vec<String>], TopologyError> {
        for s in zones.ancestors(src) {
            for d in zones.ancestors(dst) {
                if let Some(routes) = self.entries.get(&(s.to_string(), d.to_string())) {
                    return Ok(routes);
                }
            }
        }
        Err(TopologyError::NoPathEntry { src: src.to_string(), dst: dst.to_string() })
    }
}

/// Undirected adjacency between zones and firewalls, for deriving path
/// entries when none are declared.
#[derive(Debug, Clone, Default)]
pub struct AdjacencyGraph {
    edges: BTreeMap<String, BTreeSet<String>>,
    firewalls: BTreeSet<String>,
}

pub const DEFAULT_PATH_CAP: usize = 64;

impl AdjacencyGraph {
    pub fn new(firewall_ids: impl IntoIterator<Item = String>) -> AdjacencyGraph {
        AdjacencyGraph {
            edges: BTreeMap::new(),
            firewalls: firewall_ids.into_iter().collect(),
        }
    }

    pub fn add_edge(&mut self, a: &str, b: &str) {
        self.edges.entry(a.to_string()).or_default().insert(b.to_string());
        self.edges.entry(b.to_string()).or_default().insert(a.to_string());
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// All simple paths from `src` to `dst`, reported as the firewall
    /// sequences they traverse. Rejects graphs with more than `cap` simple
    /// paths between the two nodes.
    pub fn enumerate_paths(
        &self,
        src: &str,
        dst: &str,
        cap: usize,
    ) -> Result<Vec<Vec<String>>, TopologyError> {
        if !self.edges.contains_key(src) {
            return Err(TopologyError::UnknownZone(src.to_string()));
        }
        if !self.edges.contains_key(dst) {
            return Err(TopologyError::UnknownZone(dst.to_string()));
        }
        let mut search = PathSearch {
            graph: self,
            visited: BTreeSet::new(),
            trail: Vec::new(),
            routes: BTreeSet::new(),
            count: 0,
            cap,
        };
        search.dfs(src, dst).map_err(|()| TopologyError::PathCapExceeded {
            src: src.to_string(),
            dst: dst.to_string(),
            cap,
        })?;
        Ok(search.routes.into_iter().collect())
    }
}

struct PathSearch<'a> {
    graph: &'a AdjacencyGraph,
    visited: BTreeSet<&'a str>,
    trail: Vec<&'a str>,
    routes: BTreeSet<Vec<String>>,
    count: usize,
    cap: usize,
}

impl<'a> PathSearch<'a> {
    fn dfs(&mut self, node: &'a str, dst: &str) -> Result<(), ()> {
        if node == dst {
            self.count += 1;
            if self.count > self.cap {
                return Err(());
            }
            self.routes.insert(
                self.trail
                    .iter()
                    .filter(|n| self.graph.firewalls.contains(**n))
                    .map(|n| n.to_string())
                    .collect(),
            );
            return Ok(());
        }
        self.visited.insert(node);
        self.trail.push(node);
        if let Some(next) = self.graph.edges.get(node) {
            for n in next {
                if !self.visited.contains(n.as_str()) {
                    self.dfs(n, dst)?;
                }
            }
        }
        self.trail.pop();
        self.visited.remove(node);
        Ok(())
    }
}
