//! Hydraulic network graph: typed nodes and links, validation, and the
//! topological queries the spectral layers need.
//!
//! Node indices are dense: junctions first (file order), then fixed-head
//! nodes (reservoirs and tanks, in order of first appearance in the file).
//! Internally every quantity is in US customary units: lengths in feet,
//! flows in cubic feet per second.

mod inp;
pub mod units;

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydraulics::PumpCurve;
use crate::sparse::CsrMatrix;

pub use inp::parse_inp;

/// Relative speed bounds used when the input file does not declare any.
pub const DEFAULT_PUMP_SPEED_BOUNDS: (f64, f64) = (0.7, 1.2);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Junction {
    pub name: String,
    /// ft
    pub elevation: f64,
    /// cfs
    pub base_demand: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedHeadKind {
    Reservoir,
    Tank,
}

/// Reservoir or tank held at a prescribed hydraulic head for a steady state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedHeadNode {
    pub name: String,
    pub kind: FixedHeadKind,
    pub elevation: f64,
    pub head: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipe {
    pub name: String,
    pub from: usize,
    pub to: usize,
    /// ft
    pub length: f64,
    /// ft
    pub diameter: f64,
    /// Hazen-Williams roughness coefficient.
    pub roughness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pump {
    pub name: String,
    pub from: usize,
    pub to: usize,
    /// (flow [cfs], head gain [ft]) points as given in the input.
    pub curve: Vec<(f64, f64)>,
    pub speed_bounds: (f64, f64),
    pub fitted: PumpCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Valve {
    pub name: String,
    pub from: usize,
    pub to: usize,
    /// ft
    pub diameter: f64,
    /// Valve type as written in the input (PRV, TCV, ...). Always simulated fully open.
    pub valve_type: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Pipe,
    Pump,
    Valve,
}

/// Uniform view over pipes, pumps and valves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkRef {
    pub kind: LinkKind,
    /// Index within the kind-specific list.
    pub index: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub title: String,
    pub junctions: Vec<Junction>,
    pub fixed_head_nodes: Vec<FixedHeadNode>,
    pub pipes: Vec<Pipe>,
    pub pumps: Vec<Pump>,
    pub valves: Vec<Valve>,
    node_names: Vec<String>,
    #[serde(skip)]
    node_lookup: HashMap<String, usize>,
    coordinates: Vec<Option<(f64, f64)>>,
}

impl Network {
    pub fn from_inp_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_inp(&text)
    }

    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn junction_count(&self) -> usize {
        self.junctions.len()
    }

    pub fn link_count(&self) -> usize {
        self.pipes.len() + self.pumps.len() + self.valves.len()
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.node_lookup.get(name).copied()
    }

    pub fn is_junction(&self, node: usize) -> bool {
        node < self.junctions.len()
    }

    /// Fixed-head node behind a dense node index, if any.
    pub fn fixed_head(&self, node: usize) -> Option<&FixedHeadNode> {
        node.checked_sub(self.junctions.len())
            .and_then(|i| self.fixed_head_nodes.get(i))
    }

    /// Ground elevation of every node, indexed densely.
    pub fn elevations(&self) -> Vec<f64> {
        self.junctions
            .iter()
            .map(|j| j.elevation)
            .chain(self.fixed_head_nodes.iter().map(|f| f.elevation))
            .collect()
    }

    pub fn coordinates(&self) -> &[Option<(f64, f64)>] {
        &self.coordinates
    }

    pub fn links(&self) -> impl Iterator<Item = LinkRef> + '_ {
        let pipes = self.pipes.iter().enumerate().map(|(index, p)| LinkRef {
            kind: LinkKind::Pipe,
            index,
            from: p.from,
            to: p.to,
        });
        let pumps = self.pumps.iter().enumerate().map(|(index, p)| LinkRef {
            kind: LinkKind::Pump,
            index,
            from: p.from,
            to: p.to,
        });
        let valves = self.valves.iter().enumerate().map(|(index, v)| LinkRef {
            kind: LinkKind::Valve,
            index,
            from: v.from,
            to: v.to,
        });
        pipes.chain(pumps).chain(valves)
    }

    pub fn link_name(&self, link: LinkRef) -> &str {
        match link.kind {
            LinkKind::Pipe => &self.pipes[link.index].name,
            LinkKind::Pump => &self.pumps[link.index].name,
            LinkKind::Valve => &self.valves[link.index].name,
        }
    }

    /// Deduplicated neighbour lists (parallel links collapse).
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for link in self.links() {
            adj[link.from].push(link.to);
            adj[link.to].push(link.from);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Largest shortest-path hop count over all node pairs.
    pub fn graph_diameter(&self) -> usize {
        let adj = self.neighbors();
        let n = adj.len();
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::with_capacity(n);
        let mut diameter = 0;
        for source in 0..n {
            dist.iter_mut().for_each(|d| *d = usize::MAX);
            dist[source] = 0;
            queue.clear();
            queue.push_back(source);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        diameter = diameter.max(dist[v]);
                        queue.push_back(v);
                    }
                }
            }
        }
        diameter
    }

    /// Symmetric 0/1 pattern over all nodes, zero diagonal.
    pub fn adjacency_structure(&self) -> CsrMatrix {
        let triplets = self
            .links()
            .flat_map(|l| [(l.from, l.to, 1.0), (l.to, l.from, 1.0)]);
        let mut m = CsrMatrix::from_triplets(self.node_count(), triplets);
        m.values_mut().iter_mut().for_each(|v| *v = 1.0);
        m
    }

    /// Structured summary consumed by the plotting component.
    pub fn summary(&self) -> NetworkSummary {
        let elevations = self.elevations();
        let nodes = self
            .node_names
            .iter()
            .enumerate()
            .map(|(index, name)| {
                let (kind, base_demand, head) = match self.fixed_head(index) {
                    Some(f) => (
                        match f.kind {
                            FixedHeadKind::Reservoir => "reservoir",
                            FixedHeadKind::Tank => "tank",
                        },
                        None,
                        Some(f.head),
                    ),
                    None => ("junction", Some(self.junctions[index].base_demand), None),
                };
                NodeSummary {
                    index,
                    name: name.clone(),
                    kind: kind.to_string(),
                    elevation: elevations[index],
                    base_demand,
                    head,
                    coordinates: self.coordinates[index],
                }
            })
            .collect();
        let edges = self
            .links()
            .enumerate()
            .map(|(index, link)| {
                let (length, diameter, roughness) = match link.kind {
                    LinkKind::Pipe => {
                        let p = &self.pipes[link.index];
                        (Some(p.length), Some(p.diameter), Some(p.roughness))
                    }
                    LinkKind::Valve => (None, Some(self.valves[link.index].diameter), None),
                    LinkKind::Pump => (None, None, None),
                };
                EdgeSummary {
                    index,
                    name: self.link_name(link).to_string(),
                    kind: link.kind,
                    from: link.from,
                    to: link.to,
                    length,
                    diameter,
                    roughness,
                }
            })
            .collect();
        NetworkSummary {
            title: self.title.clone(),
            junctions: self.junction_count(),
            fixed_head_nodes: self.fixed_head_nodes.len(),
            pipes: self.pipes.len(),
            pumps: self.pumps.len(),
            valves: self.valves.len(),
            diameter: self.graph_diameter(),
            nodes,
            edges,
        }
    }

    fn rebuild_lookup(&mut self) {
        self.node_lookup = self
            .node_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
    }

    fn connected_components(&self) -> usize {
        let adj = self.neighbors();
        let mut seen = vec![false; adj.len()];
        let mut components = 0;
        for start in 0..adj.len() {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        components
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeSummary {
    pub index: usize,
    pub name: String,
    pub kind: String,
    pub elevation: f64,
    pub base_demand: Option<f64>,
    pub head: Option<f64>,
    pub coordinates: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeSummary {
    pub index: usize,
    pub name: String,
    pub kind: LinkKind,
    pub from: usize,
    pub to: usize,
    pub length: Option<f64>,
    pub diameter: Option<f64>,
    pub roughness: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub title: String,
    pub junctions: usize,
    pub fixed_head_nodes: usize,
    pub pipes: usize,
    pub pumps: usize,
    pub valves: usize,
    pub diameter: usize,
    pub nodes: Vec<NodeSummary>,
    pub edges: Vec<EdgeSummary>,
}

/// Name, from, to, curve points and speed bounds.
type PendingPump = (String, String, String, Vec<(f64, f64)>, (f64, f64));

/// Programmatic construction in internal units (ft, cfs).
///
/// Links refer to nodes by name; fixed-head nodes are placed after all
/// junctions regardless of insertion order.
#[derive(Debug, Default, Clone)]
pub struct NetworkBuilder {
    title: String,
    junctions: Vec<Junction>,
    fixed: Vec<FixedHeadNode>,
    pipes: Vec<(String, String, String, f64, f64, f64)>,
    pumps: Vec<PendingPump>,
    valves: Vec<(String, String, String, f64, String)>,
    coordinates: HashMap<String, (f64, f64)>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn title(mut self, title: impl Into<String>) -> Self {
        self.title = title.into();
        self
    }

    pub fn junction(mut self, name: &str, elevation: f64, base_demand: f64) -> Self {
        self.junctions.push(Junction {
            name: name.to_string(),
            elevation,
            base_demand,
        });
        self
    }

    pub fn reservoir(mut self, name: &str, head: f64) -> Self {
        self.fixed.push(FixedHeadNode {
            name: name.to_string(),
            kind: FixedHeadKind::Reservoir,
            elevation: head,
            head,
        });
        self
    }

    pub fn tank(mut self, name: &str, elevation: f64, initial_level: f64) -> Self {
        self.fixed.push(FixedHeadNode {
            name: name.to_string(),
            kind: FixedHeadKind::Tank,
            elevation,
            head: elevation + initial_level,
        });
        self
    }

    pub fn pipe(
        mut self,
        name: &str,
        from: &str,
        to: &str,
        length: f64,
        diameter: f64,
        roughness: f64,
    ) -> Self {
        self.pipes.push((
            name.to_string(),
            from.to_string(),
            to.to_string(),
            length,
            diameter,
            roughness,
        ));
        self
    }

    pub fn pump(mut self, name: &str, from: &str, to: &str, curve: Vec<(f64, f64)>) -> Self {
        self.pumps.push((
            name.to_string(),
            from.to_string(),
            to.to_string(),
            curve,
            DEFAULT_PUMP_SPEED_BOUNDS,
        ));
        self
    }

    pub fn pump_with_speed_bounds(mut self, bounds: (f64, f64)) -> Self {
        if let Some(last) = self.pumps.last_mut() {
            last.4 = bounds;
        }
        self
    }

    pub fn valve(mut self, name: &str, from: &str, to: &str, diameter: f64, kind: &str) -> Self {
        self.valves.push((
            name.to_string(),
            from.to_string(),
            to.to_string(),
            diameter,
            kind.to_string(),
        ));
        self
    }

    pub fn coordinates(mut self, node: &str, x: f64, y: f64) -> Self {
        self.coordinates.insert(node.to_string(), (x, y));
        self
    }

    pub fn build(self) -> Result<Network> {
        let mut node_names: Vec<String> = Vec::new();
        let mut lookup: HashMap<String, usize> = HashMap::new();
        let names = self
            .junctions
            .iter()
            .map(|j| &j.name)
            .chain(self.fixed.iter().map(|f| &f.name));
        for name in names {
            if lookup.insert(name.clone(), node_names.len()).is_some() {
                return Err(Error::DuplicateName {
                    kind: "node",
                    name: name.clone(),
                });
            }
            node_names.push(name.clone());
        }

        for j in &self.junctions {
            if !j.elevation.is_finite() {
                return Err(Error::InvalidElement {
                    name: j.name.clone(),
                    reason: "elevation is not finite".into(),
                });
            }
            if !(j.base_demand >= 0.0) {
                return Err(Error::InvalidElement {
                    name: j.name.clone(),
                    reason: format!("base demand must be non-negative, got {}", j.base_demand),
                });
            }
        }

        let mut link_names: HashMap<String, ()> = HashMap::new();
        let mut check_link = |name: &str, from: &str, to: &str| -> Result<(usize, usize)> {
            if link_names.insert(name.to_string(), ()).is_some() {
                return Err(Error::DuplicateName {
                    kind: "link",
                    name: name.to_string(),
                });
            }
            let resolve = |node: &str| {
                lookup
                    .get(node)
                    .copied()
                    .ok_or_else(|| Error::UnknownNodeReference {
                        link: name.to_string(),
                        node: node.to_string(),
                    })
            };
            let (a, b) = (resolve(from)?, resolve(to)?);
            if a == b {
                return Err(Error::InvalidElement {
                    name: name.to_string(),
                    reason: "link connects a node to itself".into(),
                });
            }
            Ok((a, b))
        };

        let mut pipes = Vec::with_capacity(self.pipes.len());
        for (name, from, to, length, diameter, roughness) in self.pipes {
            let (a, b) = check_link(&name, &from, &to)?;
            for (attribute, value) in [
                ("length", length),
                ("diameter", diameter),
                ("roughness", roughness),
            ] {
                if !(value > 0.0) || !value.is_finite() {
                    return Err(Error::NonPositiveAttribute {
                        element: "pipe",
                        name,
                        attribute,
                        value,
                    });
                }
            }
            pipes.push(Pipe {
                name,
                from: a,
                to: b,
                length,
                diameter,
                roughness,
            });
        }

        let mut pumps = Vec::with_capacity(self.pumps.len());
        for (name, from, to, curve, speed_bounds) in self.pumps {
            let (a, b) = check_link(&name, &from, &to)?;
            let (lo, hi) = speed_bounds;
            if !(lo > 0.0 && lo <= hi) {
                return Err(Error::InvalidElement {
                    name,
                    reason: format!("invalid speed bounds ({lo}, {hi})"),
                });
            }
            let fitted = PumpCurve::fit(&curve).map_err(|reason| Error::InvalidElement {
                name: name.clone(),
                reason,
            })?;
            pumps.push(Pump {
                name,
                from: a,
                to: b,
                curve,
                speed_bounds,
                fitted,
            });
        }

        let mut valves = Vec::with_capacity(self.valves.len());
        for (name, from, to, diameter, valve_type) in self.valves {
            let (a, b) = check_link(&name, &from, &to)?;
            if !(diameter > 0.0) {
                return Err(Error::NonPositiveAttribute {
                    element: "valve",
                    name,
                    attribute: "diameter",
                    value: diameter,
                });
            }
            valves.push(Valve {
                name,
                from: a,
                to: b,
                diameter,
                valve_type,
            });
        }

        let coordinates = node_names
            .iter()
            .map(|n| self.coordinates.get(n).copied())
            .collect();
        let mut net = Network {
            title: self.title,
            junctions: self.junctions,
            fixed_head_nodes: self.fixed,
            pipes,
            pumps,
            valves,
            node_names,
            node_lookup: HashMap::new(),
            coordinates,
        };
        net.rebuild_lookup();

        if net.node_count() == 0 {
            return Err(Error::MissingSection("JUNCTIONS"));
        }
        let components = net.connected_components();
        if components != 1 {
            return Err(Error::DisconnectedGraph { components });
        }
        Ok(net)
    }
}

impl Network {
    /// Restores the name lookup after deserialisation.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut net: Network = serde_json::from_str(text)?;
        net.rebuild_lookup();
        Ok(net)
    }
}
