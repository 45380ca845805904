//! Node deployment, link construction under a maximum length, and the Node
//! Density Factor NDF = N·L_max²/A.

use rand::RngExt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::Link;
use crate::grid::Extent;
use crate::{rng, Point};

/// Node counts swept in the reference experiment.
pub const REFERENCE_NODE_COUNTS: [usize; 7] = [20, 30, 50, 70, 100, 150, 200];

/// Reference maximum link length, km (15 grid units at 1 km per unit).
pub const REFERENCE_L_MAX_KM: f64 = 15.0;

/// (node count, NDF) pairs of the three illustrated deployments.
pub const FIGURE_NDF_PRESETS: [(usize, f64); 3] = [(20, 1.67), (50, 3.89), (100, 8.33)];

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("need at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("maximum link length must be positive, got {0}")]
    InvalidLinkLength(f64),
    #[error("invalid topology: {0}")]
    Invalid(String),
    #[error("topology JSON: {0}")]
    Json(String),
}

/// `count` i.i.d. uniform positions over `area`.
pub fn deploy_nodes(count: usize, area: &Extent, seed: u64) -> Result<Vec<Point>, NetworkError> {
    if count < 2 {
        return Err(NetworkError::TooFewNodes(count));
    }
    let mut rng = rng::stream(seed, &[0x6e6f_6465]);
    Ok((0..count)
        .map(|_| {
            let x = area.xmin + rng.random::<f64>() * area.width();
            let y = area.ymin + rng.random::<f64>() * area.height();
            Point::new(x, y)
        })
        .collect())
}

/// Every unordered node pair no farther apart than `l_max` becomes a link.
/// Links are ordered by (a, b) node index and numbered in that order.
pub fn build_links(nodes: &[Point], l_max: f64, frequency: f64) -> Result<Vec<Link>, NetworkError> {
    if !(l_max > 0.0) {
        return Err(NetworkError::InvalidLinkLength(l_max));
    }
    let mut links = Vec::new();
    for a in 0..nodes.len() {
        for b in (a + 1)..nodes.len() {
            let length = nodes[a].distance(nodes[b]);
            if length > 0.0 && length <= l_max {
                links.push(Link::new(links.len(), (a, b), nodes[a], nodes[b], frequency));
            }
        }
    }
    if links.is_empty() {
        log::warn!("no node pair within {l_max} km: network has no links");
    }
    Ok(links)
}

/// NDF = N·L_max²/A.
pub fn node_density_factor(topology: &Topology) -> f64 {
    topology.nodes.len() as f64 * topology.l_max * topology.l_max / topology.area.area()
}

/// Area that yields `ndf` for `count` nodes and link length `l_max`.
pub fn area_for_ndf(count: usize, l_max: f64, ndf: f64) -> f64 {
    count as f64 * l_max * l_max / ndf
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub area: Extent,
    pub nodes: Vec<Point>,
    pub links: Vec<Link>,
    pub l_max: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct TopologyFile {
    #[serde(flatten)]
    topology: Topology,
    ndf: f64,
}

impl Topology {
    pub fn build(area: Extent, nodes: Vec<Point>, l_max: f64, frequency: f64) -> Result<Self, NetworkError> {
        let links = build_links(&nodes, l_max, frequency)?;
        let topo = Self { area, nodes, links, l_max, seed: None };
        topo.validate()?;
        Ok(topo)
    }

    /// Deploys `count` nodes and links them.
    pub fn random(count: usize, area: Extent, l_max: f64, frequency: f64, seed: u64) -> Result<Self, NetworkError> {
        let nodes = deploy_nodes(count, &area, seed)?;
        let mut topo = Self::build(area, nodes, l_max, frequency)?;
        topo.seed = Some(seed);
        Ok(topo)
    }

    pub fn ndf(&self) -> f64 {
        node_density_factor(self)
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let bad = |msg: String| Err(NetworkError::Invalid(msg));
        if !(self.l_max > 0.0) {
            return Err(NetworkError::InvalidLinkLength(self.l_max));
        }
        if let Some(p) = self.nodes.iter().find(|p| !self.area.contains(**p)) {
            return bad(format!("node ({}, {}) outside the area", p.x, p.y));
        }
        let mut seen = std::collections::BTreeSet::new();
        for link in &self.links {
            let (a, b) = link.nodes;
            if a == b {
                return bad(format!("link {} is a self-link", link.id));
            }
            if a >= self.nodes.len() || b >= self.nodes.len() {
                return bad(format!("link {} references a missing node", link.id));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return bad(format!("duplicate link between nodes {a} and {b}"));
            }
            if link.length > self.l_max {
                return bad(format!("link {} is {} km long, above L_max", link.id, link.length));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = TopologyFile { topology: self.clone(), ndf: self.ndf() };
        serde_json::to_string_pretty(&file).expect("topology serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        let file: TopologyFile = serde_json::from_str(text).map_err(|e| NetworkError::Json(e.to_string()))?;
        file.topology.validate()?;
        Ok(file.topology)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(side: f64) -> Extent {
        Extent::from_size(side, side).unwrap()
    }

    #[test]
    fn two_nodes_in_bounds() {
        let area = square(10.0);
        let nodes = deploy_nodes(2, &area, 3).unwrap();
        assert_eq!(nodes.len(), 2);
        assert_ne!(nodes[0], nodes[1]);
        assert!(nodes.iter().all(|p| area.contains(*p)));
        assert_eq!(deploy_nodes(1, &area, 3), Err(NetworkError::TooFewNodes(1)));
    }

    #[test]
    fn deployment_is_seeded() {
        let area = square(50.0);
        assert_eq!(deploy_nodes(30, &area, 11).unwrap(), deploy_nodes(30, &area, 11).unwrap());
        assert_ne!(deploy_nodes(30, &area, 11).unwrap(), deploy_nodes(30, &area, 12).unwrap());
    }

    #[test]
    fn link_length_boundary() {
        let at = [Point::new(0.0, 0.0), Point::new(15.0, 0.0)];
        assert_eq!(build_links(&at, 15.0, 1e12).unwrap().len(), 1);
        let beyond = [Point::new(0.0, 0.0), Point::new(15.0 + 1e-9, 0.0)];
        assert!(build_links(&beyond, 15.0, 1e12).unwrap().is_empty());
    }

    #[test]
    fn collinear_nodes() {
        let nodes = [Point::new(0.0, 0.0), Point::new(15.0, 0.0), Point::new(30.0, 0.0)];
        let links = build_links(&nodes, 15.0, 1e12).unwrap();
        let pairs: Vec<_> = links.iter().map(|l| l.nodes).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn ndf_formula_and_scaling() {
        let area = Extent::from_size(50.0, 20.0).unwrap();
        let nodes = deploy_nodes(30, &area, 1).unwrap();
        let topo = Topology::build(area, nodes.clone(), 10.0, 1e12).unwrap();
        assert!((topo.ndf() - 3.0).abs() < 1e-12);
        let scaled_area = Extent::from_size(100.0, 40.0).unwrap();
        let scaled_nodes = nodes.iter().map(|p| Point::new(2.0 * p.x, 2.0 * p.y)).collect();
        let scaled = Topology::build(scaled_area, scaled_nodes, 20.0, 1e12).unwrap();
        assert!((scaled.ndf() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn figure_presets_back_solve_area() {
        for (count, ndf) in FIGURE_NDF_PRESETS {
            let area = area_for_ndf(count, REFERENCE_L_MAX_KM, ndf);
            let side = area.sqrt();
            let extent = square(side);
            let nodes = deploy_nodes(count, &extent, 5).unwrap();
            let topo = Topology::build(extent, nodes, REFERENCE_L_MAX_KM, 1e12).unwrap();
            assert!((topo.ndf() - ndf).abs() < 1e-9);
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let topo = Topology::random(12, square(30.0), 15.0, 1e12, 8).unwrap();
        let json = topo.to_json();
        assert!(json.contains("\"ndf\""));
        assert_eq!(Topology::from_json(&json).unwrap(), topo);

        let mut broken = topo.clone();
        broken.l_max = 1.0;
        if !broken.links.is_empty() {
            assert!(Topology::from_json(&broken.to_json()).is_err());
        }
    }
}
