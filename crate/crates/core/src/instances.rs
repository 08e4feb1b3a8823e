//! JSON space descriptors, the bundled instances, and dynamic dispatch over them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cone::EuclideanCone;
use crate::error::{Error, Result};
use crate::graph::MetricGraph;
use crate::model::ModelSpace;
use crate::space::GeodesicSpace;

/// `{"type":"model","kappa":-1}`, `{"type":"tree","nodes":[..],"edges":[["a","b",1.0],..]}`,
/// `{"type":"cone","base_distances":[[..]]}`; `graph` accepts cycles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SpaceSpec {
    Model { kappa: f64 },
    Tree { nodes: Vec<String>, edges: Vec<(String, String, f64)> },
    Graph { nodes: Vec<String>, edges: Vec<(String, String, f64)> },
    Cone { base_distances: Vec<Vec<f64>> },
}

pub enum AnySpace {
    Model(ModelSpace),
    Graph(MetricGraph),
    Cone(EuclideanCone),
}

/// Generic computation over a space; lets dynamic spaces reach generic code.
pub trait SpaceVisitor {
    type Output;
    fn visit<S: GeodesicSpace>(self, space: &S) -> Self::Output;
}

fn graph_from(nodes: &[String], edges: &[(String, String, f64)], tree: bool) -> Result<MetricGraph> {
    let index = |n: &str| {
        nodes.iter().position(|m| m == n).ok_or_else(|| Error::Invalid(format!("edge refers to unknown node '{n}'")))
    };
    let es = edges.iter().map(|(a, b, l)| Ok((index(a)?, index(b)?, *l))).collect::<Result<Vec<_>>>()?;
    let g = if tree { MetricGraph::tree(nodes.to_vec(), es)? } else { MetricGraph::new(nodes.to_vec(), es)? };
    if !g.is_connected() {
        return Err(Error::Invalid("graph is not connected".into()));
    }
    Ok(g)
}

impl SpaceSpec {
    pub fn build(&self) -> Result<AnySpace> {
        Ok(match self {
            SpaceSpec::Model { kappa } => {
                if !kappa.is_finite() {
                    return Err(Error::Invalid("kappa must be finite".into()));
                }
                AnySpace::Model(ModelSpace::new(*kappa))
            }
            SpaceSpec::Tree { nodes, edges } => AnySpace::Graph(graph_from(nodes, edges, true)?),
            SpaceSpec::Graph { nodes, edges } => AnySpace::Graph(graph_from(nodes, edges, false)?),
            SpaceSpec::Cone { base_distances } => AnySpace::Cone(EuclideanCone::new(base_distances.clone())?),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Invalid(format!("space descriptor: {e}")))
    }

    pub fn of_graph(g: &MetricGraph) -> Self {
        let nodes = g.names().to_vec();
        let edges = g.edges().iter().map(|e| (nodes[e.a].clone(), nodes[e.b].clone(), e.len)).collect();
        if g.is_tree() {
            SpaceSpec::Tree { nodes, edges }
        } else {
            SpaceSpec::Graph { nodes, edges }
        }
    }
}

impl AnySpace {
    pub fn visit<V: SpaceVisitor>(&self, v: V) -> V::Output {
        match self {
            AnySpace::Model(s) => v.visit(s),
            AnySpace::Graph(s) => v.visit(s),
            AnySpace::Cone(s) => v.visit(s),
        }
    }

    pub fn name(&self) -> String {
        match self {
            AnySpace::Model(s) => s.name(),
            AnySpace::Graph(s) => s.name(),
            AnySpace::Cone(s) => s.name(),
        }
    }
}

/// Seed of the bundled 15-edge random tree.
pub const RANDOM_TREE_SEED: u64 = 2024;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Instance {
    Euclidean,
    Tripod,
    RandomTree,
    Cone,
    Hyperbolic,
    Sphere,
}

impl Instance {
    pub const ALL: [Instance; 6] =
        [Instance::Euclidean, Instance::Tripod, Instance::RandomTree, Instance::Cone, Instance::Hyperbolic, Instance::Sphere];

    pub fn label(self) -> &'static str {
        match self {
            Instance::Euclidean => "euclidean",
            Instance::Tripod => "tripod",
            Instance::RandomTree => "random-tree-15",
            Instance::Cone => "cone-3",
            Instance::Hyperbolic => "hyperbolic",
            Instance::Sphere => "sphere",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Instance::ALL.into_iter().find(|i| i.label() == s)
    }

    pub fn spec(self) -> SpaceSpec {
        match self {
            Instance::Euclidean => SpaceSpec::Model { kappa: 0.0 },
            Instance::Hyperbolic => SpaceSpec::Model { kappa: -1.0 },
            Instance::Sphere => SpaceSpec::Model { kappa: 1.0 },
            Instance::Tripod => SpaceSpec::of_graph(&MetricGraph::tripod()),
            Instance::RandomTree => SpaceSpec::of_graph(&bundled_random_tree()),
            Instance::Cone => SpaceSpec::Cone { base_distances: vec![vec![0.0, 2.2, 2.2], vec![2.2, 0.0, 2.2], vec![2.2, 2.2, 0.0]] },
        }
    }

    pub fn build(self) -> AnySpace {
        self.spec().build().expect("bundled instances are valid")
    }
}

pub fn bundled_random_tree() -> MetricGraph {
    MetricGraph::random_tree(15, &mut ChaCha8Rng::seed_from_u64(RANDOM_TREE_SEED))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Name;
    impl SpaceVisitor for Name {
        type Output = String;
        fn visit<S: GeodesicSpace>(self, space: &S) -> String {
            space.name()
        }
    }

    #[test]
    fn descriptors_round_trip() {
        for inst in Instance::ALL {
            let spec = inst.spec();
            let text = serde_json::to_string(&spec).unwrap();
            assert_eq!(SpaceSpec::from_json(&text).unwrap(), spec);
            let s = inst.build();
            assert_eq!(s.visit(Name), s.name());
        }
        let s = SpaceSpec::from_json(r#"{"type":"model","kappa":-1}"#).unwrap();
        assert_eq!(s, SpaceSpec::Model { kappa: -1.0 });
    }

    #[test]
    fn bad_descriptors() {
        assert!(SpaceSpec::from_json(r#"{"type":"tree","nodes":["a"],"edges":[["a","b",1.0]]}"#).unwrap().build().is_err());
        let cyc = r#"{"type":"tree","nodes":["a","b","c"],"edges":[["a","b",1],["b","c",1],["c","a",1]]}"#;
        assert!(SpaceSpec::from_json(cyc).unwrap().build().is_err());
        assert!(SpaceSpec::from_json(r#"{"type":"blob"}"#).is_err());
    }
}
