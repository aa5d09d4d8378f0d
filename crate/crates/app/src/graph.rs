//! Breadth-first neighbourhood export over associations.

use std::collections::{BTreeSet, VecDeque};

use conditor_core::topicmap::TopicMap;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphNode {
    pub id: u64,
    pub label: String,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphEdge {
    pub source: u64,
    pub target: u64,
    pub role: String,
    pub direction: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphExport {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

/// Topics within `depth` steps of `root` and every association between them.
/// Two-way associations are walked in both directions, one-way ones only
/// from their source. `None` when the root is not in the map.
pub fn graph_export(map: &TopicMap, root: u64, depth: usize) -> Option<GraphExport> {
    map.topics.get(&root)?;
    let mut seen = BTreeSet::from([root]);
    let mut queue = VecDeque::from([(root, 0usize)]);
    while let Some((id, d)) = queue.pop_front() {
        if d == depth {
            continue;
        }
        for a in map.adjacent(id) {
            if let Some(next) = a.traverse(id) {
                if seen.insert(next) {
                    queue.push_back((next, d + 1));
                }
            }
        }
    }
    let nodes = seen
        .iter()
        .map(|id| {
            let t = &map.topics[id];
            GraphNode {
                id: *id,
                label: t.base_name.clone(),
                kind: format!("instance-of-{}", t.instance_of),
            }
        })
        .collect();
    let edges = map
        .associations
        .iter()
        .filter_map(|a| {
            let target = a.target_id()?;
            (seen.contains(&a.source) && seen.contains(&target)).then(|| GraphEdge {
                source: a.source,
                target,
                role: a.role.clone(),
                direction: a.directionality.as_str().to_string(),
            })
        })
        .collect();
    Some(GraphExport { nodes, edges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use conditor_core::topicmap::{Association, Directionality, Endpoint, Topic};

    fn map_with(assocs: &[(u64, u64, Directionality)]) -> TopicMap {
        let mut map = TopicMap::default();
        for id in 1..=4 {
            map.topics.insert(
                id,
                Topic {
                    id,
                    base_name: format!("T{id}"),
                    variants: vec![],
                    instance_of: 1,
                    shortdesc: String::new(),
                    body: String::new(),
                    date_facts: vec![],
                    occurrences: vec![],
                },
            );
        }
        map.associations = assocs
            .iter()
            .map(|&(s, t, d)| Association {
                source: s,
                target: Endpoint::Topic(t),
                role: "r".into(),
                directionality: d,
            })
            .collect();
        map
    }

    #[test]
    fn depth_zero_is_a_single_node() {
        let map = map_with(&[(1, 2, Directionality::TwoWay)]);
        let g = graph_export(&map, 1, 0).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert!(g.edges.is_empty());
        assert!(graph_export(&map, 77, 1).is_none());
    }

    #[test]
    fn two_way_walks_both_ways_one_way_only_forward() {
        let map = map_with(&[(1, 2, Directionality::TwoWay), (3, 2, Directionality::OneWay)]);
        let g = graph_export(&map, 2, 1).unwrap();
        assert_eq!(g.nodes.iter().map(|n| n.id).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].direction, "two-way");
        let g = graph_export(&map, 3, 1).unwrap();
        assert_eq!(g.nodes.len(), 2);
    }
}
