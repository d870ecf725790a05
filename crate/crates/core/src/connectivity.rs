//! Eigenstate coupling graphs: basis states as vertices, nonvanishing
//! control matrix elements as undirected weighted edges.

use std::collections::VecDeque;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::model::{build_control, FieldColor, SystemModel};
use crate::quantum::BasisState;

/// Couplings at or below this magnitude (unit Rabi) count as absent.
pub const DEFAULT_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
    /// Index into [`CouplingGraph::color_tags`].
    pub color: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingGraph {
    pub vertices: Vec<BasisState>,
    pub edges: Vec<Edge>,
    pub color_tags: Vec<String>,
}

impl CouplingGraph {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Undirected adjacency lists; parallel edges collapse.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for e in &self.edges {
            adj[e.from].push(e.to);
            adj[e.to].push(e.from);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Edge list CSV: `from_index,to_index,weight,color_tag`.
    pub fn write_edges_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "from_index,to_index,weight,color_tag")?;
        for e in &self.edges {
            writeln!(out, "{},{},{:.15e},{}", e.from, e.to, e.weight, self.color_tags[e.color])?;
        }
        Ok(())
    }

    /// Vertex table CSV: `index,spins,n`.
    pub fn write_vertices_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "index,spins,n")?;
        for (i, v) in self.vertices.iter().enumerate() {
            writeln!(out, "{},{},{}", i, v.spin_label(), v.phonon)?;
        }
        Ok(())
    }
}

pub fn build_graph(model: &SystemModel, colors: &[FieldColor], threshold: f64) -> Result<CouplingGraph> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be positive, got {threshold}")));
    }
    let dim = model.dim();
    let mut edges = Vec::new();
    for (tag, color) in colors.iter().enumerate() {
        let h = build_control(model, color)?;
        for r in 0..dim {
            for c in (r + 1)..dim {
                let w = h[(r, c)].norm();
                if w > threshold {
                    edges.push(Edge {
                        from: r,
                        to: c,
                        weight: w,
                        color: tag,
                    });
                }
            }
        }
    }
    Ok(CouplingGraph {
        vertices: model.basis.states().collect(),
        edges,
        color_tags: colors.iter().map(FieldColor::tag).collect(),
    })
}

/// Vertex partition by breadth-first search. Each component is sorted and
/// components are ordered by their smallest index.
pub fn connected_components(graph: &CouplingGraph) -> Vec<Vec<usize>> {
    let adj = graph.adjacency();
    let mut seen = vec![false; adj.len()];
    let mut components = Vec::new();
    for start in 0..adj.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut comp = Vec::new();
        while let Some(v) = queue.pop_front() {
            comp.push(v);
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components
}

/// True iff all of `subset` lies in one component.
pub fn is_transitively_connected(graph: &CouplingGraph, subset: &[usize]) -> Result<bool> {
    let Some(&first) = subset.first() else {
        return Err(Error::InvalidArgument("subset must be nonempty".into()));
    };
    if let Some(&bad) = subset.iter().find(|&&v| v >= graph.vertex_count()) {
        return Err(Error::InvalidArgument(format!("vertex {bad} out of range")));
    }
    let comp = connected_components(graph)
        .into_iter()
        .find(|c| c.binary_search(&first).is_ok())
        .expect("vertex belongs to a component");
    Ok(subset.iter().all(|v| comp.binary_search(v).is_ok()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::Spin;
    use crate::special::{laguerre_zeros, LaguerreSpec};

    fn all(graph: &CouplingGraph) -> Vec<usize> {
        (0..graph.vertex_count()).collect()
    }

    #[test]
    fn carrier_only_pairs() {
        let m = SystemModel::single_ion(0.1, 5, true).unwrap();
        let g = build_graph(&m, &[FieldColor::carrier(0)], DEFAULT_THRESHOLD).unwrap();
        assert_eq!(g.edges.len(), 5);
        for e in &g.edges {
            let (a, b) = (&g.vertices[e.from], &g.vertices[e.to]);
            assert_eq!(a.phonon, b.phonon);
            assert_ne!(a.spins, b.spins);
        }
        let comps = connected_components(&g);
        assert_eq!(comps.len(), 5);
        assert!(comps.iter().all(|c| c.len() == 2));
        assert!(!is_transitively_connected(&g, &all(&g)).unwrap());
    }

    #[test]
    fn carrier_and_blue_connect_ldl() {
        let m = SystemModel::single_ion(0.1, 8, true).unwrap();
        let g = build_graph(&m, &[FieldColor::carrier(0), FieldColor::blue(0)], DEFAULT_THRESHOLD).unwrap();
        assert_eq!(connected_components(&g).len(), 1);
        assert!(is_transitively_connected(&g, &all(&g)).unwrap());
    }

    #[test]
    fn blue_only_pairs_with_isolated_up_ground() {
        let cutoff = 6;
        let m = SystemModel::single_ion(0.1, cutoff, true).unwrap();
        let g = build_graph(&m, &[FieldColor::blue(0)], DEFAULT_THRESHOLD).unwrap();
        // |↓,n⟩ ↔ |↑,n+1⟩ for n + 1 < cutoff
        assert_eq!(g.edges.len(), cutoff - 1);
        for e in &g.edges {
            let (a, b) = (&g.vertices[e.from], &g.vertices[e.to]);
            let (down, up) = if a.spins[0] == Spin::Down { (a, b) } else { (b, a) };
            assert_eq!(up.spins[0], Spin::Up);
            assert_eq!(up.phonon, down.phonon + 1);
        }
        let up0 = m.basis.index(&BasisState::new(vec![Spin::Up], 0)).unwrap();
        let comps = connected_components(&g);
        assert!(comps.contains(&vec![up0]));
    }

    #[test]
    fn component_sizes_and_ordering() {
        let m = SystemModel::single_ion(0.1, 2, true).unwrap();
        let g = build_graph(&m, &[], DEFAULT_THRESHOLD).unwrap();
        assert_eq!(connected_components(&g), vec![vec![0], vec![1], vec![2], vec![3]]);
        assert!(is_transitively_connected(&g, &[2]).unwrap());
        assert!(is_transitively_connected(&g, &[]).is_err());
        assert!(build_graph(&m, &[], 0.0).is_err());
    }

    #[test]
    fn cut_component_has_fourteen_states() {
        let root = laguerre_zeros(LaguerreSpec::new(6, 1))[0];
        let m = SystemModel::single_ion(root.sqrt(), 20, false).unwrap();
        let g = build_graph(&m, &[FieldColor::carrier(0), FieldColor::blue(0)], DEFAULT_THRESHOLD).unwrap();
        let ground = m.basis.ground_index();
        let comp = connected_components(&g).into_iter().find(|c| c.contains(&ground)).unwrap();
        assert_eq!(comp.len(), 14);

        // independent count: walk the ladder by hand with the (6→7) blue edge removed
        let mut reach = std::collections::BTreeSet::new();
        let mut stack = vec![(Spin::Down, 0usize)];
        while let Some((s, n)) = stack.pop() {
            if n >= 20 || !reach.insert((s, n)) {
                continue;
            }
            match s {
                Spin::Down => {
                    stack.push((Spin::Up, n));
                    if n != 6 {
                        stack.push((Spin::Up, n + 1));
                    }
                }
                Spin::Up => {
                    stack.push((Spin::Down, n));
                    if n >= 1 && n != 7 {
                        stack.push((Spin::Down, n - 1));
                    }
                }
            }
        }
        assert_eq!(reach.len(), 14);
    }

    #[test]
    fn csv_export() {
        let m = SystemModel::single_ion(0.1, 2, true).unwrap();
        let g = build_graph(&m, &[FieldColor::carrier(0)], DEFAULT_THRESHOLD).unwrap();
        let mut e = Vec::new();
        g.write_edges_csv(&mut e).unwrap();
        let e = String::from_utf8(e).unwrap();
        assert!(e.starts_with("from_index,to_index,weight,color_tag\n"));
        assert!(e.lines().nth(1).unwrap().ends_with(",c1"));
        let mut v = Vec::new();
        g.write_vertices_csv(&mut v).unwrap();
        let v = String::from_utf8(v).unwrap();
        assert_eq!(v.lines().nth(1).unwrap(), "0,u,0");
    }
}
