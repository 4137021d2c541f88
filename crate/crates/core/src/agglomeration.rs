//! Multilevel agglomeration hierarchies. Level N macros are the fine
//! elements; each coarser level unions macros of the next finer one. Per
//! level, every fine edge is classified as interior to a macro or as part of
//! a macro-boundary interface, and each connected interface chain becomes a
//! macro-edge with an arclength parameterization on [0,1].

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeClass {
    /// Strictly inside a macro-element at this level.
    Interior,
    /// On the interface between two macros or on the domain boundary;
    /// carries the id of the containing macro-edge chain.
    Boundary { macro_edge: usize },
}

/// A connected chain of fine edges separating the same macro pair (or a
/// macro and the domain boundary).
#[derive(Debug, Clone)]
pub struct MacroEdge {
    /// Separated macros, lower id first; None marks the domain boundary.
    pub macros: (usize, Option<usize>),
    /// Chain order; the flag is true when the fine edge's canonical
    /// orientation (low vertex to high vertex) agrees with the chain.
    pub fine_edges: Vec<(usize, bool)>,
    /// Ordered chain vertices, length fine_edges.len()+1.
    pub vertices: Vec<usize>,
    /// Normalized cumulative arclength per chain vertex, 0 to 1.
    pub vertex_params: Vec<f64>,
    pub closed: bool,
}

impl MacroEdge {
    pub fn endpoints(&self) -> (usize, usize) {
        (self.vertices[0], *self.vertices.last().unwrap())
    }

    pub fn param_of_vertex(&self, v: usize) -> Option<f64> {
        // Closed chains repeat the seam vertex; the first hit (param 0) wins.
        self.vertices
            .iter()
            .position(|&w| w == v)
            .map(|i| self.vertex_params[i])
    }
}

#[derive(Debug, Clone)]
pub struct LevelPartition {
    pub macro_of_element: Vec<usize>,
    pub num_macros: usize,
    pub edge_class: Vec<EdgeClass>,
    pub macro_edges: Vec<MacroEdge>,
}

#[derive(Debug, Clone)]
pub struct AgglomerationHierarchy {
    /// levels[k-1] holds level k; level num_levels is the fine mesh.
    pub levels: Vec<LevelPartition>,
    pub num_levels: usize,
}

impl AgglomerationHierarchy {
    pub fn level(&self, k: usize) -> &LevelPartition {
        &self.levels[k - 1]
    }

    /// Macro id at level k-1 containing macro m of level k.
    pub fn parent_macro(&self, k: usize, m: usize) -> usize {
        debug_assert!(k >= 2);
        let lvl = self.level(k);
        let elem = lvl
            .macro_of_element
            .iter()
            .position(|&x| x == m)
            .expect("macro has at least one element");
        self.level(k - 1).macro_of_element[elem]
    }

    /// Per-macro parent map for level k (k >= 2).
    pub fn parent_map(&self, k: usize) -> Vec<usize> {
        let fine = self.level(k);
        let coarse = self.level(k - 1);
        let mut parent = vec![usize::MAX; fine.num_macros];
        for (elem, &m) in fine.macro_of_element.iter().enumerate() {
            parent[m] = coarse.macro_of_element[elem];
        }
        parent
    }
}

/// Quadtree hierarchy on an n-by-n structured quad mesh (row-major element
/// order). Level k macros form a (2^k * c)-square grid with c = n / 2^N.
pub fn build_structured_hierarchy(mesh: &Mesh, num_levels: usize) -> Result<AgglomerationHierarchy> {
    if num_levels < 2 {
        return Err(Error::Agglomeration("need at least 2 levels".into()));
    }
    let ne = mesh.num_elements();
    let n = (ne as f64).sqrt().round() as usize;
    if n * n != ne {
        return Err(Error::Agglomeration(format!(
            "mesh with {ne} elements is not an n-by-n structured grid"
        )));
    }
    let div = 1usize << num_levels;
    if n % div != 0 {
        return Err(Error::Agglomeration(format!(
            "n={n} is not divisible by 2^levels = {div}"
        )));
    }
    let c = n / div;

    let mut levels = Vec::with_capacity(num_levels);
    for k in 1..=num_levels {
        let (macro_of_element, num_macros) = if k == num_levels {
            ((0..ne).collect(), ne)
        } else {
            let g = (1usize << k) * c; // macro grid side
            let s = n / g; // elements per macro side
            let mut mo = vec![0usize; ne];
            for j in 0..n {
                for i in 0..n {
                    mo[j * n + i] = (j / s) * g + i / s;
                }
            }
            (mo, g * g)
        };
        levels.push(LevelPartition {
            macro_of_element,
            num_macros,
            edge_class: Vec::new(),
            macro_edges: Vec::new(),
        });
    }

    let mut hierarchy = AgglomerationHierarchy { levels, num_levels };
    classify_and_parameterize(mesh, &mut hierarchy)?;
    Ok(hierarchy)
}

/// Quadtree hierarchy by centroid binning: level k macros are the cells of a
/// 2^k-by-2^k uniform grid over the mesh bounding box, so macro interfaces
/// are straight lines. Works for any element shape; every grid cell that the
/// mesh touches must contain at least one element centroid.
pub fn build_grid_hierarchy(mesh: &Mesh, num_levels: usize) -> Result<AgglomerationHierarchy> {
    if num_levels < 2 {
        return Err(Error::Agglomeration("need at least 2 levels".into()));
    }
    let ne = mesh.num_elements();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for v in &mesh.vertices {
        for d in 0..2 {
            lo[d] = lo[d].min(v[d]);
            hi[d] = hi[d].max(v[d]);
        }
    }

    let mut levels = Vec::with_capacity(num_levels);
    for k in 1..=num_levels {
        let (macro_of_element, num_macros) = if k == num_levels {
            ((0..ne).collect(), ne)
        } else {
            let g = 1usize << k;
            let gf = g as f64;
            let mut mo = vec![0usize; ne];
            let mut used = vec![false; g * g];
            for (ei, m) in mo.iter_mut().enumerate() {
                let c = mesh.elem_centroid(ei);
                let bin = |d: usize| {
                    (((c[d] - lo[d]) / (hi[d] - lo[d]) * gf).floor() as usize).min(g - 1)
                };
                *m = bin(1) * g + bin(0);
                used[*m] = true;
            }
            // Renumber to drop empty cells (meshes of non-rectangular domains).
            let mut remap = vec![usize::MAX; g * g];
            let mut count = 0;
            for (cell, &u) in used.iter().enumerate() {
                if u {
                    remap[cell] = count;
                    count += 1;
                }
            }
            for m in &mut mo {
                *m = remap[*m];
            }
            (mo, count)
        };
        levels.push(LevelPartition {
            macro_of_element,
            num_macros,
            edge_class: Vec::new(),
            macro_edges: Vec::new(),
        });
    }

    let mut hierarchy = AgglomerationHierarchy { levels, num_levels };
    classify_and_parameterize(mesh, &mut hierarchy)?;
    Ok(hierarchy)
}

/// Seed-grown hierarchy for unstructured meshes. Level 1 assigns each
/// element to the graph-nearest seed (ties to the lower seed index); each
/// subsequent level splits every macro into at most four parts by balanced
/// coordinate bisection along the longer centroid bounding-box axis.
pub fn build_seeded_hierarchy(
    mesh: &Mesh,
    num_levels: usize,
    seeds: &[[f64; 2]],
) -> Result<AgglomerationHierarchy> {
    if num_levels < 2 {
        return Err(Error::Agglomeration("need at least 2 levels".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Agglomeration("seed list is empty".into()));
    }
    let ne = mesh.num_elements();
    let adj = mesh.element_adjacency();

    let mut seed_elems = Vec::with_capacity(seeds.len());
    for (si, &s) in seeds.iter().enumerate() {
        let e = mesh.element_containing(s).ok_or_else(|| {
            Error::Agglomeration(format!("seed {si} at ({}, {}) is outside the domain", s[0], s[1]))
        })?;
        seed_elems.push(e);
    }

    // Multi-source BFS; equal distance resolves to the lower seed index.
    let mut dist = vec![usize::MAX; ne];
    let mut owner = vec![usize::MAX; ne];
    let mut frontier: Vec<usize> = Vec::new();
    for (si, &e) in seed_elems.iter().enumerate() {
        if dist[e] > 0 || owner[e] == usize::MAX {
            if owner[e] == usize::MAX {
                frontier.push(e);
            }
            if owner[e] == usize::MAX || si < owner[e] {
                dist[e] = 0;
                owner[e] = owner[e].min(si);
            }
        }
    }
    let mut d = 0usize;
    while !frontier.is_empty() {
        frontier.sort_unstable();
        frontier.dedup();
        let mut next = Vec::new();
        for &e in &frontier {
            for &nb in &adj[e] {
                if dist[nb] == usize::MAX {
                    dist[nb] = d + 1;
                    owner[nb] = owner[e];
                    next.push(nb);
                } else if dist[nb] == d + 1 && owner[e] < owner[nb] {
                    owner[nb] = owner[e];
                }
            }
        }
        frontier = next;
        d += 1;
    }
    if owner.iter().any(|&o| o == usize::MAX) {
        return Err(Error::Agglomeration(
            "some elements are unreachable from every seed".into(),
        ));
    }
    let mut used = vec![false; seeds.len()];
    for &o in &owner {
        used[o] = true;
    }
    if used.iter().any(|&u| !u) {
        return Err(Error::Agglomeration("a seed produced an empty macro".into()));
    }

    let mut levels = Vec::with_capacity(num_levels);
    levels.push(LevelPartition {
        macro_of_element: owner.clone(),
        num_macros: seeds.len(),
        edge_class: Vec::new(),
        macro_edges: Vec::new(),
    });

    let mut current = owner;
    let mut n_macros = seeds.len();
    for _k in 2..num_levels {
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_macros];
        for (e, &m) in current.iter().enumerate() {
            groups[m].push(e);
        }
        let mut next = vec![usize::MAX; ne];
        let mut id = 0usize;
        for g in &groups {
            for part in quadrisect(mesh, g) {
                for &e in &part {
                    next[e] = id;
                }
                id += 1;
            }
        }
        current = next;
        n_macros = id;
        levels.push(LevelPartition {
            macro_of_element: current.clone(),
            num_macros: n_macros,
            edge_class: Vec::new(),
            macro_edges: Vec::new(),
        });
    }
    levels.push(LevelPartition {
        macro_of_element: (0..ne).collect(),
        num_macros: ne,
        edge_class: Vec::new(),
        macro_edges: Vec::new(),
    });

    let mut hierarchy = AgglomerationHierarchy { levels, num_levels };
    classify_and_parameterize(mesh, &mut hierarchy)?;
    Ok(hierarchy)
}

fn quadrisect(mesh: &Mesh, elems: &[usize]) -> Vec<Vec<usize>> {
    bisect(mesh, elems)
        .into_iter()
        .flat_map(|half| bisect(mesh, &half))
        .collect()
}

fn bisect(mesh: &Mesh, elems: &[usize]) -> Vec<Vec<usize>> {
    if elems.len() < 2 {
        return vec![elems.to_vec()];
    }
    let cents: Vec<[f64; 2]> = elems.iter().map(|&e| mesh.elem_centroid(e)).collect();
    let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
    for c in &cents {
        for a in 0..2 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    // Longer bounding-box axis; ties toward x.
    let axis = if hi[1] - lo[1] > hi[0] - lo[0] { 1 } else { 0 };
    let mut order: Vec<usize> = (0..elems.len()).collect();
    order.sort_by(|&a, &b| {
        cents[a][axis]
            .partial_cmp(&cents[b][axis])
            .unwrap()
            .then(elems[a].cmp(&elems[b]))
    });
    let half = (elems.len() + 1) / 2;
    let a: Vec<usize> = order[..half].iter().map(|&i| elems[i]).collect();
    let b: Vec<usize> = order[half..].iter().map(|&i| elems[i]).collect();
    vec![a, b]
}

/// Fill in edge classification and parameterized macro-edge chains for every
/// level of a hierarchy whose macro memberships are already set.
pub fn classify_and_parameterize(
    mesh: &Mesh,
    hierarchy: &mut AgglomerationHierarchy,
) -> Result<()> {
    for lvl in hierarchy.levels.iter_mut() {
        classify_level(mesh, lvl)?;
    }
    Ok(())
}

fn classify_level(mesh: &Mesh, lvl: &mut LevelPartition) -> Result<()> {
    let mo = &lvl.macro_of_element;
    // Group boundary fine edges by the macro pair they separate.
    let mut groups: BTreeMap<(usize, Option<usize>), Vec<usize>> = BTreeMap::new();
    let mut class = vec![EdgeClass::Interior; mesh.num_edges()];
    for (eid, edge) in mesh.edges.iter().enumerate() {
        let m1 = mo[edge.left];
        match edge.right.map(|r| mo[r]) {
            Some(m2) if m2 == m1 => {} // interior
            Some(m2) => {
                groups.entry((m1.min(m2), Some(m1.max(m2)))).or_default().push(eid);
            }
            None => {
                groups.entry((m1, None)).or_default().push(eid);
            }
        }
    }

    let mut macro_edges = Vec::new();
    for (key, edges) in groups {
        for chain in chain_edges(mesh, &edges)? {
            let id = macro_edges.len();
            for &(eid, _) in &chain.fine_edges {
                class[eid] = EdgeClass::Boundary { macro_edge: id };
            }
            macro_edges.push(MacroEdge {
                macros: key,
                fine_edges: chain.fine_edges,
                vertices: chain.vertices,
                vertex_params: chain.params,
                closed: chain.closed,
            });
        }
    }
    lvl.edge_class = class;
    lvl.macro_edges = macro_edges;
    Ok(())
}

struct Chain {
    fine_edges: Vec<(usize, bool)>,
    vertices: Vec<usize>,
    params: Vec<f64>,
    closed: bool,
}

/// Split a set of fine edges into connected, ordered, parameterized chains.
fn chain_edges(mesh: &Mesh, edges: &[usize]) -> Result<Vec<Chain>> {
    let mut incident: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &e in edges {
        for &v in &mesh.edges[e].verts {
            incident.entry(v).or_default().push(e);
        }
    }
    for (v, es) in &incident {
        if es.len() > 2 {
            return Err(Error::Agglomeration(format!(
                "non-manifold macro interface at vertex {v} ({} edges)",
                es.len()
            )));
        }
    }

    let mut visited: BTreeMap<usize, bool> = edges.iter().map(|&e| (e, false)).collect();
    let mut chains = Vec::new();
    for &start_edge in edges {
        if visited[&start_edge] {
            continue;
        }
        // Gather this component.
        let mut comp = Vec::new();
        let mut stack = vec![start_edge];
        *visited.get_mut(&start_edge).unwrap() = true;
        while let Some(e) = stack.pop() {
            comp.push(e);
            for &v in &mesh.edges[e].verts {
                for &f in &incident[&v] {
                    if !visited[&f] {
                        *visited.get_mut(&f).unwrap() = true;
                        stack.push(f);
                    }
                }
            }
        }
        comp.sort_unstable();

        // Start vertex: the smaller degree-1 vertex, or for a cycle the
        // smallest vertex of the component.
        let mut degree: BTreeMap<usize, usize> = BTreeMap::new();
        for &e in &comp {
            for &v in &mesh.edges[e].verts {
                *degree.entry(v).or_insert(0) += 1;
            }
        }
        let ends: Vec<usize> = degree
            .iter()
            .filter(|&(_, &d)| d == 1)
            .map(|(&v, _)| v)
            .collect();
        let closed = ends.is_empty();
        let start_vertex = if closed {
            *degree.keys().next().unwrap()
        } else {
            ends[0]
        };

        // Walk the chain.
        let mut in_comp: BTreeMap<usize, bool> = comp.iter().map(|&e| (e, false)).collect();
        let mut vertices = vec![start_vertex];
        let mut fine = Vec::new();
        let mut v = start_vertex;
        loop {
            let next = incident[&v]
                .iter()
                .filter(|&&e| comp.binary_search(&e).is_ok() && !in_comp[&e])
                .min()
                .copied();
            let Some(e) = next else { break };
            *in_comp.get_mut(&e).unwrap() = true;
            let ev = mesh.edges[e].verts;
            let fwd = ev[0] == v;
            let w = if fwd { ev[1] } else { ev[0] };
            fine.push((e, fwd));
            vertices.push(w);
            v = w;
        }
        if fine.len() != comp.len() {
            return Err(Error::Agglomeration(
                "macro interface component is not a simple chain".into(),
            ));
        }

        let mut params = Vec::with_capacity(vertices.len());
        let mut acc = 0.0;
        params.push(0.0);
        for &(e, _) in &fine {
            acc += mesh.edge_length(e);
            params.push(acc);
        }
        for p in params.iter_mut() {
            *p /= acc;
        }
        *params.last_mut().unwrap() = 1.0;

        chains.push(Chain {
            fine_edges: fine,
            vertices,
            params,
            closed,
        });
    }
    Ok(chains)
}
