//! Graphs carrying tensor networks, and vertex-covering paths.

use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};

/// Family a [`NetworkShape`] was built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GraphKind {
    Ring { len: usize },
    Chain { len: usize },
    Grid { rows: usize, cols: usize },
    Custom,
}

/// Graph with per-edge bond dimensions and a uniform physical dimension.
///
/// Vertices are `0..vertex_count`. Edge ids are positions in `edges`; the
/// bond indices of a local map follow ascending edge id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ShapeJson", into = "ShapeJson")]
pub struct NetworkShape {
    kind: GraphKind,
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
    bond_dims: Vec<usize>,
    phys_dim: usize,
    incident: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct ShapeJson {
    graph: GraphKind,
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
    bond_dims: Vec<usize>,
    phys_dim: usize,
}

impl TryFrom<ShapeJson> for NetworkShape {
    type Error = Error;
    fn try_from(s: ShapeJson) -> Result<Self> {
        NetworkShape::with_kind(s.graph, s.vertex_count, s.edges, s.bond_dims, s.phys_dim)
    }
}

impl From<NetworkShape> for ShapeJson {
    fn from(s: NetworkShape) -> Self {
        ShapeJson {
            graph: s.kind,
            vertex_count: s.vertex_count,
            edges: s.edges,
            bond_dims: s.bond_dims,
            phys_dim: s.phys_dim,
        }
    }
}

impl NetworkShape {
    /// Arbitrary simple graph.
    pub fn custom(vertex_count: usize, edges: Vec<(usize, usize)>, bond_dims: Vec<usize>, phys_dim: usize) -> Result<Self> {
        Self::with_kind(GraphKind::Custom, vertex_count, edges, bond_dims, phys_dim)
    }

    fn with_kind(
        kind: GraphKind,
        vertex_count: usize,
        edges: Vec<(usize, usize)>,
        bond_dims: Vec<usize>,
        phys_dim: usize,
    ) -> Result<Self> {
        if vertex_count == 0 {
            bail!(Argument, "graph needs at least one vertex");
        }
        if phys_dim == 0 {
            bail!(Argument, "physical dimension must be positive");
        }
        if bond_dims.len() != edges.len() {
            bail!(Dimension, "{} bond dims for {} edges", bond_dims.len(), edges.len());
        }
        if bond_dims.contains(&0) {
            bail!(Argument, "bond dimensions must be positive");
        }
        let mut incident = vec![Vec::new(); vertex_count];
        for (e, &(u, v)) in edges.iter().enumerate() {
            if u >= vertex_count || v >= vertex_count {
                bail!(Argument, "edge ({u}, {v}) references a missing vertex");
            }
            if u == v {
                bail!(Argument, "self-loop at vertex {u}");
            }
            if edges[..e].iter().any(|&(x, y)| (x, y) == (u, v) || (x, y) == (v, u)) {
                bail!(Argument, "duplicate edge ({u}, {v})");
            }
            incident[u].push(e);
            incident[v].push(e);
        }
        Ok(NetworkShape { kind, vertex_count, edges, bond_dims, phys_dim, incident })
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn bond_dim(&self, e: usize) -> usize {
        self.bond_dims[e]
    }

    pub fn bond_dims(&self) -> &[usize] {
        &self.bond_dims
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims.iter().copied().max().unwrap_or(1)
    }

    pub fn phys_dim(&self) -> usize {
        self.phys_dim
    }

    /// Incident edge ids of `v`, ascending.
    pub fn incident_edges(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incident[v].len()
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        self.incident[u].iter().copied().find(|&e| {
            let (x, y) = self.edges[e];
            (x == u && y == v) || (x == v && y == u)
        })
    }

    /// Endpoint of `e` that is not `v`.
    pub fn other_end(&self, e: usize, v: usize) -> usize {
        let (x, y) = self.edges[e];
        if x == v {
            y
        } else {
            x
        }
    }

    /// Position of edge `e` among the bond indices of `v`.
    pub fn bond_slot(&self, v: usize, e: usize) -> Option<usize> {
        self.incident[v].iter().position(|&f| f == e)
    }

    /// Expected local map shape: physical index first, then bonds.
    pub fn map_shape(&self, v: usize) -> Vec<usize> {
        let mut s = vec![self.phys_dim];
        s.extend(self.incident[v].iter().map(|&e| self.bond_dims[e]));
        s
    }

    pub fn with_bond_dims(&self, bond_dims: Vec<usize>) -> Result<Self> {
        Self::with_kind(self.kind, self.vertex_count, self.edges.clone(), bond_dims, self.phys_dim)
    }

    pub fn with_uniform_bond(&self, d: usize) -> Result<Self> {
        self.with_bond_dims(vec![d; self.edges.len()])
    }

    pub fn with_phys_dim(&self, phys_dim: usize) -> Result<Self> {
        Self::with_kind(self.kind, self.vertex_count, self.edges.clone(), self.bond_dims.clone(), phys_dim)
    }

    /// Same vertices, edges and dimensions (the family tag is ignored).
    pub fn same_structure(&self, other: &NetworkShape) -> bool {
        self.vertex_count == other.vertex_count
            && self.edges == other.edges
            && self.bond_dims == other.bond_dims
            && self.phys_dim == other.phys_dim
    }

    /// Same vertices, edges and physical dimension; bonds may differ.
    pub fn same_graph(&self, other: &NetworkShape) -> bool {
        self.vertex_count == other.vertex_count && self.edges == other.edges && self.phys_dim == other.phys_dim
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.vertex_count];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &e in &self.incident[v] {
                let w = self.other_end(e, v);
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Number of amplitudes of the full state, or `None` on overflow.
    pub fn state_len(&self) -> Option<usize> {
        (0..self.vertex_count).try_fold(1usize, |acc, _| acc.checked_mul(self.phys_dim))
    }
}

/// Builds a ring, chain or grid with uniform bond `bond` and physical dimension `phys`.
///
/// Ring edge `i` joins `i` and `(i + 1) mod L`. Grid vertices are numbered
/// row-major; each row's horizontal edges come before the vertical edges
/// leaving that row.
pub fn build_graph(kind: GraphKind, bond: usize, phys: usize) -> Result<NetworkShape> {
    let (n, edges) = match kind {
        GraphKind::Ring { len } => {
            if len < 3 {
                bail!(Argument, "ring needs at least 3 vertices, got {len}");
            }
            (len, (0..len).map(|i| (i, (i + 1) % len)).collect::<Vec<_>>())
        }
        GraphKind::Chain { len } => {
            if len < 2 {
                bail!(Argument, "chain needs at least 2 vertices, got {len}");
            }
            (len, (0..len - 1).map(|i| (i, i + 1)).collect())
        }
        GraphKind::Grid { rows, cols } => {
            if rows < 2 || cols < 2 {
                bail!(Argument, "grid needs at least 2x2 vertices, got {rows}x{cols}");
            }
            let mut edges = Vec::new();
            for r in 0..rows {
                for c in 0..cols - 1 {
                    edges.push((r * cols + c, r * cols + c + 1));
                }
                if r + 1 < rows {
                    for c in 0..cols {
                        edges.push((r * cols + c, (r + 1) * cols + c));
                    }
                }
            }
            (rows * cols, edges)
        }
        GraphKind::Custom => bail!(Unsupported, "build_graph only builds rings, chains and grids"),
    };
    if bond == 0 {
        bail!(Argument, "bond dimension must be positive");
    }
    let m = edges.len();
    NetworkShape::with_kind(kind, n, edges, vec![bond; m], phys)
}

/// Config-file form of a graph: `{"kind":"ring","L":11,"D":2,"d":3}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct GraphSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub L: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    pub D: usize,
    pub d: usize,
}

impl GraphSpec {
    pub fn build(&self) -> Result<NetworkShape> {
        let need_len = || self.L.ok_or_else(|| Error::Argument(format!("{} needs L", self.kind)));
        let kind = match self.kind.as_str() {
            "ring" => GraphKind::Ring { len: need_len()? },
            "chain" => GraphKind::Chain { len: need_len()? },
            "grid" => match (self.rows, self.cols) {
                (Some(rows), Some(cols)) => GraphKind::Grid { rows, cols },
                _ => bail!(Argument, "grid needs rows and cols"),
            },
            other => bail!(Argument, "unknown graph kind {other:?}"),
        };
        build_graph(kind, self.D, self.d)
    }
}

/// Walk over the graph that visits every vertex at least once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathCover {
    vertices: Vec<usize>,
    edge_multiplicity: Vec<usize>,
}

impl PathCover {
    /// Validates adjacency and coverage and counts edge traversals.
    pub fn new(shape: &NetworkShape, vertices: Vec<usize>) -> Result<Self> {
        let mut covered = vec![false; shape.vertex_count()];
        let mut mult = vec![0usize; shape.edge_count()];
        for (k, &v) in vertices.iter().enumerate() {
            if v >= shape.vertex_count() {
                bail!(Argument, "path vertex {v} out of range");
            }
            covered[v] = true;
            if k > 0 {
                let u = vertices[k - 1];
                match shape.edge_between(u, v) {
                    Some(e) => mult[e] += 1,
                    None => bail!(Argument, "path step {u} -> {v} is not an edge"),
                }
            }
        }
        if let Some(v) = covered.iter().position(|c| !c) {
            bail!(Argument, "path misses vertex {v}");
        }
        Ok(PathCover { vertices, edge_multiplicity: mult })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn edge_multiplicity(&self) -> &[usize] {
        &self.edge_multiplicity
    }

    pub fn max_multiplicity(&self) -> usize {
        self.edge_multiplicity.iter().copied().max().unwrap_or(0)
    }
}

/// Covering path without repeated edges: the chain itself, the ring minus
/// its closing edge, or a boustrophedon snake through a grid.
pub fn snake_path(shape: &NetworkShape) -> Result<PathCover> {
    let vertices = match shape.kind() {
        GraphKind::Chain { len } => (0..len).collect(),
        GraphKind::Ring { len } => (0..len).collect(),
        GraphKind::Grid { rows, cols } => {
            let mut v = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                if r % 2 == 0 {
                    v.extend((0..cols).map(|c| r * cols + c));
                } else {
                    v.extend((0..cols).rev().map(|c| r * cols + c));
                }
            }
            v
        }
        GraphKind::Custom => bail!(Unsupported, "no snake path rule for custom graphs"),
    };
    PathCover::new(shape, vertices)
}
