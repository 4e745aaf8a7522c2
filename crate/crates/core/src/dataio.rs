//! Input and output formats.
//!
//! Two ingestion forms are supported: the `t`/`v`/`e` topology text format
//! (one record per line, tokens separated by runs of spaces) and headerless
//! CSV point coordinates. Cluster assignments are written as TSV.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{self, Write};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: edge references undeclared vertex {vertex}")]
    UndeclaredVertex { line: usize, vertex: u64 },

    #[error("line {line}: expected {expected} values, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// One syntactically valid line of a topology file.
#[derive(Debug, Clone, PartialEq)]
pub enum TopologyRecord {
    /// Graph delimiter (`t ...`); its remaining tokens carry no meaning.
    Delimiter,
    Vertex {
        id: u64,
        label: i64,
    },
    Edge {
        src: u64,
        dst: u64,
        weight: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    /// Identifier as written in the source file.
    pub original_id: u64,
    pub label: i64,
}

/// Undirected weighted graph with dense vertex indices `0..n`.
///
/// Edges are kept once per unordered pair; [`Graph::weight`] answers both
/// orientations identically.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Graph {
    vertices: Vec<Vertex>,
    edges: BTreeMap<(usize, usize), f64>,
    remapped: bool,
}

impl Graph {
    /// Builds a graph over vertices `0..labels.len()`. Endpoints must be
    /// in range; self-loops are rejected and later duplicates win.
    pub fn new(labels: Vec<i64>, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let n = labels.len();
        let vertices = labels
            .into_iter()
            .enumerate()
            .map(|(i, label)| Vertex {
                original_id: i as u64,
                label,
            })
            .collect();
        let mut graph = Graph {
            vertices,
            edges: BTreeMap::new(),
            remapped: false,
        };
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(DataError::Domain(format!(
                    "edge ({u}, {v}) out of range for {n} vertices"
                )));
            }
            if u == v {
                return Err(DataError::Domain(format!("self-loop on vertex {u}")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(DataError::Domain(format!(
                    "edge ({u}, {v}) has invalid weight {w}"
                )));
            }
            graph.edges.insert((u.min(v), u.max(v)), w);
        }
        Ok(graph)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    /// Edges as `(u, v, weight)` with `u < v`, ordered by `(u, v)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.edges.iter().map(|(&(u, v), &w)| (u, v, w))
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        self.edges.get(&(u.min(v), u.max(v))).copied()
    }

    /// True when the file's vertex ids were not already `0..n` and had to be
    /// renumbered.
    pub fn is_remapped(&self) -> bool {
        self.remapped
    }

    /// Dense index → original file id.
    pub fn id_map(&self) -> Vec<u64> {
        self.vertices.iter().map(|v| v.original_id).collect()
    }
}

/// A set of equal-dimension points stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if !rows.is_empty() && dim == 0 {
            return Err(DataError::Domain("points must have dimension >= 1".into()));
        }
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != dim {
                return Err(DataError::RaggedRow {
                    line: i + 1,
                    expected: dim,
                    found: row.len(),
                });
            }
            if let Some(x) = row.iter().find(|x| !x.is_finite()) {
                return Err(DataError::Domain(format!(
                    "point {i} has non-finite coordinate {x}"
                )));
            }
            coords.extend(row);
        }
        Ok(PointSet { dim, coords })
    }

    pub fn len(&self) -> usize {
        self.coords.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim.max(1))
    }
}

/// Cluster label per input item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    k: usize,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(DataError::Domain(format!(
                "label {l} of item {i} is not below k = {k}"
            )));
        }
        Ok(ClusterAssignment { labels, k })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn parse_token<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| DataError::Parse {
        line,
        message: format!("invalid {what} `{tok}`"),
    })
}

fn is_record_tag(tok: &str) -> bool {
    matches!(tok, "t" | "v" | "e")
}

/// Syntactic pass over a topology file. Returns `(line number, record)`
/// pairs without checking that edge endpoints are declared.
///
/// A leading integer column in front of the record tag (a line-number
/// prefix, as produced by numbered listings) is skipped.
pub fn parse_topology_records(source: &str) -> Result<Vec<(usize, TopologyRecord)>> {
    let mut records = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let mut tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() >= 2 && !is_record_tag(tokens[0]) && is_record_tag(tokens[1]) {
            if tokens[0].parse::<u64>().is_err() {
                return Err(DataError::Parse {
                    line,
                    message: format!("unknown record tag `{}`", tokens[0]),
                });
            }
            tokens.remove(0);
        }
        let record = match tokens[0] {
            "t" => TopologyRecord::Delimiter,
            "v" => {
                if tokens.len() != 3 {
                    return Err(DataError::Parse {
                        line,
                        message: format!(
                            "vertex record needs 2 fields, found {}",
                            tokens.len() - 1
                        ),
                    });
                }
                let id = parse_token(tokens[1], line, "vertex id")?;
                let label: i64 = parse_token(tokens[2], line, "vertex label")?;
                if label < 0 {
                    return Err(DataError::Domain(format!(
                        "line {line}: negative vertex label {label}"
                    )));
                }
                TopologyRecord::Vertex { id, label }
            }
            "e" => {
                if tokens.len() != 4 {
                    return Err(DataError::Parse {
                        line,
                        message: format!("edge record needs 3 fields, found {}", tokens.len() - 1),
                    });
                }
                let src = parse_token(tokens[1], line, "edge source")?;
                let dst = parse_token(tokens[2], line, "edge target")?;
                let weight: f64 = parse_token(tokens[3], line, "edge label")?;
                if !weight.is_finite() {
                    return Err(DataError::Parse {
                        line,
                        message: format!("edge label `{}` is not finite", tokens[3]),
                    });
                }
                if weight < 0.0 {
                    return Err(DataError::Domain(format!(
                        "line {line}: negative edge label {weight}"
                    )));
                }
                TopologyRecord::Edge { src, dst, weight }
            }
            other => {
                return Err(DataError::Parse {
                    line,
                    message: format!("unknown record tag `{other}`"),
                })
            }
        };
        records.push((line, record));
    }
    Ok(records)
}

/// Parses a topology file into a [`Graph`].
///
/// Vertex ids that already form `0..n` are used verbatim; otherwise they are
/// renumbered in ascending id order (see [`Graph::id_map`]). Self-loops are
/// dropped and duplicate edges keep the last weight, both with a warning.
pub fn parse_topology(source: &str) -> Result<Graph> {
    let records = parse_topology_records(source)?;

    let mut labels: BTreeMap<u64, i64> = BTreeMap::new();
    for (line, rec) in &records {
        if let TopologyRecord::Vertex { id, label } = *rec {
            if labels.insert(id, label).is_some() {
                warn!("line {line}: vertex {id} declared twice, keeping the last label");
            }
        }
    }

    let ids: Vec<u64> = labels.keys().copied().collect();
    let dense = ids.iter().enumerate().all(|(i, &id)| id == i as u64);
    let index_of = |id: u64| -> Option<usize> {
        if dense {
            (id < ids.len() as u64).then_some(id as usize)
        } else {
            ids.binary_search(&id).ok()
        }
    };

    let mut edges = BTreeMap::new();
    for (line, rec) in &records {
        if let TopologyRecord::Edge { src, dst, weight } = *rec {
            let u = index_of(src).ok_or(DataError::UndeclaredVertex {
                line: *line,
                vertex: src,
            })?;
            let v = index_of(dst).ok_or(DataError::UndeclaredVertex {
                line: *line,
                vertex: dst,
            })?;
            if u == v {
                warn!("line {line}: dropping self-loop on vertex {src}");
                continue;
            }
            if edges.insert((u.min(v), u.max(v)), weight).is_some() {
                warn!("line {line}: duplicate edge ({src}, {dst}), keeping the last weight");
            }
        }
    }

    let vertices = labels
        .into_iter()
        .map(|(original_id, label)| Vertex { original_id, label })
        .collect();
    Ok(Graph {
        vertices,
        edges,
        remapped: !dense,
    })
}

fn format_weight(w: f64) -> String {
    if w.fract() == 0.0 && w.abs() < 1e15 {
        format!("{}", w as i64)
    } else {
        format!("{w}")
    }
}

/// Serializes a graph in topology format using the original vertex ids.
pub fn write_topology(graph: &Graph) -> String {
    let mut out = String::from("t # 0\n");
    for v in &graph.vertices {
        let _ = writeln!(out, "v {} {}", v.original_id, v.label);
    }
    for (u, v, w) in graph.edges() {
        let _ = writeln!(
            out,
            "e {} {} {}",
            graph.vertices[u].original_id,
            graph.vertices[v].original_id,
            format_weight(w)
        );
    }
    out
}

/// Writes `<dense index>\t<original id>` lines.
pub fn write_id_map<W: Write>(graph: &Graph, mut sink: W) -> io::Result<()> {
    for (i, v) in graph.vertices.iter().enumerate() {
        writeln!(sink, "{i}\t{}", v.original_id)?;
    }
    Ok(())
}

/// Parses headerless comma-separated coordinates, one point per line.
/// Blank lines are skipped.
pub fn parse_points(source: &str) -> Result<PointSet> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dim = None;
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let row = trimmed
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                let x: f64 = parse_token(tok, line, "coordinate")?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(DataError::Parse {
                        line,
                        message: format!("coordinate `{tok}` is not finite"),
                    })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(DataError::RaggedRow {
                    line,
                    expected: d,
                    found: row.len(),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    PointSet::new(rows)
}

pub fn write_points(points: &PointSet) -> String {
    let mut out = String::new();
    for p in points.iter() {
        let mut first = true;
        for x in p {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{x}");
        }
        out.push('\n');
    }
    out
}

/// Writes one `<point index>\t<cluster index>` line per item.
pub fn write_assignments<W: Write>(assignment: &ClusterAssignment, mut sink: W) -> io::Result<()> {
    for (i, l) in assignment.labels.iter().enumerate() {
        writeln!(sink, "{i}\t{l}")?;
    }
    Ok(())
}

/// Parameters for the synthetic data generators.
#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticSpec {
    /// Isotropic Gaussian blobs whose centers sit `separation` apart on the
    /// first axis.
    Blobs {
        blobs: usize,
        points_per_blob: usize,
        separation: f64,
        spread: f64,
        dim: usize,
    },
    /// Disjoint unit-weight cliques.
    Cliques { cliques: usize, size: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticData {
    Points {
        points: PointSet,
        labels: Vec<usize>,
    },
    Graph {
        graph: Graph,
        labels: Vec<usize>,
    },
}

impl SyntheticData {
    pub fn labels(&self) -> &[usize] {
        match self {
            SyntheticData::Points { labels, .. } | SyntheticData::Graph { labels, .. } => labels,
        }
    }

    /// Serialized form: CSV for points, topology text for graphs.
    pub fn to_text(&self) -> String {
        match self {
            SyntheticData::Points { points, .. } => write_points(points),
            SyntheticData::Graph { graph, .. } => write_topology(graph),
        }
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticData> {
    match *spec {
        SyntheticSpec::Blobs {
            blobs,
            points_per_blob,
            separation,
            spread,
            dim,
        } => {
            if blobs == 0 || points_per_blob == 0 {
                return Err(DataError::Domain(
                    "blob and point counts must be positive".into(),
                ));
            }
            if dim == 0 {
                return Err(DataError::Domain("dimension must be positive".into()));
            }
            if !(separation.is_finite() && separation >= 0.0) {
                return Err(DataError::Domain(format!(
                    "invalid separation {separation}"
                )));
            }
            if !(spread.is_finite() && spread > 0.0) {
                return Err(DataError::Domain(format!("invalid spread {spread}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noise = Normal::new(0.0, spread)
                .map_err(|e| DataError::Domain(format!("invalid spread: {e}")))?;
            let mut rows = Vec::with_capacity(blobs * points_per_blob);
            let mut labels = Vec::with_capacity(blobs * points_per_blob);
            for b in 0..blobs {
                for _ in 0..points_per_blob {
                    let row = (0..dim)
                        .map(|axis| {
                            let center = if axis == 0 {
                                b as f64 * separation
                            } else {
                                0.0
                            };
                            center + noise.sample(&mut rng)
                        })
                        .collect();
                    rows.push(row);
                    labels.push(b);
                }
            }
            Ok(SyntheticData::Points {
                points: PointSet::new(rows)?,
                labels,
            })
        }
        SyntheticSpec::Cliques { cliques, size } => {
            if cliques == 0 || size == 0 {
                return Err(DataError::Domain(
                    "clique count and size must be positive".into(),
                ));
            }
            let n = cliques * size;
            let mut edges = Vec::new();
            for c in 0..cliques {
                let base = c * size;
                for i in 0..size {
                    for j in i + 1..size {
                        edges.push((base + i, base + j, 1.0));
                    }
                }
            }
            let labels = (0..n).map(|i| i / size).collect();
            Ok(SyntheticData::Graph {
                graph: Graph::new(vec![1; n], &edges)?,
                labels,
            })
        }
    }
}

/// Random connected-component fixture: `sizes[i]` vertices per block, each
/// block a random spanning tree plus extra random intra-block edges.
pub fn random_block_graph(sizes: &[usize], extra_edge_prob: f64, seed: u64) -> Result<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = sizes.iter().sum();
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut base = 0;
    for &size in sizes {
        for i in 1..size {
            let j = rng.random_range(0..i);
            edges.insert((base + j, base + i));
        }
        for i in 0..size {
            for j in i + 1..size {
                if rng.random::<f64>() < extra_edge_prob {
                    edges.insert((base + i, base + j));
                }
            }
        }
        base += size;
    }
    let weighted: Vec<_> = edges
        .into_iter()
        .map(|(u, v)| (u, v, rng.random_range(0.1..1.0)))
        .collect();
    Graph::new(vec![1; n], &weighted)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_edge() {
        let g = parse_topology("v 0 1\nv 1 1\ne 0 1 2\n").unwrap();
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.weight(0, 1), Some(2.0));
        assert_eq!(g.weight(1, 0), Some(2.0));
        assert!(!g.is_remapped());
    }

    #[test]
    fn empty_input_is_empty_graph() {
        let g = parse_topology("").unwrap();
        assert_eq!(g.vertex_count(), 0);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn undeclared_endpoint_names_vertex() {
        let err = parse_topology("v 0 1\ne 0 5 1\n").unwrap_err();
        match err {
            DataError::UndeclaredVertex { line, vertex } => {
                assert_eq!(line, 2);
                assert_eq!(vertex, 5);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_string("v 0 1\ne 0 5 1\n").contains("vertex 5"));
    }

    fn err_string(src: &str) -> String {
        parse_topology(src).unwrap_err().to_string()
    }

    #[test]
    fn malformed_lines_report_line_number() {
        let err = parse_topology("v 0 1\nv 1\n").unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 2, .. }));
        let err = parse_topology("v 0 1\nx 1 2\n").unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 2, .. }));
        let err = parse_topology("v 0 1\nv 1 1\ne 0 1 abc\n").unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 3, .. }));
    }

    #[test]
    fn negative_labels_are_domain_errors() {
        assert!(matches!(
            parse_topology("v 0 1\nv 1 1\ne 0 1 -2\n"),
            Err(DataError::Domain(_))
        ));
        assert!(matches!(
            parse_topology("v 0 -1\n"),
            Err(DataError::Domain(_))
        ));
    }

    #[test]
    fn accepts_runs_of_spaces_and_delimiters() {
        let g = parse_topology("t # 0\nv   0    1\nv 1  1\n\ne  0   1     3\n").unwrap();
        assert_eq!(g.weight(0, 1), Some(3.0));
    }

    #[test]
    fn self_loops_dropped_duplicates_last_wins() {
        let g = parse_topology("v 0 1\nv 1 1\ne 0 0 4\ne 0 1 2\ne 1 0 7\n").unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.weight(0, 1), Some(7.0));
    }

    #[test]
    fn non_dense_ids_are_remapped() {
        let g = parse_topology("v 10 1\nv 30 1\nv 20 1\ne 10 30 1.5\n").unwrap();
        assert!(g.is_remapped());
        assert_eq!(g.id_map(), vec![10, 20, 30]);
        assert_eq!(g.weight(0, 2), Some(1.5));
        let mut buf = Vec::new();
        write_id_map(&g, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0\t10\n1\t20\n2\t30\n");
    }

    #[test]
    fn real_valued_edge_labels() {
        let g = parse_topology("v 0 1\nv 1 1\ne 0 1 0.25\n").unwrap();
        assert_eq!(g.weight(0, 1), Some(0.25));
    }

    #[test]
    fn parse_points_shapes() {
        let p = parse_points("0,0\n1,0\n").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.dim(), 2);
        assert_eq!(p.point(1), &[1.0, 0.0]);

        let p = parse_points("1,2,3\n4,5,6\n7,8,9\n0.5,-1,2e3\n").unwrap();
        assert_eq!((p.len(), p.dim()), (4, 3));
        assert_eq!(p.point(3), &[0.5, -1.0, 2000.0]);
    }

    #[test]
    fn parse_points_errors() {
        assert!(matches!(
            parse_points("1,2,3\n4,5\n"),
            Err(DataError::RaggedRow {
                line: 2,
                expected: 3,
                found: 2
            })
        ));
        assert!(matches!(
            parse_points("1,x\n"),
            Err(DataError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_points("1,inf\n"),
            Err(DataError::Parse { .. })
        ));
    }

    #[test]
    fn assignment_tsv() {
        let mut buf = Vec::new();
        write_assignments(&ClusterAssignment::new(vec![1, 0], 2).unwrap(), &mut buf).unwrap();
        assert_eq!(buf, b"0\t1\n1\t0\n");

        let mut buf = Vec::new();
        write_assignments(&ClusterAssignment::new(vec![], 1).unwrap(), &mut buf).unwrap();
        assert!(buf.is_empty());

        let mut buf = Vec::new();
        write_assignments(&ClusterAssignment::new(vec![0, 0, 0], 1).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().all(|l| l.ends_with('0')));

        assert!(ClusterAssignment::new(vec![0, 2], 2).is_err());
    }

    #[test]
    fn blobs_are_deterministic() {
        let spec = SyntheticSpec::Blobs {
            blobs: 3,
            points_per_blob: 30,
            separation: 10.0,
            spread: 1.0,
            dim: 2,
        };
        let a = generate_synthetic(&spec, 7).unwrap();
        let b = generate_synthetic(&spec, 7).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        match &a {
            SyntheticData::Points { points, labels } => {
                assert_eq!(points.len(), 90);
                assert_eq!(labels.len(), 90);
            }
            _ => unreachable!(),
        }
        assert_ne!(a.to_text(), generate_synthetic(&spec, 8).unwrap().to_text());
        // serialized floats reparse exactly
        let reparsed = parse_points(&a.to_text()).unwrap();
        if let SyntheticData::Points { points, .. } = a {
            assert_eq!(reparsed, points);
        }
    }

    #[test]
    fn single_point_blob() {
        let spec = SyntheticSpec::Blobs {
            blobs: 1,
            points_per_blob: 1,
            separation: 10.0,
            spread: 1.0,
            dim: 2,
        };
        let text = generate_synthetic(&spec, 1).unwrap().to_text();
        assert_eq!(text.lines().count(), 1);
    }

    #[test]
    fn clique_file_counts() {
        let data = generate_synthetic(
            &SyntheticSpec::Cliques {
                cliques: 3,
                size: 4,
            },
            0,
        )
        .unwrap();
        let text = data.to_text();
        // brute-force count: each 4-clique has 4*3/2 edges
        let expected_edges: usize = (0..3)
            .map(|_| (0..4).flat_map(|i| (0..4).filter(move |&j| j > i)).count())
            .sum();
        assert_eq!(expected_edges, 18);
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 12);
        assert_eq!(
            text.lines().filter(|l| l.starts_with("e ")).count(),
            expected_edges
        );
    }

    #[test]
    fn generator_rejects_zero_sizes() {
        assert!(generate_synthetic(
            &SyntheticSpec::Cliques {
                cliques: 0,
                size: 4
            },
            0
        )
        .is_err());
        let spec = SyntheticSpec::Blobs {
            blobs: 2,
            points_per_blob: 0,
            separation: 1.0,
            spread: 1.0,
            dim: 2,
        };
        assert!(matches!(
            generate_synthetic(&spec, 0),
            Err(DataError::Domain(_))
        ));
    }
}
