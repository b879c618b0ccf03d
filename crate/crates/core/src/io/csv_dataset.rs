//! Generic tabular ingestion.
//!
//! `nodes.csv`: header `id,label,f1,...,fp` (the `label` column is optional).
//! `edges.csv`: header `src,dst` with an optional third `weight` column.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::encode_labels;
use crate::error::{Error, Result};
use crate::graph::{Adjacency, AttributedGraph};

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::parse(path, line, e.to_string())
}

pub fn load_csv_dataset(nodes_path: &Path, edges_path: &Path) -> Result<AttributedGraph> {
    let mut rdr = reader(nodes_path)?;
    let header = rdr.headers().map_err(|e| csv_error(nodes_path, e))?.clone();
    if header.is_empty() || &header[0] != "id" {
        return Err(Error::parse(nodes_path, 1, "first column must be `id`"));
    }
    let has_label = header.get(1) == Some("label");
    let first_feature = if has_label { 2 } else { 1 };
    let width = header.len();
    let p = width - first_feature;

    let mut ids = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut raw_labels = Vec::new();
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(nodes_path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != width {
            return Err(Error::parse(
                nodes_path,
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let id = record[0].to_string();
        if index.insert(id.clone(), ids.len()).is_some() {
            return Err(Error::parse(
                nodes_path,
                line,
                format!("duplicate node id {id:?}"),
            ));
        }
        if has_label {
            raw_labels.push(record[1].to_string());
        }
        for field in record.iter().skip(first_feature) {
            let v: f64 = field.parse().map_err(|_| {
                Error::parse(
                    nodes_path,
                    line,
                    format!("bad attribute value {field:?} for node {id:?}"),
                )
            })?;
            values.push(v);
        }
        ids.push(id);
    }
    let n = ids.len();
    if n == 0 {
        return Err(Error::structural(format!(
            "{} lists no nodes",
            nodes_path.display()
        )));
    }
    let attributes = DMatrix::from_row_slice(n, p, &values);
    let labels = has_label.then(|| encode_labels(&raw_labels, true).0);

    let mut rdr = reader(edges_path)?;
    let header = rdr.headers().map_err(|e| csv_error(edges_path, e))?.clone();
    if header.get(0) != Some("src") || header.get(1) != Some("dst") {
        return Err(Error::parse(
            edges_path,
            1,
            "header must start with `src,dst`",
        ));
    }
    let weighted = header.get(2) == Some("weight");
    let width = header.len();
    let mut edges = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(edges_path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != width {
            return Err(Error::parse(
                edges_path,
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let endpoint = |name: &str| {
            index.get(name).copied().ok_or_else(|| {
                Error::parse(
                    edges_path,
                    line,
                    format!("edge endpoint {name:?} is not a known node"),
                )
            })
        };
        let u = endpoint(&record[0])?;
        let v = endpoint(&record[1])?;
        let w = if weighted {
            let raw = &record[2];
            let w: f64 = raw
                .parse()
                .map_err(|_| Error::parse(edges_path, line, format!("bad weight {raw:?}")))?;
            if !w.is_finite() || w < 0.0 {
                return Err(Error::parse(
                    edges_path,
                    line,
                    format!("bad weight {raw:?}"),
                ));
            }
            w
        } else {
            1.0
        };
        edges.push((u, v, w));
    }

    let adjacency = Adjacency::from_edges(n, edges)?;
    AttributedGraph::new(adjacency, attributes, labels)?.with_node_ids(ids)
}

/// Writes `nodes.csv` / `edges.csv` that [`load_csv_dataset`] reads back to
/// the same graph. Values use the shortest exact decimal form.
pub fn write_csv_dataset(
    graph: &AttributedGraph,
    nodes_path: &Path,
    edges_path: &Path,
) -> Result<()> {
    let ids: Vec<String> = match graph.node_ids() {
        Some(ids) => ids.to_vec(),
        None => (0..graph.n_nodes()).map(|i| i.to_string()).collect(),
    };
    let attrs = graph.attributes();

    let file = File::create(nodes_path).map_err(|e| Error::io(nodes_path, e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e| Error::io(nodes_path, e);
    write!(out, "id").map_err(io_err)?;
    if graph.labels().is_some() {
        write!(out, ",label").map_err(io_err)?;
    }
    for f in 1..=attrs.ncols() {
        write!(out, ",f{f}").map_err(io_err)?;
    }
    writeln!(out).map_err(io_err)?;
    for (i, id) in ids.iter().enumerate() {
        write!(out, "{id}").map_err(io_err)?;
        if let Some(labels) = graph.labels() {
            write!(out, ",{}", labels[i]).map_err(io_err)?;
        }
        for v in attrs.row(i).iter() {
            write!(out, ",{v}").map_err(io_err)?;
        }
        writeln!(out).map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;

    let adj = graph.adjacency();
    let weighted = adj.edges().any(|(_, _, w)| w != 1.0);
    let file = File::create(edges_path).map_err(|e| Error::io(edges_path, e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e| Error::io(edges_path, e);
    writeln!(
        out,
        "{}",
        if weighted {
            "src,dst,weight"
        } else {
            "src,dst"
        }
    )
    .map_err(io_err)?;
    for (u, v, w) in adj.edges() {
        if weighted {
            writeln!(out, "{},{},{w}", ids[u], ids[v]).map_err(io_err)?;
        } else {
            writeln!(out, "{},{}", ids[u], ids[v]).map_err(io_err)?;
        }
    }
    out.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn files(
        nodes: &str,
        edges: &str,
    ) -> (tempfile::TempDir, std::path::PathBuf, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let n = dir.path().join("nodes.csv");
        let e = dir.path().join("edges.csv");
        fs::write(&n, nodes).unwrap();
        fs::write(&e, edges).unwrap();
        (dir, n, e)
    }

    #[test]
    fn minimal_pair() {
        let (_d, n, e) = files("id,label,f1,f2\na,0,0.5,1\nb,1,0.25,0\n", "src,dst\na,b\n");
        let g = load_csv_dataset(&n, &e).unwrap();
        assert_eq!(g.n_nodes(), 2);
        assert_eq!(g.adjacency().n_edges(), 1);
        assert_eq!(g.labels().unwrap(), &[0, 1]);
        assert_eq!(g.attributes()[(0, 0)], 0.5);
    }

    #[test]
    fn labels_are_optional_and_weights_symmetrize() {
        let (_d, n, e) = files(
            "id,f1\n1,0\n2,1\n3,2\n",
            "src,dst,weight\n1,2,0.5\n2,1,2\n3,1,1\n",
        );
        let g = load_csv_dataset(&n, &e).unwrap();
        assert!(g.labels().is_none());
        let a = g.adjacency().to_dense();
        assert_eq!(a[(0, 1)], 2.0);
        assert_eq!(a[(1, 0)], 2.0);
        assert_eq!(a[(0, 2)], 1.0);
    }

    #[test]
    fn duplicate_id_is_named() {
        let (_d, n, e) = files("id,f1\nx,0\ny,1\nx,2\n", "src,dst\n");
        let err = load_csv_dataset(&n, &e).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        assert!(err.to_string().contains("\"x\""));
    }

    #[test]
    fn ragged_rows_and_unknown_endpoints() {
        let (_d, n, e) = files("id,f1,f2\nx,0,1\ny,1\n", "src,dst\n");
        assert!(matches!(
            load_csv_dataset(&n, &e),
            Err(Error::Parse { line: 3, .. })
        ));

        let (_d, n, e) = files("id,f1\nx,0\ny,1\n", "src,dst\nx,ghost\n");
        let err = load_csv_dataset(&n, &e).unwrap_err();
        assert!(err.to_string().contains("ghost"), "{err}");
    }

    #[test]
    fn write_then_read() {
        let adj = Adjacency::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let attrs = DMatrix::from_row_slice(3, 2, &[0.1, -2.5e-7, 1.0 / 3.0, 4.0, 5.0, 6.0]);
        let g = AttributedGraph::new(adj, attrs, Some(vec![1, 0, 1])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (n, e) = (dir.path().join("n.csv"), dir.path().join("e.csv"));
        write_csv_dataset(&g, &n, &e).unwrap();
        let back = load_csv_dataset(&n, &e).unwrap();
        assert_eq!(back.adjacency(), g.adjacency());
        assert_eq!(back.attributes(), g.attributes());
        assert_eq!(back.labels(), g.labels());
    }
}
