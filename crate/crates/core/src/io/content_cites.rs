//! Citation-network distribution format.
//!
//! `<name>.content`: one node per line, `<id>\t<f_1>\t...\t<f_p>\t<label>`.
//! `<name>.cites`: one citation per line, `<cited_id>\t<citing_id>`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use log::warn;
use nalgebra::DMatrix;

use super::encode_labels;
use crate::error::{Error, Result};
use crate::graph::{Adjacency, AttributedGraph};

#[derive(Debug, Clone)]
pub struct ContentCitesDataset {
    pub graph: AttributedGraph,
    /// Class names indexed by label.
    pub class_names: Vec<String>,
    /// Citation lines whose endpoints are missing from the content file.
    pub skipped_citations: usize,
    /// Citation lines read, including skipped ones.
    pub citation_lines: usize,
}

fn lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r').to_string()))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect())
}

pub fn load_content_cites(content_path: &Path, cites_path: &Path) -> Result<ContentCitesDataset> {
    let content = lines(content_path)?;
    if content.is_empty() {
        return Err(Error::structural(format!(
            "{} contains no nodes",
            content_path.display()
        )));
    }

    let mut width = None;
    let mut ids = Vec::with_capacity(content.len());
    let mut index: HashMap<String, usize> = HashMap::with_capacity(content.len());
    let mut raw_labels = Vec::with_capacity(content.len());
    let mut values = Vec::new();
    for (line_no, line) in &content {
        let cols: Vec<&str> = line.split('\t').collect();
        let expected = *width.get_or_insert(cols.len());
        if cols.len() < 3 {
            return Err(Error::parse(
                content_path,
                *line_no,
                format!(
                    "expected id, features and label, found {} columns",
                    cols.len()
                ),
            ));
        }
        if cols.len() != expected {
            return Err(Error::parse(
                content_path,
                *line_no,
                format!("expected {expected} columns, found {}", cols.len()),
            ));
        }
        let id = cols[0].to_string();
        if index.insert(id.clone(), ids.len()).is_some() {
            return Err(Error::parse(
                content_path,
                *line_no,
                format!("duplicate node id {id:?}"),
            ));
        }
        for raw in &cols[1..cols.len() - 1] {
            let v: f64 = raw.trim().parse().map_err(|_| {
                Error::parse(content_path, *line_no, format!("bad feature value {raw:?}"))
            })?;
            values.push(v);
        }
        raw_labels.push(cols[cols.len() - 1].to_string());
        ids.push(id);
    }
    let n = ids.len();
    let p = width.expect("non-empty content") - 2;
    let attributes = DMatrix::from_row_slice(n, p, &values);
    let (labels, class_names) = encode_labels(&raw_labels, false);

    let cites = lines(cites_path)?;
    let mut edges = Vec::with_capacity(cites.len());
    let mut skipped = 0;
    for (line_no, line) in &cites {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 2 {
            return Err(Error::parse(
                cites_path,
                *line_no,
                format!("expected 2 columns, found {}", cols.len()),
            ));
        }
        match (index.get(cols[0]), index.get(cols[1])) {
            (Some(&u), Some(&v)) => edges.push((u, v, 1.0)),
            _ => skipped += 1,
        }
    }
    if skipped > 0 {
        warn!(
            "{}: skipped {skipped} citations with unknown endpoints",
            cites_path.display()
        );
    }

    let adjacency = Adjacency::from_edges(n, edges)?;
    let graph = AttributedGraph::new(adjacency, attributes, Some(labels))?.with_node_ids(ids)?;
    Ok(ContentCitesDataset {
        graph,
        class_names,
        skipped_citations: skipped,
        citation_lines: cites.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.join(name);
        fs::File::create(&path)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        path
    }

    #[test]
    fn tiny_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let content = write(
            dir.path(),
            "t.content",
            "31336\t0\t1\t0\tNeural_Networks\n1061127\t1\t0\t1\tRule_Learning\n1106406\t0\t0\t1\tNeural_Networks\n",
        );
        let cites = write(dir.path(), "t.cites", "31336\t1106406\n");
        let ds = load_content_cites(&content, &cites).unwrap();
        let g = &ds.graph;
        assert_eq!(g.n_nodes(), 3);
        assert_eq!(g.adjacency().n_edges(), 1);
        assert_eq!(g.adjacency().to_dense()[(2, 0)], 1.0);
        assert_eq!(
            g.attributes(),
            &DMatrix::from_row_slice(3, 3, &[0., 1., 0., 1., 0., 1., 0., 0., 1.])
        );
        assert_eq!(g.labels().unwrap(), &[0, 1, 0]);
        assert_eq!(ds.class_names, vec!["Neural_Networks", "Rule_Learning"]);
        assert_eq!(g.node_ids().unwrap()[1], "1061127");
        assert_eq!(ds.skipped_citations, 0);
    }

    #[test]
    fn unknown_citations_are_counted_and_duplicates_collapse() {
        let dir = tempfile::tempdir().unwrap();
        let content = write(dir.path(), "c", "a\t1\tx\nb\t0\ty\nc\t1\tx\n");
        let cites = write(dir.path(), "e", "a\tb\nb\ta\nb\tb\nzz\ta\nc\tqq\n");
        let ds = load_content_cites(&content, &cites).unwrap();
        assert_eq!(ds.skipped_citations, 2);
        assert_eq!(ds.citation_lines, 5);
        assert_eq!(ds.graph.adjacency().n_edges(), 1);
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let content = write(dir.path(), "c", "a\t1\t0\tx\n\nb\t0\ty\n");
        let cites = write(dir.path(), "e", "");
        match load_content_cites(&content, &cites) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }

        let content = write(dir.path(), "c2", "a\t1\tx\nb\tzero\ty\n");
        assert!(matches!(
            load_content_cites(&content, &cites),
            Err(Error::Parse { line: 2, .. })
        ));

        let content = write(dir.path(), "c3", "a\t1\tx\n");
        let cites = write(dir.path(), "e3", "a\n");
        assert!(matches!(
            load_content_cites(&content, &cites),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn empty_content_is_structural() {
        let dir = tempfile::tempdir().unwrap();
        let content = write(dir.path(), "c", "\n");
        let cites = write(dir.path(), "e", "");
        assert!(matches!(
            load_content_cites(&content, &cites),
            Err(Error::Structural(_))
        ));
        let missing = dir.path().join("missing");
        assert!(matches!(
            load_content_cites(&missing, &cites),
            Err(Error::Io { .. })
        ));
    }
}
