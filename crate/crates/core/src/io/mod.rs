//! Dataset readers, the synthetic block-model generator and result documents.

mod content_cites;
mod csv_dataset;
mod results;
mod sbm;

pub use content_cites::{load_content_cites, ContentCitesDataset};
pub use csv_dataset::{load_csv_dataset, write_csv_dataset};
pub use results::{
    read_results, read_sweep, response_grid, write_filter_response, write_results, write_sweep,
};
pub use sbm::{generate_sbm, SbmParams};

use std::collections::HashMap;

/// Maps class names to `0..K-1` by first appearance. With `keep_numeric`,
/// names that already cover exactly `0..K-1` keep their value.
pub(crate) fn encode_labels(raw: &[String], keep_numeric: bool) -> (Vec<usize>, Vec<String>) {
    if let Some(numeric) = keep_numeric
        .then(|| {
            raw.iter()
                .map(|s| s.parse::<usize>().ok())
                .collect::<Option<Vec<usize>>>()
        })
        .flatten()
    {
        let k = numeric.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; k];
        numeric.iter().for_each(|&l| seen[l] = true);
        if seen.iter().all(|&s| s) {
            let names = (0..k).map(|l| l.to_string()).collect();
            return (numeric, names);
        }
    }
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut names = Vec::new();
    let labels = raw
        .iter()
        .map(|s| {
            *index.entry(s.as_str()).or_insert_with(|| {
                names.push(s.clone());
                names.len() - 1
            })
        })
        .collect();
    (labels, names)
}
