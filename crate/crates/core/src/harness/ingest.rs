use std::collections::HashMap;
use std::path::Path;

use log::warn;

use super::config::IngestOptions;
use crate::error::{Error, Result};
use crate::netgraph::{read_edge_pairs, AdjacencyGraph, Network};
use crate::semgen::{Dataset, NodeMatrix};

/// Observed data bound to its network, with the original node ids.
#[derive(Debug, Clone)]
pub struct IngestedData {
    pub dataset: Dataset,
    /// Original id of each retained node, in dataset order.
    pub ids: Vec<u64>,
    /// Ids without any edge, removed before building the network.
    pub dropped_ids: Vec<u64>,
}

struct Columns {
    id: usize,
    y: usize,
    z: usize,
    x: Vec<usize>,
    names: Vec<String>,
}

fn resolve_columns(headers: &csv::StringRecord, file: &str) -> Result<Columns> {
    let names: Vec<String> = headers.iter().map(str::to_string).collect();
    let find = |name: &str| {
        names
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::data(file, format!("missing column `{name}`")))
    };
    let (id, y, z) = (find("id")?, find("y")?, find("z")?);
    let mut x = Vec::new();
    while let Some(pos) = names.iter().position(|h| *h == format!("x{}", x.len() + 1)) {
        x.push(pos);
    }
    if x.is_empty() {
        return Err(Error::data(file, "missing covariate column `x1`"));
    }
    let known = 3 + x.len();
    if names.len() != known {
        let extra = names
            .iter()
            .enumerate()
            .find(|(i, _)| ![id, y, z].contains(i) && !x.contains(i))
            .map(|(_, h)| h.clone())
            .unwrap_or_default();
        return Err(Error::data(
            file,
            format!("unexpected column `{extra}` (expected id,y,z,x1..xp)"),
        ));
    }
    Ok(Columns { id, y, z, x, names })
}

/// Reads `id,y,z,x1..xp` rows and an `i,j` edge list keyed by those ids.
///
/// Nodes without edges are dropped (and counted). Then `log1p` is applied
/// to the listed columns and, if requested, covariates are standardized.
pub fn ingest_dataset(
    data_csv: &Path,
    edges_csv: &Path,
    options: &IngestOptions,
) -> Result<IngestedData> {
    let file = data_csv.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(data_csv)
        .map_err(|e| Error::data(&file, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::data(&file, e.to_string()))?
        .clone();
    let cols = resolve_columns(&headers, &file)?;
    let p = cols.x.len();

    for name in &options.log1p {
        if name != "y" && !cols.x.iter().any(|&i| cols.names[i] == *name) {
            return Err(Error::Config(format!(
                "log1p column `{name}` is not y or a covariate"
            )));
        }
    }

    let mut ids = Vec::new();
    let mut y = Vec::new();
    let mut z = Vec::new();
    let mut x = Vec::new();
    let mut index: HashMap<u64, usize> = HashMap::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let rec = record.map_err(|e| Error::data(format!("{file} row {line}"), e.to_string()))?;
        let cell = |col: usize| -> Result<&str> {
            rec.get(col)
                .ok_or_else(|| Error::data(format!("{file} row {line}"), "row is too short"))
        };
        let at = |col: usize| format!("{file} row {line} column `{}`", cols.names[col]);
        let number = |col: usize| -> Result<f64> {
            let v: f64 = cell(col)?.parse().map_err(|_| {
                Error::data(
                    at(col),
                    format!("non-numeric value `{}`", rec.get(col).unwrap_or("")),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::data(at(col), "value is not finite"));
            }
            Ok(v)
        };
        let id: u64 = cell(cols.id)?
            .parse()
            .map_err(|_| Error::data(at(cols.id), "id must be a non-negative integer"))?;
        if index.insert(id, ids.len()).is_some() {
            return Err(Error::data(at(cols.id), format!("duplicate id {id}")));
        }
        let zi = number(cols.z)?;
        if zi != 0.0 && zi != 1.0 {
            return Err(Error::data(
                at(cols.z),
                format!("treatment must be 0 or 1, got {zi}"),
            ));
        }
        ids.push(id);
        y.push(number(cols.y)?);
        z.push(zi);
        for &c in &cols.x {
            x.push(number(c)?);
        }
    }
    if ids.is_empty() {
        return Err(Error::data(&file, "no data rows"));
    }

    let edge_file = edges_csv.display().to_string();
    let pairs = read_edge_pairs(edges_csv)?;
    let mut has_edge = vec![false; ids.len()];
    let mut mapped = Vec::with_capacity(pairs.len());
    for (row, &(i, j)) in pairs.iter().enumerate() {
        let location = format!("{edge_file} row {}", row + 2);
        let lookup = |id: usize| {
            index.get(&(id as u64)).copied().ok_or_else(|| {
                Error::data(&location, format!("node id {id} does not appear in {file}"))
            })
        };
        let (a, b) = (lookup(i)?, lookup(j)?);
        if a == b {
            return Err(Error::data(&location, format!("self-loop at node id {i}")));
        }
        has_edge[a] = true;
        has_edge[b] = true;
        mapped.push((a, b));
    }

    // Keep connected nodes in file order and renumber them densely.
    let mut new_index = vec![usize::MAX; ids.len()];
    let mut kept = 0;
    for (old, &keep) in has_edge.iter().enumerate() {
        if keep {
            new_index[old] = kept;
            kept += 1;
        }
    }
    let dropped_ids: Vec<u64> = ids
        .iter()
        .zip(&has_edge)
        .filter(|(_, &k)| !k)
        .map(|(&id, _)| id)
        .collect();
    if !dropped_ids.is_empty() {
        warn!("dropped {} isolated node(s)", dropped_ids.len());
    }
    if kept < 2 {
        return Err(Error::data(&edge_file, "fewer than two connected nodes"));
    }
    let select = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .zip(&has_edge)
            .filter(|(_, &k)| k)
            .map(|(&a, _)| a)
            .collect()
    };
    let mut y = select(&y);
    let z = select(&z);
    let mut x_rows: Vec<f64> = Vec::with_capacity(kept * p);
    for (old, &keep) in has_edge.iter().enumerate() {
        if keep {
            x_rows.extend_from_slice(&x[old * p..(old + 1) * p]);
        }
    }
    let ids: Vec<u64> = ids
        .iter()
        .zip(&has_edge)
        .filter(|(_, &k)| k)
        .map(|(&id, _)| id)
        .collect();
    let edges: Vec<(usize, usize)> = mapped
        .iter()
        .map(|&(a, b)| (new_index[a], new_index[b]))
        .collect();

    for name in &options.log1p {
        let transform = |v: &mut f64, what: &str| -> Result<()> {
            if *v <= -1.0 {
                return Err(Error::data(
                    &file,
                    format!("log1p of {v} in column `{what}` is undefined"),
                ));
            }
            *v = v.ln_1p();
            Ok(())
        };
        if name == "y" {
            for v in &mut y {
                transform(v, name)?;
            }
        } else {
            let d: usize = name[1..]
                .parse::<usize>()
                .expect("validated covariate name")
                - 1;
            for row in x_rows.chunks_mut(p) {
                transform(&mut row[d], name)?;
            }
        }
    }
    if options.standardize {
        standardize_columns(&mut x_rows, p, &cols, &file)?;
    }

    let graph = AdjacencyGraph::from_edges(kept, &edges)?;
    let x = NodeMatrix::from_row_major(p, x_rows)?;
    let dataset = Dataset::new(Network::new(graph), y, z, x, options.summary)?;
    Ok(IngestedData {
        dataset,
        ids,
        dropped_ids,
    })
}

fn standardize_columns(x: &mut [f64], p: usize, cols: &Columns, file: &str) -> Result<()> {
    let n = (x.len() / p) as f64;
    for d in 0..p {
        let mean = x.iter().skip(d).step_by(p).sum::<f64>() / n;
        let var = x
            .iter()
            .skip(d)
            .step_by(p)
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        if var.is_nan() || var <= 0.0 {
            return Err(Error::data(
                file,
                format!(
                    "column `{}` is constant and cannot be standardized",
                    cols.names[cols.x[d]]
                ),
            ));
        }
        let sd = var.sqrt();
        x.iter_mut()
            .skip(d)
            .step_by(p)
            .for_each(|v| *v = (*v - mean) / sd);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semgen::SummaryKind;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.join(name);
        std::fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn toy_csv_matches_hand_built_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let data = write(
            dir.path(),
            "d.csv",
            "id,y,z,x1,x2\n10,1.5,1,0.1,0.2\n11,2.0,0,0.3,0.4\n12,-1,1,0.5,0.6\n",
        );
        let edges = write(dir.path(), "e.csv", "i,j\n10,11\n11,12\n");
        let got = ingest_dataset(&data, &edges, &IngestOptions::default()).unwrap();
        assert_eq!(got.ids, vec![10, 11, 12]);
        assert!(got.dropped_ids.is_empty());

        let graph = AdjacencyGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let x = NodeMatrix::from_row_major(2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let hand = Dataset::new(
            Network::new(graph),
            vec![1.5, 2.0, -1.0],
            vec![1.0, 0.0, 1.0],
            x,
            SummaryKind::Mean,
        )
        .unwrap();
        let d = &got.dataset;
        assert_eq!(d.y(), hand.y());
        assert_eq!(d.z(), hand.z());
        assert_eq!(d.x(), hand.x());
        assert_eq!(d.v(), hand.v());
        assert_eq!(d.c(), hand.c());
        assert_eq!(d.network().graph(), hand.network().graph());
    }

    #[test]
    fn isolated_node_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let data = write(
            dir.path(),
            "d.csv",
            "id,y,z,x1\n0,1,1,0\n1,2,0,1\n2,3,1,2\n",
        );
        let edges = write(dir.path(), "e.csv", "i,j\n0,2\n");
        let got = ingest_dataset(&data, &edges, &IngestOptions::default()).unwrap();
        assert_eq!(got.dropped_ids, vec![1]);
        assert_eq!(got.ids, vec![0, 2]);
        assert_eq!(got.dataset.y(), &[1.0, 3.0]);
    }

    #[test]
    fn standardization_and_log1p() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from("id,y,z,x1,x2\n");
        for i in 0..30 {
            body.push_str(&format!(
                "{i},{},{},{},{}\n",
                i as f64 * 0.5,
                i % 2,
                i * i,
                (i as f64).sin() * 3.0 + 7.0
            ));
        }
        let data = write(dir.path(), "d.csv", &body);
        let edges: String = std::iter::once("i,j".to_string())
            .chain((0..30).map(|i| format!("{i},{}", (i + 1) % 30)))
            .collect::<Vec<_>>()
            .join("\n");
        let edges = write(dir.path(), "e.csv", &edges);
        let options = IngestOptions {
            log1p: vec!["y".into()],
            standardize: true,
            ..IngestOptions::default()
        };
        let d = ingest_dataset(&data, &edges, &options).unwrap().dataset;
        assert!((d.y()[4] - 2.0f64.ln_1p()).abs() < 1e-15);
        for col in 0..2 {
            let v = d.x().column(col);
            let mean = v.iter().sum::<f64>() / 30.0;
            let sd = (v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 29.0).sqrt();
            assert!(
                mean.abs() < 1e-12 && (sd - 1.0).abs() < 1e-12,
                "{mean} {sd}"
            );
        }
    }

    #[test]
    fn errors_carry_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let edges = write(dir.path(), "e.csv", "i,j\n0,1\n");
        let cases = [
            ("id,y,z\n0,1,1\n1,1,0\n", "x1"),
            ("id,y,x1\n0,1,1\n", "`z`"),
            ("id,y,z,x1\n0,1,1,0\n1,abc,0,1\n", "row 3 column `y`"),
            ("id,y,z,x1\n0,1,2,0\n1,1,0,1\n", "0 or 1"),
            ("id,y,z,x1,w\n0,1,1,0,0\n", "`w`"),
        ];
        for (body, needle) in cases {
            let data = write(dir.path(), "d.csv", body);
            let err = ingest_dataset(&data, &edges, &IngestOptions::default()).unwrap_err();
            assert_eq!(err.exit_code(), 2);
            assert!(err.to_string().contains(needle), "{needle}: {err}");
        }
        let data = write(dir.path(), "d.csv", "id,y,z,x1\n0,1,1,0\n1,1,0,1\n");
        let bad_edges = write(dir.path(), "e2.csv", "i,j\n0,1\n1,7\n");
        let err = ingest_dataset(&data, &bad_edges, &IngestOptions::default()).unwrap_err();
        assert!(
            err.to_string().contains("row 3") && err.to_string().contains("7"),
            "{err}"
        );
    }
}
