//! Pajek `.net` and `.clu` text formats.

use thiserror::Error;

use super::WeightedNetwork;

#[derive(Debug, Error)]
pub enum PajekError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Network(#[from] super::NetworkError),
}

fn syntax(line: usize, message: impl Into<String>) -> PajekError {
    PajekError::Syntax {
        line,
        message: message.into(),
    }
}

/// Writes `*Vertices N` with 1-based quoted labels, then `*Edges` as `i j w`.
///
/// Labels cannot carry a double quote in Pajek; any are replaced by `'`.
pub fn export_pajek(net: &WeightedNetwork) -> String {
    let mut out = format!("*Vertices {}\n", net.n_nodes());
    if net.n_nodes() == 0 {
        return out;
    }
    for (i, label) in net.nodes().iter().enumerate() {
        out.push_str(&format!("{} \"{}\"\n", i + 1, label.replace('"', "'")));
    }
    out.push_str("*Edges\n");
    for e in net.edges() {
        out.push_str(&format!("{} {} {}\n", e.source + 1, e.target + 1, e.weight));
    }
    out
}

/// Partition as a Pajek `.clu` file (1-based cluster numbers), or `None`
/// when the network has no partition. The modularity, when known, is
/// written as a `%` comment line.
pub fn export_clu(net: &WeightedNetwork) -> Option<String> {
    let partition = net.partition()?;
    let mut out = String::new();
    if let Some(q) = net.modularity_q() {
        out.push_str(&format!("% modularity Q = {q}\n"));
    }
    out.push_str(&format!("*Vertices {}\n", partition.len()));
    for c in partition {
        out.push_str(&format!("{}\n", c + 1));
    }
    Some(out)
}

/// Reads the subset of Pajek written by [`export_pajek`]: `*Vertices`, then
/// `*Edges` or `*Arcs` lines. Missing weights default to 1; `%` lines are
/// comments.
pub fn import_pajek(text: &str) -> Result<WeightedNetwork, PajekError> {
    let mut n: Option<usize> = None;
    let mut labels: Vec<String> = Vec::new();
    let mut edges = Vec::new();
    let mut in_edges = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('*') {
            let mut words = rest.split_whitespace();
            let kind = words.next().unwrap_or("").to_ascii_lowercase();
            match kind.as_str() {
                "vertices" => {
                    let count: usize = words
                        .next()
                        .and_then(|w| w.parse().ok())
                        .ok_or_else(|| syntax(line_no, "bad *Vertices count"))?;
                    n = Some(count);
                    labels = (1..=count).map(|i| i.to_string()).collect();
                    in_edges = false;
                }
                "edges" | "arcs" => in_edges = true,
                other => return Err(syntax(line_no, format!("unsupported section *{other}"))),
            }
            continue;
        }
        let count = n.ok_or_else(|| syntax(line_no, "data before *Vertices"))?;
        if in_edges {
            let mut parts = line.split_whitespace();
            let mut idx = || -> Result<usize, PajekError> {
                let v: usize = parts
                    .next()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| syntax(line_no, "bad edge endpoint"))?;
                if v == 0 || v > count {
                    return Err(syntax(line_no, format!("vertex {v} out of range")));
                }
                Ok(v - 1)
            };
            let a = idx()?;
            let b = idx()?;
            let w = match parts.next() {
                Some(w) => w.parse().map_err(|_| syntax(line_no, "bad edge weight"))?,
                None => 1.0,
            };
            edges.push((a, b, w));
        } else {
            let (id, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let id: usize = id.parse().map_err(|_| syntax(line_no, "bad vertex id"))?;
            if id == 0 || id > count {
                return Err(syntax(line_no, format!("vertex {id} out of range")));
            }
            let rest = rest.trim();
            let label = match rest.strip_prefix('"') {
                Some(r) => r.split('"').next().unwrap_or(""),
                None => rest.split_whitespace().next().unwrap_or(""),
            };
            labels[id - 1] = label.to_string();
        }
    }
    Ok(WeightedNetwork::new(labels, edges)?)
}
