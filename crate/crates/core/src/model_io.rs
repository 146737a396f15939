//! Text model format.
//!
//! ```text
//! rboost-model v1
//! algorithm abc-logit
//! classes 3
//! shrinkage 1.0000000000000001e-1
//! features 16
//! iterations 1
//! label A
//! label B
//! label C
//! stage 1 base 2
//! tree 0 3
//! N 4 2.5000000000000000e-1
//! L 1.0000000000000000e0
//! L -1.0000000000000000e0
//! tree 1 1
//! L 0.0000000000000000e0
//! end
//! ```
//!
//! Plain stages use `base none`. Tree nodes are listed in preorder; reals
//! carry 17 significant digits so every `f64` survives a round trip.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::boost::{Algorithm, BoostModel, Stage};
use crate::error::{Error, Result};
use crate::tree::{Node, RegressionTree};

pub const MODEL_HEADER: &str = "rboost-model v1";

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn model_to_string(model: &BoostModel) -> String {
    let mut s = String::new();
    writeln!(s, "{MODEL_HEADER}").unwrap();
    writeln!(s, "algorithm {}", model.algorithm).unwrap();
    writeln!(s, "classes {}", model.n_classes).unwrap();
    writeln!(s, "shrinkage {}", real(model.shrinkage)).unwrap();
    writeln!(s, "features {}", model.n_features).unwrap();
    writeln!(s, "iterations {}", model.stages.len()).unwrap();
    for name in &model.label_names {
        writeln!(s, "label {name}").unwrap();
    }
    for (m, stage) in model.stages.iter().enumerate() {
        match stage.base {
            Some(b) => writeln!(s, "stage {} base {b}", m + 1).unwrap(),
            None => writeln!(s, "stage {} base none", m + 1).unwrap(),
        }
        for (k, tree) in &stage.trees {
            writeln!(s, "tree {k} {}", tree.nodes().len()).unwrap();
            for id in tree.preorder() {
                match tree.nodes()[id] {
                    Node::Split { feature, threshold, .. } => writeln!(s, "N {feature} {}", real(threshold)).unwrap(),
                    Node::Leaf { value } => writeln!(s, "L {}", real(value)).unwrap(),
                }
            }
        }
    }
    writeln!(s, "end").unwrap();
    s
}

pub fn save_model(model: &BoostModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_string(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<BoostModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text)
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    /// Next line and its starting byte offset.
    fn line(&mut self) -> Result<(usize, &'a str)> {
        if self.pos >= self.text.len() {
            return Err(Error::ModelParse {
                offset: self.text.len(),
                message: "unexpected end of file".into(),
            });
        }
        let start = self.pos;
        let rest = &self.text[start..];
        let (line, advance) = match rest.find('\n') {
            Some(i) => (&rest[..i], i + 1),
            None => (rest, rest.len()),
        };
        self.pos += advance;
        Ok((start, line.strip_suffix('\r').unwrap_or(line)))
    }

    /// Next line, which must be `key rest`; returns `(offset, rest)`.
    fn keyed(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (off, line) = self.line()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok((off, rest)),
            _ => Err(err(off, format!("expected `{key} ...`, found `{line}`"))),
        }
    }
}

fn err(offset: usize, message: String) -> Error {
    Error::ModelParse { offset, message }
}

fn number<T: std::str::FromStr>(off: usize, token: &str, what: &str) -> Result<T> {
    token
        .trim()
        .parse()
        .map_err(|_| err(off, format!("bad {what} `{token}`")))
}

fn finite(off: usize, token: &str, what: &str) -> Result<f64> {
    let v: f64 = number(off, token, what)?;
    if !v.is_finite() {
        return Err(err(off, format!("non-finite {what} `{token}`")));
    }
    Ok(v)
}

pub fn parse_model(text: &str) -> Result<BoostModel> {
    let mut cur = Cursor { text, pos: 0 };
    let (_, header) = cur.line()?;
    if header != MODEL_HEADER {
        if header.starts_with("rboost-model") {
            return Err(Error::ModelVersion(header.to_string()));
        }
        return Err(err(0, format!("not an rboost model (header `{header}`)")));
    }
    let (off, algo) = cur.keyed("algorithm")?;
    let algorithm: Algorithm = algo.parse().map_err(|_| err(off, format!("unknown algorithm `{algo}`")))?;
    let (off, v) = cur.keyed("classes")?;
    let n_classes: usize = number(off, v, "class count")?;
    if n_classes < 2 {
        return Err(err(off, format!("need at least 2 classes, got {n_classes}")));
    }
    let (off, v) = cur.keyed("shrinkage")?;
    let shrinkage = finite(off, v, "shrinkage")?;
    let (off, v) = cur.keyed("features")?;
    let n_features: usize = number(off, v, "feature count")?;
    let (off, v) = cur.keyed("iterations")?;
    let n_stages: usize = number(off, v, "iteration count")?;

    let mut label_names = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        let (_, name) = cur.keyed("label")?;
        label_names.push(name.to_string());
    }

    let trees_per_stage = if algorithm.is_abc() { n_classes - 1 } else { n_classes };
    let mut stages = Vec::with_capacity(n_stages.min(1 << 20));
    for m in 1..=n_stages {
        let (off, rest) = cur.keyed("stage")?;
        let mut parts = rest.split(' ');
        let index: usize = number(off, parts.next().unwrap_or(""), "stage number")?;
        if index != m || parts.next() != Some("base") {
            return Err(err(off, format!("expected `stage {m} base ...`, found `stage {rest}`")));
        }
        let base = match parts.next() {
            Some("none") => None,
            Some(b) => Some(number::<usize>(off, b, "base class")?),
            None => return Err(err(off, "missing base class".into())),
        };
        let mut trees = Vec::with_capacity(trees_per_stage);
        for _ in 0..trees_per_stage {
            let (off, rest) = cur.keyed("tree")?;
            let (k, count) = rest
                .split_once(' ')
                .ok_or_else(|| err(off, format!("expected `tree <class> <nodes>`, found `tree {rest}`")))?;
            let class: usize = number(off, k, "class")?;
            let count: usize = number(off, count, "node count")?;
            if count == 0 {
                return Err(err(off, "tree with no nodes".into()));
            }
            let mut nodes = Vec::with_capacity(count.min(1 << 16));
            parse_subtree(&mut cur, &mut nodes, count)?;
            if nodes.len() != count {
                return Err(err(off, format!("tree declares {count} nodes but has {}", nodes.len())));
            }
            let tree = RegressionTree::from_nodes(nodes).map_err(|e| err(off, e.to_string()))?;
            trees.push((class, tree));
        }
        stages.push(Stage { base, trees });
    }
    let (off, line) = cur.line()?;
    if line != "end" {
        return Err(err(off, format!("expected `end`, found `{line}`")));
    }

    let model = BoostModel {
        algorithm,
        n_classes,
        shrinkage,
        n_features,
        label_names,
        stages,
    };
    model.validate().map_err(|e| err(0, e.to_string()))?;
    Ok(model)
}

/// Reads one preorder subtree, returning its root index.
fn parse_subtree(cur: &mut Cursor<'_>, nodes: &mut Vec<Node>, limit: usize) -> Result<usize> {
    let (off, line) = cur.line()?;
    if nodes.len() >= limit {
        return Err(err(off, "tree has more nodes than declared".into()));
    }
    let id = nodes.len();
    let mut parts = line.split(' ');
    match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some("L"), Some(v), None, None) => {
            nodes.push(Node::Leaf {
                value: finite(off, v, "leaf value")?,
            });
        }
        (Some("N"), Some(f), Some(t), None) => {
            let feature: usize = number(off, f, "feature index")?;
            let threshold = finite(off, t, "threshold")?;
            nodes.push(Node::Leaf { value: 0.0 });
            let left = parse_subtree(cur, nodes, limit)?;
            let right = parse_subtree(cur, nodes, limit)?;
            nodes[id] = Node::Split {
                feature,
                threshold,
                left,
                right,
            };
        }
        _ => return Err(err(off, format!("expected a tree node, found `{line}`"))),
    }
    Ok(id)
}
