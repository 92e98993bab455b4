//! Indented text form of a decision tree:
//!
//! ```text
//! sharer_sim <= 0.0101: Non-shared
//! sharer_sim > 0.0101
//! | sharer_prom <= 1: Non-shared
//! | sharer_prom > 1: Shared
//! ```

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::features::Feature;

use super::tree::{DecisionTree, Node};

pub const SHARED: &str = "Shared";
pub const NON_SHARED: &str = "Non-shared";

fn label_name(label: bool) -> &'static str {
    if label {
        SHARED
    } else {
        NON_SHARED
    }
}

fn parse_label(s: &str, line: usize) -> Result<bool> {
    match s {
        SHARED => Ok(true),
        NON_SHARED => Ok(false),
        other => Err(Error::TreeFormat { line, reason: format!("unknown label {other:?}") }),
    }
}

impl DecisionTree {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match &self.root {
            Node::Leaf(label) => {
                out.push_str(label_name(*label));
                out.push('\n');
            }
            split => write_node(split, 0, &mut out),
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(n, l)| parse_line(l, n + 1))
            .collect::<Result<Vec<_>>>()?;
        if let [only] = lines.as_slice() {
            if let Line::Leaf(label) = only.kind {
                return DecisionTree::from_root(Node::Leaf(label));
            }
        }
        let mut cursor = 0;
        let root = parse_node(&lines, &mut cursor, 0)?;
        if let Some(extra) = lines.get(cursor) {
            return Err(Error::TreeFormat { line: extra.line, reason: "unexpected trailing line".into() });
        }
        DecisionTree::from_root(root)
    }
}

fn write_node(node: &Node, depth: usize, out: &mut String) {
    let Node::Split { feature, threshold, left, right } = node else {
        return;
    };
    for (op, child) in [("<=", left), (">", right)] {
        out.push_str(&"| ".repeat(depth));
        let _ = write!(out, "{} {op} {threshold}", feature.short_name());
        match child.as_ref() {
            Node::Leaf(label) => {
                let _ = writeln!(out, ": {}", label_name(*label));
            }
            inner => {
                out.push('\n');
                write_node(inner, depth + 1, out);
            }
        }
    }
}

#[derive(Debug)]
enum Line {
    Leaf(bool),
    Cond {
        feature: Feature,
        le: bool,
        threshold: f64,
        threshold_text: String,
        label: Option<bool>,
    },
}

#[derive(Debug)]
struct Parsed {
    line: usize,
    depth: usize,
    kind: Line,
}

fn parse_line(raw: &str, line: usize) -> Result<Parsed> {
    let err = |reason: String| Error::TreeFormat { line, reason };
    let mut rest = raw.trim_end();
    let mut depth = 0;
    while let Some(r) = rest.strip_prefix('|') {
        depth += 1;
        rest = r.trim_start();
    }
    let rest = rest.trim();
    let (le, at, width) = if let Some(p) = rest.find("<=") {
        (true, p, 2)
    } else if let Some(p) = rest.find('>') {
        (false, p, 1)
    } else {
        return Ok(Parsed { line, depth, kind: Line::Leaf(parse_label(rest, line)?) });
    };
    let feature: Feature = rest[..at]
        .trim()
        .parse()
        .map_err(|_| err(format!("unknown feature {:?}", rest[..at].trim())))?;
    let tail = &rest[at + width..];
    let (thr, label) = match tail.split_once(':') {
        Some((t, l)) => (t.trim(), Some(parse_label(l.trim(), line)?)),
        None => (tail.trim(), None),
    };
    let threshold: f64 = thr.parse().map_err(|_| err(format!("bad threshold {thr:?}")))?;
    if !threshold.is_finite() {
        return Err(err(format!("non-finite threshold {thr:?}")));
    }
    Ok(Parsed {
        line,
        depth,
        kind: Line::Cond { feature, le, threshold, threshold_text: thr.to_string(), label },
    })
}

fn parse_node(lines: &[Parsed], cursor: &mut usize, depth: usize) -> Result<Node> {
    let (feature, threshold, text, left) = {
        let p = next_at(lines, cursor, depth)?;
        match &p.kind {
            Line::Cond { feature, le: true, threshold, threshold_text, label } => {
                let left = match label {
                    Some(l) => Node::Leaf(*l),
                    None => parse_node(lines, cursor, depth + 1)?,
                };
                (*feature, *threshold, threshold_text.clone(), left)
            }
            _ => {
                return Err(Error::TreeFormat { line: p.line, reason: "expected a `<=` condition".into() });
            }
        }
    };
    let p = next_at(lines, cursor, depth)?;
    let right = match &p.kind {
        Line::Cond { feature: f, le: false, threshold: t, label, .. } if *f == feature && *t == threshold => {
            match label {
                Some(l) => Node::Leaf(*l),
                None => parse_node(lines, cursor, depth + 1)?,
            }
        }
        _ => {
            return Err(Error::TreeFormat {
                line: p.line,
                reason: format!("expected `{} > {text}`", feature.short_name()),
            });
        }
    };
    Ok(Node::Split { feature, threshold, left: Box::new(left), right: Box::new(right) })
}

fn next_at<'a>(lines: &'a [Parsed], cursor: &mut usize, depth: usize) -> Result<&'a Parsed> {
    let p = lines.get(*cursor).ok_or(Error::TreeFormat {
        line: lines.last().map_or(0, |l| l.line),
        reason: "tree ends early".into(),
    })?;
    if p.depth != depth {
        return Err(Error::TreeFormat {
            line: p.line,
            reason: format!("expected depth {depth}, found {}", p.depth),
        });
    }
    *cursor += 1;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::tree::{train_rows, TreeParams};
    use proptest::prelude::*;

    const SMALL: &str = "sharer_sim <= 0.0101: Non-shared\n\
                         sharer_sim > 0.0101\n\
                         | sharer_prom <= 1: Non-shared\n\
                         | sharer_prom > 1: Shared\n";

    #[test]
    fn printing_reproduces_the_input_text() {
        let t = DecisionTree::from_text(SMALL).unwrap();
        assert_eq!(t.to_text(), SMALL);
        assert_eq!(t.depth(), 2);
    }

    #[test]
    fn single_leaf_round_trip() {
        let t = DecisionTree::from_text("Shared\n").unwrap();
        assert_eq!(t.root, Node::Leaf(true));
        assert_eq!(t.to_text(), "Shared\n");
    }

    #[test]
    fn malformed_trees_are_rejected() {
        for bad in [
            "sharer_sim <= 0.1: Shared\n",
            "sharer_sim > 0.1: Shared\nsharer_sim <= 0.1: Shared\n",
            "sharer_sim <= 0.1: Shared\nsharer_prom > 0.1: Shared\n",
            "mystery <= 0.1: Shared\nmystery > 0.1: Shared\n",
            "sharer_sim <= abc: Shared\nsharer_sim > abc: Shared\n",
            "sharer_sim <= 0.1: Maybe\nsharer_sim > 0.1: Shared\n",
            "sharer_sim <= 0.1\nsharer_sim > 0.1: Shared\n",
            "sharer_sim <= 0.1: Shared\nsharer_sim > 0.1: Shared\nShared\n",
            "sharer_sim <= inf: Shared\nsharer_sim > inf: Shared\n",
        ] {
            assert!(DecisionTree::from_text(bad).is_err(), "{bad:?}");
        }
    }

    proptest! {
        #[test]
        fn text_round_trip_preserves_predictions(
            data in proptest::collection::vec((proptest::array::uniform6(0.0f64..10.0), any::<bool>()), 10..80),
            queries in proptest::collection::vec(proptest::array::uniform6(0.0f64..10.0), 20),
        ) {
            let rows: Vec<[f64; 6]> = data.iter().map(|(r, _)| *r).collect();
            let ys: Vec<bool> = data.iter().map(|(_, y)| *y).collect();
            let params = TreeParams { min_leaf: 2, ..TreeParams::default() };
            let t = train_rows(&rows, &ys, &params).unwrap();
            let back = DecisionTree::from_text(&t.to_text()).unwrap();
            prop_assert_eq!(&back, &t);
            for q in rows.iter().chain(&queries) {
                prop_assert_eq!(back.predict_row(q), t.predict_row(q));
            }
        }
    }
}
