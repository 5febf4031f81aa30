use std::fmt::{self, Display, Write};

use serde::Serialize;
use serde_json::{json, Value};

use super::{Bundle, NodeRef};

#[derive(Serialize)]
struct NodeView<'a> {
    strand: &'a str,
    index: usize,
}

fn node(n: &NodeRef) -> NodeView<'_> {
    NodeView {
        strand: &n.strand.0,
        index: n.index,
    }
}

/// JSON rendering (`"schema": 1`). Messages are rendered with `Display`;
/// only included nodes of each trace are listed.
pub fn bundle_to_json<M: Display>(b: &Bundle<M>) -> Value {
    let strands: Vec<Value> = b
        .strands
        .values()
        .map(|s| {
            let h = b.height(&s.id);
            let trace: Vec<Value> = s.trace[..h.min(s.trace.len())]
                .iter()
                .map(|d| json!({ "dir": d.dir.to_string(), "msg": d.msg.to_string() }))
                .collect();
            json!({ "id": s.id.0, "kind": s.kind, "label": s.label, "trace": trace })
        })
        .collect();
    let edges = |es: &std::collections::BTreeSet<(NodeRef, NodeRef)>| -> Vec<Value> {
        es.iter().map(|(m, n)| json!([node(m), node(n)])).collect()
    };
    json!({
        "schema": 1,
        "strands": strands,
        "nodes": b.nodes.iter().map(node).collect::<Vec<_>>(),
        "succ_edges": edges(&b.succ_edges),
        "comm_edges": edges(&b.comm_edges),
    })
}

fn dot_id(n: &NodeRef) -> String {
    format!("\"{}#{}\"", escape(&n.strand.0), n.index)
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

struct Dot<'a, M>(&'a Bundle<M>);

impl<M: Display> Display for Dot<'_, M> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0;
        writeln!(f, "digraph bundle {{")?;
        writeln!(f, "  rankdir=TB;")?;
        writeln!(f, "  node [shape=box, fontsize=10];")?;
        for (i, s) in b.strands.values().enumerate() {
            writeln!(f, "  subgraph cluster_{i} {{")?;
            writeln!(f, "    label=\"{} ({:?})\";", escape(&s.label), s.kind)?;
            for n in b.strand_nodes(&s.id) {
                if let Some(d) = b.dmsg(&n) {
                    writeln!(
                        f,
                        "    {} [label=\"{}\"];",
                        dot_id(&n),
                        escape(&d.to_string())
                    )?;
                }
            }
            writeln!(f, "  }}")?;
        }
        for (m, n) in &b.succ_edges {
            writeln!(
                f,
                "  {} -> {} [style=bold, arrowhead=normal, penwidth=2];",
                dot_id(m),
                dot_id(n)
            )?;
        }
        for (m, n) in &b.comm_edges {
            let label = b.msg(m).map(|x| x.to_string()).unwrap_or_default();
            writeln!(
                f,
                "  {} -> {} [label=\"{}\", constraint=false];",
                dot_id(m),
                dot_id(n),
                escape(&label)
            )?;
        }
        writeln!(f, "}}")
    }
}

/// Graphviz rendering: one column per strand with `⇒` drawn vertically and
/// `→` labelled by the message it carries.
pub fn bundle_to_dot<M: Display>(b: &Bundle<M>) -> String {
    let mut s = String::new();
    let _ = write!(s, "{}", Dot(b));
    s
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;

    #[test]
    fn json_shape() {
        let v = bundle_to_json(&first());
        assert_eq!(v["schema"], 1);
        assert_eq!(v["strands"].as_array().unwrap().len(), 2);
        assert_eq!(v["comm_edges"].as_array().unwrap().len(), 2);
        assert_eq!(v["strands"][0]["trace"][0]["dir"], "+");
        assert_eq!(v["strands"][0]["trace"][0]["msg"], "Good luck");
    }

    #[test]
    fn dot_labels_comm_edges() {
        let d = bundle_to_dot(&first());
        assert!(d.contains("\"2#1\" -> \"3#1\" [label=\"Good luck\""));
        assert!(d.contains("\"3#1\" -> \"3#2\" [style=bold"));
    }
}
