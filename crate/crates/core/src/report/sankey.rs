use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use petgraph::algo::is_cyclic_directed;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::lp::{AttributeKey, AttributeSolution};
use crate::smiles::parse_molecule;
use crate::valuechain::{Diagnostic, EdgeKind, NodeId, Role, ValueChainGraph};

pub const FOSSIL_GRAY: &str = "#9e9e9e";
pub const BIOGENIC_GREEN: &str = "#1b5e20";
pub const NON_CARBON_YELLOW: &str = "#fff3c4";
pub const MIX_BLUE: &str = "#0d47a1";
pub const PRODUCTION_BLUE: &str = "#90caf9";

const GRAY_RGB: [u8; 3] = [0x9e, 0x9e, 0x9e];
const GREEN_RGB: [u8; 3] = [0x1b, 0x5e, 0x20];

/// Linear RGB ramp from gray (share 0) to dark green (share 1).
pub fn biogenic_color(share: f64) -> String {
    let t = if share.is_nan() { 0.0 } else { share.clamp(0.0, 1.0) };
    let c: Vec<u8> = GRAY_RGB
        .iter()
        .zip(GREEN_RGB)
        .map(|(&g, b)| (f64::from(g) + (f64::from(b) - f64::from(g)) * t).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SankeyNode {
    pub id: String,
    pub label: String,
    pub kind: &'static str,
    pub color: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SankeyLink {
    pub source: usize,
    pub target: usize,
    pub material: String,
    pub smiles: String,
    pub width: f64,
    pub color: String,
    /// Share of the traced attribute; absent for non-carbon links.
    pub share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SankeyDocument {
    pub attribute: String,
    pub nodes: Vec<SankeyNode>,
    pub links: Vec<SankeyLink>,
}

/// Node order: topological when the graph is acyclic, otherwise by id.
fn node_order(graph: &ValueChainGraph) -> Vec<NodeId> {
    let ids: BTreeSet<NodeId> = graph
        .mix_nodes()
        .iter()
        .cloned()
        .map(NodeId::Mix)
        .chain(graph.production_nodes().cloned().map(NodeId::Production))
        .collect();
    let mut dg: DiGraph<(), ()> = DiGraph::new();
    let index: BTreeMap<&NodeId, _> = ids.iter().map(|id| (id, dg.add_node(()))).collect();
    for e in graph.edges() {
        if let (Some(&a), Some(&b)) = (index.get(&e.from), index.get(&e.to)) {
            dg.add_edge(a, b, ());
        }
    }
    if is_cyclic_directed(&dg) {
        return ids.into_iter().collect();
    }
    // Kahn's algorithm, smallest id first among ready nodes
    let mut indegree: BTreeMap<&NodeId, usize> = ids.iter().map(|id| (id, 0)).collect();
    let mut succ: BTreeMap<&NodeId, BTreeSet<&NodeId>> = BTreeMap::new();
    for e in graph.edges() {
        if ids.contains(&e.from) && ids.contains(&e.to) && succ.entry(&e.from).or_default().insert(&e.to) {
            *indegree.get_mut(&e.to).expect("known node") += 1;
        }
    }
    let mut ready: BTreeSet<&NodeId> = indegree.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
    let mut out = Vec::with_capacity(ids.len());
    while let Some(n) = ready.pop_first() {
        out.push(n.clone());
        for m in succ.get(n).into_iter().flatten() {
            let d = indegree.get_mut(m).expect("known node");
            *d -= 1;
            if *d == 0 {
                ready.insert(m);
            }
        }
    }
    out
}

fn has_element(smiles: &str, element: &str) -> bool {
    parse_molecule(smiles).map(|m| m.contains(element)).unwrap_or(false)
}

/// One link per (edge, substance). Carbon links are colored by the traced
/// attribute's share; a missing share falls back to gray with a warning.
pub fn emit_sankey(
    graph: &ValueChainGraph,
    sol: &AttributeSolution,
    attribute: &str,
    element: &str,
) -> (SankeyDocument, Vec<Diagnostic>) {
    let order = node_order(graph);
    let position: BTreeMap<&NodeId, usize> = order.iter().enumerate().map(|(i, n)| (n, i)).collect();
    let nodes = order
        .iter()
        .map(|n| match n {
            NodeId::Mix(d) => SankeyNode {
                id: n.to_string(),
                label: graph.label(&d.product).to_string(),
                kind: "mix",
                color: MIX_BLUE,
            },
            NodeId::Production(t) => SankeyNode {
                id: n.to_string(),
                label: graph.label(&t.main_product).to_string(),
                kind: "production",
                color: PRODUCTION_BLUE,
            },
        })
        .collect();

    let mut edges: Vec<_> = graph.edges().iter().collect();
    edges.sort_by(|a, b| {
        (position[&a.from], position[&a.to], &a.material).cmp(&(position[&b.from], position[&b.to], &b.material))
    });

    let mut warnings = Vec::new();
    let mut links = Vec::new();
    for edge in edges {
        let (bill_node, role) = match (&edge.kind, &edge.from, &edge.to) {
            (EdgeKind::Alpha, _, NodeId::Production(t)) => (t, Role::Reactant),
            (EdgeKind::Mu, NodeId::Production(t), _) => (t, Role::Product),
            _ => continue,
        };
        let substances: Vec<(String, f64)> = graph
            .bill(bill_node)
            .map(|b| b.substances_of(role, &edge.material).map(|s| (s.smiles.clone(), s.lambda)).collect())
            .unwrap_or_default();
        let substances = if substances.is_empty() { vec![(String::new(), 1.0)] } else { substances };
        for (smiles, lambda) in substances {
            let (color, share) = if !smiles.is_empty() && has_element(&smiles, element) {
                let key = match &edge.from {
                    NodeId::Mix(d) => AttributeKey::mix(d.clone(), &smiles, element),
                    NodeId::Production(t) => AttributeKey::production(t.clone(), &edge.material, &smiles, element),
                };
                match sol.share(&key, attribute) {
                    Some(v) => (biogenic_color(v), Some(v)),
                    None => {
                        warnings.push(Diagnostic::warning("missing-beta", &key, "no solved share; drawn as fossil"));
                        (FOSSIL_GRAY.to_string(), None)
                    }
                }
            } else {
                (NON_CARBON_YELLOW.to_string(), None)
            };
            links.push(SankeyLink {
                source: position[&edge.from],
                target: position[&edge.to],
                material: edge.material.clone(),
                smiles,
                width: edge.weight * lambda,
                color,
                share,
            });
        }
    }
    (SankeyDocument { attribute: attribute.to_string(), nodes, links }, warnings)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl SankeyDocument {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("sankey document serializes");
        s.push('\n');
        s
    }

    /// Column index per node: longest path from a source, cycles cut at revisits.
    fn columns(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let mut col = vec![0usize; n];
        for _ in 0..n {
            let mut changed = false;
            for l in &self.links {
                if l.source < l.target && col[l.target] < col[l.source] + 1 {
                    col[l.target] = col[l.source] + 1;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        col
    }

    /// Self-contained static page: an SVG drawing plus the JSON document.
    pub fn to_html(&self, title: &str) -> String {
        let col = self.columns();
        let (col_w, row_h, pad) = (220.0, 70.0, 40.0);
        let mut rows: BTreeMap<usize, usize> = BTreeMap::new();
        let pos: Vec<(f64, f64)> = col
            .iter()
            .map(|c| {
                let r = rows.entry(*c).or_insert(0);
                *r += 1;
                (pad + *c as f64 * col_w, pad + (*r - 1) as f64 * row_h)
            })
            .collect();
        let width = pad * 2.0 + (col.iter().max().copied().unwrap_or(0) as f64 + 1.0) * col_w;
        let height = pad * 2.0 + rows.values().max().copied().unwrap_or(1) as f64 * row_h;
        let max_w = self.links.iter().map(|l| l.width).fold(0.0f64, f64::max);

        let mut svg = String::new();
        let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">"#);
        for l in &self.links {
            let (x1, y1) = pos[l.source];
            let (x2, y2) = pos[l.target];
            let stroke = if max_w > 0.0 { 1.0 + 11.0 * l.width / max_w } else { 1.0 };
            let (sx, tx) = (x1 + 14.0, x2);
            let mid = (sx + tx) / 2.0;
            let _ = writeln!(
                svg,
                r#"<path d="M{sx:.1},{y1:.1} C{mid:.1},{y1:.1} {mid:.1},{y2:.1} {tx:.1},{y2:.1}" stroke="{}" stroke-width="{stroke:.2}" fill="none" opacity="0.8"><title>{} {}</title></path>"#,
                l.color,
                escape(&l.material),
                escape(&l.smiles)
            );
        }
        for (node, (x, y)) in self.nodes.iter().zip(&pos) {
            let _ = writeln!(
                svg,
                r#"<rect x="{x:.1}" y="{:.1}" width="14" height="30" fill="{}"><title>{}</title></rect><text x="{:.1}" y="{:.1}" font-size="11" font-family="sans-serif">{}</text>"#,
                y - 15.0,
                node.color,
                escape(&node.id),
                x + 18.0,
                y + 4.0,
                escape(&node.label)
            );
        }
        svg.push_str("</svg>\n");

        let json = serde_json::to_string(self).expect("sankey document serializes").replace("</", "<\\/");
        format!(
            "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n</head>\n<body>\n<h1>{}</h1>\n{svg}<script type=\"application/json\" id=\"sankey-data\">{json}</script>\n</body>\n</html>\n",
            escape(title),
            escape(title)
        )
    }
}
