//! Line-oriented graph file format.
//!
//! ```text
//! TWNM v1 version=<int>
//! A <id> <name> succ=<n> fail=<n> [active=0] "<description>"
//! P <id> <canonical> members=<api:orig;...> succ=<n> fail=<n> "<description>"
//! M <param-id> <api>:<orig> "<member description>"
//! R <node-id> t=<ts> ok=<0|1> peers=<id;...|->
//! E <src> <dst> kind=<S|B> wstat=<f> wsearch=<f> hits=<n>
//! ```
//!
//! Weights use six fixed decimals. Nodes are written in id order, each
//! followed by its member (`M`) and recent-event (`R`) lines, then all edges
//! in key order. Blank lines and lines starting with `#` are ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{
    ApiNode, Edge, EdgeKind, GraphError, Invocation, InvocationStats, Node, NodeId, ParamMember, ParamNode, Result,
    ToolGraph,
};

const HEADER: &str = "TWNM v1";

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn unquote(s: &str) -> Option<String> {
    let inner = s.strip_prefix('"')?.strip_suffix('"')?;
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next()? {
                'n' => out.push('\n'),
                'r' => out.push('\r'),
                c @ ('"' | '\\') => out.push(c),
                _ => return None,
            },
            '"' => return None,
            c => out.push(c),
        }
    }
    Some(out)
}

pub fn render_graph(g: &ToolGraph) -> String {
    let mut out = format!("{HEADER} version={}\n", g.version());
    for node in g.nodes() {
        match node {
            Node::Api(a) => {
                let _ = write!(out, "A {} {} succ={} fail={}", a.id, a.name, a.stats.n_succ, a.stats.n_fail);
                if !a.active {
                    out.push_str(" active=0");
                }
                let _ = writeln!(out, " {}", quote(&a.description));
            }
            Node::Param(p) => {
                let members: Vec<String> = p.members.iter().map(|m| format!("{}:{}", m.api, m.original)).collect();
                let _ = writeln!(
                    out,
                    "P {} {} members={} succ={} fail={} {}",
                    p.id,
                    p.canonical_name,
                    members.join(";"),
                    p.stats.n_succ,
                    p.stats.n_fail,
                    quote(p.description())
                );
                for m in &p.members {
                    let _ = writeln!(out, "M {} {}:{} {}", p.id, m.api, m.original, quote(&m.description));
                }
            }
        }
        for ev in node.stats().recent() {
            let peers = if ev.peers.is_empty() {
                "-".to_owned()
            } else {
                ev.peers.iter().map(NodeId::as_str).collect::<Vec<_>>().join(";")
            };
            let _ = writeln!(
                out,
                "R {} t={} ok={} peers={}",
                node.id(),
                ev.at,
                u8::from(ev.success),
                peers
            );
        }
    }
    for e in g.edges() {
        let _ = writeln!(
            out,
            "E {} {} kind={} wstat={:.6} wsearch={:.6} hits={}",
            e.src,
            e.dst,
            e.kind.code(),
            e.w_stat,
            e.w_search,
            e.hits
        );
    }
    out
}

pub fn save_graph(g: &ToolGraph, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, render_graph(g))?;
    Ok(())
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<ToolGraph> {
    parse_graph(&std::fs::read_to_string(path)?)
}

struct Line<'a> {
    no: usize,
    head: Vec<&'a str>,
    quoted: Option<String>,
}

impl<'a> Line<'a> {
    fn split(no: usize, raw: &'a str) -> Result<Line<'a>> {
        let (head, quoted) = match raw.find('"') {
            Some(i) => {
                let q = unquote(raw[i..].trim_end()).ok_or_else(|| GraphError::Parse {
                    line: no,
                    msg: "malformed quoted field".into(),
                })?;
                (&raw[..i], Some(q))
            }
            None => (raw, None),
        };
        Ok(Line {
            no,
            head: head.split_whitespace().collect(),
            quoted,
        })
    }

    fn err(&self, msg: impl Into<String>) -> GraphError {
        GraphError::Parse {
            line: self.no,
            msg: msg.into(),
        }
    }

    fn positional(&self, i: usize, what: &str) -> Result<&'a str> {
        self.head
            .get(i)
            .copied()
            .filter(|t| !t.contains('='))
            .ok_or_else(|| self.err(format!("missing {what}")))
    }

    fn keys(&self, from: usize) -> Result<BTreeMap<&'a str, &'a str>> {
        let mut map = BTreeMap::new();
        for tok in self.head.iter().skip(from) {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| self.err(format!("expected key=value, got `{tok}`")))?;
            if map.insert(k, v).is_some() {
                return Err(self.err(format!("duplicate key `{k}`")));
            }
        }
        Ok(map)
    }

    fn num<T: std::str::FromStr>(&self, keys: &BTreeMap<&str, &str>, key: &str) -> Result<T> {
        keys.get(key)
            .ok_or_else(|| self.err(format!("missing `{key}=`")))?
            .parse()
            .map_err(|_| self.err(format!("bad value for `{key}`")))
    }

    fn description(&self) -> Result<String> {
        self.quoted
            .clone()
            .ok_or_else(|| self.err("missing quoted description"))
    }
}

pub fn parse_graph(text: &str) -> Result<ToolGraph> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));

    let (hno, header) = lines.next().ok_or(GraphError::Parse {
        line: 1,
        msg: "missing header".into(),
    })?;
    let version = header
        .strip_prefix(HEADER)
        .and_then(|rest| rest.trim().strip_prefix("version="))
        .and_then(|v| v.parse::<u64>().ok())
        .ok_or_else(|| GraphError::Parse {
            line: hno,
            msg: format!("expected `{HEADER} version=<int>`"),
        })?;

    let mut g = ToolGraph::new();
    // Members declared on P lines, checked against the M lines that follow.
    let mut declared: BTreeMap<NodeId, Vec<(String, String)>> = BTreeMap::new();
    let mut member_lines: BTreeMap<NodeId, Vec<ParamMember>> = BTreeMap::new();

    for (no, raw) in lines {
        let line = Line::split(no, raw)?;
        let tag = line.head.first().copied().unwrap_or("");
        match tag {
            "A" => {
                let id = NodeId::from(line.positional(1, "api id")?);
                let name = line.positional(2, "api name")?.to_owned();
                let keys = line.keys(3)?;
                let stats = InvocationStats {
                    n_succ: line.num(&keys, "succ")?,
                    n_fail: line.num(&keys, "fail")?,
                    ..Default::default()
                };
                let active = match keys.get("active") {
                    None | Some(&"1") => true,
                    Some(&"0") => false,
                    Some(_) => return Err(line.err("active must be 0 or 1")),
                };
                let node = Node::Api(ApiNode {
                    id: id.clone(),
                    name,
                    description: line.description()?,
                    stats,
                    active,
                });
                g.insert_node(node).map_err(|e| line.err(e.to_string()))?;
            }
            "P" => {
                let id = NodeId::from(line.positional(1, "param id")?);
                let canonical = line.positional(2, "canonical name")?.to_owned();
                let keys = line.keys(3)?;
                let members = keys
                    .get("members")
                    .ok_or_else(|| line.err("missing `members=`"))?
                    .split(';')
                    .map(|m| {
                        m.split_once(':')
                            .map(|(a, o)| (a.to_owned(), o.to_owned()))
                            .ok_or_else(|| line.err(format!("bad member `{m}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let stats = InvocationStats {
                    n_succ: line.num(&keys, "succ")?,
                    n_fail: line.num(&keys, "fail")?,
                    ..Default::default()
                };
                line.description()?;
                let node = Node::Param(ParamNode {
                    id: id.clone(),
                    canonical_name: canonical,
                    members: vec![],
                    stats,
                });
                g.insert_node(node).map_err(|e| line.err(e.to_string()))?;
                declared.insert(id, members);
            }
            "M" => {
                let id = NodeId::from(line.positional(1, "param id")?);
                let (api, orig) = line
                    .positional(2, "member")?
                    .split_once(':')
                    .ok_or_else(|| line.err("member must be api:name"))?;
                if !declared.contains_key(&id) {
                    return Err(line.err(format!("member line for undeclared parameter `{id}`")));
                }
                member_lines.entry(id).or_default().push(ParamMember {
                    api: api.into(),
                    original: orig.to_owned(),
                    description: line.description()?,
                });
            }
            "R" => {
                let id = line.positional(1, "node id")?;
                let keys = line.keys(2)?;
                let peers = match keys.get("peers") {
                    None | Some(&"-") => vec![],
                    Some(p) => p.split(';').map(NodeId::from).collect(),
                };
                let success = match keys.get("ok") {
                    Some(&"1") => true,
                    Some(&"0") => false,
                    _ => return Err(line.err("ok must be 0 or 1")),
                };
                let at = line.num(&keys, "t")?;
                let node = g
                    .nodes
                    .get_mut(id)
                    .ok_or_else(|| line.err(format!("event for unknown node `{id}`")))?;
                let stats = match node {
                    Node::Api(a) => &mut a.stats,
                    Node::Param(p) => &mut p.stats,
                };
                if stats.recent().last().is_some_and(|e| e.at > at) {
                    return Err(line.err("events must be in time order"));
                }
                stats.push_event(Invocation { at, peers, success });
            }
            "E" => {
                let src = NodeId::from(line.positional(1, "edge source")?);
                let dst = NodeId::from(line.positional(2, "edge target")?);
                let keys = line.keys(3)?;
                let kind = match keys.get("kind") {
                    Some(&"S") => EdgeKind::Structural,
                    Some(&"B") => EdgeKind::Behavioral,
                    _ => return Err(line.err("kind must be S or B")),
                };
                let edge = Edge {
                    src,
                    dst,
                    kind,
                    w_stat: line.num(&keys, "wstat")?,
                    w_search: line.num(&keys, "wsearch")?,
                    hits: line.num(&keys, "hits")?,
                };
                let key = edge.key();
                if !g.insert_edge(edge).map_err(|e| line.err(e.to_string()))? {
                    return Err(line.err(format!("duplicate edge {} -> {}", key.src, key.dst)));
                }
            }
            other => return Err(line.err(format!("unknown record type `{other}`"))),
        }
    }

    for (id, decl) in declared {
        let members = member_lines.remove(&id).unwrap_or_default();
        let got: Vec<(String, String)> = members
            .iter()
            .map(|m| (m.api.to_string(), m.original.clone()))
            .collect();
        if got != decl {
            return Err(GraphError::Parse {
                line: 0,
                msg: format!("member lines of `{id}` do not match its members= list"),
            });
        }
        if let Some(Node::Param(p)) = g.nodes.get_mut(&id) {
            p.members = members;
        }
    }
    g.set_version(version);
    g.check_invariants()?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, ApiSpec, ParamSpec};
    use crate::similarity::LexicalSimilarity;

    fn sample() -> ToolGraph {
        let specs = vec![
            ApiSpec {
                id: "geo".into(),
                name: "GeoLookup".into(),
                description: "Find \"coordinates\" of a city".into(),
                inputs: vec![ParamSpec::new("city", "city name")],
                outputs: vec![ParamSpec::new("lat", "latitude")],
            },
            ApiSpec {
                id: "wx".into(),
                name: "Weather".into(),
                description: "Weather at a point".into(),
                inputs: vec![ParamSpec::new("lat", "latitude")],
                outputs: vec![],
            },
        ];
        let mut g = build_graph(&specs, &LexicalSimilarity, 0.8).unwrap();
        g.batch(|b| {
            b.record("geo", 10, vec!["param-city".into()], true)?;
            b.record("geo", 20, vec![], false)?;
            b.add_hit("param-city", "geo")?;
            b.set_w_stat("param-city", "geo", 0.5)?;
            b.set_w_search("param-lat", "wx", 0.123457)?;
            b.add_edge("geo", "wx")?;
            b.set_active("wx", false)
        })
        .unwrap();
        g
    }

    #[test]
    fn round_trip_is_exact() {
        let g = sample();
        let text = render_graph(&g);
        let back = parse_graph(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(render_graph(&back), text);
    }

    #[test]
    fn empty_graph_round_trips() {
        let g = ToolGraph::new();
        let text = render_graph(&g);
        assert_eq!(text, "TWNM v1 version=0\n");
        assert_eq!(parse_graph(&text).unwrap(), g);
    }

    #[test]
    fn duplicate_node_reports_line() {
        let text = "TWNM v1 version=1\nA x x succ=0 fail=0 \"d\"\nA x y succ=0 fail=0 \"d\"\n";
        match parse_graph(text) {
            Err(GraphError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_lines_are_rejected() {
        for bad in [
            "nope\n",
            "TWNM v1 version=1\nZ a\n",
            "TWNM v1 version=1\nA x x succ=a fail=0 \"d\"\n",
            "TWNM v1 version=1\nA x x succ=0 fail=0 \"d\"\nE x y kind=S wstat=0 wsearch=0 hits=0\n",
            "TWNM v1 version=1\nA x x succ=0 fail=0 \"unterminated\n",
        ] {
            assert!(matches!(parse_graph(bad), Err(GraphError::Parse { .. })), "{bad}");
        }
    }

    #[test]
    fn save_and_load_through_a_file() {
        let g = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.twnm");
        save_graph(&g, &path).unwrap();
        assert_eq!(load_graph(&path).unwrap(), g);
    }
}
