//! Canonical file encoding for graphs and related documents.
//!
//! The graph format is JSON with sorted keys and sorted value arrays:
//!
//! ```text
//! {"nodes": {"<id>": {"<key>": [v, ...]}}, "edges": {"<src>|<tgt>": {...}}}
//! ```
//!
//! The `|` separator in edge keys is reserved and therefore forbidden inside
//! node ids. Because every map in the in-memory representation is ordered,
//! equal graphs encode to identical bytes regardless of construction order.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

/// Encodes a graph into its canonical byte representation.
pub fn encode_graph(g: &Graph) -> Vec<u8> {
    serde_json::to_vec(g).expect("graph serialization cannot fail")
}

/// Decodes a canonical graph document, reporting the parse position on
/// malformed JSON and the offending field on schema violations.
pub fn decode_graph(bytes: &[u8]) -> Result<Graph> {
    // Parse structure first so pure JSON errors carry a position, then let
    // the typed conversion report schema problems by field.
    let value: serde_json::Value = serde_json::from_slice(bytes)
        .map_err(|e| Error::ParseError(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    serde_json::from_value::<Graph>(value).map_err(|e| Error::SchemaError(e.to_string()))
}

/// Decodes an instance file: a flat id-to-id JSON object.
pub fn decode_instance(bytes: &[u8]) -> Result<BTreeMap<NodeId, NodeId>> {
    let raw: BTreeMap<String, String> = serde_json::from_slice(bytes)
        .map_err(|e| Error::ParseError(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    Ok(raw.into_iter().map(|(k, v)| (NodeId::from(k), NodeId::from(v))).collect())
}

pub fn encode_instance(map: &BTreeMap<NodeId, NodeId>) -> Vec<u8> {
    let raw: BTreeMap<String, String> =
        map.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    serde_json::to_vec(&raw).expect("instance serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attr::{AttrSet, AttrValue};

    #[test]
    fn empty_graph_round_trips() {
        let g = Graph::new();
        assert_eq!(decode_graph(&encode_graph(&g)).unwrap(), g);
    }

    #[test]
    fn mixed_attr_graph_round_trips_and_is_canonical() {
        let mut g = Graph::new();
        let mut attrs = AttrSet::new();
        attrs.insert("count", AttrValue::Int(3));
        attrs.insert("name", AttrValue::Str("x".into()));
        attrs.insert("flag", AttrValue::Bool(true));
        g.add_node("b", attrs.clone()).unwrap();
        g.add_node("a", AttrSet::new()).unwrap();
        g.add_node("c", AttrSet::new()).unwrap();
        g.add_edge("a", "b", AttrSet::from_pairs([("w", vec![1i64, 2])])).unwrap();

        let bytes = encode_graph(&g);
        let decoded = decode_graph(&bytes).unwrap();
        assert_eq!(decoded, g);
        // Double encode is byte-identical.
        assert_eq!(encode_graph(&decoded), bytes);
    }

    #[test]
    fn encoding_is_independent_of_construction_order() {
        let mut g1 = Graph::new();
        g1.add_node("a", AttrSet::new()).unwrap();
        g1.add_node("b", AttrSet::new()).unwrap();
        let mut g2 = Graph::new();
        g2.add_node("b", AttrSet::new()).unwrap();
        g2.add_node("a", AttrSet::new()).unwrap();
        assert_eq!(encode_graph(&g1), encode_graph(&g2));
    }

    #[test]
    fn unknown_edge_endpoint_is_a_schema_error() {
        let doc = br#"{"nodes": {"a": {}}, "edges": {"a|b": {}}}"#;
        match decode_graph(doc) {
            Err(Error::SchemaError(msg)) => assert!(msg.contains("a|b")),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_position() {
        let doc = br#"{"nodes": {"#;
        match decode_graph(doc) {
            Err(Error::ParseError(msg)) => assert!(msg.contains("line")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn float_attr_value_is_rejected() {
        let doc = br#"{"nodes": {"a": {"k": [1.5]}}, "edges": {}}"#;
        assert!(decode_graph(doc).is_err());
    }

    #[test]
    fn instance_files_round_trip() {
        let map: BTreeMap<NodeId, NodeId> =
            [(NodeId::from("x"), NodeId::from("a"))].into_iter().collect();
        assert_eq!(decode_instance(&encode_instance(&map)).unwrap(), map);
    }
}
