#![no_main]

use fermat::graph::dijkstra;
use fermat::io::{read_graph_json, write_graph_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(graph) = read_graph_json(text) {
        if graph.len() > 1 {
            let _ = dijkstra(&graph, 0, graph.len() - 1);
        }
        let again = read_graph_json(&write_graph_json(&graph)).expect("written graphs parse");
        assert_eq!(again.edge_count(), graph.edge_count());
    }
});
