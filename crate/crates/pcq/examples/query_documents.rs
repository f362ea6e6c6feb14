//! The document corpus and its three query types: RETRIEVAL, COUNT, and
//! AGGREGATION, plus the text form the CLI accepts.
//!
//! ```bash
//! cargo run -p pcq --example query_documents
//! ```

use pcq::query::{
    agg_avg, agg_sum, count_query, execute, parse_query, retrieval, QueryAnswer, QueryCondition,
    QueryOp,
};
use pcq::store::{
    synthetic_timestamp, FrameCorpus, FrameDocument, ObjectEntry, Position, DEFAULT_VEHICLE_ID,
};

fn doc(i: usize, cars: u64, pedestrians: u64) -> FrameDocument {
    let entry = |class: &str, count: u64| ObjectEntry {
        class: class.into(),
        count,
        position: (0..count)
            .map(|k| Position {
                x: 3.0 * k as f64,
                y: 2.0 * k as f64,
            })
            .collect(),
    };
    let mut objects = Vec::new();
    if cars > 0 {
        objects.push(entry("car", cars));
    }
    if pedestrians > 0 {
        objects.push(entry("pedestrian", pedestrians));
    }
    FrameDocument {
        frame_id: format!("frame_{i:06}"),
        timestamp: synthetic_timestamp(i),
        vehicle_id: DEFAULT_VEHICLE_ID.into(),
        objects,
    }
}

fn main() {
    let corpus = FrameCorpus::new(vec![
        doc(0, 1, 0),
        doc(1, 3, 2),
        doc(2, 5, 0),
        doc(3, 0, 4),
        doc(4, 7, 1),
    ]);
    println!("first document as stored on disk:");
    println!("  {}", serde_json::to_string(&corpus[1]).unwrap());

    let ge = |class: &str, count| QueryCondition {
        class: class.into(),
        op: QueryOp::Ge,
        count,
    };
    let eq = |class: &str, count| QueryCondition {
        class: class.into(),
        op: QueryOp::Eq,
        count,
    };

    let hits = retrieval(&corpus, &[ge("car", 3)], None);
    println!("\nRETRIEVAL car>=3 -> frames {hits:?}");
    let hits = retrieval(&corpus, &[ge("car", 3), eq("pedestrian", 0)], None);
    println!("RETRIEVAL car>=3 AND pedestrian=0 -> frames {hits:?}");

    println!(
        "COUNT car>=3 -> {}",
        count_query(&corpus, "car", QueryOp::Ge, 3, None)
    );
    println!("AGG sum car -> {}", agg_sum(&corpus, "car", None));
    println!(
        "AGG avg car -> {:.2}",
        agg_avg(&corpus, "car", None).unwrap()
    );
    println!(
        "AGG sum car over frames [1, 4) -> {}",
        agg_sum(&corpus, "car", Some((1, 4)))
    );

    // The text grammar the CLI uses.
    for text in [
        "retrieve car>=3 pedestrian=0",
        "count pedestrian<=1",
        "agg avg pedestrian",
    ] {
        let spec = parse_query(text, None).unwrap();
        let answer = execute(&corpus, &spec).unwrap();
        let shown = match answer {
            QueryAnswer::Frames(f) => format!("{f:?}"),
            QueryAnswer::Count(n) => n.to_string(),
            QueryAnswer::Sum(s) => s.to_string(),
            QueryAnswer::Avg(a) => format!("{a:.2}"),
        };
        println!("`{text}` -> {shown}");
    }
}
