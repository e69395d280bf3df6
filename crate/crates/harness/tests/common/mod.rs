#![allow(dead_code)]

use timetom_harness::eval::RecordResult;

pub const SET_TYPES: [&str; 5] =
    ["first", "answerability_list", "answerability_binary", "infoaccess_list", "infoaccess_binary"];

/// Which of the five questions are answered correctly, per set, in
/// `SET_TYPES` order.
pub const FIXTURE_PATTERN: [[bool; 5]; 10] = [
    [true, true, true, true, true],
    [true, true, true, true, true],
    [false, true, true, true, true],
    [true, false, true, true, true],
    [true, true, false, true, true],
    [true, true, true, false, true],
    [true, true, true, true, false],
    [true, false, true, false, true],
    [false, false, false, false, false],
    [true, true, true, true, true],
];

// Worked out by hand from the pattern above.
pub const FIXTURE_ALL_ANSWERABILITY: f64 = 60.0; // sets 1, 2, 3, 6, 7, 10
pub const FIXTURE_ALL_INFOACCESS: f64 = 60.0; // sets 1, 2, 3, 4, 5, 10
pub const FIXTURE_ALL_STAR: f64 = 30.0; // sets 1, 2, 10
pub const FIXTURE_OVERALL: f64 = 76.0; // 38 of 50
/// Answerability yes/no: gold "yes" in odd sets, wrong in sets 5 and 9.
/// yes: tp 3, support 5, predicted 3, F1 0.75; no: tp 5, support 5,
/// predicted 7, F1 10/12. Weighted: 0.791666...
pub const FIXTURE_ANSWERABILITY_BINARY_F1: f64 = 79.17;

pub fn fixture_results() -> Vec<RecordResult> {
    let mut out = Vec::new();
    for (s, pattern) in FIXTURE_PATTERN.iter().enumerate() {
        for (qtype, &correct) in SET_TYPES.iter().zip(pattern) {
            let binary = qtype.ends_with("_binary");
            let gold = match (binary, s % 2 == 0) {
                (true, true) => "yes",
                (true, false) => "no",
                (false, _) => "gold",
            };
            let predicted = match (binary, correct) {
                (true, false) => {
                    if gold == "yes" {
                        "no"
                    } else {
                        "yes"
                    }
                }
                (false, false) => "other",
                _ => gold,
            };
            out.push(RecordResult {
                id: format!("s{}:{qtype}", s + 1),
                qtype: qtype.to_string(),
                belief: (*qtype == "first").then(|| "false".to_string()),
                set_id: Some(format!("s{}", s + 1)),
                gold: gold.to_string(),
                reply: predicted.to_string(),
                predicted: Some(predicted.to_string()),
                correct,
                calls: 0,
                error: None,
            });
        }
    }
    out
}
