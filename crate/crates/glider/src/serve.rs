//! Adapter side of the wire protocol, serving an in-process black box.

use std::io::{self, BufRead, Write};

use glider_core::{BlackBox, Matrix};
use serde_json::Value;

use crate::external::{Reply, PROTOCOL_VERSION};

/// Answers requests from `input` until `bye` or end of input. Bad requests
/// get an `error` reply and the loop carries on.
pub fn serve<M: BlackBox + ?Sized, R: BufRead, W: Write>(model: &mut M, input: R, mut output: W) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<Value>(&line) {
            Err(e) => Reply::Error { message: format!("malformed request: {e}") },
            Ok(req) => match req.get("type").and_then(Value::as_str) {
                Some("hello") => match req.get("version").and_then(Value::as_u64) {
                    Some(v) if v == u64::from(PROTOCOL_VERSION) => {
                        Reply::Ready { p: model.arity() as i64, name: model.name().to_string() }
                    }
                    _ => Reply::Error { message: format!("unsupported protocol version, expected {PROTOCOL_VERSION}") },
                },
                Some("predict") => predict(model, &req),
                Some("bye") => return Ok(()),
                _ => Reply::Error { message: "unknown request type".into() },
            },
        };
        serde_json::to_writer(&mut output, &reply)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

fn predict<M: BlackBox + ?Sized>(model: &mut M, req: &Value) -> Reply {
    let Some(id) = req.get("id").and_then(Value::as_u64) else {
        return Reply::Error { message: "predict request needs an integer id".into() };
    };
    let rows: Option<Vec<Vec<f64>>> = req
        .get("inputs")
        .and_then(Value::as_array)
        .map(|rows| rows.iter().map(|r| r.as_array()?.iter().map(Value::as_f64).collect()).collect())
        .and_then(|r: Vec<Option<Vec<f64>>>| r.into_iter().collect());
    let Some(rows) = rows else {
        return Reply::Error { message: format!("request {id}: inputs must be an array of numeric rows") };
    };
    let cols = model.arity();
    if rows.iter().any(|r| r.len() != cols) {
        return Reply::Error { message: format!("every input row must have {cols} values") };
    }
    let mut m = Matrix::zeros(0, cols);
    for r in &rows {
        m.push_row(r);
    }
    match model.predict_batch(&m) {
        Ok(out) => Reply::Outputs { id, outputs: out.into_iter().map(Some).collect() },
        Err(e) => Reply::Error { message: e.to_string() },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use glider_core::FnModel;
    use serde_json::json;

    fn run(requests: &str) -> Vec<Value> {
        let mut model = FnModel::new("sum", 2, |x: &[f64]| x[0] + x[1]);
        let mut out = Vec::new();
        serve(&mut model, requests.as_bytes(), &mut out).unwrap();
        String::from_utf8(out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
    }

    #[test]
    fn answers_handshake_and_predictions() {
        let replies = run(concat!(
            r#"{"type":"hello","version":1}"#,
            "\n",
            r#"{"type":"predict","id":7,"inputs":[[1.0,2.0],[0.5,-0.5]]}"#,
            "\n",
            r#"{"type":"bye"}"#,
            "\n",
            r#"{"type":"predict","id":8,"inputs":[[1.0,2.0]]}"#,
            "\n"
        ));
        assert_eq!(replies.len(), 2);
        assert_eq!(replies[0], json!({"type":"ready","p":2,"name":"sum"}));
        assert_eq!(replies[1], json!({"type":"outputs","id":7,"outputs":[3.0,0.0]}));
    }

    #[test]
    fn recovers_from_bad_requests() {
        let replies = run(concat!(
            "not json\n",
            r#"{"type":"predict","id":1,"inputs":[[1.0]]}"#,
            "\n",
            r#"{"type":"hello","version":2}"#,
            "\n",
            r#"{"type":"predict","id":2,"inputs":[[1.0,1.0]]}"#,
            "\n"
        ));
        assert_eq!(replies.len(), 4);
        assert!(replies[..3].iter().all(|r| r["type"] == "error"));
        assert_eq!(replies[3]["outputs"], json!([2.0]));
    }
}
