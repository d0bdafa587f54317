//! `procest infer`: streaming mode. Frames arrive as trace-format lines on
//! standard input; one progress report per frame leaves on standard
//! output, flushed per line so downstream pipes see it immediately.

use std::io::{BufRead, Write};

use serde::Deserialize;

use procest::model::{load_model, SavedModel};
use procest::online::OnlineEstimator;
use procest::trace::FeatureFrame;
use procest::{Error, Result};

use crate::args::InferArgs;

#[derive(Deserialize)]
struct FrameLine {
    t: f64,
    x: Vec<f64>,
}

pub fn run(args: InferArgs) -> Result<()> {
    let saved: SavedModel<f64> = load_model(&args.model)?;
    let gmm = if args.equalize_gmm {
        saved.gmm.equalized()
    } else {
        saved.gmm.clone()
    };
    let mut estimator = OnlineEstimator::new(&saved.regressor, &gmm)?;

    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut skip_header = args.header;

    for (idx, line) in stdin.lock().lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::data_at(line_no, format!("stdin: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        if skip_header {
            skip_header = false;
            // The header declares the feature dimension; check it against the model.
            #[derive(Deserialize)]
            struct Header {
                feature_dim: usize,
            }
            let header: Header = serde_json::from_str(&line)
                .map_err(|e| Error::data_at(line_no, format!("bad header: {e}")))?;
            if header.feature_dim != saved.regressor.feature_dim() {
                return Err(Error::data_at(
                    line_no,
                    format!(
                        "header feature_dim {} does not match model ({})",
                        header.feature_dim,
                        saved.regressor.feature_dim()
                    ),
                ));
            }
            continue;
        }
        let frame: FrameLine = serde_json::from_str(&line)
            .map_err(|e| Error::data_at(line_no, format!("malformed frame: {e}")))?;
        let report = estimator.step(&FeatureFrame {
            timestamp: frame.t,
            features: frame.x,
        })?;
        let json = serde_json::to_string(&report)
            .map_err(|e| Error::usage(format!("serialize report: {e}")))?;
        out.write_all(json.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .and_then(|_| out.flush())
            .map_err(|e| Error::usage(format!("stdout: {e}")))?;
    }
    Ok(())
}
