//! JSON-lines detection files: one record per line, blank lines skipped.

use std::io::BufRead;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use sffnet_metrics::{DetectionRecord, RecordKind};

pub fn parse(reader: impl BufRead, kind: RecordKind) -> Result<Vec<DetectionRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DetectionRecord = serde_json::from_str(&line).with_context(|| format!("line {}", i + 1))?;
        rec.check(kind).map_err(|e| anyhow!("line {}: {e}", i + 1))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read(path: &Path, kind: RecordKind) -> Result<Vec<DetectionRecord>> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse(std::io::BufReader::new(f), kind).with_context(|| format!("reading {}", path.display()))
}

/// Parses `start:step:end` (inclusive) or a comma-separated list. Values are
/// rounded to six decimals so `0.5:0.05:0.95` yields exactly `0.75`.
pub fn parse_thresholds(spec: &str) -> Result<Vec<f64>> {
    let round = |v: f64| (v * 1e6).round() / 1e6;
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .with_context(|| format!("bad IoU threshold `{s}`"))
    };
    let out: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, step, end] = parts[..] else {
            return Err(anyhow!("expected start:step:end, got `{spec}`"));
        };
        let (start, step, end) = (parse(start)?, parse(step)?, parse(end)?);
        if step.is_nan() || step <= 0.0 || end < start {
            return Err(anyhow!("empty threshold range `{spec}`"));
        }
        let n = ((end - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| round(start + i as f64 * step)).collect()
    } else {
        spec.split(',').map(|s| parse(s).map(round)).collect::<Result<_>>()?
    };
    if out.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(anyhow!("IoU thresholds must lie in [0, 1]: `{spec}`"));
    }
    Ok(out)
}
