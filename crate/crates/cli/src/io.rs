//! File ingestion and output for the command line.

use parapot::heat::SampledSolution;
use parapot::{DiscreteMeasure, GridFunction, SpaceTimePoint};
use serde::de::DeserializeOwned;
use std::fmt;
use std::path::{Path, PathBuf};

/// Command failure, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// A check ran and failed.
    Check(String),
    /// Unreadable or malformed input.
    Parse(String),
    /// Anything that went wrong after the inputs were accepted.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Check(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Check(m) => write!(f, "check failed: {m}"),
            CliError::Parse(m) => write!(f, "input error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<parapot::Error> for CliError {
    fn from(e: parapot::Error) -> Self {
        use parapot::Error::*;
        match e {
            Parse(_) | InvalidParameter(_) | DimensionMismatch { .. } | SignedMeasure(_) | Unstable { .. } => CliError::Parse(e.to_string()),
            SingularPoint | NonFinite(_) | NotConverged { .. } => CliError::Internal(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| CliError::Parse(format!("{origin}: line {} column {}: {e}", e.line(), e.column())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    parse_json(&read_text(path)?, &path.display().to_string())
}

/// JSON given inline or as a path to a file.
pub fn json_arg<T: DeserializeOwned>(arg: &str) -> CliResult<T> {
    let t = arg.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        parse_json(arg, "inline JSON")
    } else {
        read_json(Path::new(arg))
    }
}

pub fn read_measure(path: &Path) -> CliResult<DiscreteMeasure> {
    DiscreteMeasure::from_json_str(&read_text(path)?).map_err(|e| match e {
        parapot::Error::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        other => CliError::Parse(format!("{}: {other}", path.display())),
    })
}

/// Points from a CSV with a header and columns `x1..xN,t`.
pub fn read_points(path: &Path) -> CliResult<Vec<SpaceTimePoint>> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| CliError::Parse(format!("{}: empty point file", path.display())))?;
    let cols = header.split(',').count();
    if cols < 2 {
        return Err(CliError::Parse(format!("{}: point files need columns x1..xN,t", path.display())));
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let row: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Parse(format!("{}: line {}: {e}", path.display(), i + 1)))?;
        if row.len() != cols || row.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Parse(format!("{}: line {}: expected {cols} finite fields", path.display(), i + 1)));
        }
        out.push(SpaceTimePoint::new(row[..cols - 1].to_vec(), row[cols - 1]));
    }
    Ok(out)
}

pub fn read_solution(path: &Path) -> CliResult<SampledSolution> {
    SampledSolution::from_csv(&read_text(path)?).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn read_grid_function(path: &Path) -> CliResult<GridFunction> {
    read_solution(path)?.to_grid().map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// Writes to `path` (relative paths land under `out_dir`) or to stdout.
pub fn emit(path: Option<&Path>, out_dir: Option<&Path>, content: &str) -> CliResult<()> {
    match path {
        None => {
            print_stdout(content);
            Ok(())
        }
        Some(p) => {
            let full = resolve(p, out_dir);
            if let Some(dir) = full.parent() {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir).map_err(|e| CliError::Internal(format!("{}: {e}", dir.display())))?;
                }
            }
            std::fs::write(&full, content).map_err(|e| CliError::Internal(format!("{}: {e}", full.display())))
        }
    }
}

/// Writes to stdout; a reader that closed the pipe early is not an error.
pub fn print_stdout(content: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let newline = if content.ends_with('\n') { "" } else { "\n" };
    let _ = out.write_all(content.as_bytes()).and_then(|_| out.write_all(newline.as_bytes())).and_then(|_| out.flush());
}

pub fn resolve(p: &Path, base: Option<&Path>) -> PathBuf {
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    }
}

/// CSV with columns `x1..xN,t,<value>`.
pub fn points_csv(points: &[SpaceTimePoint], values: &[f64], value: &str) -> String {
    let n = points.first().map_or(0, |p| p.dim());
    let mut head: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    head.push("t".into());
    head.push(value.into());
    let mut out = head.join(",");
    out.push('\n');
    for (p, v) in points.iter().zip(values) {
        let mut row: Vec<String> = p.x.iter().map(|x| x.to_string()).collect();
        row.push(p.t.to_string());
        row.push(v.to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
