//! Deterministic output emission.
//!
//! Every file the tool writes is reproducible byte for byte: floats are
//! printed with 17 significant digits (`{:.16e}`, enough to round-trip any
//! `f64`), JSON objects keep the insertion order chosen by the emitting
//! command, and each file opens with a `#` header block carrying the tool
//! version, the model's content hash, and the fully resolved parameter echo,
//! so the file documents the exact invocation that reproduces it.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::CliError;

/// 17-significant-digit rendering; the unique `f64` round-trip format used
/// for every float the tool emits.
pub fn f17(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.16e}")
    }
}

/// JSON value with caller-controlled key order and [`f17`] floats.
#[derive(Clone, Debug)]
pub enum Json {
    Null,
    Bool(bool),
    UInt(u64),
    Float(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(String, Json)>),
}

impl Json {
    pub fn obj() -> Json {
        Json::Obj(Vec::new())
    }

    /// Append a field (object variant only).
    pub fn push(&mut self, key: &str, value: Json) -> &mut Json {
        match self {
            Json::Obj(fields) => fields.push((key.to_string(), value)),
            _ => unreachable!("push on a non-object"),
        }
        self
    }

    fn write(&self, out: &mut String, indent: usize) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::UInt(n) => {
                let _ = write!(out, "{n}");
            }
            // floats go out as strings: JSON numbers would re-enter shortest
            // round-trip formatting and break the 17-digit contract
            Json::Float(x) => {
                let _ = write!(out, "\"{}\"", f17(*x));
            }
            Json::Str(s) => write_escaped(out, s),
            Json::Arr(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    push_indent(out, indent + 1);
                    item.write(out, indent + 1);
                }
                out.push('\n');
                push_indent(out, indent);
                out.push(']');
            }
            Json::Obj(fields) => {
                if fields.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push('{');
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    push_indent(out, indent + 1);
                    write_escaped(out, k);
                    out.push_str(": ");
                    v.write(out, indent + 1);
                }
                out.push('\n');
                push_indent(out, indent);
                out.push('}');
            }
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out.push('\n');
        out
    }
}

fn push_indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_escaped(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

/// The `#` comment block at the top of every output file.
#[derive(Clone, Debug)]
pub struct Header {
    pub model_hash: String,
    pub model_name: String,
    /// Fully resolved invocation (defaults spelled out), starting with the
    /// verb: re-running `ldp <echo>` reproduces the file byte for byte.
    pub echo: String,
}

impl Header {
    pub fn comment_block(&self) -> String {
        format!(
            "# ldp {}\n# model {} {}\n# command: ldp {}\n",
            env!("CARGO_PKG_VERSION"),
            self.model_hash,
            self.model_name,
            self.echo
        )
    }

    pub fn meta_json(&self) -> Json {
        let mut meta = Json::obj();
        meta.push("tool", Json::Str("ldp".into()))
            .push("version", Json::Str(env!("CARGO_PKG_VERSION").into()))
            .push("model_hash", Json::Str(self.model_hash.clone()))
            .push("model_name", Json::Str(self.model_name.clone()))
            .push("command", Json::Str(format!("ldp {}", self.echo)));
        meta
    }
}

/// Render a CSV document: header comments, column line, rows.
pub fn csv_document(header: &Header, columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.comment_block();
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Render a JSON document with the standard meta block up front.
pub fn json_document(header: &Header, body: Vec<(String, Json)>) -> String {
    let mut doc = Json::obj();
    doc.push("meta", header.meta_json());
    if let Json::Obj(fields) = &mut doc {
        fields.extend(body);
    }
    doc.render()
}

/// Where rendered documents go: files under `--out`, or stdout.
pub struct Sink {
    out_dir: Option<PathBuf>,
    pub written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(out_dir: Option<&Path>) -> Result<Self, CliError> {
        if let Some(dir) = out_dir {
            fs::create_dir_all(dir)
                .map_err(|e| CliError::msg(format!("cannot create {}: {e}", dir.display())))?;
        }
        Ok(Sink {
            out_dir: out_dir.map(Path::to_path_buf),
            written: Vec::new(),
        })
    }


    /// Write `content` as `name` under the out dir, or print it.
    pub fn emit(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        match &self.out_dir {
            Some(dir) => {
                let path = dir.join(name);
                fs::write(&path, content)
                    .map_err(|e| CliError::msg(format!("cannot write {}: {e}", path.display())))?;
                println!("wrote {}", path.display());
                self.written.push(path);
                Ok(())
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(content.as_bytes())
                    .map_err(|e| CliError::msg(format!("stdout: {e}")))?;
                Ok(())
            }
        }
    }

    /// Write raw bytes (snapshots); requires an out dir.
    pub fn emit_bytes(&mut self, name: &str, content: &[u8]) -> Result<(), CliError> {
        match &self.out_dir {
            Some(dir) => {
                let path = dir.join(name);
                fs::write(&path, content)
                    .map_err(|e| CliError::msg(format!("cannot write {}: {e}", path.display())))?;
                println!("wrote {}", path.display());
                self.written.push(path);
                Ok(())
            }
            None => Err(CliError::msg(
                "binary snapshots need --out <dir>".to_string(),
            )),
        }
    }
}

/// Parse `lo:hi:n` into an inclusive linear grid.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::msg(format!(
            "grid {s:?} must be lo:hi:count, e.g. 0.05:0.95:19"
        )));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::msg(format!("bad grid endpoint {:?}", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::msg(format!("bad grid endpoint {:?}", parts[1])))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| CliError::msg(format!("bad grid count {:?}", parts[2])))?;
    if count == 0 || (count > 1 && !(hi > lo)) {
        return Err(CliError::msg(format!(
            "grid {s:?} needs count >= 1 and hi > lo"
        )));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect())
}

/// Parse a comma-separated strictly increasing list of lengths.
pub fn parse_lengths(s: &str) -> Result<Vec<usize>, CliError> {
    let ns: Vec<usize> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| CliError::msg(format!("bad length {p:?} in {s:?}")))
        })
        .collect::<Result<_, _>>()?;
    if ns.is_empty() || ns.windows(2).any(|w| w[0] >= w[1]) || ns[0] == 0 {
        return Err(CliError::msg(format!(
            "lengths {s:?} must be positive and strictly increasing"
        )));
    }
    Ok(ns)
}
