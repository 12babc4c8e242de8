//! Text outputs: trace CSVs, JSON with `%.17g` numbers, atomic file writes.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use ms2gd::format::g17;
use ms2gd::RunTrace;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};

pub const TRACE_HEADER: &str = "epoch,effective_passes,objective,gap,evaluations,seconds";

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = fs::File::create(&tmp).and_then(|mut f| {
        f.write_all(bytes)?;
        f.sync_all()
    });
    match result.and_then(|()| fs::rename(&tmp, path)) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

/// Which pass count goes into the `effective_passes` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassAxis {
    Sequential,
    /// Inner-step evaluations divided by `b`.
    IdealParallel,
}

/// One row per record. `seconds` is left empty unless `timing` is set so
/// reruns are byte-identical.
pub fn trace_csv(trace: &RunTrace, axis: PassAxis, timing: bool) -> String {
    let passes = match axis {
        PassAxis::Sequential => trace.effective_passes(),
        PassAxis::IdealParallel => trace.ideal_parallel_passes(),
    };
    let mut out = String::with_capacity(64 * (trace.records.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for (r, p) in trace.records.iter().zip(passes) {
        let gap = r.gap.map(g17).unwrap_or_default();
        let seconds = if timing { g17(r.seconds) } else { String::new() };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.epoch,
            g17(p),
            g17(r.objective),
            gap,
            r.evaluations,
            seconds
        ));
    }
    out
}

#[derive(Serialize)]
struct JsonRecord {
    epoch: usize,
    effective_passes: f64,
    objective: f64,
    gap: Option<f64>,
    evaluations: u64,
    seconds: Option<f64>,
}

pub fn trace_json(trace: &RunTrace, axis: PassAxis, timing: bool) -> String {
    let passes = match axis {
        PassAxis::Sequential => trace.effective_passes(),
        PassAxis::IdealParallel => trace.ideal_parallel_passes(),
    };
    let records: Vec<JsonRecord> = trace
        .records
        .iter()
        .zip(passes)
        .map(|(r, p)| JsonRecord {
            epoch: r.epoch,
            effective_passes: p,
            objective: r.objective,
            gap: r.gap,
            evaluations: r.evaluations,
            seconds: timing.then_some(r.seconds),
        })
        .collect();
    to_json(&records)
}

/// Pretty JSON whose floats carry 17 significant digits. Non-finite values
/// become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, G17Formatter::default());
    value.serialize(&mut ser).expect("serializing to memory cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

#[derive(Default)]
struct G17Formatter {
    pretty: PrettyFormatter<'static>,
}

impl Formatter for G17Formatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        let text = g17(value);
        // Keep floats recognizable as floats, e.g. `1.0` rather than `1`.
        if text.contains(['.', 'e']) {
            writer.write_all(text.as_bytes())
        } else {
            write!(writer, "{text}.0")
        }
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.pretty.end_object_value(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ms2gd::EpochRecord;

    fn trace() -> RunTrace {
        let record = |epoch, objective, gap, evaluations, inner| EpochRecord {
            epoch,
            objective,
            gap,
            evaluations,
            inner_evaluations: inner,
            inner_steps: inner / 4,
            seconds: 0.5,
        };
        RunTrace {
            n: 10,
            batch: 2,
            records: vec![record(0, 1.0, None, 0, 0), record(1, 0.1, Some(0.05), 18, 8)],
            x_final: vec![0.0],
        }
    }

    #[test]
    fn csv_rows_and_empty_cells() {
        let csv = trace_csv(&trace(), PassAxis::Sequential, false);
        assert_eq!(
            csv,
            format!("{TRACE_HEADER}\n0,0,1,,0,\n1,1.8,0.10000000000000001,0.050000000000000003,18,\n")
        );
        let ideal = trace_csv(&trace(), PassAxis::IdealParallel, true);
        assert!(ideal.ends_with("1,1.3999999999999999,0.10000000000000001,0.050000000000000003,18,0.5\n"));
    }

    #[test]
    fn json_uses_seventeen_digits() {
        let text = to_json(&serde_json::json!({"a": 0.1, "b": 2.0, "c": f64::NAN, "d": 3}));
        assert!(text.contains("\"a\": 0.10000000000000001"));
        assert!(text.contains("\"b\": 2.0"));
        assert!(text.contains("\"c\": null"));
        assert!(text.contains("\"d\": 3"));
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
