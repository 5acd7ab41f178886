//! Tables and atomic file output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use xft_core::history::{HistorySet, TransitionClass};

use crate::error::CliError;

/// Round-trip representation: 17 significant digits, `+inf`/`-inf`/`nan`.
pub fn fmt_real(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.16e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, CliError> {
    w.into_inner().map_err(|e| CliError::io("<csv>", e.error()))
}

fn row<I, S>(w: &mut csv::Writer<Vec<u8>>, fields: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(fields).map_err(|e| CliError::io("<csv>", e))
}

pub fn histories_csv(set: &HistorySet) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    row(&mut w, ["phi", "chi", "phi_p", "chi_p", "prob", "q", "delta_eps", "delta_I", "reverse_id"])?;
    for h in &set.histories {
        row(
            &mut w,
            [
                h.initial.0.to_string(),
                h.initial.1.to_string(),
                h.final_.0.to_string(),
                h.final_.1.to_string(),
                fmt_real(h.prob),
                fmt_real(h.q),
                fmt_real(h.delta_eps),
                fmt_real(h.delta_i),
                h.reverse_id.to_string(),
            ],
        )?;
    }
    finish(w)
}

pub fn classes_csv(classes: &[TransitionClass], bin_tol: f64) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    row(&mut w, ["q", "delta_eps", "prob", "reverse_prob", "delta_I_l", "delta_I_u", "bound_width", "members"])?;
    for c in classes {
        let rev = xft_core::history::reverse_class(classes, c.q, c.delta_eps, bin_tol);
        row(
            &mut w,
            [
                fmt_real(c.q),
                fmt_real(c.delta_eps),
                fmt_real(c.prob),
                fmt_real(rev.prob),
                fmt_opt(c.delta_i_l),
                fmt_opt(c.delta_i_u),
                fmt_opt(c.bound_width()),
                c.member_ids.len().to_string(),
            ],
        )?;
    }
    finish(w)
}

/// A generic numeric table with a header row.
pub fn table_csv(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    row(&mut w, header)?;
    for r in rows {
        row(&mut w, r)?;
    }
    finish(w)
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| CliError::io("<json>", e))?;
    out.push(b'\n');
    Ok(out)
}

/// Writes every file via a temporary sibling and rename. Names may contain
/// subdirectories. On failure the files and directories created by this
/// batch are removed.
pub fn write_all(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<PathBuf>, CliError> {
    let mut created_dirs: Vec<PathBuf> = Vec::new();
    let mut written: Vec<PathBuf> = Vec::new();
    let mut targets: Vec<PathBuf> = Vec::new();
    let result = (|| {
        for (name, bytes) in files {
            let target = dir.join(name);
            let parent = target.parent().unwrap_or(dir).to_path_buf();
            make_dirs(&parent, &mut created_dirs)?;
            let file_name = target.file_name().and_then(|n| n.to_str()).unwrap_or("out");
            let tmp = parent.join(format!(".{file_name}.tmp"));
            written.push(tmp.clone());
            fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
            fs::rename(&tmp, &target).map_err(|e| CliError::io(&target, e))?;
            written.push(target.clone());
            targets.push(target);
        }
        Ok(())
    })();
    match result {
        Ok(()) => Ok(targets),
        Err(e) => {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            for d in created_dirs.iter().rev() {
                let _ = fs::remove_dir(d);
            }
            Err(e)
        }
    }
}

fn make_dirs(dir: &Path, created: &mut Vec<PathBuf>) -> Result<(), CliError> {
    if dir.is_dir() {
        return Ok(());
    }
    if let Some(parent) = dir.parent() {
        if !parent.as_os_str().is_empty() {
            make_dirs(parent, created)?;
        }
    }
    fs::create_dir(dir).map_err(|e| CliError::io(dir, e))?;
    created.push(dir.to_path_buf());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_formatting_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-7, 1e-300, 0.0] {
            assert_eq!(fmt_real(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_real(f64::INFINITY), "+inf");
        assert_eq!(fmt_real(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_real(f64::NAN), "nan");
    }

    #[test]
    fn failed_batch_leaves_nothing_behind() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("occupied")).unwrap();
        let files = vec![
            ("run-000/ok.txt".to_string(), b"x".to_vec()),
            ("top.txt".to_string(), b"y".to_vec()),
            ("occupied".to_string(), b"z".to_vec()),
        ];
        assert!(write_all(dir.path(), &files).is_err());
        let left: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(left, vec![std::ffi::OsString::from("occupied")]);
    }

    #[test]
    fn nested_batch_is_written() {
        let dir = tempfile::tempdir().unwrap();
        let files = vec![("a/b/c.txt".to_string(), b"x".to_vec())];
        let out = write_all(&dir.path().join("new"), &files).unwrap();
        assert_eq!(fs::read(&out[0]).unwrap(), b"x");
    }
}
