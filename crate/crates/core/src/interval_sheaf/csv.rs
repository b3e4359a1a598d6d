//! Trajectory files.
//!
//! ```text
//! # shift=<ϑ> step=<h>
//! t,<label_1>,...,<label_n>
//! 0.0000000000000000e0,...
//! ```
//!
//! The `t` column holds the node times `0, h, …, length`. Numbers are written
//! with 17 significant digits, so a write/read round trip is bit-exact.
//! Auxiliary tags are not part of the file.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::trajectory::Trajectory;
use crate::error::{Error, Result};

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(e: &Trajectory, out: W) -> Result<()> {
    let mut out = out;
    let mut comment = format!("# shift={} step={}", fmt_num(e.shift()), fmt_num(e.step()));
    if let Some(token) = e.token_id() {
        comment.push_str(&format!(" token={token}"));
    }
    writeln!(out, "{comment}")?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(e.labels().iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..e.nodes() {
        let mut row = vec![fmt_num(e.local_time(i))];
        row.extend(e.node(i).iter().map(|&v| fmt_num(v)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(e: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(e, std::io::BufWriter::new(file))
}

pub fn read_csv<R: Read>(input: R) -> Result<Trajectory> {
    let mut input = BufReader::new(input);
    let mut first = String::new();
    input.read_line(&mut first)?;
    let (shift, step, token) = parse_comment(first.trim_end())?;

    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers().map_err(|e| parse_err(2, e))?.clone();
    if header.get(0) != Some("t") {
        return Err(Error::Parse {
            line: 2,
            message: "header must start with `t`".into(),
        });
    }
    let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut values = Vec::new();
    let mut nodes = 0usize;
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 3;
        let rec = rec.map_err(|e| parse_err(line, e))?;
        if rec.len() != labels.len() + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", labels.len() + 1, rec.len()),
            });
        }
        let t = parse_num(line, &rec[0])?;
        if (t - nodes as f64 * step).abs() > 1e-9 * step.max(t.abs()) {
            return Err(Error::Parse {
                line,
                message: format!("time {t} is not node {nodes} of the grid"),
            });
        }
        for field in rec.iter().skip(1) {
            values.push(parse_num(line, field)?);
        }
        nodes += 1;
    }
    match token {
        Some(tok) => {
            if !labels.is_empty() {
                return Err(Error::Parse {
                    line: 2,
                    message: "token trajectories have no channels".into(),
                });
            }
            Trajectory::token(tok, nodes.saturating_sub(1) as f64 * step, step, shift)
        }
        None => Trajectory::new(step, shift, labels, nodes, values),
    }
}

pub fn read_csv_file(path: impl AsRef<Path>) -> Result<Trajectory> {
    read_csv(std::fs::File::open(path)?)
}

fn parse_comment(line: &str) -> Result<(f64, f64, Option<u32>)> {
    let bad = |message: String| Error::Parse { line: 1, message };
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| bad("first line must be `# shift=<ϑ> step=<h>`".into()))?;
    let (mut shift, mut step, mut token) = (None, None, None);
    for part in body.split_whitespace() {
        let (key, val) = part
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key=value, found `{part}`")))?;
        match key {
            "shift" => shift = Some(parse_num(1, val)?),
            "step" => step = Some(parse_num(1, val)?),
            "token" => token = Some(val.parse::<u32>().map_err(|e| bad(e.to_string()))?),
            _ => return Err(bad(format!("unknown key `{key}`"))),
        }
    }
    match (shift, step) {
        (Some(s), Some(h)) => Ok((s, h, token)),
        _ => Err(bad("both shift and step are required".into())),
    }
}

fn parse_num(line: usize, s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse {
        line,
        message: format!("`{s}`: {e}"),
    })
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

fn parse_err(line: usize, e: csv::Error) -> Error {
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval_sheaf::{channel_labels, restrict};

    fn round_trip(e: &Trajectory) -> Trajectory {
        let mut buf = Vec::new();
        write_csv(e, &mut buf).unwrap();
        read_csv(buf.as_slice()).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let e = Trajectory::from_fn(1.0, 0.1, 0.3, channel_labels("x", 2), |t| {
            vec![(1.0 / 3.0) * t.exp(), -t.sin() * 1e-300]
        })
        .unwrap();
        let r = round_trip(&e);
        assert_eq!(r, e);
        for (a, b) in r.values().iter().zip(e.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn restricted_shift_survives() {
        let e = Trajectory::from_fn(1.0, 0.1, 0.0, channel_labels("x", 1), |t| vec![t]).unwrap();
        let r = restrict(&e, 0.5, 0.3).unwrap();
        let back = round_trip(&r);
        assert_eq!(back.shift().to_bits(), r.shift().to_bits());
        assert_eq!(back.abs_time(0), r.abs_time(0));
    }

    #[test]
    fn tokens_round_trip() {
        let e = Trajectory::token(3, 1.0, 0.25, 0.0).unwrap();
        assert_eq!(round_trip(&e), e);
    }

    #[test]
    fn format_is_as_documented() {
        let e = Trajectory::constant(0.5, 0.5, 0.0, vec!["q".into()], &[2.0]).unwrap();
        let mut buf = Vec::new();
        write_csv(&e, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "# shift=0.0000000000000000e0 step=5.0000000000000000e-1");
        assert_eq!(lines[1], "t,q");
        assert_eq!(lines[2], "0.0000000000000000e0,2.0000000000000000e0");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn malformed_files_are_rejected() {
        for text in [
            "t,x\n0,1\n",
            "# shift=0\nt,x\n0,1\n",
            "# shift=0 step=0.5\nx\n0\n",
            "# shift=0 step=0.5\nt,x\n0,abc\n",
            "# shift=0 step=0.5\nt,x\n0,1\n0.7,2\n",
        ] {
            assert!(matches!(read_csv(text.as_bytes()), Err(Error::Parse { .. })), "{text}");
        }
    }
}
