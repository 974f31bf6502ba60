use std::io::{self, Read, Write};

use dcorkit::sim::{SimReport, TimingRow};

pub const HEADER: [&str; 13] = [
    "model",
    "param",
    "dcor_true",
    "n",
    "reps",
    "estimator",
    "mean",
    "bias",
    "variance",
    "mse",
    "pct_negative",
    "lambda_hat",
    "elapsed_ms",
];

/// One line of the simulation CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub model: String,
    pub param: f64,
    pub dcor_true: f64,
    pub n: usize,
    pub reps: usize,
    pub estimator: String,
    pub mean: f64,
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
    pub pct_negative: Option<f64>,
    pub lambda_hat: Option<f64>,
    pub elapsed_ms: Option<f64>,
}

pub fn rows_from_reports(reports: &[SimReport], timing: bool) -> Vec<CsvRow> {
    let mut out = Vec::new();
    for r in reports {
        let elapsed = timing.then_some(r.elapsed.as_secs_f64() * 1e3);
        for row in &r.rows {
            out.push(CsvRow {
                model: r.model.family().to_string(),
                param: r.model.param(),
                dcor_true: r.dcor_true,
                n: r.n,
                reps: r.reps,
                estimator: row.estimator.name().to_string(),
                mean: row.mean,
                bias: row.bias,
                variance: row.variance,
                mse: row.mse,
                pct_negative: row.pct_negative,
                lambda_hat: row.lambda_hat,
                elapsed_ms: elapsed,
            });
        }
    }
    out
}

// `{}` on f64 prints the shortest string that parses back to the same value
fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn to_io(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

pub fn write_csv(out: &mut dyn Write, rows: &[CsvRow]) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(HEADER).map_err(to_io)?;
    for r in rows {
        w.write_record([
            r.model.clone(),
            r.param.to_string(),
            r.dcor_true.to_string(),
            r.n.to_string(),
            r.reps.to_string(),
            r.estimator.clone(),
            r.mean.to_string(),
            r.bias.to_string(),
            r.variance.to_string(),
            r.mse.to_string(),
            opt(r.pct_negative),
            opt(r.lambda_hat),
            opt(r.elapsed_ms),
        ])
        .map_err(to_io)?;
    }
    w.flush()
}

fn bad(line: usize, msg: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, format!("line {line}: {msg}"))
}

pub fn parse_csv(input: impl Read) -> io::Result<Vec<CsvRow>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rd.headers().map_err(to_io)?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(bad(1, "unexpected header"));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(to_io)?;
        let f = |c: usize| rec[c].parse::<f64>().map_err(|e| bad(line, format!("{}: {e}", HEADER[c])));
        let u = |c: usize| rec[c].parse::<usize>().map_err(|e| bad(line, format!("{}: {e}", HEADER[c])));
        let o = |c: usize| if rec[c].is_empty() { Ok(None) } else { f(c).map(Some) };
        rows.push(CsvRow {
            model: rec[0].to_string(),
            param: f(1)?,
            dcor_true: f(2)?,
            n: u(3)?,
            reps: u(4)?,
            estimator: rec[5].to_string(),
            mean: f(6)?,
            bias: f(7)?,
            variance: f(8)?,
            mse: f(9)?,
            pct_negative: o(10)?,
            lambda_hat: o(11)?,
            elapsed_ms: o(12)?,
        });
    }
    Ok(rows)
}

pub fn write_sweep_csv(out: &mut dyn Write, reports: &[SimReport]) -> io::Result<()> {
    writeln!(out, "model,param,n,estimator,bandwidth,mean_lambda,mse")?;
    for r in reports {
        for s in &r.bandwidth_sweep {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.model.family(),
                r.model.param(),
                r.n,
                s.estimator.name(),
                s.bandwidth,
                s.mean_lambda,
                s.mse
            )?;
        }
    }
    Ok(())
}

pub fn write_bench_csv(out: &mut dyn Write, rows: &[TimingRow], path: &str) -> io::Result<()> {
    writeln!(out, "n,estimator,reps,seconds,path")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{path}", r.n, r.estimator.name(), r.reps, r.seconds)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(lambda: Option<f64>) -> CsvRow {
        CsvRow {
            model: "fgm".into(),
            param: 0.25,
            dcor_true: 0.25 / 10f64.sqrt(),
            n: 100,
            reps: 7,
            estimator: "combo".into(),
            mean: 0.1 + 0.2,
            bias: -1e-17,
            variance: 3.3e-5,
            mse: std::f64::consts::PI * 1e-3,
            pct_negative: Some(100.0 / 3.0),
            lambda_hat: lambda,
            elapsed_ms: None,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let rows = vec![row(Some(0.123456789012345)), row(None)];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        assert!(buf.ends_with(b"\n"));
        assert_eq!(parse_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn header_is_fixed() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "model,param,dcor_true,n,reps,estimator,mean,bias,variance,mse,pct_negative,lambda_hat,elapsed_ms\n"
        );
        assert!(parse_csv("a,b\n".as_bytes()).is_err());
    }
}
