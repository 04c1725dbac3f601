//! Trajectory CSV: header `t,j0,...,j{J-1}`, one row per time step, radians
//! written with 9 significant digits.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kinematics::JointTrajectory;

/// Formats like C's `%.9g`: 9 significant digits, trailing zeros trimmed,
/// scientific notation outside `1e-5 ..= 1e9`.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn write_trajectory(path: &Path, q: &JointTrajectory) -> Result<()> {
    let mut out = String::from("t");
    for j in 0..q.joints() {
        out.push_str(&format!(",j{j}"));
    }
    out.push('\n');
    for (t, row) in q.view().rows().into_iter().enumerate() {
        out.push_str(&t.to_string());
        for v in row {
            out.push(',');
            out.push_str(&format_sig9(*v));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a trajectory and checks its width against `expected_joints` when given.
pub fn read_trajectory(path: &Path, expected_joints: Option<usize>) -> Result<JointTrajectory> {
    let ctx = || path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                _ => unreachable!(),
            },
            _ => Error::parse(ctx(), e),
        })?;
    let headers = reader.headers().map_err(|e| Error::parse(ctx(), e))?.clone();
    let joints = headers.len().saturating_sub(1);
    let header_ok = headers.get(0) == Some("t")
        && headers.iter().skip(1).enumerate().all(|(j, h)| h == format!("j{j}"));
    if !header_ok || joints == 0 {
        return Err(Error::parse(ctx(), "header must be t,j0,...,j{J-1}"));
    }
    if let Some(expected) = expected_joints {
        if joints != expected {
            return Err(Error::Validation(format!(
                "{}: trajectory has {joints} joint columns, dof is {expected}",
                ctx()
            )));
        }
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(ctx(), e))?;
        let row = record
            .iter()
            .skip(1)
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(ctx(), format!("row {line}: {e}")))?;
        rows.push(row);
    }
    JointTrajectory::from_rows(&rows).map_err(|e| Error::parse(ctx(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_matches_printf_g() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(-0.5), "-0.5");
        assert_eq!(format_sig9(std::f64::consts::PI), "3.14159265");
        assert_eq!(format_sig9(123456789.0), "123456789");
        assert_eq!(format_sig9(1234567890.0), "1.23456789e+09");
        assert_eq!(format_sig9(0.000123456789), "0.000123456789");
        assert_eq!(format_sig9(1.5e-7), "1.5e-07");
    }

    #[test]
    fn csv_round_trip_within_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let q = JointTrajectory::from_rows(&[vec![0.1, -2.0 / 3.0], vec![1e-9, 4.0]]).unwrap();
        write_trajectory(&path, &q).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,j0,j1\n0,0.1,-0.666666667\n"));
        let back = read_trajectory(&path, Some(2)).unwrap();
        for (a, b) in back.view().iter().zip(q.view().iter()) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-9));
        }
        assert!(read_trajectory(&path, Some(7)).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_trajectory(Path::new("/nonexistent/x.csv"), None).unwrap_err();
        assert!(err.is_io(), "{err}");
    }
}
