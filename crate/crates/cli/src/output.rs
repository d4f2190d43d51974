//! Probe time series as CSV.

use std::io::Write;

/// One sample: time, numerical pressure and, where defined, the reference.
pub type ProbeRow = (f64, f64, Option<f64>);

/// Columns `t,p_num,p_ana,err` with shortest round-trip floats. Rows without
/// a reference leave the last two columns empty.
pub fn write_probe_csv<W: Write>(out: W, rows: &[ProbeRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "p_num", "p_ana", "err"])?;
    for &(t, p, ana) in rows {
        let (ana, err) = match ana {
            Some(a) => (format!("{a:?}"), format!("{:?}", p - a)),
            None => (String::new(), String::new()),
        };
        w.write_record([format!("{t:?}"), format!("{p:?}"), ana, err])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows() {
        let mut buf = Vec::new();
        write_probe_csv(&mut buf, &[(0.0, 1.0, None), (0.5, 2.0, Some(1.5))]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,p_num,p_ana,err\n0.0,1.0,,\n0.5,2.0,1.5,0.5\n"
        );
        let mut buf = Vec::new();
        write_probe_csv(&mut buf, &[(0.1, 0.1 + 0.2, None)]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,p_num,p_ana,err\n0.1,0.30000000000000004,,\n"
        );
    }
}
