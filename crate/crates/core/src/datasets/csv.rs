use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Header row `x0,x1,…` followed by one sample per line.
pub fn to_csv(x: &Tensor) -> Result<String> {
    x.expect_rank2("to_csv")?;
    let (n, d) = (x.rows(), x.cols());
    let mut out = String::with_capacity(n * d * 12);
    let header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..n {
        for (j, v) in x.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v}").expect("writing to a String");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn from_csv(text: &str) -> Result<Tensor> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty CSV".into()))?;
    let d = header.split(',').count();
    let mut data = Vec::new();
    let mut n = 0;
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d {
            return Err(Error::InvalidArgument(format!(
                "CSV row {} has {} fields, header has {d}",
                lineno + 1,
                fields.len()
            )));
        }
        for f in fields {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("CSV row {}: bad number {f:?}", lineno + 1)))?;
            data.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidArgument("CSV has a header but no rows".into()));
    }
    Tensor::matrix(n, d, data)
}

pub fn write_csv(path: &Path, x: &Tensor) -> Result<()> {
    fs::write(path, to_csv(x)?).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Tensor> {
    from_csv(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
