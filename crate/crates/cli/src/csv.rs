//! Minimal CSV emission: comma separated, LF line endings, numbers with ten
//! significant digits.

use std::fmt::Write as _;

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// Ten significant digits; plain decimal notation unless the magnitude is
/// extreme. NaN is written as `NA`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "NA".into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    let mut s = String::new();
    if (-5..10).contains(&mag) {
        let decimals = (9 - mag).max(0) as usize;
        write!(s, "{x:.decimals$}").unwrap();
        if s.contains('.') {
            let trimmed = s.trim_end_matches('0').trim_end_matches('.');
            s = trimmed.to_string();
        }
    } else {
        write!(s, "{x:.9e}").unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(num(2.599312345678), "2.599312346");
        assert_eq!(num(10.4381), "10.4381");
        assert_eq!(num(-0.000123456789012), "-0.000123456789");
        assert_eq!(num(0.0), "0");
        assert_eq!(num(f64::NAN), "NA");
        assert_eq!(num(1.5e12), "1.500000000e12");
        for x in [1.0 / 3.0, 123.456789012345, 7.0e-3] {
            let s = num(x);
            let y: f64 = s.parse().unwrap();
            assert_eq!(num(y), s);
        }
    }
}
