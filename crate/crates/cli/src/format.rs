//! CSV output: comma-separated, header row, LF endings, numbers with nine
//! significant digits.

pub const SIGNIFICANT_DIGITS: usize = 9;

/// `x` with nine significant digits, positional unless very large or small.
pub fn sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    if !(-5..=9).contains(&exp) {
        return sci;
    }
    let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
    format!("{:.*}", decimals, x)
}

/// A field that is safe to put between commas.
pub fn field(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut csv = Csv { text: String::new() };
        csv.row(header.iter().map(|h| h.to_string()));
        csv
    }

    pub fn row(&mut self, fields: impl IntoIterator<Item = String>) {
        let line: Vec<String> = fields.into_iter().collect();
        self.text.push_str(&line.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig(0.013228697347800903), "0.0132286973");
        assert_eq!(sig(0.6), "0.600000000");
        assert_eq!(sig(1.0), "1.00000000");
        assert_eq!(sig(0.0), "0");
        assert_eq!(sig(9.9999999999), "10.0000000");
        assert_eq!(sig(1e-7), "1.00000000e-7");
        assert_eq!(sig(-0.25), "-0.250000000");
    }

    #[test]
    fn csv_layout() {
        let mut csv = Csv::new(&["a", "b"]);
        csv.row([sig(0.5), field("x,y")]);
        assert_eq!(csv.as_str(), "a,b\n0.500000000,x;y\n");
    }
}
