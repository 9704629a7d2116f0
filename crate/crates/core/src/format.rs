//! Fixed float formatting for reports: values are rounded to 12 significant
//! digits and then printed in shortest round-trip form, so identical inputs
//! give byte-identical output.

use serde::Serializer;

pub const SIGNIFICANT_DIGITS: usize = 12;

pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Text form used in CSV output.
pub fn fmt_f64(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        // drop the sign of negative zero
        "0".to_string()
    } else if (1e-4..1e15).contains(&r.abs()) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

pub fn ser_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    let r = round_sig(*x);
    s.serialize_f64(if r == 0.0 { 0.0 } else { r })
}

pub fn ser_opt_f64<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => ser_f64(v, s),
        None => s.serialize_none(),
    }
}

pub fn ser_vec_f64<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        let r = round_sig(*x);
        seq.serialize_element(&if r == 0.0 { 0.0 } else { r })?;
    }
    seq.end()
}

pub fn ser_vec_vec_f64<S: Serializer>(xs: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    struct Row<'a>(&'a [f64]);
    impl serde::Serialize for Row<'_> {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            ser_vec_f64(self.0, s)
        }
    }
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for row in xs {
        seq.serialize_element(&Row(row))?;
    }
    seq.end()
}

pub fn ser_opt_vec_vec_f64<S: Serializer>(xs: &Option<Vec<Vec<f64>>>, s: S) -> Result<S::Ok, S::Error> {
    match xs {
        Some(v) => ser_vec_vec_f64(v, s),
        None => s.serialize_none(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(fmt_f64(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_f64(-0.0), "0");
        assert_eq!(fmt_f64(2.0), "2");
        assert_eq!(fmt_f64(123456789.12345679), "123456789.123");
        assert_eq!(fmt_f64(1.0e-20 / 3.0), "3.33333333333e-21");
        assert!(round_sig(f64::NAN).is_nan());
    }
}
