//! Plain-text rendering helpers.

use std::fmt::Write as _;

use metrotropy::{BistochasticMatrix, Complex64, UnitaryMatrix};

/// Shortest representation that parses back to the same `f64`, switching to
/// exponent form for very small or large magnitudes.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn complex(z: Complex64) -> String {
    if z.im == 0.0 {
        num(z.re)
    } else {
        let sign = if z.im.is_sign_negative() { '-' } else { '+' };
        format!("{}{}{}i", num(z.re), sign, num(z.im.abs()))
    }
}

pub fn vector(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|&x| num(x)).collect();
    format!("[{}]", parts.join(", "))
}

pub fn real_matrix(m: &BistochasticMatrix, indent: &str) -> String {
    let mut out = String::new();
    for row in m.rows() {
        let _ = writeln!(out, "{indent}{}", vector(&row));
    }
    out
}

pub fn complex_matrix(u: &UnitaryMatrix, indent: &str) -> String {
    let mut out = String::new();
    let e = u.entries();
    for i in 0..u.dim() {
        let parts: Vec<String> = (0..u.dim()).map(|j| complex(e[(i, j)])).collect();
        let _ = writeln!(out, "{indent}[{}]", parts.join(", "));
    }
    out
}

/// `label` padded to a fixed column followed by `value`.
pub fn field(label: &str, value: impl std::fmt::Display) -> String {
    format!("{label:<18}{value}\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1 + 0.2, 1.0 / 3.0, -2.5e-17, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn complex_forms() {
        assert_eq!(complex(Complex64::new(0.5, 0.5)), "0.5+0.5i");
        assert_eq!(complex(Complex64::new(-0.5, -0.5)), "-0.5-0.5i");
        assert_eq!(complex(Complex64::new(1.0, 0.0)), "1.0");
    }

    #[test]
    fn field_alignment() {
        assert_eq!(field("value", 0.4), "value             0.4\n");
    }

    #[test]
    fn small_numbers_use_exponents() {
        assert_eq!(num(1.25e-12), "1.25e-12");
        assert_eq!(num(1.0), "1.0");
    }
}
