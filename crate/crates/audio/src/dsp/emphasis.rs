use crate::error::{Error, Result};

pub const DEFAULT_PRE_EMPHASIS: f64 = 0.97;

fn check(coeff: f64) -> Result<()> {
    if !(0.0..1.0).contains(&coeff) {
        return Err(Error::Config(format!("pre-emphasis coefficient {coeff} outside [0, 1)")));
    }
    Ok(())
}

/// First-order differencing `y[n] = x[n] - c x[n-1]`, with `y[0] = x[0]`.
pub fn pre_emphasis(x: &[f64], coeff: f64) -> Result<Vec<f64>> {
    check(coeff)?;
    let mut y = Vec::with_capacity(x.len());
    let mut prev = 0.0;
    for &s in x {
        y.push(s - coeff * prev);
        prev = s;
    }
    Ok(y)
}

/// Inverse of [`pre_emphasis`]: `x[n] = y[n] + c x[n-1]`.
pub fn de_emphasis(y: &[f64], coeff: f64) -> Result<Vec<f64>> {
    check(coeff)?;
    let mut x = Vec::with_capacity(y.len());
    let mut prev = 0.0;
    for &s in y {
        prev = s + coeff * prev;
        x.push(prev);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coefficient_is_identity() {
        let x = [0.3, -0.1, 0.7];
        assert_eq!(pre_emphasis(&x, 0.0).unwrap(), x);
    }

    #[test]
    fn dc_input_leaves_small_residual() {
        let y = pre_emphasis(&[2.0; 16], 0.97).unwrap();
        assert_eq!(y[0], 2.0);
        for v in &y[1..] {
            assert!((v - 0.06).abs() < 1e-12);
        }
    }

    #[test]
    fn coefficient_must_be_below_one() {
        assert!(matches!(pre_emphasis(&[1.0], 1.0), Err(Error::Config(_))));
        assert!(matches!(de_emphasis(&[1.0], -0.1), Err(Error::Config(_))));
    }
}
