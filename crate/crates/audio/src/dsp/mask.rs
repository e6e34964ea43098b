use cxverb_core::{CxTensor, Tensor};

use crate::error::{Error, Result};

/// Cells with `|Y|` at or below this are given a zero oracle mask.
pub const ORACLE_THRESHOLD: f64 = 1e-8;

fn same_shape(a: &[usize], b: &[usize], what: &str) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{what}: {a:?} vs {b:?}")));
    }
    Ok(())
}

/// Complex ratio masking: `(Mr Yr - Mi Yi) + j (Mr Yi + Mi Yr)`.
pub fn apply_crm(y: &CxTensor<f64>, m: &CxTensor<f64>) -> Result<CxTensor<f64>> {
    same_shape(y.dims(), m.dims(), "mask and spectrogram differ")?;
    let (yr, yi, mr, mi) = (y.re().data(), y.im().data(), m.re().data(), m.im().data());
    let re = (0..yr.len()).map(|k| mr[k] * yr[k] - mi[k] * yi[k]).collect();
    let im = (0..yr.len()).map(|k| mr[k] * yi[k] + mi[k] * yr[k]).collect();
    Ok(CxTensor::from_vecs(y.dims().to_vec(), re, im)?)
}

/// Ideal mask `X / Y` on cells where `|Y| > ORACLE_THRESHOLD`, zero elsewhere.
pub fn oracle_mask(x: &CxTensor<f64>, y: &CxTensor<f64>) -> Result<CxTensor<f64>> {
    same_shape(x.dims(), y.dims(), "target and mixture differ")?;
    let (xr, xi, yr, yi) = (x.re().data(), x.im().data(), y.re().data(), y.im().data());
    let mut re = vec![0.0; xr.len()];
    let mut im = vec![0.0; xr.len()];
    for k in 0..xr.len() {
        let d = yr[k] * yr[k] + yi[k] * yi[k];
        if d.sqrt() > ORACLE_THRESHOLD {
            re[k] = (xr[k] * yr[k] + xi[k] * yi[k]) / d;
            im[k] = (xi[k] * yr[k] - xr[k] * yi[k]) / d;
        }
    }
    Ok(CxTensor::from_vecs(x.dims().to_vec(), re, im)?)
}

/// Network input `sqrt(P) exp(j angle(Y))`: smoothed magnitude with the
/// original phase. `p` has shape `(T, F)` matching `y`'s trailing axes.
pub fn smoothed_input(y: &CxTensor<f64>, p: &Tensor<f64>) -> Result<CxTensor<f64>> {
    let d = y.dims();
    same_shape(&d[d.len().saturating_sub(2)..], p.dims(), "smoothed power and spectrogram differ")?;
    if y.numel() != p.numel() {
        return Err(Error::Shape(format!("spectrogram {d:?} holds more than one (T, F) plane")));
    }
    let (yr, yi, pw) = (y.re().data(), y.im().data(), p.data());
    let mut re = vec![0.0; yr.len()];
    let mut im = vec![0.0; yr.len()];
    for k in 0..yr.len() {
        let mag = yr[k].hypot(yi[k]);
        let amp = pw[k].sqrt();
        if mag > 0.0 {
            re[k] = amp * yr[k] / mag;
            im[k] = amp * yi[k] / mag;
        } else {
            re[k] = amp;
        }
    }
    Ok(CxTensor::from_vecs(d.to_vec(), re, im)?)
}
