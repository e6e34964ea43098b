//! Reconstruction, adversarial and feature-matching losses, recorded on a tape.

use crate::cx::CxVar;
use crate::error::{shape_err, Error, Result};
use crate::tape::{Tape, Var};
use crate::Scalar;

pub const DEFAULT_LAMBDA: f64 = 0.3;
pub const DEFAULT_ALPHA: f64 = 0.4;
pub const DEFAULT_BETA: f64 = 0.3;

pub(crate) fn check_weights(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha >= 0.0 && beta >= 0.0 && alpha + beta <= 1.0 + 1e-12) {
        return Err(Error::Config(format!("loss weights alpha={alpha}, beta={beta} must be non-negative with alpha + beta <= 1")));
    }
    Ok(())
}

fn same_dims<T: Scalar>(tape: &Tape<T>, a: CxVar, b: CxVar) -> Result<usize> {
    let (da, db) = (tape.cx_dims(a), tape.cx_dims(b));
    if da != db {
        return Err(shape_err!("loss operands differ in shape: {da:?} vs {db:?}"));
    }
    Ok(da.iter().product())
}

/// `(1/N) * sum(|re(a - b)| + |im(a - b)|)`.
pub fn loss_ri<T: Scalar>(tape: &mut Tape<T>, est: CxVar, target: CxVar) -> Result<Var> {
    let n = same_dims(tape, est, target)?;
    let d = tape.cx_sub(est, target)?;
    let (ar, ai) = (tape.abs(d.re), tape.abs(d.im));
    let (sr, si) = (tape.sum(ar), tape.sum(ai));
    let s = tape.add(sr, si)?;
    Ok(tape.scale(s, T::one() / T::from_usize(n).unwrap()))
}

/// Mean absolute difference of magnitudes.
pub fn loss_mag<T: Scalar>(tape: &mut Tape<T>, est: CxVar, target: CxVar) -> Result<Var> {
    same_dims(tape, est, target)?;
    let (me, mt) = (tape.cx_magnitude(est)?, tape.cx_magnitude(target)?);
    let d = tape.sub(me, mt)?;
    let a = tape.abs(d);
    Ok(tape.mean(a))
}

/// `lambda * L_RI + (1 - lambda) * L_Mag`.
pub fn loss_ri_mag<T: Scalar>(tape: &mut Tape<T>, est: CxVar, target: CxVar, lambda: f64) -> Result<Var> {
    let ri = loss_ri(tape, est, target)?;
    let mag = loss_mag(tape, est, target)?;
    let a = tape.scale(ri, T::lit(lambda));
    let b = tape.scale(mag, T::lit(1.0 - lambda));
    tape.add(a, b)
}

fn half_mean_sq_dist<T: Scalar>(tape: &mut Tape<T>, x: Var, target: f64) -> Var {
    let d = tape.add_const(x, T::lit(-target));
    let sq = tape.mul(d, d).expect("same shape");
    let m = tape.mean(sq);
    tape.scale(m, T::lit(0.5))
}

/// Least-squares discriminator loss `0.5 mean((D(x) - 1)^2) + 0.5 mean(D(G(y))^2)`.
pub fn loss_lsgan_d<T: Scalar>(tape: &mut Tape<T>, real: Var, fake: Var) -> Result<Var> {
    let a = half_mean_sq_dist(tape, real, 1.0);
    let b = half_mean_sq_dist(tape, fake, 0.0);
    tape.add(a, b)
}

/// Least-squares generator loss `0.5 mean((D(G(y)) - 1)^2)`.
pub fn loss_lsgan_g<T: Scalar>(tape: &mut Tape<T>, fake: Var) -> Var {
    half_mean_sq_dist(tape, fake, 1.0)
}

/// Mean over layers of the L1 distance between feature maps, each averaged
/// over both planes.
pub fn loss_feature<T: Scalar>(tape: &mut Tape<T>, real: &[CxVar], fake: &[CxVar]) -> Result<Var> {
    if real.len() != fake.len() || real.is_empty() {
        return Err(shape_err!("feature lists have lengths {} and {}", real.len(), fake.len()));
    }
    let mut total: Option<Var> = None;
    for (&r, &f) in real.iter().zip(fake) {
        let n = same_dims(tape, r, f)?;
        let d = tape.cx_sub(f, r)?;
        let (ar, ai) = (tape.abs(d.re), tape.abs(d.im));
        let (sr, si) = (tape.sum(ar), tape.sum(ai));
        let s = tape.add(sr, si)?;
        let layer = tape.scale(s, T::one() / T::from_usize(2 * n).unwrap());
        total = Some(match total {
            Some(t) => tape.add(t, layer)?,
            None => layer,
        });
    }
    Ok(tape.scale(total.unwrap(), T::one() / T::from_usize(real.len()).unwrap()))
}

/// `alpha * L_G + beta * L_RI+Mag + (1 - alpha - beta) * L_feat`.
pub fn loss_generator_total<T: Scalar>(
    tape: &mut Tape<T>,
    l_g: Var,
    l_rimag: Var,
    l_feat: Var,
    alpha: f64,
    beta: f64,
) -> Result<Var> {
    check_weights(alpha, beta)?;
    let a = tape.scale(l_g, T::lit(alpha));
    let b = tape.scale(l_rimag, T::lit(beta));
    let c = tape.scale(l_feat, T::lit(1.0 - alpha - beta));
    let ab = tape.add(a, b)?;
    tape.add(ab, c)
}

/// Value-level combination of already computed losses.
pub fn generator_total(l_g: f64, l_rimag: f64, l_feat: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_weights(alpha, beta)?;
    Ok(alpha * l_g + beta * l_rimag + (1.0 - alpha - beta) * l_feat)
}

/// Value-level least-squares losses `(L_D, L_G)` from score slices.
pub fn lsgan_values(real: &[f64], fake: &[f64]) -> (f64, f64) {
    let mean = |xs: &[f64], t: f64| xs.iter().map(|x| (x - t) * (x - t)).sum::<f64>() / xs.len() as f64;
    (0.5 * mean(real, 1.0) + 0.5 * mean(fake, 0.0), 0.5 * mean(fake, 1.0))
}
