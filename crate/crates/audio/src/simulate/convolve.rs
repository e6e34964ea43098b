use realfft::RealFftPlanner;

/// Kernels at most this long are convolved directly.
const DIRECT_MAX: usize = 64;

fn direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Full linear convolution (`len(a) + len(b) - 1` samples). Long inputs go
/// through a zero-padded real FFT; short kernels are summed directly, so a
/// unit impulse reproduces the other input exactly.
pub fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    if a.len().min(b.len()) <= DIRECT_MAX {
        return direct(a, b);
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = RealFftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let spectrum = |x: &[f64]| {
        let mut buf = fwd.make_input_vec();
        buf[..x.len()].copy_from_slice(x);
        let mut out = fwd.make_output_vec();
        fwd.process(&mut buf, &mut out).expect("buffer sizes come from the plan");
        out
    };
    let (fa, fb) = (spectrum(a), spectrum(b));
    let mut prod: Vec<_> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    prod[0].im = 0.0;
    prod[n / 2].im = 0.0;
    let mut out = inv.make_output_vec();
    inv.process(&mut prod, &mut out).expect("buffer sizes come from the plan");
    out.truncate(out_len);
    let scale = 1.0 / n as f64;
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fft_path_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (la, lb) in [(16000, 3000), (100, 65), (4096, 4096)] {
            let a: Vec<f64> = (0..la).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..lb).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (f, d) = (fft_convolve(&a, &b), direct(&a, &b));
            let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let err = f.iter().zip(&d).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(err <= 1e-10 * scale, "{la}x{lb}: {err}");
        }
    }

    #[test]
    fn unit_impulse_is_exact() {
        let a = [0.1, -0.7, 0.3];
        assert_eq!(fft_convolve(&a, &[1.0]), a);
    }
}
