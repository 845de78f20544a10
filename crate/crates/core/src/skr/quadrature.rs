//! Gauss-Legendre rules.

/// Nodes and weights of the n-point rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Composite rule over [a, b] with `panels` equal panels of `n` nodes each.
pub fn composite(a: f64, b: f64, panels: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(n);
    let h = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(panels * n);
    let mut ws = Vec::with_capacity(panels * n);
    for p in 0..panels {
        let lo = a + h * p as f64;
        for (x, w) in gx.iter().zip(&gw) {
            xs.push(lo + 0.5 * h * (x + 1.0));
            ws.push(0.5 * h * w);
        }
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_low_degree() {
        let (x, w) = gauss_legendre(5);
        // Degree 8 monomial integrates to 2/9 on [-1,1].
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn composite_integrates_cosine() {
        let (x, w) = composite(0.0, std::f64::consts::FRAC_PI_2, 4, 12);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.cos()).sum();
        assert!((s - 1.0).abs() < 1e-14);
    }
}
