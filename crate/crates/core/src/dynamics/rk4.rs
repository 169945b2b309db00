use num_complex::Complex64 as C64;

/// Classical fourth-order Runge-Kutta with reusable stage buffers.
pub(crate) struct Rk4 {
    k: [Vec<C64>; 4],
    tmp: Vec<C64>,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); n];
        Rk4 { k: [z.clone(), z.clone(), z.clone(), z.clone()], tmp: z }
    }

    pub fn step<F>(&mut self, f: &mut F, t: f64, h: f64, y: &mut [C64])
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        let half = h / 2.0;
        f(t, y, k1);
        axpy_into(tmp, y, half, k1);
        f(t + half, tmp, k2);
        axpy_into(tmp, y, half, k2);
        f(t + half, tmp, k3);
        axpy_into(tmp, y, h, k3);
        f(t + h, tmp, k4);
        let w = h / 6.0;
        for i in 0..y.len() {
            y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * w;
        }
    }
}

fn axpy_into(out: &mut [C64], y: &[C64], a: f64, k: &[C64]) {
    for ((o, y), k) in out.iter_mut().zip(y).zip(k) {
        *o = y + k * a;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourth_order_on_rotation() {
        // y' = -i y, exact y(1) = e^{-i}
        let err = |n: usize| {
            let mut rk = Rk4::new(1);
            let mut y = vec![C64::new(1.0, 0.0)];
            let h = 1.0 / n as f64;
            let mut f = |_t: f64, y: &[C64], out: &mut [C64]| out[0] = y[0] * C64::new(0.0, -1.0);
            for i in 0..n {
                rk.step(&mut f, i as f64 * h, h, &mut y);
            }
            (y[0] - C64::from_polar(1.0, -1.0)).norm()
        };
        let ratio = err(10) / err(20);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }
}
