use super::mlp::{Gradients, Mlp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

/// Bias-corrected Adam state for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Gradients,
    pub v: Gradients,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }
}

fn update(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], opt: (f64, f64, f64, f64, f64, f64), sign: f64) {
    let (lr, b1, b2, eps, c1, c2) = opt;
    for i in 0..p.len() {
        let gi = sign * g[i];
        m[i] = b1 * m[i] + (1.0 - b1) * gi;
        v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
        let mh = m[i] / c1;
        let vh = v[i] / c2;
        p[i] -= lr * mh / (vh.sqrt() + eps);
    }
}

/// One Adam update of `net` with `grads`; `Maximize` ascends the gradient.
pub fn adam_step(opt: &mut Adam, net: &mut Mlp, grads: &Gradients, direction: Direction) {
    opt.step += 1;
    let t = opt.step as i32;
    let c1 = 1.0 - opt.beta1.powi(t);
    let c2 = 1.0 - opt.beta2.powi(t);
    let sign = match direction {
        Direction::Minimize => 1.0,
        Direction::Maximize => -1.0,
    };
    let h = (opt.lr, opt.beta1, opt.beta2, opt.eps, c1, c2);
    for (i, layer) in net.layers.iter_mut().enumerate() {
        update(&mut layer.w, &grads.w[i], &mut opt.m.w[i], &mut opt.v.w[i], h, sign);
        update(&mut layer.b, &grads.b[i], &mut opt.m.b[i], &mut opt.v.b[i], h, sign);
    }
}
