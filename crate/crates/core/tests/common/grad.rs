//! Central-difference gradient checks on random networks.

use glucolab::nn::{Activation, Architecture, Loss, Matrix, Network};
use glucolab::seeds::stream;
use rand::Rng;

pub fn random_batch(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = stream(seed, "batch", &[]);
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.5..1.5)).collect())
}

fn loss_of(net: &Network, x: &Matrix, t: &Matrix, loss: Loss) -> f64 {
    loss.evaluate(&net.forward(x).unwrap(), t).unwrap().0
}

pub fn max_relative_error(net: &Network, x: &Matrix, t: &Matrix, loss: Loss) -> f64 {
    let (y, cache) = net.forward_cached(x).unwrap();
    let (_, up) = loss.evaluate(&y, t).unwrap();
    let (g, _) = net.backward(&cache, &up).unwrap();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for k in 0..net.params().len() {
        let mut plus = net.clone();
        plus.params_mut()[k] += h;
        let mut minus = net.clone();
        minus.params_mut()[k] -= h;
        let fd = (loss_of(&plus, x, t, loss) - loss_of(&minus, x, t, loss)) / (2.0 * h);
        let denom = fd.abs().max(g.0[k].abs()).max(1e-3);
        worst = worst.max((fd - g.0[k]).abs() / denom);
    }
    worst
}

/// Random architecture, parameters, batch and loss drawn from `seed`; returns
/// the worst relative error of backprop against central differences.
pub fn fd_case(seed: u64) -> f64 {
    let mut rng = stream(seed, "arch", &[]);
    let hidden_act = if seed % 2 == 0 { Activation::Tanh } else { Activation::Relu };
    let out_act = [Activation::Identity, Activation::Tanh][(seed % 3 == 0) as usize];
    let arch = Architecture {
        layer_sizes: vec![rng.gen_range(1..5), rng.gen_range(2..7), rng.gen_range(2..6), rng.gen_range(1..3)],
        activations: vec![hidden_act, hidden_act, out_act],
    };
    let mut net = Network::new(arch.clone(), &mut rng).unwrap();
    // nonzero biases keep relu pre-activations off the kink at exactly 0
    for p in net.params_mut() {
        *p += rng.gen_range(-0.5..0.5);
    }
    let x = random_batch(4, arch.layer_sizes[0], seed);
    let t = random_batch(4, *arch.layer_sizes.last().unwrap(), seed + 1000);
    let loss = if seed % 4 == 1 { Loss::Huber { delta: 0.5 } } else { Loss::Mse };
    max_relative_error(&net, &x, &t, loss)
}
