//! Central finite-difference gradient oracle. Independent of the
//! backward pass: it only evaluates the forward map.

use super::layers::Mode;
use super::network::{l2_loss, Network};
use super::tensor::Tensor;
use crate::error::Result;

pub const GRADCHECK_STEP: f64 = 1e-4;

fn loss_of(net: &mut Network, input: &Tensor, target: &Tensor) -> Result<f64> {
    let pred = net.forward(input, Mode::Train)?;
    Ok(l2_loss(&pred, target).0)
}

fn perturb(net: &mut Network, slot: usize, elem: usize, delta: f64) {
    net.param_slots()[slot].values[elem] += delta;
}

/// Compare analytic parameter gradients of the L2 loss against central
/// finite differences; returns the maximum mixed relative error
/// `|fd - analytic| / max(|fd|, |analytic|, 1e-3)`.
pub fn network_gradcheck(net: &mut Network, input: &Tensor, target: &Tensor) -> Result<f64> {
    net.zero_grads();
    let pred = net.forward(input, Mode::Train)?;
    let (_, grad) = l2_loss(&pred, target);
    net.backward(&grad)?;
    let analytic: Vec<Vec<f64>> = net
        .param_slots()
        .iter()
        .map(|s| s.grads.to_vec())
        .collect();

    let h = GRADCHECK_STEP;
    let mut max_err: f64 = 0.0;
    for (si, slot_grads) in analytic.iter().enumerate() {
        for ei in 0..slot_grads.len() {
            perturb(net, si, ei, h);
            let lp = loss_of(net, input, target)?;
            perturb(net, si, ei, -2.0 * h);
            let lm = loss_of(net, input, target)?;
            perturb(net, si, ei, h);
            let fd = (lp - lm) / (2.0 * h);
            let g = slot_grads[ei];
            let err = (fd - g).abs() / fd.abs().max(g.abs()).max(1e-3);
            max_err = max_err.max(err);
        }
    }
    Ok(max_err)
}

#[cfg(test)]
mod tests {
    use super::super::layers::{BatchNorm1d, Conv1d, FullyConnected, Layer, MaxPool1d, Relu};
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut impl Rng, b: usize, c: usize, t: usize) -> Tensor {
        Tensor::from_vec(b, c, t, (0..b * c * t).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn every_layer_type_passes_gradcheck() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let cases: Vec<(Network, usize, usize)> = vec![
            (
                Network::new(vec![Layer::FullyConnected(FullyConnected::new(3, 2, &mut rng))]),
                2,
                4,
            ),
            (
                Network::new(vec![Layer::Conv1d(Conv1d::new(3, 2, 3, &mut rng))]),
                2,
                4,
            ),
            (
                Network::new(vec![
                    Layer::Conv1d(Conv1d::new(3, 2, 3, &mut rng)),
                    Layer::BatchNorm1d(BatchNorm1d::new(2)),
                ]),
                2,
                4,
            ),
            (
                Network::new(vec![
                    Layer::Conv1d(Conv1d::new(3, 2, 3, &mut rng)),
                    Layer::Relu(Relu::new()),
                ]),
                2,
                4,
            ),
            (
                Network::new(vec![
                    Layer::Conv1d(Conv1d::new(3, 2, 3, &mut rng)),
                    Layer::MaxPool1d(MaxPool1d::new()),
                ]),
                2,
                2,
            ),
        ];
        for (mut net, out_c, out_t) in cases {
            let x = random_tensor(&mut rng, 3, 3, 4);
            let y = random_tensor(&mut rng, 3, out_c, out_t);
            let err = network_gradcheck(&mut net, &x, &y).unwrap();
            assert!(err < 1e-4, "gradcheck error {err}");
        }
    }

    #[test]
    fn composed_stack_passes_gradcheck() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = Network::new(vec![
            Layer::Conv1d(Conv1d::new(2, 6, 3, &mut rng)),
            Layer::BatchNorm1d(BatchNorm1d::new(6)),
            Layer::Relu(Relu::new()),
            Layer::Conv1d(Conv1d::new(6, 6, 3, &mut rng)),
            Layer::MaxPool1d(MaxPool1d::new()),
            Layer::FullyConnected(FullyConnected::new(6, 1, &mut rng)),
        ]);
        let x = random_tensor(&mut rng, 4, 2, 8);
        let y = random_tensor(&mut rng, 4, 1, 4);
        let err = network_gradcheck(&mut net, &x, &y).unwrap();
        assert!(err < 1e-4, "gradcheck error {err}");
    }
}
