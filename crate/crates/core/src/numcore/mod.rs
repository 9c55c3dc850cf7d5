//! Dense tensors, forward kernels and a tape-based reverse-mode engine sized
//! for the encoder in [`crate::model`].

mod ops;
mod tape;
mod tensor;

pub use ops::{
    add, add_row, argmax_rows, layer_norm, masked_softmax_rows, matmul, matmul_t, matmul_tn,
    relu, softmax_rows, LAYER_NORM_EPS,
};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    const NEG: f64 = f64::NEG_INFINITY;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::matrix(rows, cols, data).unwrap()
    }

    #[test]
    fn matmul_identity_and_hand_cases() {
        let id = Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let b = Tensor::from_rows(&[[3.0, 4.0], [5.0, 6.0]]).unwrap();
        assert_eq!(matmul(&id, &b).unwrap(), b);

        let r = Tensor::from_rows(&[[1.0, 2.0]]).unwrap();
        let c = Tensor::from_rows(&[[3.0], [4.0]]).unwrap();
        assert_eq!(matmul(&r, &c).unwrap().data(), &[11.0]);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random(4, 5, &mut rng);
        let b = random(5, 3, &mut rng);
        let got = matmul(&a, &b).unwrap();
        for i in 0..4 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..5 {
                    s += a.data()[i * 5 + k] * b.data()[k * 3 + j];
                }
                assert!((got.at(i, j) - s).abs() < 1e-12);
            }
        }
        let bt = Tensor::from_rows(&(0..3).map(|j| (0..5).map(|k| b.at(k, j)).collect::<Vec<_>>()).collect::<Vec<_>>()).unwrap();
        let via_t = matmul_t(&a, &bt).unwrap();
        for (x, y) in via_t.data().iter().zip(got.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 3]);
        let msg = matmul(&a, &b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
    }

    #[test]
    fn masked_softmax_examples() {
        let s = Tensor::from_rows(&[[0.0, 0.0, 0.0]]).unwrap();
        let m = Tensor::from_rows(&[[0.0, 0.0, NEG]]).unwrap();
        let p = masked_softmax_rows(&s, &m).unwrap();
        assert_eq!(p.data(), &[0.5, 0.5, 0.0]);

        let s = Tensor::from_rows(&[[0.3, -1.2]]).unwrap();
        let zero = Tensor::zeros(&[1, 2]);
        assert_eq!(masked_softmax_rows(&s, &zero).unwrap(), softmax_rows(&s).unwrap());
    }

    #[test]
    fn masked_softmax_matches_exp_normalize_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random(6, 6, &mut rng);
        let mut mask = Tensor::zeros(&[6, 6]);
        for i in 0..6 {
            for j in 0..6 {
                if j > i + 1 {
                    mask.row_mut(i)[j] = NEG;
                }
            }
        }
        let p = masked_softmax_rows(&s, &mask).unwrap();
        for i in 0..6 {
            let allowed: Vec<usize> = (0..6).filter(|&j| j <= i + 1).collect();
            let denom: f64 = allowed.iter().map(|&j| s.at(i, j).exp()).sum();
            for j in 0..6 {
                let expect = if allowed.contains(&j) { s.at(i, j).exp() / denom } else { 0.0 };
                assert!((p.at(i, j) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fully_masked_row_is_a_contract_error() {
        let s = Tensor::zeros(&[1, 2]);
        let m = Tensor::from_rows(&[[NEG, NEG]]).unwrap();
        assert!(matches!(
            masked_softmax_rows(&s, &m),
            Err(crate::Error::Contract(_))
        ));
    }

    #[test]
    fn layer_norm_examples() {
        let one = Tensor::vector(vec![1.0; 4]);
        let zero = Tensor::vector(vec![0.0; 4]);
        let x = Tensor::from_rows(&[[5.0; 4]]).unwrap();
        assert_eq!(layer_norm(&x, &one, &zero).unwrap().data(), &[0.0; 4]);

        let x = Tensor::from_rows(&[[1.0, -1.0]]).unwrap();
        let y = layer_norm(&x, &Tensor::vector(vec![1.0; 2]), &Tensor::vector(vec![0.0; 2])).unwrap();
        assert!((y.data()[0] - 1.0).abs() < 1e-5 && (y.data()[1] + 1.0).abs() < 1e-5);
    }

    #[test]
    fn layer_norm_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random(1, 7, &mut rng);
        let g = Tensor::vector((0..7).map(|_| rng.random_range(0.5..1.5)).collect());
        let b = Tensor::vector((0..7).map(|_| rng.random_range(-0.5..0.5)).collect());
        let y = layer_norm(&x, &g, &b).unwrap();
        let mean = x.data().iter().sum::<f64>() / 7.0;
        let var = x.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 7.0;
        for j in 0..7 {
            let expect = (x.data()[j] - mean) / (var + LAYER_NORM_EPS).sqrt() * g.data()[j] + b.data()[j];
            assert!((y.data()[j] - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn backward_of_sum_is_all_ones() {
        let mut tape = Tape::new();
        let p = tape.param(Arc::new(Tensor::zeros(&[2, 3])));
        let loss = tape.sum(p);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(p).unwrap().data(), &[1.0; 6]);
    }

    #[test]
    fn backward_of_square() {
        let mut tape = Tape::new();
        let p = tape.param(Arc::new(Tensor::scalar(3.0)));
        let sq = tape.mul(p, p).unwrap();
        let grads = tape.backward(sq).unwrap();
        assert_eq!(grads.get(p).unwrap().data(), &[6.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_and_unused_params_get_zero() {
        let mut tape = Tape::new();
        let p = tape.param(Arc::new(Tensor::zeros(&[2])));
        let unused = Arc::new(Tensor::zeros(&[3]));
        let u = tape.param(Arc::clone(&unused));
        assert!(tape.backward(p).is_err());
        let loss = tape.sum(p);
        let grads = tape.backward(loss).unwrap();
        assert!(grads.get(u).is_none());
        assert_eq!(grads.wrt(u, &unused).data(), &[0.0; 3]);

        let mut inf = Tape::inference();
        let q = inf.param(Arc::new(Tensor::scalar(1.0)));
        assert!(inf.backward(q).is_err());
    }

    /// Builds a scalar from every tape op, for finite-difference comparison.
    fn composite(tape: &mut Tape, params: &[Arc<Tensor>]) -> (Vec<Var>, Var) {
        let vars: Vec<Var> = params.iter().map(|p| tape.param(Arc::clone(p))).collect();
        let (x, w, b, g, beta, table) = (vars[0], vars[1], vars[2], vars[3], vars[4], vars[5]);
        let emb = tape.gather_rows(table, &[2, 0, 2]).unwrap();
        let h = tape.add(x, emb).unwrap();
        let xw = tape.matmul(h, w).unwrap();
        let xwb = tape.add_row(xw, b).unwrap();
        let r = tape.relu(xwb);
        let left = tape.slice_cols(r, 0, 2).unwrap();
        let right = tape.slice_cols(r, 2, 2).unwrap();
        let scores = tape.matmul_t(left, right).unwrap();
        let scores = tape.scale(scores, 0.7);
        let mut mask = Tensor::zeros(&[3, 3]);
        mask.row_mut(0)[2] = f64::NEG_INFINITY;
        let p = tape.masked_softmax_rows(scores, &mask).unwrap();
        let ctx = tape.matmul(p, r).unwrap();
        let cat = tape.concat_cols(&[ctx, h]).unwrap();
        let n = tape.layer_norm(cat, g, beta).unwrap();
        let sq = tape.mul(n, n).unwrap();
        let ce = tape.cross_entropy_sum(n, &[1, 0, 5]).unwrap();
        let s = tape.sum(sq);
        let loss = tape.add(s, ce).unwrap();
        (vars, loss)
    }

    fn eval_composite(params: &[Arc<Tensor>]) -> f64 {
        let mut tape = Tape::new();
        let (_, loss) = composite(&mut tape, params);
        tape.value(loss).data()[0]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn reverse_mode_matches_central_differences(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut normal = |r: usize, c: usize| {
                let d: Vec<f64> = (0..r * c).map(|_| {
                    // Box-Muller for N(0,1) draws.
                    let u1: f64 = rng.random_range(1e-12..1.0);
                    let u2: f64 = rng.random::<f64>();
                    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                }).collect();
                Tensor::matrix(r, c, d).unwrap()
            };
            let params: Vec<Arc<Tensor>> = vec![
                Arc::new(normal(3, 4)),
                Arc::new(normal(4, 4)),
                Arc::new(Tensor::vector(normal(1, 4).into_data())),
                Arc::new(Tensor::vector(normal(1, 8).into_data())),
                Arc::new(Tensor::vector(normal(1, 8).into_data())),
                Arc::new(normal(3, 4)),
            ];
            let mut tape = Tape::new();
            let (vars, loss) = composite(&mut tape, &params);
            let grads = tape.backward(loss).unwrap();
            let h = 1e-5;
            for (pi, var) in vars.iter().enumerate() {
                let analytic = grads.wrt(*var, &params[pi]);
                for k in 0..params[pi].len() {
                    let mut plus = params.clone();
                    let mut minus = params.clone();
                    Arc::make_mut(&mut plus[pi]).data_mut()[k] += h;
                    Arc::make_mut(&mut minus[pi]).data_mut()[k] -= h;
                    let fd = (eval_composite(&plus) - eval_composite(&minus)) / (2.0 * h);
                    let a = analytic.data()[k];
                    let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-5);
                    prop_assert!(rel < 1e-4, "param {pi}[{k}]: analytic {a} vs fd {fd}");
                }
            }
        }

        #[test]
        fn masked_softmax_rows_sum_to_one_and_are_shift_invariant(
            seed in any::<u64>(), shift in -50.0f64..50.0, n in 1usize..8
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random(n, n, &mut rng);
            let mut mask = Tensor::zeros(&[n, n]);
            for i in 0..n {
                for j in 0..n {
                    if j > i && rng.random_bool(0.5) {
                        mask.row_mut(i)[j] = f64::NEG_INFINITY;
                    }
                }
            }
            let p = masked_softmax_rows(&s, &mask).unwrap();
            let shifted = masked_softmax_rows(&s.map(|v| v + shift), &mask).unwrap();
            for i in 0..n {
                prop_assert!((p.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
                for j in 0..n {
                    prop_assert!((p.at(i, j) - shifted.at(i, j)).abs() < 1e-9);
                    if mask.at(i, j) == f64::NEG_INFINITY {
                        prop_assert_eq!(p.at(i, j), 0.0);
                    }
                }
            }
        }
    }
}
