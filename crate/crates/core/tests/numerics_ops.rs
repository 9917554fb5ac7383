mod common;

use common::{naive_conv, naive_matmul, op_cases, randn, rng};
use lacc_core::numerics::{
    conv_out_dim, parallel, ConvGeom, Graph, Tensor, LEAKY_SLOPE, PIXEL_NORM_EPS,
};
use proptest::prelude::*;

fn close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!(
            (x - y).abs() <= tol * (1.0 + y.abs()),
            "index {i}: {x} vs {y}"
        );
    }
}

#[test]
fn conv_identity_kernel_is_identity() {
    let g = Graph::<f64>::new();
    let x = g.constant(randn(&[1, 1, 5, 5], &mut rng(1)));
    let w = g.constant(Tensor::ones([1, 1, 1, 1]));
    let y = x.conv2d(w, ConvGeom { stride: 1, pad: 0 }).unwrap();
    assert_eq!(*y.value(), *x.value());
}

#[test]
fn conv_all_ones_sums_window() {
    let g = Graph::<f64>::new();
    let x = g.constant(Tensor::ones([1, 1, 4, 4]));
    let w = g.constant(Tensor::ones([1, 1, 3, 3]));
    let y = x.conv2d(w, ConvGeom { stride: 1, pad: 0 }).unwrap();
    assert_eq!(y.shape(), vec![1, 1, 2, 2]);
    assert!(y.value().data().iter().all(|&v| v == 9.0));
}

#[test]
fn conv_matches_six_loop_oracle() {
    let mut r = rng(2);
    for (stride, pad) in [(1, 0), (1, 1), (2, 1), (2, 0)] {
        let x = randn(&[2, 3, 8, 8], &mut r);
        let w = randn(&[4, 3, 3, 3], &mut r);
        let (want, want_shape) =
            naive_conv(x.data(), [2, 3, 8, 8], w.data(), [4, 3, 3, 3], stride, pad);
        let g = Graph::new();
        let y = g
            .constant(x)
            .conv2d(g.constant(w), ConvGeom { stride, pad })
            .unwrap();
        assert_eq!(y.shape(), want_shape.to_vec());
        close(y.value().data(), &want, 1e-12);
    }
}

#[test]
fn conv_rejects_channel_mismatch_with_diagnostic() {
    let g = Graph::<f32>::new();
    let x = g.constant(Tensor::zeros([1, 3, 4, 4]));
    let w = g.constant(Tensor::zeros([2, 4, 3, 3]));
    let err = x
        .conv2d(w, ConvGeom { stride: 1, pad: 1 })
        .unwrap_err()
        .to_string();
    assert!(
        err.contains("3 channels") && err.contains("expects 4"),
        "{err}"
    );
}

#[test]
fn conv_rejects_kernel_larger_than_padded_input() {
    let g = Graph::<f32>::new();
    let x = g.constant(Tensor::zeros([1, 1, 2, 2]));
    let w = g.constant(Tensor::zeros([1, 1, 5, 5]));
    assert!(x.conv2d(w, ConvGeom { stride: 1, pad: 1 }).is_err());
}

#[test]
fn dense_examples() {
    let g = Graph::<f64>::new();
    let x = g.constant(Tensor::new([1, 2], vec![1.0, 2.0]).unwrap());
    let eye = g.constant(Tensor::new([2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap());
    let zero = g.constant(Tensor::zeros([2]));
    assert_eq!(*x.dense(eye, zero).unwrap().value(), *x.value());
    let b = g.constant(Tensor::new([2], vec![3.0, 3.0]).unwrap());
    assert_eq!(x.dense(eye, b).unwrap().value().data(), &[4.0, 5.0]);
}

#[test]
fn matmul_matches_triple_loop_oracle() {
    let mut r = rng(3);
    let a = randn(&[4, 16], &mut r);
    let b = randn(&[16, 8], &mut r);
    let want = naive_matmul(a.data(), b.data(), 4, 16, 8);
    let g = Graph::new();
    let c = g.constant(a).matmul(g.constant(b)).unwrap();
    close(c.value().data(), &want, 1e-12);
}

#[test]
fn dense_dimension_mismatch_is_shape_error() {
    let g = Graph::<f32>::new();
    let x = g.constant(Tensor::zeros([2, 3]));
    let w = g.constant(Tensor::zeros([4, 2]));
    let b = g.constant(Tensor::zeros([2]));
    assert!(matches!(x.dense(w, b), Err(lacc_core::Error::Shape(_))));
}

#[test]
fn upsample_examples() {
    let g = Graph::<f64>::new();
    let x = g.param(Tensor::full([1, 1, 1, 1], 5.0));
    let y = x.upsample2x().unwrap();
    assert_eq!(y.shape(), vec![1, 1, 2, 2]);
    assert!(y.value().data().iter().all(|&v| v == 5.0));
    let grads = g.backward(y.sum()).unwrap();
    assert_eq!(grads.get(x).unwrap().data(), &[4.0]);

    let g = Graph::<f64>::new();
    let x = g.param(Tensor::full([1, 1, 3, 3], 1.0));
    let grads = g.backward(x.upsample2x().unwrap().sum()).unwrap();
    assert!(grads.get(x).unwrap().data().iter().all(|&v| v == 4.0));
}

#[test]
fn upsample_index_mapping_oracle() {
    let x = randn(&[1, 1, 3, 3], &mut rng(4));
    let g = Graph::new();
    let y = g.constant(x.clone()).upsample2x().unwrap();
    let yv = y.value();
    for i in 0..6 {
        for j in 0..6 {
            assert_eq!(yv.data()[i * 6 + j], x.data()[(i / 2) * 3 + j / 2]);
        }
    }
}

#[test]
fn activation_examples() {
    let g = Graph::<f64>::new();
    let z = g.constant(Tensor::scalar(0.0));
    assert_eq!(z.tanh().to_f64(), 0.0);
    assert_eq!(z.sigmoid().to_f64(), 0.5);
    let m1 = g.constant(Tensor::scalar(-1.0));
    assert!((m1.leaky_relu(LEAKY_SLOPE).to_f64() + 0.2).abs() < 1e-15);
    let big = g.constant(Tensor::scalar(100.0)).tanh().to_f64();
    assert!(big < 1.0 && big > 0.999);
}

#[test]
fn saturating_activations_stay_inside_open_intervals_in_f32() {
    let g = Graph::<f32>::new();
    let x = g.constant(Tensor::new([4], vec![-1e4, -50.0, 50.0, 1e4]).unwrap());
    for &v in x.tanh().value().data() {
        assert!(v > -1.0 && v < 1.0);
    }
    for &v in x.sigmoid().value().data() {
        assert!(v > 0.0 && v < 1.0);
    }
}

#[test]
fn pixel_norm_examples() {
    let g = Graph::<f64>::new();
    let c = g
        .constant(Tensor::full([1, 5, 1, 1], 2.5))
        .pixel_norm(PIXEL_NORM_EPS)
        .unwrap();
    close(c.value().data(), &[1.0; 5], 1e-8);

    let z = g
        .constant(Tensor::zeros([1, 3, 2, 2]))
        .pixel_norm(PIXEL_NORM_EPS)
        .unwrap();
    assert!(z.value().data().iter().all(|&v| v == 0.0));

    // mean of squares of (3, 4) is 12.5
    let v = g
        .constant(Tensor::new([1, 2, 1, 1], vec![3.0, 4.0]).unwrap())
        .pixel_norm(1e-8)
        .unwrap();
    let want = [3.0 / 12.5f64.sqrt(), 4.0 / 12.5f64.sqrt()];
    close(v.value().data(), &want, 1e-9);
    assert!((v.value().data()[0] - 0.84853).abs() < 1e-5);
    assert!((v.value().data()[1] - 1.13137).abs() < 1e-5);
}

#[test]
fn backward_examples() {
    let g = Graph::<f64>::new();
    let x = g.param(Tensor::scalar(3.0));
    let grads = g.backward(x.square().sum()).unwrap();
    assert_eq!(grads.get(x).unwrap().item(), 6.0);

    let g = Graph::<f64>::new();
    let x = g.param(Tensor::scalar(3.0));
    let unused = g.param(Tensor::scalar(1.0));
    let loss = x.square().add(unused.scale(0.0)).unwrap();
    let grads = g.backward(loss).unwrap();
    assert_eq!(grads.get(unused).unwrap().item(), 0.0);
}

#[test]
fn unreachable_params_are_untouched() {
    let g = Graph::<f64>::new();
    let x = g.param(Tensor::scalar(2.0));
    let other = g.param(Tensor::scalar(7.0));
    let grads = g.backward(x.square()).unwrap();
    assert!(grads.get(other).is_none());
    assert_eq!(grads.len(), 1);
}

#[test]
fn backward_rejects_non_scalar() {
    let g = Graph::<f64>::new();
    let x = g.param(Tensor::ones([3]));
    assert!(g.backward(x.square()).is_err());
}

#[test]
fn every_op_passes_gradient_check() {
    let mut r = rng(5);
    for (name, case) in op_cases() {
        for _ in 0..3 {
            let report = case(&mut r);
            assert!(report.passed(), "{name}: {report}");
        }
    }
}

#[test]
fn output_shape_is_function_of_input_shape() {
    let g = Graph::<f32>::new();
    for h in [3usize, 4, 5, 8, 9] {
        for k in [1usize, 3] {
            for stride in [1usize, 2] {
                for pad in [0usize, 1] {
                    let Some(oh) = conv_out_dim(h, k, stride, pad) else {
                        continue;
                    };
                    let x = g.constant(Tensor::zeros([2, 3, h, h + 1]));
                    let w = g.constant(Tensor::zeros([4, 3, k, k]));
                    let y = x.conv2d(w, ConvGeom { stride, pad }).unwrap();
                    let ow = conv_out_dim(h + 1, k, stride, pad).unwrap();
                    assert_eq!(y.shape(), vec![2, 4, oh, ow]);
                    let up = x.upsample2x().unwrap();
                    assert_eq!(up.shape(), vec![2, 3, 2 * h, 2 * (h + 1)]);
                    assert_eq!(x.pixel_norm(1e-8).unwrap().shape(), x.shape());
                    assert_eq!(x.tanh().shape(), x.shape());
                }
            }
        }
    }
}

#[test]
fn repeated_forward_backward_is_bit_identical_single_threaded() {
    parallel::set_sequential(true);
    let run = || {
        let mut r = rng(6);
        let g = Graph::<f32>::new();
        let x = g.constant(Tensor::randn([2, 3, 8, 8], 1.0, &mut r));
        let w = g.param(Tensor::randn([4, 3, 3, 3], 0.2, &mut r));
        let loss = x
            .conv2d(w, ConvGeom { stride: 2, pad: 1 })
            .unwrap()
            .tanh()
            .pixel_norm(1e-8)
            .unwrap()
            .mean();
        let grads = g.backward(loss).unwrap();
        (loss.value().item(), grads.get(w).unwrap().clone())
    };
    let (l1, g1) = run();
    let (l2, g2) = run();
    parallel::set_sequential(false);
    assert_eq!(l1.to_bits(), l2.to_bits());
    assert!(g1.bit_eq(&g2));
}

#[test]
fn parallel_and_sequential_kernels_agree_bitwise() {
    let mut r = rng(7);
    let x = Tensor::<f32>::randn([4, 3, 8, 8], 1.0, &mut r);
    let w = Tensor::<f32>::randn([5, 3, 3, 3], 0.3, &mut r);
    let run = || {
        let g = Graph::new();
        let xv = g.param(x.clone());
        let wv = g.param(w.clone());
        let loss = xv
            .conv2d(wv, ConvGeom { stride: 1, pad: 1 })
            .unwrap()
            .square()
            .mean();
        let grads = g.backward(loss).unwrap();
        (
            grads.get(xv).unwrap().clone(),
            grads.get(wv).unwrap().clone(),
        )
    };
    let par = run();
    parallel::set_sequential(true);
    let seq = run();
    parallel::set_sequential(false);
    assert!(par.0.bit_eq(&seq.0) && par.1.bit_eq(&seq.1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pixel_norm_output_has_unit_mean_square(vals in prop::collection::vec(-10.0f64..10.0, 6)) {
        let norm: f64 = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let g = Graph::<f64>::new();
        let y = g.constant(Tensor::new([1, 6, 1, 1], vals).unwrap()).pixel_norm(PIXEL_NORM_EPS).unwrap();
        let ms = y.value().data().iter().map(|v| v * v).sum::<f64>() / 6.0;
        prop_assert!((ms - 1.0).abs() < 1e-4);
    }

    #[test]
    fn tanh_never_reaches_one(x in -1e6f32..1e6f32) {
        let g = Graph::<f32>::new();
        let y = g.constant(Tensor::scalar(x)).tanh().value().item();
        prop_assert!(y > -1.0 && y < 1.0);
    }
}
