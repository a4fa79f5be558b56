//! Randomized gradient-check suites for each differentiable operator.
//! Each function runs `cases` random instances and returns the worst
//! relative error against central finite differences.

#![allow(dead_code)]

use rand::Rng;
use resgan_core::tensor::{
    batch_norm_train, conv2d, conv_transpose2d, instance_norm, PadKind, PadSpec, Tensor,
};

use super::{gradient_check, random_data, rng};

/// Worst absolute defect of <conv2d(x), y> = <x, conv_transpose2d(y)>
/// with tied weights over randomized shape/stride/pad cases.
pub fn adjoint_worst(cases: usize) -> f64 {
    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }
    let mut r = rng(31337);
    let mut worst = 0.0f64;
    for case in 0..cases {
        let b = r.random_range(1..3usize);
        let cin = r.random_range(1..4usize);
        let cout = r.random_range(1..4usize);
        let k = r.random_range(1..5usize);
        let stride = r.random_range(1..4usize);
        let pad = r.random_range(0..(k / 2 + 1));
        // square inputs so a single output_padding recovers both extents
        let h = r.random_range(k.max(2)..k.max(2) + 5);
        let w = h;

        let x = Tensor::new(
            vec![b, cin, h, w],
            random_data(&mut r, b * cin * h * w, -1.0, 1.0, 0.0),
        );
        // conv weight [Cout,Cin,k,k]; the tied transpose weight is the same
        // buffer, since conv_transpose2d reads it as [in_ch=Cout, out_ch=Cin]
        let wdata = random_data(&mut r, cout * cin * k * k, -1.0, 1.0, 0.0);
        let w_conv = Tensor::new(vec![cout, cin, k, k], wdata.clone());
        let w_tr = Tensor::new(vec![cout, cin, k, k], wdata);

        let cx = conv2d(&x, &w_conv, None, stride, PadSpec::zero(pad)).unwrap();
        let oh = cx.shape()[2];
        let ow = cx.shape()[3];
        let y = Tensor::new(
            vec![b, cout, oh, ow],
            random_data(&mut r, b * cout * oh * ow, -1.0, 1.0, 0.0),
        );
        // output_padding recovers the exact pre-conv extent
        let out_pad_h = h + 2 * pad - ((oh - 1) * stride + k);
        let out_pad_w = w + 2 * pad - ((ow - 1) * stride + k);
        assert!(out_pad_h < stride && out_pad_h == out_pad_w);
        let ty = conv_transpose2d(&y, &w_tr, None, stride, pad, out_pad_h).unwrap();
        assert_eq!(ty.shape(), x.shape(), "case {case}");

        let lhs = dot(&cx.to_vec(), &y.to_vec());
        let rhs = dot(&x.to_vec(), &ty.to_vec());
        worst = worst.max((lhs - rhs).abs());
    }
    worst
}

pub fn conv2d_worst(cases: usize) -> f64 {
    let mut r = rng(101);
    let mut worst = 0.0f64;
    for case in 0..cases {
        let b = r.random_range(1..3usize);
        let cin = r.random_range(1..3usize);
        let cout = r.random_range(1..4usize);
        let k = r.random_range(1..4usize);
        let h = r.random_range(k..6usize.max(k + 1));
        let w = r.random_range(k..6usize.max(k + 1));
        let stride = r.random_range(1..3usize);
        let pad_amt = r.random_range(0..k);
        let kind = if case % 2 == 0 && pad_amt < h && pad_amt < w {
            PadKind::Reflection
        } else {
            PadKind::Zero
        };
        let pad = PadSpec {
            kind,
            amount: pad_amt,
        };
        let shapes = vec![vec![b, cin, h, w], vec![cout, cin, k, k], vec![cout]];
        let datas: Vec<Vec<f64>> = shapes
            .iter()
            .map(|s| random_data(&mut r, s.iter().product(), -1.0, 1.0, 0.0))
            .collect();
        worst = worst.max(gradient_check(&shapes, &datas, &|leaves| {
            conv2d(&leaves[0], &leaves[1], Some(&leaves[2]), stride, pad)
                .unwrap()
                .sum()
        }));
    }
    worst
}

pub fn conv_transpose2d_worst(cases: usize) -> f64 {
    let mut r = rng(202);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let b = r.random_range(1..3usize);
        let cin = r.random_range(1..3usize);
        let cout = r.random_range(1..3usize);
        let k = r.random_range(1..4usize);
        let h = r.random_range(2..5usize);
        let w = r.random_range(2..5usize);
        let stride = r.random_range(1..3usize);
        let outpad = r.random_range(0..stride);
        let pad = r.random_range(0..(k / 2 + 1));
        let shapes = vec![vec![b, cin, h, w], vec![cin, cout, k, k], vec![cout]];
        let datas: Vec<Vec<f64>> = shapes
            .iter()
            .map(|s| random_data(&mut r, s.iter().product(), -1.0, 1.0, 0.0))
            .collect();
        worst = worst.max(gradient_check(&shapes, &datas, &|leaves| {
            conv_transpose2d(&leaves[0], &leaves[1], Some(&leaves[2]), stride, pad, outpad)
                .unwrap()
                .square()
                .mean()
        }));
    }
    worst
}

pub fn instance_norm_worst(cases: usize) -> f64 {
    let mut r = rng(303);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let b = r.random_range(1..3usize);
        let c = r.random_range(1..3usize);
        let h = r.random_range(2..5usize);
        let w = r.random_range(2..5usize);
        let shapes = vec![vec![b, c, h, w], vec![c], vec![c]];
        let datas: Vec<Vec<f64>> = shapes
            .iter()
            .map(|s| random_data(&mut r, s.iter().product(), -2.0, 2.0, 0.0))
            .collect();
        worst = worst.max(gradient_check(&shapes, &datas, &|leaves| {
            instance_norm(&leaves[0], &leaves[1], &leaves[2], 1e-3)
                .unwrap()
                .square()
                .mean()
        }));
    }
    worst
}

pub fn batch_norm_worst(cases: usize) -> f64 {
    let mut r = rng(404);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let b = r.random_range(2..4usize);
        let c = r.random_range(1..3usize);
        let h = r.random_range(2..4usize);
        let w = r.random_range(2..4usize);
        let shapes = vec![vec![b, c, h, w], vec![c], vec![c]];
        let datas: Vec<Vec<f64>> = shapes
            .iter()
            .map(|s| random_data(&mut r, s.iter().product(), -2.0, 2.0, 0.0))
            .collect();
        worst = worst.max(gradient_check(&shapes, &datas, &|leaves| {
            batch_norm_train(&leaves[0], &leaves[1], &leaves[2], 1e-3)
                .unwrap()
                .0
                .square()
                .mean()
        }));
    }
    worst
}

/// relu, leaky relu, tanh, and abs together; inputs avoid the kinks.
pub fn activations_worst(cases: usize) -> f64 {
    let mut r = rng(505);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let n = r.random_range(2..7usize);
        let shapes = vec![vec![n, n]];
        let datas = vec![random_data(&mut r, n * n, -2.0, 2.0, 1e-2)];
        for f in 0..4usize {
            worst = worst.max(gradient_check(&shapes, &datas, &|leaves| match f {
                0 => leaves[0].relu().square().mean(),
                1 => leaves[0].leaky_relu(0.2).square().mean(),
                2 => leaves[0].tanh_act().square().mean(),
                _ => leaves[0].abs().mean(),
            }));
        }
    }
    worst
}

/// conv -> instance norm -> tanh, the generator's basic stanza.
pub fn composed_conv_norm_tanh_worst(cases: usize) -> f64 {
    let mut r = rng(606);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let cin = r.random_range(1..3usize);
        let cout = r.random_range(1..3usize);
        let h = r.random_range(3..6usize);
        let w = r.random_range(3..6usize);
        let shapes = vec![
            vec![1, cin, h, w],
            vec![cout, cin, 3, 3],
            vec![cout],
            vec![cout],
            vec![cout],
        ];
        let datas: Vec<Vec<f64>> = shapes
            .iter()
            .map(|s| random_data(&mut r, s.iter().product(), -1.0, 1.0, 0.0))
            .collect();
        worst = worst.max(gradient_check(&shapes, &datas, &|l| {
            let y = conv2d(&l[0], &l[1], Some(&l[2]), 1, PadSpec::reflection(1)).unwrap();
            let y = instance_norm(&y, &l[3], &l[4], 1e-3).unwrap();
            y.tanh_act().square().mean()
        }));
    }
    worst
}

/// Residual block: conv-norm-relu-conv-norm plus skip connection.
pub fn residual_block_worst(cases: usize) -> f64 {
    let mut r = rng(707);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let c = r.random_range(1..3usize);
        let h = r.random_range(3..6usize);
        let w = r.random_range(3..6usize);
        let shapes = vec![
            vec![1, c, h, w],
            vec![c, c, 3, 3],
            vec![c],
            vec![c],
            vec![c],
            vec![c, c, 3, 3],
            vec![c],
            vec![c],
            vec![c],
        ];
        let datas: Vec<Vec<f64>> = shapes
            .iter()
            .map(|s| random_data(&mut r, s.iter().product(), -1.0, 1.0, 0.0))
            .collect();
        worst = worst.max(gradient_check(&shapes, &datas, &|l| {
            let y = conv2d(&l[0], &l[1], Some(&l[2]), 1, PadSpec::reflection(1)).unwrap();
            let y = instance_norm(&y, &l[3], &l[4], 1e-3).unwrap();
            let y = y.relu();
            let y = conv2d(&y, &l[5], Some(&l[6]), 1, PadSpec::reflection(1)).unwrap();
            let y = instance_norm(&y, &l[7], &l[8], 1e-3).unwrap();
            y.add(&l[0]).unwrap().square().mean()
        }));
    }
    worst
}
