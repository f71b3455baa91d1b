mod common;

use common::{bilinear, conv3d, depthwise, matmul, max_rel_diff, random_tensor, random_vec, sum_axis, ConvGeom};
use timeconv::data::resize_bilinear;
use timeconv::layers::{
    Activation, Conv2Plus1d, Conv2Plus1dSpec, Conv2d, Conv2dSpec, Conv3d, Conv3dSpec, DepthwiseConv2d, DepthwiseSpec,
    Module, Padding, SeparableConv2d, SeparableSpec,
};
use timeconv::{ReduceMode, Rng, Tensor};

const INSTANCES: u64 = 24;
const TOL: f64 = 1e-5;

fn pick(rng: &mut Rng, lo: usize, hi: usize) -> usize {
    lo + rng.below(hi - lo + 1)
}

fn pad(rng: &mut Rng) -> Padding {
    Padding {
        before: rng.below(2),
        after: rng.below(2),
    }
}

fn flat_geom(k: usize, s: usize, ph: Padding, pw: Padding) -> ConvGeom {
    ConvGeom {
        kt: 1,
        kh: k,
        kw: k,
        st: 1,
        s,
        pt: Padding::NONE,
        ph,
        pw,
    }
}

/// The f32 path against the f64 oracle, scaled by the output magnitude.
fn f32_matches(layer_out: &Tensor<f32>, oracle: &[f64]) -> f64 {
    let got: Vec<f64> = layer_out.data().iter().map(|&v| v as f64).collect();
    max_rel_diff(&got, oracle, 1.0)
}

#[test]
fn conv2d_matches_loops() {
    for seed in 0..INSTANCES {
        let mut rng = Rng::new(seed);
        let (b, c, o, k) = (pick(&mut rng, 1, 3), pick(&mut rng, 1, 4), pick(&mut rng, 1, 5), pick(&mut rng, 1, 4));
        let (h, w, s) = (pick(&mut rng, k, 9), pick(&mut rng, k, 9), pick(&mut rng, 1, 3));
        let (ph, pw) = (pad(&mut rng), pad(&mut rng));
        let spec = Conv2dSpec::new(c, o, k).stride(s).pad_hw(ph, pw).bias(seed % 2 == 0);
        let mut conv = Conv2d::<f64>::new("c", spec, &mut rng).unwrap();
        if let Some(bias) = conv.bias.as_mut() {
            *bias = random_tensor(&[o], &mut rng);
        }
        let x = random_tensor(&[b, c, h, w], &mut rng);
        let (want, shape) = conv3d(
            x.data(),
            [b, c, 1, h, w],
            conv.weight.data(),
            o,
            conv.bias.as_ref().map(|t| t.data()),
            &flat_geom(k, s, ph, pw),
        );
        let got = conv.forward(&x).unwrap();
        assert_eq!(got.shape(), &[shape[0], shape[1], shape[3], shape[4]]);
        assert!(max_rel_diff(got.data(), &want, 1e-8) < TOL, "seed {seed}");
        let conv32 = Conv2d::<f32> {
            name: "c".into(),
            spec,
            weight: conv.weight.cast(),
            bias: conv.bias.as_ref().map(|t| t.cast()),
        };
        assert!(f32_matches(&conv32.forward(&x.cast()).unwrap(), &want) < TOL, "f32 seed {seed}");
    }
}

#[test]
fn conv3d_matches_loops() {
    for seed in 0..INSTANCES {
        let mut rng = Rng::new(100 + seed);
        let (b, c, o) = (pick(&mut rng, 1, 2), pick(&mut rng, 1, 3), pick(&mut rng, 1, 4));
        let (kt, k) = (pick(&mut rng, 1, 3), pick(&mut rng, 1, 3));
        let (t, h, w) = (pick(&mut rng, kt, 5), pick(&mut rng, k, 7), pick(&mut rng, k, 7));
        let (st, s) = (pick(&mut rng, 1, 2), pick(&mut rng, 1, 2));
        let (pt, ph, pw) = (pad(&mut rng), pad(&mut rng), pad(&mut rng));
        let spec = Conv3dSpec::new(c, o, kt, k).stride(st, s).pad_thw(pt, ph, pw);
        let mut conv = Conv3d::<f64>::new("c", spec, &mut rng).unwrap();
        conv.bias = Some(random_tensor(&[o], &mut rng));
        let x = random_tensor(&[b, c, t, h, w], &mut rng);
        let g = ConvGeom {
            kt,
            kh: k,
            kw: k,
            st,
            s,
            pt,
            ph,
            pw,
        };
        let (want, shape) = conv3d(x.data(), [b, c, t, h, w], conv.weight.data(), o, conv.bias.as_ref().map(|t| t.data()), &g);
        let got = conv.forward(&x).unwrap();
        assert_eq!(got.shape(), &shape);
        assert!(max_rel_diff(got.data(), &want, 1e-8) < TOL, "seed {seed}");
    }
}

#[test]
fn depthwise_and_separable_match_loops() {
    for seed in 0..INSTANCES {
        let mut rng = Rng::new(200 + seed);
        let (b, c, o, k) = (pick(&mut rng, 1, 3), pick(&mut rng, 1, 5), pick(&mut rng, 1, 5), pick(&mut rng, 1, 3));
        let (h, w, s) = (pick(&mut rng, k, 8), pick(&mut rng, k, 8), pick(&mut rng, 1, 2));
        let x = random_tensor(&[b, c, h, w], &mut rng);

        let spec = DepthwiseSpec::new(c, k).stride(s).same_for(h, w).bias(false);
        let dw = DepthwiseConv2d::<f64>::new("d", spec, &mut rng).unwrap();
        let (want, shape) = depthwise(x.data(), [b, c, h, w], dw.weight.data(), k, s, spec.pad_h, spec.pad_w);
        let got = dw.forward(&x).unwrap();
        assert_eq!(got.shape(), &shape);
        assert!(max_rel_diff(got.data(), &want, 1e-8) < TOL, "depthwise seed {seed}");

        let p = rng.below(2);
        let sep = SeparableConv2d::<f64>::new("s", SeparableSpec::new(c, o, k).pad(p).bias(false), &mut rng).unwrap();
        let (mid, ms) = depthwise(
            x.data(),
            [b, c, h, w],
            sep.depthwise.weight.data(),
            k,
            1,
            Padding::symmetric(p),
            Padding::symmetric(p),
        );
        let (want, _) = conv3d(
            &mid,
            [ms[0], ms[1], 1, ms[2], ms[3]],
            sep.pointwise.weight.data(),
            o,
            None,
            &flat_geom(1, 1, Padding::NONE, Padding::NONE),
        );
        assert!(max_rel_diff(sep.forward(&x).unwrap().data(), &want, 1e-8) < TOL, "separable seed {seed}");
    }
}

#[test]
fn conv2plus1d_matches_staged_loops() {
    for seed in 0..INSTANCES {
        let mut rng = Rng::new(300 + seed);
        let (b, c, m, o) = (pick(&mut rng, 1, 2), pick(&mut rng, 1, 3), pick(&mut rng, 1, 4), pick(&mut rng, 1, 3));
        let (kt, k, s) = (pick(&mut rng, 1, 3), pick(&mut rng, 1, 3), pick(&mut rng, 1, 2));
        let (t, h, w) = (pick(&mut rng, kt, 5), pick(&mut rng, k, 7), pick(&mut rng, k, 7));
        let (p, p_t) = (pad(&mut rng), pad(&mut rng));
        let spec = Conv2Plus1dSpec::new(c, m, o, k, kt, s, p, p_t, true);
        let mut layer = Conv2Plus1d::<f64>::new("r", spec, &mut rng).unwrap();
        layer.spatial.bias = Some(random_tensor(&[m], &mut rng));
        layer.temporal.bias = Some(random_tensor(&[o], &mut rng));
        let x = random_tensor(&[b, c, t, h, w], &mut rng);
        let spatial = ConvGeom {
            kt: 1,
            kh: k,
            kw: k,
            st: 1,
            s,
            pt: Padding::NONE,
            ph: p,
            pw: p,
        };
        let (mid, ms) = conv3d(x.data(), [b, c, t, h, w], layer.spatial.weight.data(), m, layer.spatial.bias.as_ref().map(|t| t.data()), &spatial);
        let mid: Vec<f64> = mid.into_iter().map(|v| v.max(0.0)).collect();
        let temporal = ConvGeom {
            kt,
            kh: 1,
            kw: 1,
            st: 1,
            s: 1,
            pt: p_t,
            ph: Padding::NONE,
            pw: Padding::NONE,
        };
        let (want, shape) = conv3d(&mid, ms, layer.temporal.weight.data(), o, layer.temporal.bias.as_ref().map(|t| t.data()), &temporal);
        let got = layer.forward(&x).unwrap();
        assert_eq!(got.shape(), &shape);
        assert!(max_rel_diff(got.data(), &want, 1e-8) < TOL, "seed {seed}");
    }
}

#[test]
fn relu_between_factorized_stages() {
    // the staged oracle above applies ReLU to the intermediate; confirm the
    // activation enum agrees with max(0, x)
    let x = Tensor::new(vec![4], vec![-1.0f64, 0.0, 0.5, 2.0]).unwrap();
    assert_eq!(Activation::Relu.apply(&x).data(), &[0.0, 0.0, 0.5, 2.0]);
}

#[test]
fn matmul_matches_triple_loop() {
    for seed in 0..INSTANCES {
        let mut rng = Rng::new(400 + seed);
        let (m, k, n) = (pick(&mut rng, 1, 17), pick(&mut rng, 1, 17), pick(&mut rng, 1, 17));
        let a = random_tensor(&[m, k], &mut rng);
        let b = random_tensor(&[k, n], &mut rng);
        let want = matmul(a.data(), b.data(), m, k, n);
        assert!(max_rel_diff(a.matmul(&b).unwrap().data(), &want, 1e-8) < TOL, "seed {seed}");
        let got32 = a.cast::<f32>().matmul(&b.cast()).unwrap();
        assert!(f32_matches(&got32, &want) < TOL, "f32 seed {seed}");
    }
}

#[test]
fn reduce_sum_matches_loops() {
    for seed in 0..INSTANCES {
        let mut rng = Rng::new(500 + seed);
        let shape: Vec<usize> = (0..pick(&mut rng, 1, 4)).map(|_| pick(&mut rng, 1, 5)).collect();
        let axis = rng.below(shape.len());
        let x = random_tensor(&shape, &mut rng);
        let want = sum_axis(x.data(), &shape, axis);
        let got = x.reduce(&[axis], ReduceMode::Sum, false).unwrap();
        assert!(max_rel_diff(got.data(), &want, 1e-8) < TOL, "seed {seed}");
    }
}

#[test]
fn bilinear_matches_loops() {
    for seed in 0..INSTANCES {
        let mut rng = Rng::new(600 + seed);
        let (sw, sh) = (pick(&mut rng, 1, 90), pick(&mut rng, 1, 90));
        let (dw, dh) = (pick(&mut rng, 1, 60), pick(&mut rng, 1, 60));
        let src: Vec<f64> = random_vec(sw * sh, &mut rng).into_iter().map(|v| (v + 1.0) / 2.0).collect();
        let want = bilinear(&src, sw, sh, dw, dh);
        let src32: Vec<f32> = src.iter().map(|&v| v as f32).collect();
        let got: Vec<f64> = resize_bilinear(&src32, sw, sh, dw, dh).into_iter().map(f64::from).collect();
        assert!(max_rel_diff(&got, &want, 1.0) < TOL, "seed {seed}: {sw}x{sh} -> {dw}x{dh}");
    }
}
