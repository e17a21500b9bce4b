//! Central finite-difference checks of every backward pass in 64-bit.

mod common;

use common::*;
use rosynet::conv::Aggregation;

fn assert_close(name: &str, r: GradCheck, tol: f64) {
    println!("{name}: {r:?}");
    assert!(r.checked > 0, "{name}: nothing checked");
    assert!(r.kinks * 5 <= r.checked + r.kinks, "{name}: too many kinks {r:?}");
    assert!(r.max_rel <= tol, "{name}: relative error {} > {tol}", r.max_rel);
}

#[test]
fn texture_conv_max() {
    for seed in 0..5 {
        assert_close("texture conv max", texture_conv_case(Aggregation::Max, seed), 1e-4);
    }
}

#[test]
fn texture_conv_avg() {
    for seed in 0..5 {
        assert_close("texture conv avg", texture_conv_case(Aggregation::Avg, seed), 1e-4);
    }
}

#[test]
fn rosy4m() {
    for seed in 0..5 {
        assert_close("rosy4m", rosy4m_case(seed), 1e-4);
    }
}

#[test]
fn patch_encoder() {
    for seed in 0..3 {
        assert_close("encoder", encoder_case(seed), 1e-4);
    }
}

#[test]
fn mnist_rosy_network() {
    assert_close("mnist rosy", mnist_rosy_case(1), 1e-4);
}

#[test]
fn toy_unet_end_to_end() {
    assert_close("unet", unet_case(3), 1e-3);
}
