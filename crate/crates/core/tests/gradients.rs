mod common;

use common::grad;

fn assert_layer(name: &str, w: grad::Worst) {
    assert!(w.cases >= 50, "{name}: only {} cases", w.cases);
    assert!(w.f64 < grad::TOL_F64, "{name}: f64 relative error {:e}", w.f64);
    assert!(w.f32 < grad::TOL_F32, "{name}: f32 relative error {:e}", w.f32);
}

#[test]
fn embedding_gradient() {
    assert_layer("embedding", grad::embedding(60, 1));
}

#[test]
fn linear_gradient() {
    assert_layer("linear", grad::linear(60, 2));
}

#[test]
fn relu_gradient() {
    assert_layer("relu", grad::relu(60, 3));
}

#[test]
fn batchnorm_gradient_train_and_eval() {
    assert_layer("batchnorm", grad::batchnorm(60, 4));
}

#[test]
fn dropout_gradient_with_fixed_mask() {
    assert_layer("dropout", grad::dropout(60, 5));
}

#[test]
fn cross_entropy_gradient() {
    assert_layer("softmax_cross_entropy", grad::cross_entropy(60, 6));
}

#[test]
fn assembled_network_gradient() {
    assert_layer("embnet", grad::network(60, 7));
}

#[test]
fn relative_error_is_scale_free() {
    assert_eq!(grad::rel_err(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
    let a = grad::rel_err(&[1.0, 2.0], &[1.0, 2.1]);
    let b = grad::rel_err(&[1e6, 2e6], &[1e6, 2.1e6]);
    assert!((a - b).abs() < 1e-12);
}
