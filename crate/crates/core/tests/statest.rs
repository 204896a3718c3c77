use qflrl_core::statest::{train_reconstructor, ReconstructConfig};

#[test]
fn reconstructor_approaches_the_bayes_oracle() {
    let r = train_reconstructor(&ReconstructConfig::default(), 7).unwrap();
    println!(
        "test {:.4} train {:.4} oracle {:.4} ± {:.4}",
        r.test_mse, r.train_mse, r.oracle_mse, r.oracle_se
    );
    assert!(r.test_mse <= 1.10 * r.oracle_mse);
    assert!(r.test_mse >= r.oracle_mse - 3.0 * r.oracle_se);
    assert!(r.test_mse < r.baseline_mse);
    // fresh data every step leaves no room for overfitting
    assert!((r.train_mse - r.test_mse).abs() <= 0.1 * r.test_mse);
}
