use dirac_split_web::{constants_impl, convergence_impl, simulate_impl};

#[test]
fn simulate_layout_and_conservation() {
    let out = simulate_impl(1.0, 1.0, 0.5, 0.5, 1.0, 0.0625, 16, 16).unwrap();
    let (rows, cols) = (out[0] as usize, out[1] as usize);
    assert_eq!(rows, 17);
    assert_eq!(out.len(), 4 + rows * cols);
    assert_eq!(out[3], 0.0625);
    let mass = |r: usize| out[4 + r * cols..4 + (r + 1) * cols].iter().sum::<f64>();
    let m0 = mass(0);
    for r in 1..rows {
        assert!((mass(r) - m0).abs() <= 1e-12 * m0);
    }
}

#[test]
fn simulate_rejects_oversized_runs() {
    assert!(simulate_impl(1.0, 1.0, 0.5, 0.5, 1.0, 1.0 / 4096.0, 4096, 16).is_err());
    assert!(simulate_impl(-1.0, 1.0, 0.5, 0.5, 1.0, 0.0625, 4, 16).is_err());
}

#[test]
fn convergence_pairs() {
    let out = convergence_impl(1.0, 1.0, 0.5, 0.5, 1.0, 1.0, 3, 6).unwrap();
    assert_eq!(out.len(), 6);
    assert_eq!([out[0], out[2], out[4]], [4.0, 5.0, 6.0]);
    assert!(out[3] < out[1] && out[5] < out[3]);
}

#[test]
fn constants_json() {
    let text = constants_impl(1.0, 1.0, 0.5, 1.0, 1.0).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["kappa"], 52.0);
    assert_eq!(v["C_star"], 12.0);
}
