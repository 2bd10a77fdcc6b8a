use eharq::acceptance::{check_kernel_and_measures, IdentityLog, VerifyOptions};

#[test]
fn perturbed_kernel_is_caught() {
    let opts = VerifyOptions { kernel_perturbation: 1e-6, ..VerifyOptions::default() };
    let out = check_kernel_and_measures(&opts, &IdentityLog::default());
    assert!(!out.passed);
    assert!(out.detail.contains("row sum"), "{}", out.detail);
}

#[test]
fn unperturbed_kernel_passes() {
    let out = check_kernel_and_measures(&VerifyOptions::default(), &IdentityLog::default());
    assert!(out.passed, "{}", out.detail);
}
