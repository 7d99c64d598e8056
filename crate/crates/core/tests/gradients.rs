//! Tape gradients of soft deduction against central finite differences,
//! and one-hot deduction against a plain boolean forward chainer.

mod checks;

#[test]
fn backward_matches_central_differences() {
    let s = checks::gradients_match_finite_differences().unwrap();
    eprintln!("{s}");
}

#[test]
fn one_hot_deduction_equals_boolean_chaining() {
    checks::one_hot_matches_boolean_chaining().unwrap();
}
