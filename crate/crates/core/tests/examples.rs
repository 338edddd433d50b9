//! Every example must keep running to completion.

#[allow(dead_code)]
#[path = "../examples/analyze_presets.rs"]
mod analyze_presets;

#[test]
fn analyze_presets_runs() {
    analyze_presets::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/shift_demo.rs"]
mod shift_demo;

#[test]
fn shift_demo_runs() {
    shift_demo::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/conv_equivalence.rs"]
mod conv_equivalence;

#[test]
fn conv_equivalence_runs() {
    conv_equivalence::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/gradient_check.rs"]
mod gradient_check;

#[test]
fn gradient_check_runs() {
    gradient_check::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/scale_invariance.rs"]
mod scale_invariance;

#[test]
fn scale_invariance_runs() {
    scale_invariance::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/checkpoint_roundtrip.rs"]
mod checkpoint_roundtrip;

#[test]
fn checkpoint_roundtrip_runs() {
    checkpoint_roundtrip::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/cli_session.rs"]
mod cli_session;

#[test]
fn cli_session_runs() {
    cli_session::run_example().unwrap();
}

#[allow(dead_code)]
#[path = "../examples/toy_training.rs"]
mod toy_training;

#[test]
fn toy_training_runs() {
    toy_training::run_example().unwrap();
}
