//! Finite-difference checks of every backward pass, plus a demonstration
//! that a subtly wrong adjoint is caught.

use s2mlp::gradcheck::{self, Scope};
use s2mlp::{Result, ShiftConfig};

pub fn run_example() -> Result<()> {
    let reports = gradcheck::run_suite(Scope::All, 7)?;
    for r in &reports {
        println!("{r}");
    }
    assert!(reports.iter().all(|r| r.pass));

    let cfg = ShiftConfig::preset("a")?;
    let broken =
        gradcheck::check_shift_with(&cfg, &[5, 5, 8], 7, gradcheck::skewed_shift_backward)?;
    println!("\nwith an off-by-one adjoint:\n{broken}");
    assert!(!broken.pass);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
