// mdbook can't run Rust snippets against a workspace crate, so every chapter
// is included as the doc comment of an empty module and `cargo test --doc`
// runs the code blocks. One module per chapter keeps failures attributable.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/hamiltonian.md")]
pub mod hamiltonian {}
#[doc = include_str!("src/composite-pulses.md")]
pub mod composite_pulses {}
#[doc = include_str!("src/targets-and-loss.md")]
pub mod targets_and_loss {}
#[doc = include_str!("src/optimizer.md")]
pub mod optimizer {}
#[doc = include_str!("src/thermometry.md")]
pub mod thermometry {}
#[doc = include_str!("src/robustness.md")]
pub mod robustness {}
#[doc = include_str!("src/cli.md")]
pub mod cli {}
#[doc = include_str!("../README.md")]
pub mod readme {}
