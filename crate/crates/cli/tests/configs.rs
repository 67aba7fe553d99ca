use std::path::PathBuf;

use phononcp_cli::config::RunConfig;

fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

#[test]
fn shipped_configs_parse() {
    let dir = repo_root().join("configs");
    let mut count = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.thermometry_setup().unwrap();
            count += 1;
        }
    }
    assert!(count >= 4);
}

#[test]
fn guide_quotes_the_high_fock_config() {
    let chapter = std::fs::read_to_string(repo_root().join("book/src/cli.md")).unwrap();
    let quoted = chapter
        .split("```toml\n")
        .nth(1)
        .and_then(|rest| rest.split("```").next())
        .unwrap();
    let file =
        std::fs::read_to_string(repo_root().join("configs/thermometry-high-fock.toml")).unwrap();
    assert_eq!(quoted, file);
}
