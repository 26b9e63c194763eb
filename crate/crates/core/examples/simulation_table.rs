//! A small simulation sweep driven by a TOML config, as `gpgraph simulate` runs it.

use gpgraph::harness::{configs_from_toml, run_config, summary_table};

const CONFIG: &str = r#"
kernel = ["brownian", "kms"]
regime = "complete"
n = [50, 100]
grid = 120
partition = 20
reps = 4
seed = 2024
"#;

fn main() -> gpgraph::Result<()> {
    let configs = configs_from_toml(CONFIG, "inline.toml")?;
    let rows = configs.iter().map(run_config).collect::<gpgraph::Result<Vec<_>>>()?;
    print!("{}", summary_table(&rows));
    Ok(())
}
