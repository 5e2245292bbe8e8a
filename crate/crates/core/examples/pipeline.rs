//! Every command of the `crowding` binary in order, on a reduced synthetic
//! market. Pass an output directory as the first argument.

use crowding::pipeline::{run_all, RunConfig};

fn main() -> crowding::error::Result<()> {
    let mut cfg = RunConfig::from_toml(
        r#"
        seed = 3
        [synth]
        n_stocks = 40
        n_days = 400
        [stats]
        n_samples = 50
        "#,
    )?;
    cfg.out = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("crowding-pipeline"));
    for outcome in run_all(&cfg)? {
        let m = &outcome.manifest;
        println!("{:<7} {} outputs, {} warnings", m.command, m.outputs.len(), m.warnings.len());
        for o in &m.outputs {
            println!("    {}  {}", &o.sha256[..12], o.path);
        }
    }
    Ok(())
}
