//! A manifest-driven end-to-end run: arithmetic classification, synthetic
//! tier, tail fit under the requested gauge, and a verdicts document with
//! reproducible, hash-stamped artifacts.
//!
//! Run with `cargo run --release --example full_pipeline`.

use yoccoz_lab::pipeline::{run_pipeline, validate_manifest, ExperimentManifest};

fn main() -> yoccoz_lab::Result<()> {
    let out = std::env::temp_dir().join("ylab-example-run");
    let manifest = ExperimentManifest {
        name: "golden-synthetic-demo".into(),
        terms: None,
        generator: Some("golden".into()),
        generator_param: None,
        spike_at: None,
        n_terms: 24,
        tier: "synthetic-rotation".into(),
        depth: 10,
        budget: 60_000,
        precision_bits: 256,
        seed: 5,
        gauge: "david".into(),
        output_dir: out.clone(),
    };

    let diags = validate_manifest(&manifest);
    assert!(diags.is_empty(), "manifest rejected: {diags:?}");

    let bundle = run_pipeline(&manifest)?;
    println!("manifest hash  {}", bundle.manifest_hash);
    println!("overall pass   {}", bundle.pass);
    for f in &bundle.files {
        println!("artifact       {}", f.display());
    }

    // The verdicts document is the machine-readable summary.
    let v: serde_json::Value = serde_json::from_str(&bundle.verdicts_json).unwrap();
    println!("verdict        {}", v["verdict"]);
    if let Some(h) = v["synthetic"].as_object() {
        println!(
            "forward tail   {} (inverse {})",
            h["fwd_verdict"], h["inv_verdict"]
        );
    }
    Ok(())
}
