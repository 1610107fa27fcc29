//! Drives the `svb` command line in-process through a complete run:
//! synthesize, mine batches, detect language, score, calibrate, fuse and
//! evaluate. Files go to a temporary directory.

use sv_backend::cli;

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let score = |mode: &str, out: &str| {
        let mut v = vec![
            "score".to_string(),
            "--trials".into(),
            p("trials.tsv"),
            "--enroll".into(),
            p("enroll.tsv"),
            "--embeddings".into(),
            p("embeddings.tsv"),
            "--mode".into(),
            mode.into(),
            "--out".into(),
            p(out),
        ];
        if mode != "raw" {
            v.extend(["--cohort-domain".into(), "DEEPMINE".into()]);
        }
        if mode == "snorm-lid" {
            v.extend([
                "--lid".into(),
                p("lid.tsv"),
                "--alpha".into(),
                p("alpha.tsv"),
            ]);
        }
        v
    };
    let steps: Vec<Vec<String>> = vec![
        vec!["synth".into(), "--out-dir".into(), p("")],
        vec![
            "plan-batches".into(),
            "--prototypes".into(),
            p("prototypes.tsv"),
            "--embeddings".into(),
            p("embeddings.tsv"),
            "--mode".into(),
            "balanced".into(),
            "--passes".into(),
            "2".into(),
            "--out".into(),
            p("manifest.tsv"),
        ],
        vec![
            "lid-train".into(),
            "--prototypes".into(),
            p("prototypes.tsv"),
            "--out".into(),
            p("gb.tsv"),
        ],
        vec![
            "lid-classify".into(),
            "--model".into(),
            p("gb.tsv"),
            "--embeddings".into(),
            p("embeddings.tsv"),
            "--trials".into(),
            p("trials.tsv"),
            "--out".into(),
            p("lid.tsv"),
        ],
        vec![
            "alpha".into(),
            "--prototypes".into(),
            p("prototypes.tsv"),
            "--out".into(),
            p("alpha.tsv"),
        ],
        score("snorm", "snorm.tsv"),
        score("snorm-lid", "lid-snorm.tsv"),
        vec![
            "calibrate".into(),
            "--train".into(),
            p("snorm.tsv"),
            "--model-out".into(),
            p("cal-a.tsv"),
            "--apply".into(),
            p("snorm.tsv"),
            "--apply-out".into(),
            p("snorm.cal.tsv"),
        ],
        vec![
            "calibrate".into(),
            "--train".into(),
            p("lid-snorm.tsv"),
            "--model-out".into(),
            p("cal-b.tsv"),
            "--apply".into(),
            p("lid-snorm.tsv"),
            "--apply-out".into(),
            p("lid-snorm.cal.tsv"),
        ],
        vec![
            "fuse".into(),
            "--scores".into(),
            format!("{},{}", p("snorm.cal.tsv"), p("lid-snorm.cal.tsv")),
            "--weights".into(),
            "1,1".into(),
            "--out".into(),
            p("fused.tsv"),
        ],
        vec!["eval".into(), "--scores".into(), p("fused.tsv")],
    ];
    for args in steps {
        println!("$ svb {}", args[0]);
        let code = cli::run(std::iter::once("svb".to_string()).chain(args.iter().cloned()));
        anyhow::ensure!(code == cli::EXIT_OK, "svb {} exited with {code}", args[0]);
    }
    Ok(())
}
