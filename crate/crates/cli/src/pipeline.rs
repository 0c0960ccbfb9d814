use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use gprn_core::error::{Error, Result};
use gprn_core::synth;
use serde::Serialize;

use crate::commands::{
    self, open_reader, Ctx, DedupArgs, FilterArgs, GateArgs, IoArgs, MixArgs, PackArgs,
};
use crate::config::RunConfig;

#[derive(Debug, Clone, Args, Serialize)]
pub struct PipelineArgs {
    /// Recipe: a run configuration with a `[pipeline]` input and stage blocks.
    #[arg(long)]
    pub recipe: PathBuf,
    /// Working directory for stage outputs.
    #[arg(short, long)]
    pub workdir: PathBuf,
    /// Input shards, or `synth:N` for a generated corpus (overrides the recipe).
    #[arg(short, long)]
    pub input: Option<String>,
}

/// Runs enrich, filter, gate, dedup, mix and pack, each stage reading the
/// previous stage's shards. Mixing is skipped when the recipe names no
/// schedule; its sources are the deduplicated documents grouped by
/// `source`.
pub fn run(ctx: &mut Ctx, a: PipelineArgs) -> Result<Option<PathBuf>> {
    commands::need(&a.recipe)?;
    let recipe = RunConfig::load(&a.recipe)?;
    if !ctx.seed_explicit {
        if let Some(s) = recipe.seed {
            ctx.seed = s;
            ctx.seed_explicit = true;
            ctx.report.seed = s;
        }
    }
    ctx.config = recipe;
    let w = &a.workdir;
    let stage = |n: &str| w.join(n);

    let input = match (&a.input, &ctx.config.pipeline.input) {
        (Some(s), _) => s.clone(),
        (None, Some(p)) => {
            let s = p.to_string_lossy();
            if s.starts_with("synth:") {
                s.into_owned()
            } else {
                ctx.config.resolve(p).to_string_lossy().into_owned()
            }
        }
        (None, None) => {
            return Err(Error::config(
                "pipeline needs an input (`[pipeline] input` or --input)",
            ))
        }
    };
    let input = match input.strip_prefix("synth:") {
        Some(n) => {
            let n: usize = n
                .parse()
                .map_err(|_| Error::config(format!("bad synthetic input `{input}`")))?;
            let dir = stage("00-input");
            ctx.set_prefix("input.");
            let mut sink = ctx.sink(&dir)?;
            for d in synth::corpus(n, ctx.seed) {
                sink.push(&d)?;
            }
            ctx.count("docs_out", sink.finish()? as f64);
            dir
        }
        None => PathBuf::from(input),
    };
    if ctx.dry_run {
        // Later stages read earlier outputs, so only the first can be checked.
        ctx.set_prefix("enrich.");
        commands::enrich(
            ctx,
            IoArgs {
                input,
                output: stage("01-enrich"),
            },
        )?;
        return Ok(None);
    }

    ctx.set_prefix("enrich.");
    commands::enrich(
        ctx,
        IoArgs {
            input,
            output: stage("01-enrich"),
        },
    )?;
    ctx.set_prefix("filter.");
    commands::filter(
        ctx,
        FilterArgs {
            io: IoArgs {
                input: stage("01-enrich"),
                output: stage("02-filter"),
            },
            strict: true,
        },
    )?;
    ctx.set_prefix("gate.");
    commands::gate(
        ctx,
        GateArgs {
            io: IoArgs {
                input: stage("02-filter"),
                output: stage("03-gate"),
            },
            scorer: None,
            fraction: None,
        },
    )?;
    ctx.set_prefix("dedup.");
    commands::dedup(
        ctx,
        DedupArgs {
            io: IoArgs {
                input: stage("03-gate"),
                output: stage("04-dedup"),
            },
            splits: None,
            shingle_size: None,
            verify_threshold: None,
            single_stage: false,
            carry_member_bands: false,
            clusters: Some(stage("04-dedup.clusters.tsv")),
            cache: None,
        },
    )?;

    let pack_input = if ctx.config.mix.schedule.is_some() {
        ctx.set_prefix("mix.");
        let mut groups: BTreeMap<String, Vec<gprn_core::Document>> = BTreeMap::new();
        for d in open_reader(&stage("04-dedup"))? {
            let d = d?;
            groups.entry(d.source.clone()).or_default().push(d);
        }
        let mut sources = Vec::new();
        for (name, docs) in groups {
            let dir = stage("05-sources").join(&name);
            let mut sink = ctx.sink(&dir)?;
            for d in &docs {
                sink.push(d)?;
            }
            sink.finish()?;
            sources.push(format!("{name}={}", dir.display()));
        }
        commands::mix(
            ctx,
            MixArgs {
                schedule: None,
                sources,
                scale: None,
                tokenizer: None,
                output: stage("06-mix"),
            },
        )?;
        stage("06-mix")
    } else {
        stage("04-dedup")
    };

    ctx.set_prefix("pack.");
    commands::pack(
        ctx,
        PackArgs {
            input: pack_input,
            output: stage("07-pack"),
            seq_len: None,
            group_size: None,
            buffer_size: None,
            tokenizer: None,
        },
    )?;
    ctx.set_prefix("");
    Ok(Some(a.workdir))
}
