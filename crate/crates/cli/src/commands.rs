use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use nbsel_core::io::{
    collapse_multiclass, emit_report, emit_scatter, fingerprint, load_table, read_two_class, LoadedTable,
    RenderOptions, ReportFormat, RunConfig, RunReport, TableKind,
};
use nbsel_core::selector::pathology::{find_counterexample, PathologyKind, SearchConfig, SearchOutcome};
use nbsel_core::selector::registry::{selector_by_name, Exhaustive, SubsetSelector};
use nbsel_core::selector::{criterion_by_name, ExhaustiveBudget};
use nbsel_core::sensitivity::OverlapReport;
use nbsel_core::{
    compare_rank_tables, list_for_subset, rank_individual, run_sensitivity, sfs_select, ClassPriors, EngineConfig,
    Error, FeatureTable, NoImprovementRegion, PerturbationConfig, RankTable, StoppingRule,
};
use serde::Serialize;

use crate::{
    use_color, Command, Format, OracleArgs, OutputArgs, PathologyArgs, RankArgs, RegionArgs, SelectArgs,
    SensitivityArgs, TableArgs,
};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Select(a) => select(a),
        Command::Rank(a) => rank(a),
        Command::Sensitivity(a) => sensitivity(a),
        Command::Region(a) => region(a),
        Command::Oracle(a) => oracle(a),
        Command::Pathology(a) => pathology(a),
    }
}

fn load(args: &TableArgs) -> Result<FeatureTable> {
    let kind = if args.multiclass_target.is_some() {
        TableKind::MultiClass
    } else {
        TableKind::TwoClass
    };
    let loaded = load_table(&args.input, kind).with_context(|| format!("reading {}", args.input.display()))?;
    let table = match (loaded, &args.multiclass_target) {
        (LoadedTable::TwoClass(t), _) => t,
        (LoadedTable::MultiClass(m), Some(target)) => collapse_multiclass(&m, target)?,
        (LoadedTable::MultiClass(_), None) => unreachable!("multi-class tables are only read with a target"),
    };
    Ok(match args.clamp_epsilon {
        Some(eps) => table.clamped(eps)?,
        None => table,
    })
}

fn engine(args: &TableArgs) -> Result<EngineConfig> {
    let cfg = args.engine.config();
    cfg.validate()?;
    Ok(cfg)
}

fn open_out(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_json(value: &impl Serialize, out: &mut dyn Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn report_format(f: Format) -> ReportFormat {
    match f {
        Format::Tabular => ReportFormat::Tabular,
        Format::Structured => ReportFormat::Structured,
    }
}

fn run_report(
    strategy: &dyn SubsetSelector,
    table_args: &TableArgs,
    stop: StoppingRule,
    timestamps: bool,
    output: &OutputArgs,
) -> Result<()> {
    let table = load(table_args)?;
    let cfg = engine(table_args)?;
    let trace = strategy.select(&table, table_args.priors, &stop, &cfg)?;
    let report = RunReport {
        fingerprint: fingerprint(&table),
        config: RunConfig {
            strategy: strategy.name().to_string(),
            input: Some(table_args.input.display().to_string()),
            multiclass_target: table_args.multiclass_target.clone(),
            priors: table_args.priors,
            stop,
            engine: cfg,
            clamp_epsilon: table_args.clamp_epsilon,
        },
        trace,
        generated_at: timestamps.then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
    };
    let opts = RenderOptions {
        color: use_color(&output.out),
    };
    let mut out = open_out(&output.out)?;
    emit_report(&report, report_format(output.format), opts, &mut out)?;
    out.flush()?;
    Ok(())
}

fn select(a: SelectArgs) -> Result<()> {
    let stop = StoppingRule {
        target_count: a.d,
        target_error: a.target_error,
        min_reduction: a.min_reduction,
    };
    let strategy = selector_by_name(&a.strategy)?;
    run_report(strategy.as_ref(), &a.table, stop, a.timestamps, &a.output)
}

fn oracle(a: OracleArgs) -> Result<()> {
    let strategy = Exhaustive {
        budget: ExhaustiveBudget {
            max_subsets: a.max_subsets,
        },
    };
    run_report(&strategy, &a.table, StoppingRule::count(a.d), false, &a.output)
}

#[derive(Serialize)]
struct RankRow<'a> {
    rank: usize,
    feature: &'a str,
    c: f64,
    d: f64,
    score: f64,
}

fn rank(a: RankArgs) -> Result<()> {
    let table = load(&a.table)?;
    let cfg = engine(&a.table)?;
    let criterion = criterion_by_name(&a.criterion)?;
    let ranked = rank_individual(&table, a.table.priors, criterion.as_ref(), &cfg)?;
    let rows: Vec<RankRow> = ranked
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let f = &table.features()[r.index];
            RankRow {
                rank: k + 1,
                feature: &f.name,
                c: f.p_pos,
                d: f.p_neg,
                score: r.score,
            }
        })
        .collect();
    let mut out = open_out(&a.output.out)?;
    match a.output.format {
        Format::Tabular => {
            writeln!(out, "# criterion\t{}", criterion.name())?;
            writeln!(out, "rank\tfeature\tc\td\tscore")?;
            for r in &rows {
                writeln!(out, "{}\t{}\t{}\t{}\t{:.6}", r.rank, r.feature, r.c, r.d, r.score)?;
            }
        }
        Format::Structured => write_json(
            &serde_json::json!({ "criterion": criterion.name(), "ranking": rows }),
            &mut out,
        )?,
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SensitivityRun {
    sigma: f64,
    ranks: RankTable,
}

#[derive(Serialize)]
struct SensitivityOutput {
    runs: u64,
    d: usize,
    seed: u64,
    reference: RankTable,
    perturbed: Vec<SensitivityRun>,
    overlap: OverlapReport,
}

fn sensitivity(a: SensitivityArgs) -> Result<()> {
    let table = load(&a.table)?;
    let cfg = engine(&a.table)?;
    let priors = a.table.priors;
    let trace = sfs_select(&table, priors, &StoppingRule::count(a.d), &cfg)?;
    let mut reference = RankTable::empty(table.names().map(str::to_string).collect(), a.d);
    reference.add_run(&trace.selected());

    let mut perturbed = Vec::with_capacity(a.sigma.len());
    for &sigma in &a.sigma {
        let pc = PerturbationConfig {
            sigma,
            runs: a.runs,
            d: a.d,
            seed: a.seed,
        };
        log::info!("sigma {sigma}: {} runs", a.runs);
        perturbed.push(SensitivityRun {
            sigma,
            ranks: run_sensitivity(&table, priors, &pc, &cfg)?,
        });
    }
    let tables: Vec<RankTable> = perturbed.iter().map(|r| r.ranks.clone()).collect();
    let k = a.top.unwrap_or(a.d).min(table.len());
    let overlap = compare_rank_tables(&tables, k, Some(&reference))?;
    let result = SensitivityOutput {
        runs: a.runs,
        d: a.d,
        seed: a.seed,
        reference,
        perturbed,
        overlap,
    };

    let mut out = open_out(&a.output.out)?;
    match a.output.format {
        Format::Tabular => out.write_all(render_sensitivity(&result).as_bytes())?,
        Format::Structured => write_json(&result, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn render_sensitivity(r: &SensitivityOutput) -> String {
    let names = &r.reference.feature_names;
    let join = |idx: &[usize]| idx.iter().map(|&j| names[j].as_str()).collect::<Vec<_>>().join(",");
    let mut s = String::new();
    let _ = writeln!(s, "# runs\t{}", r.runs);
    let _ = writeln!(s, "# d\t{}", r.d);
    let _ = writeln!(s, "# seed\t{}", r.seed);
    let _ = writeln!(s, "# reference\t{}", join(&r.reference.top(r.d)));
    for run in &r.perturbed {
        let _ = writeln!(s, "\n# sigma\t{}", run.sigma);
        let _ = writeln!(s, "rank\tfeature\ttotal_rank\tselection_count");
        for (k, j) in run.ranks.ordering().into_iter().enumerate() {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}",
                k + 1,
                names[j],
                run.ranks.total_rank[j],
                run.ranks.selection_count[j]
            );
        }
    }
    let o = &r.overlap;
    let _ = writeln!(s, "\n# overlap of top {}", o.k);
    let _ = writeln!(s, "left_sigma\tright_sigma\tintersection");
    for p in &o.pairwise {
        let _ = writeln!(s, "{}\t{}\t{}", r.perturbed[p.left].sigma, r.perturbed[p.right].sigma, p.intersection);
    }
    let _ = writeln!(s, "# union\t{}", join(&o.union));
    let _ = writeln!(s, "# entering\t{}", join(&o.entering));
    let _ = writeln!(s, "# dropping\t{}", join(&o.dropping));
    s
}

fn region(a: RegionArgs) -> Result<()> {
    let table = load(&a.table)?;
    let cfg = engine(&a.table)?;
    let selected: Vec<usize> = match (&a.features, a.d) {
        (Some(names), _) => names
            .iter()
            .map(|n| table.index_of(n).ok_or_else(|| Error::UnknownFeature(n.clone())))
            .collect::<Result<_, _>>()?,
        (None, Some(d)) => sfs_select(&table, a.table.priors, &StoppingRule::count(d), &cfg)?.selected(),
        (None, None) => Vec::new(),
    };
    let list = list_for_subset(&table, a.table.priors, &selected, &cfg)?;
    let region = match NoImprovementRegion::of(&list) {
        Ok(r) => Some(r),
        Err(Error::RegionUndefined) => {
            log::warn!("{}", Error::RegionUndefined);
            None
        }
        Err(e) => return Err(e.into()),
    };
    let mut out = open_out(&a.out)?;
    emit_scatter(&table, &selected, region.as_ref(), &mut out)?;
    out.flush()?;
    Ok(())
}

fn pathology(a: PathologyArgs) -> Result<()> {
    let kind = PathologyKind::from_name(&a.kind)?;
    let mut seed_instances = Vec::new();
    for path in &a.seed_table {
        let file = File::open(path).with_context(|| format!("reading {}", path.display()))?;
        seed_instances.push((read_two_class(file)?, a.priors));
    }
    let search = SearchConfig {
        grid_step: a.grid_step,
        budget: a.budget,
        seed: a.seed,
        priors: a.priors,
        seed_instances,
    };
    let outcome = find_counterexample(kind, &search)?;
    let mut out = open_out(&a.output.out)?;
    match a.output.format {
        Format::Structured => write_json(&outcome, &mut out)?,
        Format::Tabular => out.write_all(render_outcome(kind, a.priors, &outcome).as_bytes())?,
    }
    out.flush()?;
    Ok(())
}

fn render_outcome(kind: PathologyKind, priors: ClassPriors, outcome: &SearchOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# kind\t{}", kind.name());
    let inst = match outcome {
        SearchOutcome::Exhausted { tried } => {
            let _ = writeln!(s, "# outcome\texhausted\n# tried\t{tried}");
            return s;
        }
        SearchOutcome::Found(inst) => inst,
    };
    let _ = writeln!(s, "# outcome\tfound");
    let _ = writeln!(s, "# source\t{}", serde_json::to_string(&inst.source).unwrap_or_default());
    let _ = writeln!(s, "# priors\t{}\t{}", priors.positive(), priors.negative());
    let _ = writeln!(s, "feature\tc\td\tindividual_error");
    for (j, f) in inst.table.features().iter().enumerate() {
        let _ = writeln!(s, "{}\t{}\t{}\t{}", f.name, f.p_pos, f.p_neg, inst.evidence.individual_errors[j]);
    }
    let names: Vec<&str> = inst.table.names().collect();
    for &((i, j), e) in &inst.evidence.pair_errors {
        let _ = writeln!(s, "# pair\t{},{}\t{e}", names[i], names[j]);
    }
    if let Some(best) = &inst.evidence.best_pair {
        let pair: Vec<&str> = best.subset.iter().map(|&j| names[j]).collect();
        let _ = writeln!(s, "# best_pair\t{}\t{}", pair.join(","), best.error.error);
    }
    let order: Vec<&str> = inst.evidence.sfs.steps.iter().map(|st| st.feature_name.as_str()).collect();
    let drops: Vec<String> = inst.evidence.sfs.reductions().iter().map(|r| r.to_string()).collect();
    let _ = writeln!(s, "# sfs_order\t{}", order.join(","));
    let _ = writeln!(s, "# sfs_reductions\t{}", drops.join(","));
    s
}
