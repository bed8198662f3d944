use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use serde_json::json;

use povmcert::analytic::{
    certify_stats, guessing_probability_analytic, min_entropy, CertMethod, CertificateReport,
};
use povmcert::experiment::{ExperimentConfig, Preparation};
use povmcert::geometry::io::GeometryRecord;
use povmcert::geometry::{make_platonic_povm, make_polygon_povm_oriented, GeometryKind, Solid};
use povmcert::mle::{certify_from_counts_with, MleConfig};
use povmcert::oracle::{oracle_certify, oracle_pguess_with, strategy_audit, OracleConfig};
use povmcert::photonics::{
    read_counts_csv, simulate_counts, simulate_timetags, write_counts_csv, write_timetags,
    CoincidenceConfig, CoincidenceCounter, RunLength, TimetagReader,
};
use povmcert::report::{
    figure_datasets, run_table, run_verify, table_csv, table_text, AlphaVariant, CountSource,
    FigureId, FigureOptions, TableOptions, VerifyOptions,
};
use povmcert::scan::{
    fmt_g9, scaling_table, scan_entropy_grid, scan_summary, write_scaling_csv, write_scan_csv,
    ScanDomain, ScanMethod, ScanRow,
};
use povmcert::{BlochVector64, OutcomeStats64, PovmGeometry64};

use crate::args::*;
use crate::run::Run;

pub fn dispatch(cli: Cli) -> Result<ExitCode> {
    let config = json!({
        "args": args_json(&cli.command)?,
        "format": cli.format,
        "out_dir": cli.out_dir,
        "threads": cli.threads,
    });
    let mut run = Run::new(
        cli.command.name(),
        cli.seed,
        cli.out_dir.clone(),
        cli.format,
        config,
    );
    let code = match &cli.command {
        Command::Povm(a) => povm(&mut run, a),
        Command::Certify(a) => certify(&mut run, a),
        Command::Oracle(a) => oracle(&mut run, a),
        Command::Scan(a) => scan(&mut run, a),
        Command::Bounds(a) => bounds(&mut run, a),
        Command::Simulate(a) => simulate(&mut run, a),
        Command::Ingest(a) => ingest(&mut run, a),
        Command::Mle(a) => mle(&mut run, a),
        Command::Tables(a) => tables(&mut run, a),
        Command::Figures(a) => figures(&mut run, a),
        Command::Verify(a) => verify(&mut run, a),
    }?;
    run.finish()?;
    Ok(code)
}

fn args_json(c: &Command) -> Result<serde_json::Value> {
    Ok(match c {
        Command::Povm(a) => serde_json::to_value(a)?,
        Command::Certify(a) => serde_json::to_value(a)?,
        Command::Oracle(a) => serde_json::to_value(a)?,
        Command::Scan(a) => serde_json::to_value(a)?,
        Command::Bounds(a) => serde_json::to_value(a)?,
        Command::Simulate(a) => serde_json::to_value(a)?,
        Command::Ingest(a) => serde_json::to_value(a)?,
        Command::Mle(a) => serde_json::to_value(a)?,
        Command::Tables(a) => serde_json::to_value(a)?,
        Command::Figures(a) => serde_json::to_value(a)?,
        Command::Verify(a) => serde_json::to_value(a)?,
    })
}

// ---------------------------------------------------------------- inputs

fn load_config(run: &mut Run, path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => {
            run.input(p);
            let s = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(ExperimentConfig::from_toml(&s)?)
        }
        None => Ok(ExperimentConfig::default()),
    }
}

fn geometry_from(
    run: &mut Run,
    spec: &str,
    orientation_deg: Option<f64>,
) -> Result<PovmGeometry64> {
    let p = Path::new(spec);
    let g = if p.is_file() {
        run.input(p);
        let s = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        PovmGeometry64::from_json(&s)?
    } else {
        ExperimentConfig::default()
            .geometry_spec(spec)?
            .build::<f64>()?
    };
    match (orientation_deg, g.kind()) {
        (None, _) => Ok(g),
        (Some(deg), GeometryKind::Polygon(n)) => Ok(make_polygon_povm_oriented(n, deg)?),
        (Some(_), _) => bail!("--orientation-deg applies to polygons only"),
    }
}

fn load_geometry(run: &mut Run, a: &GeometryArg) -> Result<PovmGeometry64> {
    geometry_from(run, &a.geometry, a.orientation_deg)
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .with_context(|| format!("not a number: `{t}`"))
        })
        .collect()
}

/// `rz,rx,ry`.
fn parse_state(s: &str) -> Result<BlochVector64> {
    match parse_floats(s)?.as_slice() {
        [z, x, y] => Ok(BlochVector64::new(*x, *y, *z)),
        v => bail!("--state needs three components rz,rx,ry, got {}", v.len()),
    }
}

/// Inline list or file; lines that start with a non-numeric token are
/// treated as headers, `#` starts a comment.
fn parse_probs(run: &mut Run, s: &str) -> Result<Vec<f64>> {
    let p = Path::new(s);
    if !p.is_file() {
        return parse_floats(s);
    }
    run.input(p);
    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with(|c: char| c.is_ascii_alphabetic()) {
            continue;
        }
        out.extend(parse_floats(line)?);
    }
    Ok(out)
}

enum Target {
    State(BlochVector64),
    Probs(OutcomeStats64),
}

fn target(run: &mut Run, t: &TargetArg) -> Result<Target> {
    if let Some(s) = &t.state {
        return Ok(Target::State(parse_state(s)?));
    }
    if let Some(p) = &t.prep {
        return Ok(Target::State(p.parse::<Preparation>()?.bloch()));
    }
    let probs = parse_probs(run, t.probs.as_deref().unwrap_or_default())?;
    Ok(Target::Probs(OutcomeStats64::from_probs(probs)?))
}

fn target_stats(t: &Target, g: &PovmGeometry64) -> Result<OutcomeStats64> {
    match t {
        Target::State(r) => {
            if !r.is_physical() {
                return Err(povmcert::Error::UnphysicalState { norm: r.norm() }.into());
            }
            Ok(OutcomeStats64::from_probs(
                g.born_raw(g.effective_vector(*r)),
            )?)
        }
        Target::Probs(s) => {
            if s.len() != g.outcomes() {
                bail!(
                    "{} probabilities given, geometry has {} outcomes",
                    s.len(),
                    g.outcomes()
                );
            }
            Ok(s.clone())
        }
    }
}

fn to_json(v: &impl serde::Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

// ---------------------------------------------------------------- commands

fn povm(run: &mut Run, a: &PovmArgs) -> Result<ExitCode> {
    let g = load_geometry(run, &a.geometry)?;
    let (name, body) = match run.format_or(Format::Json) {
        Format::Json => ("povm.json", g.to_json() + "\n"),
        Format::Csv => {
            let mut s = String::from("k,weight,x,y,z\n");
            for (k, (w, d)) in g.weights().iter().zip(g.directions()).enumerate() {
                writeln!(
                    s,
                    "{k},{},{},{},{}",
                    fmt_g9(*w),
                    fmt_g9(d.x),
                    fmt_g9(d.y),
                    fmt_g9(d.z)
                )?;
            }
            ("povm.csv", s)
        }
    };
    run.emit(a.out.as_deref(), name, &body)?;
    Ok(ExitCode::SUCCESS)
}

fn certify(run: &mut Run, a: &CertifyArgs) -> Result<ExitCode> {
    let g = load_geometry(run, &a.geometry)?;
    let t = target(run, &a.target)?;
    let ocfg = OracleConfig {
        grid_size: a.grid,
        ..OracleConfig::default()
    };
    let rep: CertificateReport<f64> = match (&t, a.oracle) {
        (Target::State(r), false) => guessing_probability_analytic(*r, &g)?,
        (Target::Probs(s), false) => certify_stats(s, &g)?,
        (Target::State(r), true) => {
            let mut rep = oracle_certify(&target_stats(&t, &g)?, &g, &ocfg)?;
            rep.state = Some(*r);
            rep.stats = None;
            rep
        }
        (Target::Probs(_), true) => oracle_certify(&target_stats(&t, &g)?, &g, &ocfg)?,
    };
    if rep.method == CertMethod::AnalyticUpperBound {
        eprintln!("note: closed form is an upper bound here; use --oracle for the exact value");
    }
    let (name, body) = match run.format_or(Format::Json) {
        Format::Json => ("certificate.json", to_json(&rep)?),
        Format::Csv => {
            let r = rep.state.unwrap_or_default();
            let mut buf = Vec::new();
            write_scan_csv(&mut buf, &[ScanRow::from_report(r, rep)])?;
            ("certificate.csv", String::from_utf8(buf)?)
        }
    };
    run.emit(a.out.as_deref(), name, &body)?;
    Ok(ExitCode::SUCCESS)
}

fn oracle(run: &mut Run, a: &OracleArgs) -> Result<ExitCode> {
    let g = load_geometry(run, &a.geometry)?;
    let t = target(run, &a.target)?;
    let stats = target_stats(&t, &g)?;
    let cfg = OracleConfig {
        grid_size: a.grid,
        refine: a.refine,
        ..OracleConfig::default()
    };
    let (p, strategy) = oracle_pguess_with(&stats, &g, &cfg)?;
    let audit = strategy_audit(&strategy, &g, &stats);
    let format = if a.json {
        Format::Json
    } else {
        run.format_or(Format::Json)
    };
    let (name, body) = match format {
        Format::Json => (
            "oracle.json",
            to_json(&json!({
                "geometry": g.id(),
                "p_guess": p,
                "hmin_sdi": min_entropy(p.min(1.0))?,
                "strategy": strategy.components.iter().map(|c| json!({
                    "p": c.p,
                    "t": [c.t.x, c.t.y, c.t.z],
                    "k": c.k,
                })).collect::<Vec<_>>(),
                "residual": strategy.residual,
                "audit": audit,
            }))?,
        ),
        Format::Csv => {
            let mut s = String::from("p,tx,ty,tz,k\n");
            for c in &strategy.components {
                writeln!(
                    s,
                    "{},{},{},{},{}",
                    fmt_g9(c.p),
                    fmt_g9(c.t.x),
                    fmt_g9(c.t.y),
                    fmt_g9(c.t.z),
                    c.k
                )?;
            }
            ("oracle.csv", s)
        }
    };
    run.emit(a.out.as_deref(), name, &body)?;
    if audit.flagged {
        eprintln!(
            "warning: strategy audit flagged: {}",
            audit.issues.join("; ")
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn scan(run: &mut Run, a: &ScanArgs) -> Result<ExitCode> {
    let g = match (&a.shape.n, &a.shape.solid, &a.shape.geometry) {
        (Some(n), _, _) => make_polygon_povm_oriented(*n, a.orientation_deg.unwrap_or(0.0))?,
        (_, Some(s), _) => {
            if a.orientation_deg.is_some() {
                bail!("--orientation-deg applies to polygons only");
            }
            make_platonic_povm(s.parse::<Solid>()?)
        }
        (_, _, Some(spec)) => geometry_from(run, spec, a.orientation_deg)?,
        _ => bail!("one of --n, --solid or --geometry is required"),
    };
    let domain = match a.domain {
        Some(DomainArg::Disk) => ScanDomain::Disk,
        Some(DomainArg::Ball) => ScanDomain::Ball,
        None if g.is_planar() => ScanDomain::Disk,
        None => ScanDomain::Ball,
    };
    let method = match a.method {
        MethodArg::Analytic => ScanMethod::default(),
        MethodArg::Oracle => ScanMethod::Oracle(OracleConfig {
            grid_size: a.grid,
            ..OracleConfig::default()
        }),
    };
    let rows = scan_entropy_grid(&g, a.res, domain, &method)?;
    let (lo, hi, gap) = scan_summary(&rows);
    eprintln!(
        "{} points, hmin_sdi in [{}, {}], max trusted gap {}",
        rows.len(),
        fmt_g9(lo),
        fmt_g9(hi),
        fmt_g9(gap)
    );
    let (name, body) = match run.format_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            write_scan_csv(&mut buf, &rows)?;
            ("scan.csv", String::from_utf8(buf)?)
        }
        Format::Json => ("scan.json", to_json(&rows)?),
    };
    run.emit(a.out.as_deref(), name, &body)?;
    Ok(ExitCode::SUCCESS)
}

fn bounds(run: &mut Run, a: &BoundsArgs) -> Result<ExitCode> {
    let rows = scaling_table(a.nmax)?;
    let (name, body) = match run.format_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            write_scaling_csv(&mut buf, &rows)?;
            ("bounds.csv", String::from_utf8(buf)?)
        }
        Format::Json => ("bounds.json", to_json(&rows)?),
    };
    run.emit(a.out.as_deref(), name, &body)?;
    Ok(ExitCode::SUCCESS)
}

fn simulate(run: &mut Run, a: &SimulateArgs) -> Result<ExitCode> {
    let cfg = load_config(run, a.config.as_deref())?;
    let g = load_geometry(run, &a.geometry)?;
    let prep: Preparation = a.prep.parse()?;
    let mut sim = cfg.source.sim_config(prep.state::<f64>()?, g, run.seed);
    if let Some(n) = a.coincidences {
        sim.length = RunLength::Coincidences(n);
    }
    if let Some(d) = a.duration {
        sim.length = RunLength::Duration(d);
    }
    if let Some(v) = a.pair_rate {
        sim.pair_rate = v;
    }
    if let Some(v) = a.accidental_rate {
        sim.accidental_rate = v;
    }
    if let Some(v) = a.efficiency {
        sim.herald_efficiency = v;
    }
    if let Some(v) = a.jitter_ps {
        sim.jitter_ps = v;
    }
    if let Some(v) = a.window_ns {
        sim.window_ps = v * 1e3;
    }
    sim.validate()?;
    let out = run.resolve(&a.out);
    let out = run.claim(&out)?;
    if a.counts_only {
        let stats = simulate_counts(&sim)?;
        let counts = stats.counts().unwrap_or_default();
        write_counts_csv(&out, counts)?;
        eprintln!(
            "wrote {} coincidences to {}",
            counts.iter().sum::<u64>(),
            out.display()
        );
    } else {
        let n = write_timetags(&out, simulate_timetags(&sim)?)?;
        eprintln!("wrote {n} records to {}", out.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn ingest(run: &mut Run, a: &IngestArgs) -> Result<ExitCode> {
    let outcomes = match (&a.shape.geometry, a.shape.outcomes) {
        (Some(spec), _) => geometry_from(run, spec, None)?.outcomes(),
        (None, Some(n)) => n,
        (None, None) => bail!("one of --geometry or --outcomes is required"),
    };
    let cfg = CoincidenceConfig {
        window_ps: a.window_ns * 1e3,
        herald_channel: a.herald_channel,
    };
    run.input(&a.timetags);
    let mut counter = CoincidenceCounter::new(&cfg, outcomes)?;
    for rec in TimetagReader::open(&a.timetags)
        .with_context(|| format!("opening {}", a.timetags.display()))?
    {
        counter.push(rec?)?;
    }
    let heralds = counter.heralds_seen();
    let counts = counter.finish();
    eprintln!(
        "{heralds} heralds, {} coincidences",
        counts.iter().sum::<u64>()
    );
    let (name, body) = match run.format_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("outcome_index,count\n");
            for (k, c) in counts.iter().enumerate() {
                writeln!(s, "{k},{c}")?;
            }
            ("counts.csv", s)
        }
        Format::Json => (
            "counts.json",
            to_json(&json!({ "counts": counts, "heralds": heralds, "window_ns": a.window_ns }))?,
        ),
    };
    run.emit(a.out.as_deref(), name, &body)?;
    Ok(ExitCode::SUCCESS)
}

fn mle(run: &mut Run, a: &MleArgs) -> Result<ExitCode> {
    let g = load_geometry(run, &a.geometry)?;
    run.input(&a.counts);
    let counts = read_counts_csv(&a.counts)?;
    let stats = OutcomeStats64::from_counts(counts)?;
    let prepared = a
        .true_state
        .as_deref()
        .map(|s| s.parse::<Preparation>().map(|p| p.bloch::<f64>()))
        .transpose()?;
    let mcfg = MleConfig {
        max_iter: a.max_iter,
        tol: a.tol,
        dilution: a.dilution,
        ..MleConfig::default()
    };
    let c = certify_from_counts_with(&stats, &g, prepared, &mcfg, &OracleConfig::default())?;
    let m = c.mle.rho_hat.matrix().m;
    let b = c.mle.rho_hat.bloch();
    let h_t = c.theory.as_ref().map(|t| t.hmin_sdi);
    let format = if a.json {
        Format::Json
    } else {
        run.format_or(Format::Json)
    };
    let (name, body) = match format {
        Format::Json => (
            "mle.json",
            to_json(&json!({
                "geometry": g.id(),
                "counts": stats.counts(),
                "rho_hat": [
                    [[m[0][0].re, m[0][0].im], [m[0][1].re, m[0][1].im]],
                    [[m[1][0].re, m[1][0].im], [m[1][1].re, m[1][1].im]],
                ],
                "bloch_hat": [b.x, b.y, b.z],
                "log_likelihood": c.mle.log_likelihood,
                "iterations": c.mle.iterations,
                "converged": c.mle.converged,
                "gradient_norm": c.mle.gradient_norm,
                "y_unobservable": c.mle.y_unobservable,
                "p_guess": c.report.p_guess,
                "h_a": c.report.hmin_sdi,
                "hmin_trusted": c.report.hmin_trusted,
                "method": c.report.method,
                "h_t": h_t,
            }))?,
        ),
        Format::Csv => {
            let mut s = String::from("h_a,h_t,p_guess,rx,ry,rz,iterations,converged\n");
            writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                fmt_g9(c.report.hmin_sdi),
                h_t.map(fmt_g9).unwrap_or_default(),
                fmt_g9(c.report.p_guess),
                fmt_g9(b.x),
                fmt_g9(b.y),
                fmt_g9(b.z),
                c.mle.iterations,
                c.mle.converged
            )?;
            ("mle.csv", s)
        }
    };
    run.emit(a.out.as_deref(), name, &body)?;
    Ok(ExitCode::SUCCESS)
}

fn expand_ids(ids: &[String], all: &[String]) -> Vec<String> {
    if ids.iter().any(|i| i.eq_ignore_ascii_case("all")) {
        all.to_vec()
    } else {
        ids.to_vec()
    }
}

fn tables(run: &mut Run, a: &TablesArgs) -> Result<ExitCode> {
    let cfg = load_config(run, a.config.as_deref())?;
    let all: Vec<String> = cfg.tables.iter().map(|t| t.id.clone()).collect();
    let ids = expand_ids(&a.ids, &all);
    for id in &ids {
        cfg.table(id)?;
    }
    let opts = TableOptions {
        source: match a.source {
            SourceArg::Counts => CountSource::Counts,
            SourceArg::Timetags => CountSource::Timetags,
        },
        accidental_rate_hz: if a.calibrated {
            Some(cfg.source.calibrated_accidental_rate_hz)
        } else {
            a.accidental_rate
        },
        coincidences: a.coincidences,
        ..TableOptions::new(run.seed)
    };
    let dir = run.out_dir.clone().unwrap_or_else(|| ".".into());
    let format = run.format_or(Format::Csv);
    for id in &ids {
        let rep = run_table(&cfg, id, &opts)?;
        let text = table_text(&rep);
        print!("{text}");
        match format {
            Format::Csv => {
                run.write(
                    &dir.join(format!("{}.csv", rep.id)),
                    &table_csv(std::slice::from_ref(&rep)),
                )?;
                run.write(&dir.join(format!("{}.txt", rep.id)), &text)?;
            }
            Format::Json => run.write(&dir.join(format!("{}.json", rep.id)), &to_json(&rep)?)?,
        }
    }
    if run.out_dir.is_none() {
        run.out_dir = Some(dir);
    }
    Ok(ExitCode::SUCCESS)
}

fn figures(run: &mut Run, a: &FiguresArgs) -> Result<ExitCode> {
    if run.format == Some(Format::Json) {
        bail!("figure datasets are CSV only");
    }
    let all: Vec<String> = ["F1", "F2", "F3"].map(String::from).to_vec();
    let ids = expand_ids(&a.ids, &all)
        .iter()
        .map(|s| s.parse::<FigureId>())
        .collect::<povmcert::Result<Vec<_>>>()?;
    let opts = FigureOptions {
        resolution: a.res,
        n_max: a.nmax,
    };
    let dir = run.out_dir.clone().unwrap_or_else(|| ".".into());
    for id in ids {
        for (name, body) in figure_datasets(id, &opts)? {
            let p = dir.join(&name);
            run.write(&p, &body)?;
            eprintln!("wrote {}", p.display());
        }
    }
    if run.out_dir.is_none() {
        run.out_dir = Some(dir);
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(run: &mut Run, a: &VerifyArgs) -> Result<ExitCode> {
    let extra = match &a.geometry {
        Some(p) => {
            run.input(p);
            let s = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let rec: GeometryRecord = serde_json::from_str(&s).context("geometry record")?;
            Some(rec.to_geometry_unchecked::<f64>()?)
        }
        None => None,
    };
    let opts = VerifyOptions {
        planar_states_per_n: a.states_per_n,
        disk_resolution: a.disk_res,
        ball_resolution: a.ball_res,
        alpha_variant: match a.alpha_variant {
            AlphaArg::Correct => AlphaVariant::Correct,
            AlphaArg::Misprint => AlphaVariant::Misprint,
        },
        extra_geometry: extra,
        ..VerifyOptions::new(run.seed)
    };
    let report = run_verify(&opts)?;
    let log = report.log();
    print!("{log}");
    if let Some(d) = run.out_dir.clone() {
        match run.format_or(Format::Csv) {
            Format::Json => run.write(&d.join("verify.json"), &to_json(&report)?)?,
            Format::Csv => run.write(&d.join("verify.log"), &log)?,
        }
    }
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    })
}
