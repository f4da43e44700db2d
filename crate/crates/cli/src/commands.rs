use std::path::{Path, PathBuf};

use blocktoep::asymptotics::{
    gaussian_draw, genericity_check, perturb, q_hat_leading, q_leading, q_tilde_leading,
    rt_spectral_data,
};
use blocktoep::limitsets::{
    limit_spectrum, refine_zero, sigma_periodic, LimitSpectrumOptions, LimitSpectrumResult,
    OutlierOptions, RefineStatus, SetLabel,
};
use blocktoep::operators::{
    assemble_operator, charpoly_direct, circulant_spectrum_fft, finite_spectrum,
};
use blocktoep::transfer::ordered_spectrum_with;
use blocktoep::widom::{
    charpoly_circulant, q_hat, q_perturbed, q_tilde, widom_sum_open, widom_sum_perturbed,
};
use blocktoep::{BoundaryCase, CoefficientTriple, IndexSet, SpectralTolerances, C64};
use serde_json::{json, Value};

use crate::artifact::{ArtifactKind, ArtifactWriter};
use crate::config::{Model, ModelConfig, MIN_GRID};
use crate::error::CliError;
use crate::plot::{pair, sort_points, Format, Series};
use crate::{
    AsymptoticsArgs, Command, Context, FiniteArgs, GenericityArgs, GridArgs, LimitArgs, Method,
    PlotArgs, VerifyArgs,
};

/// Lines printed to stdout after a successful run.
#[derive(Debug, Default)]
pub struct Outcome {
    pub lines: Vec<String>,
}

/// An error together with whatever was reported before it happened.
#[derive(Debug)]
pub struct Failure {
    pub lines: Vec<String>,
    pub error: CliError,
}

impl From<CliError> for Failure {
    fn from(error: CliError) -> Self {
        Self {
            lines: Vec::new(),
            error,
        }
    }
}

impl From<blocktoep::Error> for Failure {
    fn from(e: blocktoep::Error) -> Self {
        CliError::from(e).into()
    }
}

pub const WIDOM_TOLERANCE: f64 = 1e-8;
pub const ASYMPTOTIC_TOLERANCE: f64 = 0.02;
const SIGMA_SAMPLES: usize = 512;
const SKIN_WARNING_N: usize = 100;

pub fn dispatch(command: &Command, ctx: &Context) -> Result<Outcome, Failure> {
    match command {
        Command::LimitSpectrum(a) => limit_spectrum_cmd(a, ctx),
        Command::FiniteSpectrum(a) => finite_spectrum_cmd(a, ctx),
        Command::VerifyWidom(a) => verify_widom_cmd(a, ctx),
        Command::AsymptoticsCheck(a) => asymptotics_cmd(a, ctx),
        Command::Genericity(a) => genericity_cmd(a, ctx),
        Command::PlotData(a) => plot_data_cmd(a, ctx),
    }
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::LimitSpectrum(_) => "limit-spectrum",
        Command::FiniteSpectrum(_) => "finite-spectrum",
        Command::VerifyWidom(_) => "verify-widom",
        Command::AsymptoticsCheck(_) => "asymptotics-check",
        Command::Genericity(_) => "genericity",
        Command::PlotData(_) => "plot-data",
    }
}

fn snapshot(ctx: &Context, command: &str, cfg: Option<&ModelConfig>) -> Value {
    json!({
        "command": command,
        "argv": ctx.argv,
        "model": cfg,
    })
}

pub fn write_error_report(
    ctx: &Context,
    command: &Command,
    error: &CliError,
) -> Result<PathBuf, CliError> {
    let name = command_name(command);
    let mut w = ArtifactWriter::new(&ctx.out, snapshot(ctx, name, None))?;
    let body = json!({
        "command": name,
        "error": error.to_string(),
        "exit_code": error.exit_code(),
    });
    let path = w.write_json(ArtifactKind::ErrorReport, "error_report.json", &body)?;
    w.finish()?;
    Ok(path)
}

fn load(path: &Path) -> Result<(ModelConfig, Model), CliError> {
    let cfg = ModelConfig::load(path)?;
    let model = cfg.build()?;
    for w in &model.warnings {
        eprintln!("warning: {w}");
    }
    Ok((cfg, model))
}

fn block_count(arg: Option<usize>, cfg: &ModelConfig) -> Result<usize, CliError> {
    let n = arg
        .or(cfg.n)
        .ok_or_else(|| CliError::BadConfig("N is required (--N or the model file)".into()))?;
    if n < 2 {
        return Err(CliError::BadConfig("N must be at least 2".into()));
    }
    Ok(n)
}

fn skin_effect_warning(model: &Model, n: usize) {
    if n > SKIN_WARNING_N
        && model.boundary.case() != BoundaryCase::Circulant
        && !model.coeffs.is_normal_symbol()
    {
        eprintln!(
            "warning: N = {n} with a non-normal symbol; dense eigenvalues of the finite operator \
             are highly sensitive to rounding at this size"
        );
    }
}

fn fmt_c(z: C64) -> String {
    format!("{:.12e}{:+.12e}i", z.re, z.im)
}

fn limit_options(
    cfg: &ModelConfig,
    model: &Model,
    g: &GridArgs,
    ctx: &Context,
) -> Result<LimitSpectrumOptions, CliError> {
    let region = g.region.unwrap_or(cfg.region);
    let (nx, ny) = g.grid.unwrap_or((cfg.nx, cfg.ny));
    if nx < MIN_GRID || ny < MIN_GRID {
        return Err(CliError::BadConfig(format!(
            "grid {nx}x{ny} is below {MIN_GRID}x{MIN_GRID}"
        )));
    }
    let l = model.coeffs.dim();
    if let Some(r) = g.r {
        if r > l {
            return Err(CliError::BadConfig(format!("r = {r} exceeds L = {l}")));
        }
        if model.boundary.case() == BoundaryCase::Circulant || model.boundary.corners_vanish() {
            eprintln!("warning: --r only applies when the corner blocks are nonzero; ignored");
        }
    }
    Ok(LimitSpectrumOptions {
        region,
        nx,
        ny,
        r: g.r,
        tolerances: cfg.tolerances.spectral(),
        outliers: OutlierOptions {
            exclusion_radius: cfg.tolerances.exclusion_radius,
            residual_tol: cfg.tolerances.refinement,
            ..Default::default()
        },
        mode: ctx.mode,
    })
}

fn set_labels(result: &LimitSpectrumResult) -> (Vec<SetLabel>, Option<SetLabel>) {
    match result.metadata.case {
        _ if result.metadata.r.is_some() => (
            vec![SetLabel::SigmaR, SetLabel::LambdaR],
            Some(SetLabel::GammaR),
        ),
        BoundaryCase::Circulant => (vec![SetLabel::Sigma], None),
        _ => (vec![SetLabel::Lambda], Some(SetLabel::GammaC)),
    }
}

fn summarize(result: &LimitSpectrumResult) -> Vec<String> {
    let (arc_labels, outlier_label) = set_labels(result);
    let mut lines = Vec::new();
    let r = result.metadata.r;
    let name = |label: SetLabel| match (label, r) {
        (SetLabel::SigmaR | SetLabel::LambdaR | SetLabel::GammaR, Some(r)) => {
            format!("{} (r = {r})", label.as_str())
        }
        _ => label.as_str().to_string(),
    };
    for label in arc_labels {
        let arcs: Vec<_> = result.arcs_labeled(label).collect();
        let points: usize = arcs.iter().map(|a| a.points.len()).sum();
        if arcs.is_empty() {
            lines.push(format!("{}: empty", name(label)));
        } else {
            lines.push(format!(
                "{}: {} arcs, {points} points",
                name(label),
                arcs.len()
            ));
        }
    }
    if let Some(label) = outlier_label {
        lines.push(format!(
            "{}: {} points ({} rejected candidates)",
            name(label),
            result.outliers.len(),
            result.candidates.len()
        ));
        for o in &result.outliers {
            lines.push(format!("  {}  residual {:.2e}", fmt_c(o.point), o.residual));
        }
    }
    if !result.overlap_points.is_empty() {
        lines.push(format!("overlap points: {}", result.overlap_points.len()));
    }
    lines.push(format!(
        "flagged cells: {}, masked nodes: {:.2}%",
        result.flagged_cells.len(),
        100.0 * result.metadata.masked_fraction
    ));
    lines
}

fn write_limit_sets(
    w: &mut ArtifactWriter,
    result: &LimitSpectrumResult,
    format: Format,
) -> Result<PathBuf, CliError> {
    match format {
        Format::Json => w.write_json(
            ArtifactKind::LimitSets,
            "limit_sets.json",
            &result.to_json(),
        ),
        Format::Csv => {
            let mut bytes = Vec::new();
            result.write_csv(&mut bytes)?;
            w.write(ArtifactKind::LimitSets, "limit_sets.csv", &bytes)
        }
    }
}

fn limit_spectrum_cmd(args: &LimitArgs, ctx: &Context) -> Result<Outcome, Failure> {
    let (cfg, model) = load(&args.model.config)?;
    let opts = limit_options(&cfg, &model, &args.grid, ctx)?;
    let result = limit_spectrum(&model.coeffs, &model.boundary, &opts)?;
    let mut w = ArtifactWriter::new(&ctx.out, snapshot(ctx, "limit-spectrum", Some(&cfg)))?;
    let path = write_limit_sets(&mut w, &result, ctx.format)?;
    w.finish()?;
    let mut lines = summarize(&result);
    lines.push(format!("wrote {}", path.display()));
    Ok(Outcome { lines })
}

/// `det(H_N - E)` by the closed form or Widom sum that fits the corners.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WidomForm {
    Circulant,
    Open,
    Perturbed,
}

fn widom_form(model: &Model) -> Option<WidomForm> {
    if model.boundary.case() == BoundaryCase::Circulant {
        Some(WidomForm::Circulant)
    } else if model.boundary.corners_vanish() {
        Some(WidomForm::Open)
    } else if model.boundary.b_inv().is_ok() {
        Some(WidomForm::Perturbed)
    } else {
        None
    }
}

fn widom_charpoly(model: &Model, form: WidomForm, n: usize, e: C64) -> blocktoep::Result<C64> {
    match form {
        WidomForm::Circulant => charpoly_circulant(&model.coeffs, n, e),
        WidomForm::Open => Ok(widom_sum_open(&model.coeffs, model.boundary.c(), n, e)?.total),
        WidomForm::Perturbed => {
            Ok(widom_sum_perturbed(&model.coeffs, &model.boundary, n, e)?.total)
        }
    }
}

fn finite_spectrum_cmd(args: &FiniteArgs, ctx: &Context) -> Result<Outcome, Failure> {
    let (cfg, model) = load(&args.model.config)?;
    let n = block_count(args.n, &cfg)?;
    let mut lines = Vec::new();
    let mut refinement = Vec::new();
    let mut eigenvalues = match args.method {
        Method::Fft => {
            if model.boundary.case() != BoundaryCase::Circulant {
                return Err(
                    CliError::BadConfig("--method fft needs a circulant model".into()).into(),
                );
            }
            circulant_spectrum_fft(&model.coeffs, n, ctx.mode)?.eigenvalues
        }
        Method::Dense => {
            skin_effect_warning(&model, n);
            let h = assemble_operator(&model.coeffs, &model.boundary, n)?;
            finite_spectrum(&h)?.eigenvalues
        }
        Method::Widom => {
            skin_effect_warning(&model, n);
            let form = widom_form(&model).ok_or_else(|| {
                CliError::BadConfig(
                    "no Widom form applies: corners are nonzero and B is singular".into(),
                )
            })?;
            let h = assemble_operator(&model.coeffs, &model.boundary, n)?;
            let dense = finite_spectrum(&h)?.eigenvalues;
            let mut polished = Vec::with_capacity(dense.len());
            let mut converged = 0;
            for (j, &seed) in dense.iter().enumerate() {
                let deflated = |e: C64| {
                    let p = widom_charpoly(&model, form, n, e).ok()?;
                    let others = dense
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k != j)
                        .fold(C64::new(1.0, 0.0), |acc, (_, &lk)| acc * (lk - e));
                    let v = p / others;
                    v.is_finite().then_some(v)
                };
                let step = 1e-4 * (1.0 + seed.norm());
                let refined = refine_zero(&deflated, seed, step, 1.0);
                let accept = refined.status == RefineStatus::Converged;
                converged += usize::from(accept);
                let value = if accept { refined.point } else { seed };
                refinement.push(json!({
                    "dense": pair(seed),
                    "refined": pair(value),
                    "shift": (value - seed).norm(),
                    "residual": refined.residual,
                    "status": refined.status,
                }));
                polished.push(value);
            }
            lines.push(format!(
                "Newton on the Widom determinant converged for {converged}/{} eigenvalues",
                dense.len()
            ));
            polished
        }
    };
    sort_points(&mut eigenvalues);
    let method = match args.method {
        Method::Dense => "dense",
        Method::Fft => "fft",
        Method::Widom => "widom",
    };
    let mut w = ArtifactWriter::new(&ctx.out, snapshot(ctx, "finite-spectrum", Some(&cfg)))?;
    let stem = format!("finite_spectrum_N{n}_{method}");
    let path = match ctx.format {
        Format::Json => {
            let mut body = json!({
                "method": method,
                "N": n,
                "L": model.coeffs.dim(),
                "case": model.boundary.case(),
                "count": eigenvalues.len(),
                "eigenvalues": eigenvalues.iter().map(|&z| pair(z)).collect::<Vec<_>>(),
            });
            if args.method == Method::Widom {
                body["refinement"] = Value::Array(refinement);
            }
            w.write_json(ArtifactKind::FiniteSpectrum, &format!("{stem}.json"), &body)?
        }
        Format::Csv => {
            let series = Series::new(format!("finite_N{n}"), eigenvalues.iter().copied());
            w.write(
                ArtifactKind::FiniteSpectrum,
                &format!("{stem}.csv"),
                &series.render(Format::Csv),
            )?
        }
    };
    w.finish()?;
    lines.push(format!(
        "{} eigenvalues (N = {n}, method {method})",
        eigenvalues.len()
    ));
    lines.push(format!("wrote {}", path.display()));
    Ok(Outcome { lines })
}

/// Relative to `|direct|`, absolute below one.
fn widom_error(value: C64, direct: C64) -> f64 {
    (value - direct).norm() / direct.norm().max(1.0)
}

fn verify_widom_cmd(args: &VerifyArgs, ctx: &Context) -> Result<Outcome, Failure> {
    let (cfg, model) = load(&args.model.config)?;
    let n = block_count(args.n, &cfg)?;
    let e = args.e;
    let direct = charpoly_direct(&model.coeffs, &model.boundary, n, e)?;
    let mut lines = vec![
        format!("N = {n}, E = {}", fmt_c(e)),
        format!("direct            {}", fmt_c(direct)),
    ];
    let mut rows = vec![json!({"method": "direct", "value": pair(direct)})];
    let mut pass = true;
    let mut compare = |name: &str,
                       value: blocktoep::Result<C64>,
                       lines: &mut Vec<String>|
     -> Result<(), CliError> {
        let value = value?;
        let err = widom_error(value, direct);
        let ok = err <= WIDOM_TOLERANCE;
        pass &= ok;
        lines.push(format!(
            "{name:<17} {}  error {err:.2e}  {}",
            fmt_c(value),
            if ok { "PASS" } else { "FAIL" }
        ));
        rows.push(json!({"method": name, "value": pair(value), "error": err, "pass": ok}));
        Ok(())
    };
    let mut compared = 0;
    if model.boundary.case() == BoundaryCase::Circulant {
        compare(
            "circulant-formula",
            charpoly_circulant(&model.coeffs, n, e),
            &mut lines,
        )?;
        compared += 1;
    }
    if model.boundary.corners_vanish() {
        let sum = widom_sum_open(&model.coeffs, model.boundary.c(), n, e).map(|s| s.total);
        compare("open-sum", sum, &mut lines)?;
        compared += 1;
    }
    if model.boundary.b_inv().is_ok() {
        let sum = widom_sum_perturbed(&model.coeffs, &model.boundary, n, e).map(|s| s.total);
        compare("perturbed-sum", sum, &mut lines)?;
        compared += 1;
    }
    if compared == 0 {
        return Err(CliError::BadConfig(
            "no Widom form applies: corners are nonzero and B is singular".into(),
        )
        .into());
    }
    let body = json!({
        "N": n,
        "E": pair(e),
        "tolerance": WIDOM_TOLERANCE,
        "results": rows,
        "pass": pass,
    });
    let mut w = ArtifactWriter::new(&ctx.out, snapshot(ctx, "verify-widom", Some(&cfg)))?;
    w.write_json(
        ArtifactKind::WidomVerify,
        &format!("widom_verify_N{n}.json"),
        &body,
    )?;
    w.finish()?;
    lines.push(if pass { "PASS".into() } else { "FAIL".into() });
    if pass {
        Ok(Outcome { lines })
    } else {
        Err(Failure {
            lines,
            error: CliError::CheckFailed(format!(
                "Widom evaluations differ from det(H_N - E) by more than {WIDOM_TOLERANCE:e}"
            )),
        })
    }
}

fn far_field() -> SpectralTolerances {
    SpectralTolerances {
        degeneracy: 1e-14,
        tie: 1e-12,
        ..Default::default()
    }
}

fn asymptotics_cmd(args: &AsymptoticsArgs, ctx: &Context) -> Result<Outcome, Failure> {
    let (cfg, mut model) = load(&args.model.config)?;
    let seed = ctx.seed.unwrap_or(cfg.seed);
    if let Some(eps) = args.perturb {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(CliError::BadConfig("--perturb must be positive".into()).into());
        }
        let r = perturb(model.coeffs.r(), eps, seed);
        let t = perturb(model.coeffs.t(), eps, seed.wrapping_add(1));
        model.coeffs = CoefficientTriple::new(r, t, model.coeffs.v().clone())
            .map_err(|e| CliError::BadConfig(format!("perturbed R or T is singular: {e}")))?;
    }
    let e = args.e.unwrap_or_else(|| C64::from_polar(1e4, 0.7));
    let rt = rt_spectral_data(model.coeffs.r(), model.coeffs.t())?;
    let spec = ordered_spectrum_with(&model.coeffs, e, &far_field())?;
    let l = model.coeffs.dim();
    let bd = &model.boundary;

    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    let mut record = |kind: &str, set: &IndexSet, q: Option<C64>, lead: C64| {
        let dev = q.map(|q| (q / lead - 1.0).norm()).unwrap_or(f64::INFINITY);
        let dev = if dev.is_nan() { f64::INFINITY } else { dev };
        worst = worst.max(dev);
        rows.push(json!({
            "kind": kind,
            "set": set.to_string(),
            "q": q.map(pair),
            "leading": pair(lead),
            "deviation": dev,
            "constant": dev * e.norm(),
        }));
    };
    let c_is_v = (bd.c() - model.coeffs.v()).max_abs() == 0.0;
    let mut skipped = 0;
    for set in IndexSet::subsets_of_size(2 * l, l) {
        let lead = q_tilde_leading(&rt, &set)?.eval(e);
        record("q_tilde", &set, q_tilde(&spec, &set)?.value, lead);
        // With C = V the leading coefficient of q_hat vanishes identically unless P^T_I is the identity.
        if c_is_v && rt.rank_t(&set) < l {
            skipped += 1;
            continue;
        }
        let lead = q_hat_leading(&rt, &set, bd.c(), model.coeffs.v())?.eval(e);
        record(
            "q_hat",
            &set,
            q_hat(&spec, bd.c(), e, &set, None)?.value,
            lead,
        );
    }
    let perturbed =
        bd.b_inv().is_ok() && !bd.corners_vanish() && bd.case() != BoundaryCase::Circulant;
    if perturbed {
        for set in IndexSet::subsets_up_to(2 * l, l + bd.rank_a()) {
            if rt.rank_r(&set) > bd.rank_a() {
                skipped += 1;
                continue;
            }
            let lead = q_leading(&rt, bd, &set)?.eval(e);
            record("q", &set, q_perturbed(&spec, bd, e, &set)?.value, lead);
        }
    }
    let pass = worst <= ASYMPTOTIC_TOLERANCE;
    let body = json!({
        "E": pair(e),
        "perturb": args.perturb,
        "tolerance": ASYMPTOTIC_TOLERANCE,
        "max_deviation": worst,
        "skipped_sets": skipped,
        "ratios": rows,
        "pass": pass,
    });
    let mut w = ArtifactWriter::new(&ctx.out, snapshot(ctx, "asymptotics-check", Some(&cfg)))?;
    let path = w.write_json(ArtifactKind::Asymptotics, "asymptotics.json", &body)?;
    w.finish()?;
    let lines = vec![
        format!("E = {}", fmt_c(e)),
        format!(
            "{} ratios ({skipped} sets with identically vanishing leading term skipped), \
             max |ratio - 1| = {worst:.3e} (|E| * max = {:.3e})",
            rows_len(&body),
            worst * e.norm()
        ),
        format!("wrote {}", path.display()),
        if pass { "PASS".into() } else { "FAIL".into() },
    ];
    if pass {
        Ok(Outcome { lines })
    } else {
        Err(Failure {
            lines,
            error: CliError::CheckFailed(format!(
                "max |ratio - 1| = {worst:.3e} exceeds {ASYMPTOTIC_TOLERANCE}"
            )),
        })
    }
}

fn rows_len(body: &Value) -> usize {
    body["ratios"].as_array().map_or(0, Vec::len)
}

fn genericity_cmd(args: &GenericityArgs, ctx: &Context) -> Result<Outcome, Failure> {
    let l = args.l;
    let rank = args.r.unwrap_or(l);
    if l == 0 || rank > l || args.trials == 0 {
        return Err(
            CliError::BadConfig("need L >= 1, r <= L and at least one trial".into()).into(),
        );
    }
    let seed = ctx.seed.unwrap_or(0);
    let report = genericity_check(
        |rng| gaussian_draw(rng, l, rank),
        args.trials,
        seed,
        ctx.mode,
    );
    let body = json!({"L": l, "rank": rank, "report": report});
    let mut w = ArtifactWriter::new(&ctx.out, snapshot(ctx, "genericity", None))?;
    let path = w.write_json(ArtifactKind::Genericity, "genericity.json", &body)?;
    w.finish()?;
    let c = &report.counts;
    Ok(Outcome {
        lines: vec![
            format!(
                "L = {l}, rank A = {rank}, {} trials, seed {seed}",
                args.trials
            ),
            format!(
                "nonzero {}, zero {}, not simple {}, rank mismatch {}, singular {}",
                c.nonzero, c.zero, c.not_simple, c.rank_mismatch, c.singular
            ),
            format!("nonzero fraction {:.4}", report.nonzero_fraction),
            format!("wrote {}", path.display()),
        ],
    })
}

fn plot_data_cmd(args: &PlotArgs, ctx: &Context) -> Result<Outcome, Failure> {
    let (cfg, model) = load(&args.model.config)?;
    let sizes = if args.n.is_empty() {
        vec![block_count(None, &cfg)?]
    } else {
        args.n.clone()
    };
    if let Some(&bad) = sizes.iter().find(|&&n| n < 2) {
        return Err(CliError::BadConfig(format!("N = {bad} is below 2")).into());
    }
    let opts = limit_options(&cfg, &model, &args.grid, ctx)?;
    let result = limit_spectrum(&model.coeffs, &model.boundary, &opts)?;

    let mut series = Vec::new();
    for &n in &sizes {
        skin_effect_warning(&model, n);
        let h = assemble_operator(&model.coeffs, &model.boundary, n)?;
        let mut ev = finite_spectrum(&h)?.eigenvalues;
        sort_points(&mut ev);
        series.push(Series::new(format!("finite_N{n}"), ev));
    }
    let (arc_labels, outlier_label) = set_labels(&result);
    for label in arc_labels {
        let points = result
            .arcs_labeled(label)
            .flat_map(|a| a.points.iter().copied());
        series.push(Series::new(label.as_str(), points));
    }
    if let Some(label) = outlier_label {
        series.push(Series::new(
            label.as_str(),
            result.outliers.iter().map(|o| o.point),
        ));
    }
    if model.boundary.case() != BoundaryCase::Circulant {
        let mut cloud = sigma_periodic(&model.coeffs, SIGMA_SAMPLES, ctx.mode)?;
        cloud.retain(|&z| opts.region.contains(z));
        series.push(Series::new("Sigma_cloud", cloud));
    }

    let mut w = ArtifactWriter::new(&ctx.out, snapshot(ctx, "plot-data", Some(&cfg)))?;
    let mut lines = Vec::new();
    for s in &series {
        let name = s.file_name(ctx.format);
        w.write(ArtifactKind::PlotData, &name, &s.render(ctx.format))?;
        lines.push(format!("{name}: {} points", s.points.len()));
    }
    let path = write_limit_sets(&mut w, &result, ctx.format)?;
    w.finish()?;
    lines.push(format!(
        "wrote {} series and {}",
        series.len(),
        path.display()
    ));
    Ok(Outcome { lines })
}
