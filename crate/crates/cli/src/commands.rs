//! One function per subcommand. Each writes its artifacts under the output
//! directory and returns a one-line summary for the terminal.

use isolab::fuchsian::{monodromy_point_p6, MonodromyPoint};
use isolab::ladder::{build_ladder, ElementaryStep, GsdLadder, Label, LadderPattern, ThetaBook};
use isolab::limits::{
    compare_theorem1, convergence_csv, equivalence_check, extract_p5_from_ladder, fit_p5_from_ladder, mobius_dual,
    p5_residual_check, theorem1_map, theorem2_map, Extraction, LimitKind,
};
use isolab::painleve5::{
    idm5_flow, m5_point, p5_residual, trajectory5, trajectory5_csv, y5_jet, FrameOptions, P5State,
    Thetas5,
};
use isolab::painleve6::{
    p6_residual, schlesinger_flow, trajectory, trajectory_csv, y6_jet, y6_of, P6State, Thetas6,
};
use isolab::triangularizer::{classify, random_sl2, solve_both, solve_jsonl, verify, BatchOutput, CaseTag, PairProblem};
use isolab::c;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, Pattern};
use crate::error::{CliError, CliResult};
use crate::output::Artifacts;
use crate::plot::{plot_script, PlotReport, PlotSeries};

/// Finite-difference step for the Painlevé residuals.
const FD_STEP: f64 = 0.02;
/// Step of the t5 sweep behind the extracted P5 residual.
const SWEEP_STEP: f64 = 0.04;

fn rng(cfg: &ExperimentConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed)
}

fn thetas6(cfg: &ExperimentConfig) -> Thetas6 {
    let t = &cfg.theta;
    Thetas6::new(t[0], t[1], t[2], t[3])
}

fn thetas5(cfg: &ExperimentConfig) -> Thetas5 {
    let t = &cfg.theta;
    Thetas5::new(t[0], t[1], t[2])
}

fn base6(cfg: &ExperimentConfig) -> CliResult<P6State> {
    Ok(P6State::random(&mut rng(cfg), thetas6(cfg), cfg.t6)?)
}

fn base5(cfg: &ExperimentConfig) -> P5State {
    P5State::random(&mut rng(cfg), thetas5(cfg), cfg.t5)
}

fn point6(state: &P6State, tol: f64) -> CliResult<MonodromyPoint> {
    Ok(monodromy_point_p6(&state.assemble()?, state.t6, tol)?)
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

fn max_entry_change(a: &MonodromyPoint, b: &MonodromyPoint) -> f64 {
    a.matrices
        .iter()
        .filter_map(|(n, m)| b.get(n).map(|x| m.dist(&x)))
        .fold(0.0, f64::max)
}

pub fn monodromy(cfg: &ExperimentConfig, out: &Artifacts) -> CliResult<String> {
    let state = base6(cfg)?;
    let point = point6(&state, cfg.tol)?;
    let text = to_json(&json!({ "state": state, "point": point }));
    out.write("monodromy.json", &text)?;
    print!("{}", to_json(&point));
    Ok(format!("monodromy: max residual {:.3e}", point.residuals.max()))
}

pub fn flow6(cfg: &ExperimentConfig, out: &Artifacts) -> CliResult<String> {
    let state = base6(cfg)?;
    let grid = ExperimentConfig::grid(cfg.t6, cfg.t6_end, cfg.steps);
    let traj = trajectory(&state, &grid, cfg.tol)?;
    out.write("trajectory6.csv", &trajectory_csv(&traj))?;
    let end = traj.last().expect("grid is nonempty");
    let drift = end
        .first_integrals()
        .iter()
        .map(|x| x.norm())
        .fold(0.0, f64::max);
    let change = max_entry_change(&point6(&state, cfg.tol)?, &point6(end, cfg.tol)?);
    let (y, yp, ypp) = y6_jet(end, FD_STEP.min(end.t6.norm() / 4.0), cfg.tol)?;
    let residual = p6_residual(end.t6, y, yp, ypp, &end.thetas);
    out.write(
        "flow6.json",
        &to_json(&json!({
            "first_integral_drift": drift,
            "monodromy_change": change,
            "p6_residual_at_end": residual,
        })),
    )?;
    Ok(format!(
        "flow6: drift {drift:.3e}, monodromy change {change:.3e}, P6 residual {residual:.3e}"
    ))
}

pub fn flow5(cfg: &ExperimentConfig, out: &Artifacts) -> CliResult<String> {
    let state = base5(cfg);
    let grid = ExperimentConfig::grid(cfg.t5, cfg.t5_end, cfg.steps);
    let traj = trajectory5(&state, &grid, cfg.tol)?;
    out.write("trajectory5.csv", &trajectory5_csv(&traj))?;
    let end = traj.last().expect("grid is nonempty");
    let (y, yp, ypp) = y5_jet(end, FD_STEP, cfg.tol)?;
    let residual = p5_residual(end.t5, y, yp, ypp, &end.thetas);
    out.write("flow5.json", &to_json(&json!({ "p5_residual_at_end": residual })))?;
    Ok(format!("flow5: P5 residual {residual:.3e}"))
}

pub fn stokes(cfg: &ExperimentConfig, out: &Artifacts) -> CliResult<String> {
    let state = base5(cfg);
    let at = |st: &P5State| -> CliResult<_> {
        Ok(m5_point(&st.assemble5()?, st.t5, &st.thetas, &FrameOptions::for_time(st.t5))?)
    };
    let start = at(&state)?;
    let end = at(&idm5_flow(&state, cfg.t5_end, cfg.tol)?)?;
    let drift = (start.stokes.s0 - end.stokes.s0)
        .norm()
        .max((start.stokes.s1 - end.stokes.s1).norm());
    let closure = start.point.residuals.max();
    out.write(
        "stokes.json",
        &to_json(&json!({ "start": start, "end": end, "closure": closure, "drift": drift })),
    )?;
    Ok(format!("stokes: closure {closure:.3e}, drift {drift:.3e}"))
}

fn ladder_pattern(p: Pattern) -> LadderPattern {
    match p {
        Pattern::First => LadderPattern::FirstLimit,
        Pattern::Second => LadderPattern::SecondLimit,
    }
}

fn ladder_csv(l: &GsdLadder) -> String {
    let mut s = String::from("level,n,eps_re,eps_im,th0_re,th1_re,tht_re,thinf_re,y6_re,y6_im\n");
    for r in &l.rungs {
        let th = r.state.thetas;
        let y = y6_of(&r.state).unwrap_or(c(f64::NAN, f64::NAN));
        s.push_str(&format!(
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            r.level, r.n, r.epsilon.re, r.epsilon.im, th.th0.re, th.th1.re, th.tht.re, th.thinf.re, y.re, y.im
        ));
    }
    s
}

pub fn ladder(cfg: &ExperimentConfig, out: &Artifacts) -> CliResult<String> {
    let l = build_ladder(&base6(cfg)?, ladder_pattern(cfg.pattern), cfg.n_max, cfg.t5, cfg.tol)?;
    out.write("ladder.csv", &ladder_csv(&l))?;
    out.write("ladder.json", &to_json(&l))?;
    Ok(format!("ladder: {} rungs", l.rungs.len()))
}

/// The convergence figure of an extraction.
pub fn convergence_plot(ext: &Extraction, csv: &str, title: &str) -> PlotReport {
    let series = ext
        .reports
        .iter()
        .enumerate()
        .map(|(k, r)| PlotSeries {
            name: r.quantity.clone(),
            column: k + 3,
            points: r.eps.iter().copied().zip(r.errors.iter().copied()).collect(),
        })
        .collect();
    PlotReport {
        title: title.into(),
        csv: csv.into(),
        x_column: 2,
        xlabel: "|eps_n|".into(),
        ylabel: "relative error".into(),
        loglog: true,
        series,
    }
}

fn write_convergence(out: &Artifacts, stem: &str, ext: &Extraction, title: &str) -> CliResult<()> {
    let csv = format!("{stem}.csv");
    out.write(&csv, &convergence_csv(ext))?;
    out.write(&format!("{stem}.gp"), &plot_script(&convergence_plot(ext, &csv, title)))
}

fn min_slope(ext: &Extraction) -> f64 {
    ext.reports.iter().map(|r| r.slope).fold(f64::INFINITY, f64::min)
}

pub fn limit1(cfg: &ExperimentConfig, out: &Artifacts) -> CliResult<String> {
    let base = base6(cfg)?;
    let l = build_ladder(&base, LadderPattern::FirstLimit, cfg.n_max, cfg.t5, cfg.tol)?;
    let ext = fit_p5_from_ladder(&l, LimitKind::OneA)?;
    write_convergence(out, "convergence1", &ext, "first limit")?;
    // the table is written first so a failed run leaves its evidence
    ext.check_convergence()?;
    let check = p5_residual_check(&base, LimitKind::OneA, cfg.t5, SWEEP_STEP, cfg.n_max, cfg.tol)?;
    let maps = theorem1_map(&point6(&base, cfg.tol)?, &base.thetas, cfg.f0)?;
    let fitted = &ext.limit;
    let rep = m5_point(&fitted.assemble5()?, fitted.t5, &fitted.thetas, &FrameOptions::for_time(fitted.t5))?;
    let cmp = compare_theorem1(&maps[0], &rep)?;
    out.write(
        "limit1.json",
        &to_json(&json!({
            "limit": ext.limit,
            "reports": ext.reports,
            "theta_bookkeeping": ext.theta_bookkeeping,
            "p5_check": { "residual": check.residual, "sigma_defect": check.sigma_defect },
            "maps": maps.iter().map(|m| &m.map).collect::<Vec<_>>(),
            "predicted_point": maps[0].point,
            "predicted_stokes": maps[0].stokes,
            "computed_stokes": rep.stokes,
            "stokes_comparison": cmp,
        })),
    )?;
    Ok(format!(
        "limit1: min slope {:.3}, P5 residual {:.3e}, Stokes mismatch {:.3e}",
        min_slope(&ext),
        check.residual,
        cmp.max()
    ))
}

pub fn limit2(cfg: &ExperimentConfig, out: &Artifacts) -> CliResult<String> {
    let base = mobius_dual(&base6(cfg)?)?;
    let l = build_ladder(&base, LadderPattern::SecondLimit, cfg.n_max, cfg.t5, cfg.tol)?;
    let ext = fit_p5_from_ladder(&l, LimitKind::Two)?;
    write_convergence(out, "convergence2", &ext, "second limit")?;
    // the table is written first so a failed run leaves its evidence
    ext.check_convergence()?;
    let maps = theorem2_map(&point6(&base, cfg.tol)?, &base.thetas)?;
    out.write(
        "limit2.json",
        &to_json(&json!({
            "base": base,
            "limit": ext.limit,
            "reports": ext.reports,
            "theta_bookkeeping": ext.theta_bookkeeping,
            "maps": maps.iter().map(|m| &m.map).collect::<Vec<_>>(),
            "predicted_point": maps[0].point,
        })),
    )?;
    Ok(format!(
        "limit2: min slope {:.3}, K residual {:.3e}",
        min_slope(&ext),
        maps[0].map.k_residual
    ))
}

pub fn equivalence(cfg: &ExperimentConfig, out: &Artifacts) -> CliResult<String> {
    let base = base6(cfg)?;
    let l1 = build_ladder(&base, LadderPattern::FirstLimit, cfg.n_max, cfg.t5, cfg.tol)?;
    let l2 = build_ladder(&mobius_dual(&base)?, LadderPattern::SecondLimit, cfg.n_max, cfg.t5, cfg.tol)?;
    let e1 = extract_p5_from_ladder(&l1, LimitKind::OneA)?;
    let e2 = extract_p5_from_ladder(&l2, LimitKind::Two)?;
    let rep = equivalence_check(&l1, &e1, &l2, &e2)?;
    out.write("equivalence.json", &to_json(&rep))?;
    Ok(format!(
        "equivalence: n = {}, z5 mismatch {:.3e}, y5 mismatch {:.3e}",
        rep.n, rep.z5_mismatch, rep.y5_mismatch
    ))
}

pub fn triangularize(cfg: &ExperimentConfig, out: &Artifacts) -> CliResult<String> {
    let path = cfg
        .batch
        .as_ref()
        .ok_or_else(|| CliError::Config("triangularize needs --batch <file.jsonl>".into()))?;
    let input = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let text = solve_jsonl(&input);
    out.write("solutions.jsonl", &text)?;
    let (mut worst, mut solved, mut failed) = (0.0_f64, 0, 0);
    for line in text.lines() {
        let o: BatchOutput = serde_json::from_str(line).expect("own output parses");
        match o.residuals {
            Some(r) => {
                worst = worst.max(r.max());
                solved += 1;
            }
            None => failed += 1,
        }
    }
    Ok(format!("triangularize: {solved} solved, {failed} failed, max residual {worst:.3e}"))
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfCheck {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

fn check(name: &str, value: f64, bound: f64) -> SelfCheck {
    SelfCheck {
        name: name.into(),
        value,
        bound,
        pass: value <= bound,
    }
}

/// Quick end-to-end checks of each engine at reduced size.
pub fn selftest(cfg: &ExperimentConfig, out: &Artifacts) -> CliResult<String> {
    let mut checks = Vec::new();
    let base = base6(cfg)?;
    let p = point6(&base, cfg.tol)?;
    checks.push(check("p6 monodromy closure", p.residuals.max(), 1e-7));

    let moved = schlesinger_flow(&base, base.t6 + c(0.05, 0.0), cfg.tol)?;
    checks.push(check("isomonodromy under flow", max_entry_change(&p, &point6(&moved, cfg.tol)?), 1e-6));

    let step = ElementaryStep::new(Label::One, Label::Inf, (-1, 1))?;
    let shifted = ThetaBook::new(base.thetas).apply(&step).current();
    let shift = (shifted.th1 - base.thetas.th1 + 1.0)
        .norm()
        .max((shifted.thinf - base.thetas.thinf - 1.0).norm());
    checks.push(check("step theta shift", shift, 0.0));

    let mut g = rng(cfg);
    let mut worst = 0.0_f64;
    let mut solved = 0;
    while solved < 200 {
        let Ok(pp) = PairProblem::from_matrices(random_sl2(&mut g), random_sl2(&mut g)) else {
            continue;
        };
        if classify(&pp) != Ok(CaseTag::Generic) {
            continue;
        }
        for sol in solve_both(&pp, None)? {
            worst = worst.max(verify(&pp, &sol)?.max());
        }
        solved += 1;
    }
    checks.push(check("triangularizer residual", worst, 1e-10));

    let l = build_ladder(&base, LadderPattern::FirstLimit, 12, cfg.t5, cfg.tol)?;
    let ext = extract_p5_from_ladder(&l, LimitKind::OneA)?;
    checks.push(check("first limit slope deficit", 0.5 - min_slope(&ext), 0.0));

    let mut lines = Vec::new();
    for ch in &checks {
        let tag = if ch.pass { "PASS" } else { "FAIL" };
        lines.push(format!("{tag} {} ({:.3e}, bound {:.1e})", ch.name, ch.value, ch.bound));
    }
    out.write("selftest.json", &to_json(&checks))?;
    for l in &lines {
        println!("{l}");
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(format!("selftest: {} checks passed", checks.len()))
    } else {
        Err(CliError::Check(failed.join(", ")))
    }
}

/// Dispatches a resolved config: writes the manifest, runs the command.
pub fn run(cfg: &ExperimentConfig) -> CliResult<String> {
    let out = Artifacts::create(&cfg.out)?;
    out.write("manifest.toml", &cfg.manifest())?;
    let f = match cfg.command.as_str() {
        "monodromy" => monodromy,
        "flow6" => flow6,
        "flow5" => flow5,
        "stokes" => stokes,
        "ladder" => ladder,
        "limit1" => limit1,
        "limit2" => limit2,
        "equivalence" => equivalence,
        "triangularize" => triangularize,
        "selftest" => selftest,
        other => return Err(CliError::Config(format!("unknown command {other:?}"))),
    };
    f(cfg, &out)
}
