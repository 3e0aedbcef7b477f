use nuh_core::cones::{check_cone_invariance, cocycle_log_norms, CocycleTrace, ConeParams};
use nuh_core::hyperbolic::{
    choose_alpha, contraction_from_window, detect_hyperbolic_times, distortion_from_window, evolve_window,
    is_hyperbolic_time, pliss_select, pliss_select_quadratic, CuPolyline, PlissInput, MAX_SPACING, SETTLE,
};
use nuh_core::measures::window_density_ratio;
use nuh_core::noise::ensemble_member;
use nuh_core::stats::{fit_line, Summary};
use nuh_core::torus::verify_conditions;
use nuh_core::{par, RandomOrbit, RngStream, TorusMap};
use serde_json::json;

use super::{csv_f64, require, Context, Pipeline};
use crate::error::CliError;
use crate::output::{Artifact, Invariant};

/// Domination constant attached to the cone fields of the curve pipelines.
const DOMINATION_TARGET: f64 = 0.5;

pub(crate) fn verify_map(ctx: &Context) -> Result<Pipeline, CliError> {
    let s = &ctx.cfg.verify_map;
    require(s.grid_n >= 16, "verify_map.grid_n must be >= 16")?;
    require(s.cone_width > 0.0 && s.cone_width < 1.0, "verify_map.cone_width must lie in (0, 1)")?;
    require(s.lambda_target > 0.0 && s.lambda_target < 1.0, "verify_map.lambda_target must lie in (0, 1)")?;
    let rep = verify_conditions(&ctx.map, s.cone_width, s.grid_n, s.lambda_target)?;
    let cone = ConeParams::for_map(&ctx.map, s.cone_width, s.lambda_target)?;
    let noisy = if s.cone_samples > 0 {
        let mut rng = RngStream::new(ctx.seed, 0);
        check_cone_invariance(&ctx.map, &cone, ctx.model.epsilon, s.cone_samples, &mut rng)?
    } else {
        Vec::new()
    };

    let mut csv = String::from("x,y,tag,value\n");
    for v in &rep.violations {
        csv.push_str(&format!("{},{},{:?},{}\n", csv_f64(v.point.x()), csv_f64(v.point.y()), v.tag, csv_f64(v.value)));
    }
    let counts: serde_json::Map<String, serde_json::Value> = [
        nuh_core::torus::ConditionTag::A,
        nuh_core::torus::ConditionTag::B,
        nuh_core::torus::ConditionTag::C,
        nuh_core::torus::ConditionTag::D,
        nuh_core::torus::ConditionTag::Domination,
    ]
    .into_iter()
    .map(|t| (format!("{t:?}"), json!(rep.count(t))))
    .collect();
    let stats = json!({
        "sigma1": rep.sigma1,
        "sigma2": rep.sigma2,
        "delta0": rep.delta0,
        "domination": rep.domination,
        "samples_in_region": rep.samples_in_region,
        "violations": rep.violations.len(),
        "violations_by_condition": counts,
        "noisy_cone_violations": noisy.len(),
    });
    let invariants = vec![
        Invariant::new(
            "conditions_certified",
            rep.certified(),
            format!("{} violations on a {}x{} grid", rep.violations.len(), s.grid_n, s.grid_n),
        ),
        Invariant::new(
            "cone_invariance_under_noise",
            noisy.is_empty(),
            format!("{} violations in {} samples at epsilon {}", noisy.len(), s.cone_samples, ctx.model.epsilon),
        ),
    ];
    Ok((stats, invariants, vec![Artifact::text("violations.csv", csv)]))
}

pub(crate) fn pliss_demo(ctx: &Context) -> Result<Pipeline, CliError> {
    let s = &ctx.cfg.pliss_demo;
    let input = PlissInput { values: s.values.clone(), c1: s.c1, c2: s.c2, h: s.h };
    input.validate().map_err(|e| CliError::Usage(format!("pliss_demo: {e}")))?;
    require(!input.values.is_empty(), "pliss_demo.values must be nonempty")?;
    let selected = pliss_select(&input)?;
    let oracle = pliss_select_quadratic(&input.values, input.c1);
    let n = input.values.len();
    let zeta = input.zeta();
    let good = input.has_good_average();
    let bound = zeta * n as f64;
    let count = selected.len() as f64;
    let cardinality = if !good {
        Invariant::new("cardinality_bound", true, "hypothesis sum >= c2 N not met; nothing to check")
    } else if input.h > input.c2 {
        Invariant::new("cardinality_bound", count > bound, format!("{count} > {bound:.6}"))
    } else {
        Invariant::new("cardinality_bound", count >= bound, format!("{count} >= {bound:.6} (H = c2)"))
    };
    let invariants = vec![
        Invariant::new(
            "matches_quadratic_oracle",
            selected == oracle,
            format!("{} vs {} indices", selected.len(), oracle.len()),
        ),
        cardinality,
    ];
    let mut csv = String::from("n\n");
    for i in &selected {
        csv.push_str(&format!("{i}\n"));
    }
    let stats = json!({ "n": n, "selected": selected.len(), "zeta": zeta, "good_average": good, "indices": selected });
    Ok((stats, invariants, vec![Artifact::text("indices.csv", csv)]))
}

struct TracedOrbit {
    orbit: RandomOrbit,
    trace: CocycleTrace,
    alpha: f64,
}

fn traced_orbit(ctx: &Context, stream: usize, n_steps: usize, alpha: Option<f64>) -> Result<TracedOrbit, CliError> {
    let orbit = ensemble_member(&ctx.map, &ctx.model, ctx.seed, stream, n_steps + SETTLE)?;
    let trace = cocycle_log_norms(&ctx.map, &orbit, SETTLE)?;
    let alpha = match alpha {
        Some(a) => a,
        None => choose_alpha(&trace)?,
    };
    Ok(TracedOrbit { orbit, trace, alpha })
}

fn check_alpha(alpha: Option<f64>, key: &str) -> Result<(), CliError> {
    match alpha {
        Some(a) => require(a > 0.0 && a < 1.0, &format!("{key} must lie in (0, 1)")),
        None => Ok(()),
    }
}

pub(crate) fn hyp_times(ctx: &Context) -> Result<Pipeline, CliError> {
    let s = &ctx.cfg.hyp_times;
    require(s.n_steps >= 1, "hyp_times.n_steps must be >= 1")?;
    check_alpha(s.alpha, "hyp_times.alpha")?;
    struct Row {
        alpha: f64,
        density: f64,
        gamma: Option<f64>,
        replay_failures: usize,
        first: Option<(TracedOrbit, Vec<usize>)>,
    }
    let rows = par::map_indexed(ctx.streams, |i| -> Result<Row, CliError> {
        let t = traced_orbit(ctx, i, s.n_steps, s.alpha)?;
        let rep = detect_hyperbolic_times(&t.trace, t.alpha)?;
        let replay_failures =
            rep.indices.iter().filter(|&&m| !is_hyperbolic_time(&t.trace.values, m, t.alpha, 1e-12)).count();
        Ok(Row {
            alpha: t.alpha,
            density: rep.density,
            gamma: rep.gamma_bound,
            replay_failures,
            first: (i == 0).then_some((t, rep.indices)),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let mut csv = String::from("stream,alpha,density,gamma_bound\n");
    for (i, r) in rows.iter().enumerate() {
        let g = r.gamma.map(csv_f64).unwrap_or_default();
        csv.push_str(&format!("{i},{},{},{g}\n", csv_f64(r.alpha), csv_f64(r.density)));
    }
    let replay_failures: usize = rows.iter().map(|r| r.replay_failures).sum();
    let below_bound = rows.iter().filter(|r| r.gamma.is_some_and(|g| r.density < g)).count();
    let densities: Vec<f64> = rows.iter().map(|r| r.density).collect();
    let alphas: Vec<f64> = rows.iter().map(|r| r.alpha).collect();
    let (first, indices) = rows.into_iter().next().and_then(|r| r.first).expect("stream 0 exists");
    let mut idx_csv = String::from("n\n");
    for m in &indices {
        idx_csv.push_str(&format!("{m}\n"));
    }
    let stats = json!({
        "density": Summary::of(&densities),
        "alpha": Summary::of(&alphas),
        "stream0_times": indices.len(),
        "stream0_mean_cocycle": first.trace.mean(),
    });
    let invariants = vec![
        Invariant::new(
            "definition_replay",
            replay_failures == 0,
            format!("{replay_failures} times fail the replay at 1e-12"),
        ),
        Invariant::new("pliss_density_bound", below_bound == 0, format!("{below_bound} orbits below their zeta bound")),
    ];
    let artifacts = vec![
        Artifact::text("densities.csv", csv),
        Artifact::text("hyp_times.csv", idx_csv),
        Artifact::text("trace.csv", first.trace.to_csv()),
        Artifact::text("orbit.csv", first.orbit.to_csv()),
    ];
    Ok((stats, invariants, artifacts))
}

fn cu_segment(t: &TracedOrbit, half_count: usize) -> Result<CuPolyline, CliError> {
    Ok(CuPolyline::segment(t.orbit.points[SETTLE], t.trace.directions[0], MAX_SPACING, half_count)?)
}

fn cone_for(map: &TorusMap, width: f64) -> Result<ConeParams, CliError> {
    ConeParams::for_map(map, width, DOMINATION_TARGET).map_err(|e| CliError::Usage(format!("cone: {e}")))
}

pub(crate) fn contraction(ctx: &Context) -> Result<Pipeline, CliError> {
    let s = &ctx.cfg.contraction;
    require(s.n_steps >= 1 && s.orbits >= 1 && s.stride >= 1, "contraction.n_steps, orbits and stride must be >= 1")?;
    require(s.half_count >= 1, "contraction.half_count must be >= 1")?;
    require(s.delta1 > 0.0 && s.tolerance >= 0.0, "contraction.delta1 must be > 0 and tolerance >= 0")?;
    check_alpha(s.alpha, "contraction.alpha")?;
    let cone = cone_for(&ctx.map, s.cone_width)?;
    struct Check {
        stream: usize,
        hyp_time: usize,
        m0: usize,
        alpha: f64,
        worst_excess: f64,
        vertices: usize,
        ratios: Vec<f64>,
    }
    let per = par::map_indexed(s.orbits, |i| -> Result<Vec<Check>, CliError> {
        let t = traced_orbit(ctx, i, s.n_steps, s.alpha)?;
        let hyp = detect_hyperbolic_times(&t.trace, t.alpha)?;
        let curve = cu_segment(&t, s.half_count)?;
        hyp.indices
            .iter()
            .step_by(s.stride)
            .map(|&m| {
                let w = evolve_window(&ctx.map, &t.orbit, &curve, &cone, SETTLE, m, s.delta1)?;
                let r = contraction_from_window(&w, t.alpha, s.delta1);
                Ok(Check {
                    stream: i,
                    hyp_time: m,
                    m0: r.m0,
                    alpha: t.alpha,
                    worst_excess: r.worst_excess,
                    vertices: r.vertices_checked,
                    ratios: r.ratios,
                })
            })
            .collect()
    })
    .into_iter()
    .collect::<Result<Vec<_>, CliError>>()?;
    let checks: Vec<Check> = per.into_iter().flatten().collect();
    if checks.is_empty() {
        return Err(nuh_core::Error::Range("no hyperbolic times detected".into()).into());
    }

    let mut csv = String::from("stream,hyp_time,m0,alpha,worst_excess,vertices\n");
    for c in &checks {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.stream,
            c.hyp_time,
            c.m0,
            csv_f64(c.alpha),
            csv_f64(c.worst_excess),
            c.vertices
        ));
    }
    let worst = checks.iter().max_by(|a, b| a.worst_excess.total_cmp(&b.worst_excess)).expect("nonempty");
    let mut ratios_csv = String::from("k,ratio,bound\n");
    for (k, r) in worst.ratios.iter().enumerate() {
        ratios_csv.push_str(&format!("{k},{},{}\n", csv_f64(*r), csv_f64(worst.alpha.powf(0.5 * k as f64))));
    }
    let failures = checks.iter().filter(|c| c.worst_excess > 1.0 + s.tolerance).count();
    let excess: Vec<f64> = checks.iter().map(|c| c.worst_excess).collect();
    let stats = json!({
        "checked": checks.len(),
        "failures": failures,
        "worst_excess": Summary::of(&excess),
        "worst_window": {"stream": worst.stream, "hyp_time": worst.hyp_time, "m0": worst.m0},
    });
    let invariants = vec![
        Invariant::new(
            "ratio_within_alpha_half_power",
            failures == 0,
            format!("{failures} of {} windows exceed alpha^(k/2) (1 + {})", checks.len(), s.tolerance),
        ),
        Invariant::at_least("enough_hyperbolic_times", checks.len() as f64, s.min_times as f64),
    ];
    let artifacts = vec![Artifact::text("contraction.csv", csv), Artifact::text("worst_ratios.csv", ratios_csv)];
    Ok((stats, invariants, artifacts))
}

pub(crate) fn distortion(ctx: &Context) -> Result<Pipeline, CliError> {
    let s = &ctx.cfg.distortion;
    require(s.calibration_orbits >= 1 && s.orbits >= 1, "distortion needs calibration_orbits and orbits >= 1")?;
    require(s.calibration_time >= 1 && s.stride >= 1, "distortion.calibration_time and stride must be >= 1")?;
    require(s.n_steps > s.calibration_time, "distortion.n_steps must exceed calibration_time")?;
    require(s.growth_factor >= 1.0, "distortion.growth_factor must be >= 1")?;
    require(
        s.grid_1d >= 1 && s.half_count >= 1 && s.delta1 > 0.0,
        "distortion.grid_1d, half_count, delta1 must be positive",
    )?;
    let cone = cone_for(&ctx.map, s.cone_width)?;

    // calibration orbits use streams disjoint from the test orbits
    let cal_len = (4 * s.calibration_time).max(s.calibration_time + 150);
    let calibration = par::map_indexed(s.calibration_orbits, |i| -> Result<(usize, f64), CliError> {
        let t = traced_orbit(ctx, s.orbits + i, cal_len, None)?;
        let hyp = detect_hyperbolic_times(&t.trace, t.alpha)?;
        let m = *hyp.indices.iter().find(|m| **m >= s.calibration_time).ok_or_else(|| {
            nuh_core::Error::Range(format!("calibration orbit {i} has no hyperbolic time after {}", s.calibration_time))
        })?;
        let w = evolve_window(&ctx.map, &t.orbit, &cu_segment(&t, s.half_count)?, &cone, SETTLE, m, s.delta1)?;
        Ok((m, distortion_from_window(&w, s.delta1, f64::INFINITY).max_ratio))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let cal_values: Vec<f64> = calibration.iter().map(|c| c.1).collect();
    let cal_max = cal_values.iter().cloned().fold(0.0, f64::max);
    let c2 = s.growth_factor * cal_max;

    let samples = par::map_indexed(s.orbits, |i| -> Result<Vec<(usize, usize, f64, f64)>, CliError> {
        let t = traced_orbit(ctx, i, s.n_steps, None)?;
        let hyp = detect_hyperbolic_times(&t.trace, t.alpha)?;
        let curve = cu_segment(&t, s.half_count)?;
        let mut out = Vec::new();
        let mut next = s.calibration_time;
        for &m in &hyp.indices {
            if m < next {
                continue;
            }
            let w = evolve_window(&ctx.map, &t.orbit, &curve, &cone, SETTLE, m, s.delta1)?;
            let d = distortion_from_window(&w, s.delta1, c2);
            out.push((i, m, d.max_ratio, window_density_ratio(&w, s.delta1, s.grid_1d)));
            next = m + s.stride;
        }
        Ok(out)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?
    .concat();
    if samples.len() < 3 {
        return Err(nuh_core::Error::Range(format!("only {} distortion samples", samples.len())).into());
    }
    let x: Vec<f64> = samples.iter().map(|r| r.1 as f64).collect();
    let y: Vec<f64> = samples.iter().map(|r| r.2).collect();
    let fit = fit_line(&x, &y)?;
    let test_max = y.iter().cloned().fold(0.0, f64::max);
    let density_max = samples.iter().map(|r| r.3).fold(0.0, f64::max);

    let mut cal_csv = String::from("stream,hyp_time,max_ratio\n");
    for (i, (m, r)) in calibration.iter().enumerate() {
        cal_csv.push_str(&format!("{},{m},{}\n", s.orbits + i, csv_f64(*r)));
    }
    let mut csv = String::from("stream,hyp_time,max_ratio,density_ratio\n");
    for (i, m, r, d) in &samples {
        csv.push_str(&format!("{i},{m},{},{}\n", csv_f64(*r), csv_f64(*d)));
    }
    let stats = json!({
        "calibration": Summary::of(&cal_values),
        "c2_constant": c2,
        "samples": samples.len(),
        "max_ratio": Summary::of(&y),
        "trend": fit,
        "max_density_ratio": density_max,
    });
    let invariants = vec![
        Invariant::new(
            "no_growth_trend",
            fit.ci_contains_zero(),
            format!("slope {:.3e}, 95% CI [{:.3e}, {:.3e}]", fit.slope, fit.slope_ci.0, fit.slope_ci.1),
        ),
        Invariant::at_most("bounded_by_calibration", test_max, c2),
        Invariant::at_most("pushforward_density", density_max, c2 * c2),
    ];
    let artifacts = vec![Artifact::text("calibration.csv", cal_csv), Artifact::text("distortion.csv", csv)];
    Ok((stats, invariants, artifacts))
}
