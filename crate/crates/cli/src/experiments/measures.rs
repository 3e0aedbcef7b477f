use nuh_core::fixtures::TwoAttractor;
use nuh_core::measures::disk_complement_area;
use nuh_core::measures::{
    cluster_basins, ensemble_histogram, frequency_experiment, l1_distance, nonincreasing_within, rnue_experiment,
    single_linkage, srb_reference, stability_csv, stability_curve, stationarity_residual, stationary_density,
    ulam_operator, BasinReport, GridHistogram, StabilityConfig,
};
use serde_json::json;

use super::{csv_f64, require, Context, Pipeline};
use crate::config::BasinSystem;
use crate::error::CliError;
use crate::output::{Artifact, Invariant};

fn unperturbed(ctx: &Context) -> bool {
    ctx.map.strength() == 0.0
}

pub(crate) fn rnue(ctx: &Context) -> Result<Pipeline, CliError> {
    let s = &ctx.cfg.rnue;
    require(s.n_steps >= 100, "rnue.n_steps must be >= 100")?;
    let rep = rnue_experiment(&ctx.map, &ctx.model, ctx.streams, s.n_steps, ctx.seed)?;
    let mut csv = String::from("stream,value\n");
    for (i, v) in rep.values.iter().enumerate() {
        csv.push_str(&format!("{i},{}\n", csv_f64(*v)));
    }
    let mut weak = String::from("c,fraction\n");
    for (c, f) in &rep.weak_fractions {
        weak.push_str(&format!("{},{}\n", csv_f64(*c), csv_f64(*f)));
    }
    let slope = rep.decay.fit.map(|f| f.slope);
    let stats = json!({
        "summary": rep.summary,
        "bad_level": rep.bad_level,
        "weak_fractions": rep.weak_fractions,
        "decay": {"n": rep.decay.n, "fraction": rep.decay.fraction, "fit": rep.decay.fit},
    });
    let invariants = vec![
        Invariant::new("all_averages_negative", rep.summary.max < 0.0, format!("max {:.6e} < 0", rep.summary.max)),
        Invariant::at_most("p05_expansion", rep.summary.p05, s.p05_bound),
        Invariant::new("bad_set_decay", slope.is_none_or(|v| v <= 0.0), format!("fitted slope {slope:?} <= 0")),
    ];
    let artifacts = vec![
        Artifact::text("averages.csv", csv),
        Artifact::text("decay.csv", rep.decay.to_csv()),
        Artifact::text("weak_fractions.csv", weak),
    ];
    Ok((stats, invariants, artifacts))
}

pub(crate) fn frequency(ctx: &Context) -> Result<Pipeline, CliError> {
    let s = &ctx.cfg.frequency;
    let radius = s.radius.unwrap_or(ctx.map.radius());
    require((0.0..0.5).contains(&radius), "frequency.radius must lie in [0, 0.5)")?;
    require(
        s.ladder.len() >= 2 && s.ladder[0] >= 1 && s.ladder.windows(2).all(|w| w[0] < w[1]),
        "frequency.ladder must be strictly increasing with at least two positive entries",
    )?;
    let rep = frequency_experiment(&ctx.map, &ctx.model, radius, ctx.streams, &s.ladder, ctx.seed)?;
    let mut csv = String::from("stream,occupancy\n");
    for (i, v) in rep.occupancy.iter().enumerate() {
        csv.push_str(&format!("{i},{}\n", csv_f64(*v)));
    }
    let mut mean = String::from("n,mean_occupancy\n");
    for (n, m) in rep.ladder.iter().zip(&rep.mean_occupancy) {
        mean.push_str(&format!("{n},{}\n", csv_f64(*m)));
    }
    let lebesgue = disk_complement_area(radius);
    let last_mean = *rep.mean_occupancy.last().expect("nonempty ladder");
    let slope = rep.decay.fit.map(|f| f.slope);
    let stats = json!({
        "radius": radius,
        "zeta": rep.zeta,
        "mean_occupancy": rep.mean_occupancy,
        "lebesgue_occupancy": lebesgue,
        "decay": {"n": rep.decay.n, "fraction": rep.decay.fraction, "fit": rep.decay.fit},
    });
    let mut invariants =
        vec![Invariant::new("bad_set_decay", slope.is_some_and(|v| v < 0.0), format!("fitted slope {slope:?} < 0"))];
    if unperturbed(ctx) {
        invariants.push(Invariant::at_most("lebesgue_occupancy", (last_mean - lebesgue).abs(), s.lebesgue_tolerance));
    }
    let artifacts = vec![
        Artifact::text("occupancy.csv", csv),
        Artifact::text("mean_occupancy.csv", mean),
        Artifact::text("decay.csv", rep.decay.to_csv()),
    ];
    Ok((stats, invariants, artifacts))
}

pub(crate) fn ulam(ctx: &Context) -> Result<Pipeline, CliError> {
    let s = &ctx.cfg.ulam;
    require(s.grid_n >= 8, "ulam.grid_n must be >= 8")?;
    require(s.samples_per_cell >= 16, "ulam.samples_per_cell must be >= 16")?;
    require(s.tol > 0.0 && s.max_iters >= 1, "ulam.tol must be > 0 and max_iters >= 1")?;
    let op = ulam_operator(&ctx.map, &ctx.model, s.grid_n, s.samples_per_cell, ctx.seed)?;
    let h = stationary_density(&op, s.tol, s.max_iters)?;
    let residual = stationarity_residual(&op, &h);
    let row_dev = (0..s.grid_n * s.grid_n).map(|i| (op.row_sum(i) - 1.0).abs()).fold(0.0, f64::max);
    let to_uniform = l1_distance(&h, &GridHistogram::uniform(s.grid_n))?;

    let mut invariants = vec![
        Invariant::at_most("rows_stochastic", row_dev, 1e-9),
        Invariant::at_most("fixed_point", residual, 2.0 * s.tol),
    ];
    let mut artifacts =
        vec![Artifact::text("density.csv", h.to_csv()), Artifact { name: "density.bin".into(), bytes: h.to_binary() }];
    let mut empirical_l1 = None;
    if s.empirical_steps > 0 {
        let e = ensemble_histogram(
            &ctx.map,
            &ctx.model,
            ctx.streams,
            s.burn_in + s.empirical_steps,
            s.burn_in,
            s.grid_n,
            ctx.seed,
        )?;
        let d = l1_distance(&h, &e)?;
        empirical_l1 = Some(d);
        invariants.push(Invariant::at_most("empirical_agreement", d, s.agreement_bound));
        artifacts.push(Artifact::text("empirical.csv", e.to_csv()));
    }
    if unperturbed(ctx) {
        invariants.push(Invariant::at_most("lebesgue_stationary", to_uniform, s.uniform_bound));
    }
    if s.write_matrix {
        artifacts.push(Artifact::text("matrix.csv", op.to_triplet_csv()));
    }
    let stats = json!({
        "nnz": op.nnz(),
        "stationarity_residual": residual,
        "max_row_sum_deviation": row_dev,
        "l1_to_uniform": to_uniform,
        "l1_to_empirical": empirical_l1,
    });
    Ok((stats, invariants, artifacts))
}

pub(crate) fn stability(ctx: &Context) -> Result<Pipeline, CliError> {
    let s = &ctx.cfg.stability;
    require(!s.epsilons.is_empty(), "stability.epsilons must be nonempty")?;
    require(s.epsilons.windows(2).all(|w| w[0] > w[1]), "stability.epsilons must be strictly descending")?;
    require(s.epsilons.iter().all(|e| *e >= 0.0 && e.is_finite()), "stability.epsilons must be >= 0")?;
    require(
        s.grid_n >= 1 && s.steps >= 1 && s.reference_orbits >= 1 && s.reference_steps >= 1,
        "stability sizes must be >= 1",
    )?;
    if let Some(u) = s.ulam_samples {
        require(s.grid_n >= 8 && u >= 16, "stability.ulam_samples needs grid_n >= 8 and >= 16 samples")?;
    }
    let reference = srb_reference(&ctx.map, s.grid_n, s.reference_orbits, s.reference_steps, s.burn_in, ctx.seed)?;
    let curve = stability_curve(
        &ctx.map,
        &s.epsilons,
        &reference,
        &StabilityConfig {
            ensemble: ctx.streams,
            steps: s.steps,
            burn_in: s.burn_in,
            grid_n: s.grid_n,
            seed: ctx.seed,
            ulam_samples: s.ulam_samples,
        },
    )?;
    let l1: Vec<f64> = curve.iter().map(|p| p.l1_distance).collect();
    let mut invariants = vec![Invariant::new(
        "nonincreasing_within_band",
        nonincreasing_within(&l1, s.band),
        format!("{l1:?} within +{}", s.band),
    )];
    if unperturbed(ctx) {
        let worst = l1.iter().cloned().fold(0.0, f64::max);
        invariants.push(Invariant::at_most("flat_curve", worst, s.flat_bound));
    }
    let mut artifacts = vec![
        Artifact::text("stability.csv", stability_csv(&curve)),
        Artifact::text("reference.csv", reference.to_csv()),
    ];
    if s.ulam_samples.is_some() {
        let mut csv = String::from("epsilon,ulam_l1_distance\n");
        for p in &curve {
            csv.push_str(&format!("{},{}\n", csv_f64(p.epsilon), csv_f64(p.ulam_l1_distance.unwrap_or(f64::NAN))));
        }
        artifacts.push(Artifact::text("stability_ulam.csv", csv));
    }
    let stats = json!({ "curve": curve });
    Ok((stats, invariants, artifacts))
}

fn basins_csv(rep: &BasinReport) -> String {
    let mut out = format!("stream,cluster,{}\n", rep.observables.join(","));
    for (i, (avg, c)) in rep.averages.iter().zip(&rep.assignments).enumerate() {
        let cols: Vec<String> = avg.iter().map(|v| csv_f64(*v)).collect();
        out.push_str(&format!("{i},{c},{}\n", cols.join(",")));
    }
    out
}

pub(crate) fn basins(ctx: &Context) -> Result<Pipeline, CliError> {
    let s = &ctx.cfg.basins;
    require(s.modes >= 2, "basins.modes must be >= 2")?;
    require(s.n_steps >= 1, "basins.n_steps must be >= 1")?;
    require(s.threshold > 0.0, "basins.threshold must be > 0")?;
    let rep = match s.system {
        BasinSystem::Map => {
            cluster_basins(&ctx.map, &ctx.model, ctx.streams, s.n_steps, s.modes, s.threshold, ctx.seed)?
        }
        BasinSystem::TwoAttractor => cluster_basins(
            &TwoAttractor::default(),
            &ctx.model,
            ctx.streams,
            s.n_steps,
            s.modes,
            s.threshold,
            ctx.seed,
        )?,
    };
    let (halved, _) = single_linkage(&rep.averages, 0.5 * s.threshold);
    let mut invariants = vec![Invariant::new(
        "stable_under_threshold_halving",
        halved == rep.clusters,
        format!("{} clusters at {}, {halved} at half", rep.clusters, s.threshold),
    )];
    if let Some(expected) = s.expected {
        invariants.push(Invariant::new(
            "expected_count",
            rep.clusters == expected,
            format!("{} clusters, expected {expected}", rep.clusters),
        ));
    }
    let stats =
        json!({ "clusters": rep.clusters, "clusters_at_half_threshold": halved, "observables": rep.observables });
    Ok((stats, invariants, vec![Artifact::text("basins.csv", basins_csv(&rep))]))
}
