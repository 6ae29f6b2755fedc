//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use superflow::cotangent::{flat, integrate_flow, phase_point_from, sharp};
use superflow::expmap::exp_jacobian_check;
use superflow::geodesics::{integrate, integrate_geodesic, speed_drift, InitialCondition, Mode};
use superflow::grassmann::koszul;
use superflow::model::{point_at, Model};
use superflow::verify::{
    compatibility_defect, flow_body_deviation, body_deviation, naturality_over_samples, random_element, random_points,
    VerifyOptions,
};
use superflow::{Execution, GrassmannElement};

type Outcome = Result<(bool, String), String>;

const DT: f64 = 1e-3;
const T_END: f64 = 1.0;
const EXEC: Execution = Execution::Parallel;

fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn model(name: &str) -> Model {
    Model::load(models_dir().join(name)).expect("bundled model loads")
}

/// Every bundled model with a valid metric.
fn bundled() -> Vec<Model> {
    ["flat_1_2.json", "c_metric_1_2.json", "diag_2_0.json", "flat_2_2.json", "warped_2_2.json"]
        .iter()
        .map(|n| model(n))
        .collect()
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn max_diff(a: &[GrassmannElement], b: &[GrassmannElement]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.max_abs_diff(y)).fold(0.0, f64::max)
}

fn flat_closed_form() -> Outcome {
    let m = model("flat_1_2.json");
    let sig = m.signature();
    let mut worst: f64 = 0.0;
    for slot in 1..3 {
        let mut vel = vec![GrassmannElement::zero(1); 3];
        vel[slot] = GrassmannElement::generator(1, 0);
        let ic = InitialCondition::new(sig, vec![GrassmannElement::zero(1); 3], vel).map_err(err)?;
        let traj = integrate_geodesic(&m.metric, &ic, 1.0, 1e-3).map_err(err)?;
        for s in &traj.samples {
            for k in 1..3 {
                let expect = if k == slot { s.t } else { 0.0 };
                let mut e = GrassmannElement::zero(1);
                e.set(1, expect);
                worst = worst.max(s.position.value(k).max_abs_diff(&e));
            }
        }
        if (traj.last().t - 1.0).abs() > 1e-12 {
            return Err(format!("grid ends at t = {}", traj.last().t));
        }
    }
    Ok((worst <= 1e-9, format!("max coefficient error {worst:.3e} (tol 1e-9)")))
}

fn christoffel_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    let diag = model("diag_2_0.json");
    for x in [0.5, 1.0, 2.0, 3.7] {
        let p = point_at(&diag.metric, &[x, 0.3], 2).map_err(err)?;
        let t = diag.metric.christoffel_at(&p).map_err(err)?;
        // index 0 = x, 1 = y
        let mut expect = [[[0.0; 2]; 2]; 2];
        expect[1][0][1] = 1.0 / x;
        expect[1][1][0] = 1.0 / x;
        expect[0][1][1] = -x;
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut e = GrassmannElement::zero(2);
                    e.set(0, expect[k][i][j]);
                    worst = worst.max(t.get(k, i, j).max_abs_diff(&e));
                }
            }
        }
    }
    // c(x) = 1 + x on the odd block; index 0 = x, 1 = th1, 2 = th2
    let c = model("c_metric_1_2.json");
    for x in [-0.5, 0.0, 0.25, 1.0, 3.0] {
        let p = point_at(&c.metric, &[x], 2).map_err(err)?;
        let t = c.metric.christoffel_at(&p).map_err(err)?;
        let (cv, dc) = (1.0 + x, 1.0);
        let mut expect = [[[0.0; 3]; 3]; 3];
        for a in 1..3 {
            expect[a][0][a] = 0.5 * dc / cv;
            expect[a][a][0] = 0.5 * dc / cv;
        }
        expect[0][1][2] = -0.5 * dc;
        expect[0][2][1] = 0.5 * dc;
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    let mut e = GrassmannElement::zero(2);
                    e.set(0, expect[k][i][j]);
                    worst = worst.max(t.get(k, i, j).max_abs_diff(&e));
                }
            }
        }
    }
    Ok((worst <= 1e-10, format!("max deviation {worst:.3e} (tol 1e-10)")))
}

struct Integrated {
    roundtrip: f64,
    drift: f64,
    body: f64,
    runs: usize,
}

/// Geodesic and flow for every initial condition of every bundled model, shared by
/// the round-trip, conservation and body-reduction criteria.
fn integrate_all() -> Result<Integrated, String> {
    let mut out = Integrated {
        roundtrip: 0.0,
        drift: 0.0,
        body: 0.0,
        runs: 0,
    };
    for m in bundled() {
        let chart = &m.metric;
        for (name, ic) in &m.initial_conditions {
            let ctx = |e: superflow::Error| format!("{} / {name}: {e}", m.name());
            let traj = integrate_geodesic(chart, ic, T_END, DT).map_err(ctx)?;
            let flow = integrate_flow(chart, &phase_point_from(chart, ic).map_err(ctx)?, T_END, DT).map_err(ctx)?;
            if traj.samples.len() != flow.samples.len() {
                return Err(format!("{} / {name}: grids differ", m.name()));
            }
            for (g, f) in traj.samples.iter().zip(&flow.samples) {
                // geodesic -> flow: flat-mapped geodesic is the flow's integral curve
                let p = flat(chart, &g.position, &g.velocity).map_err(ctx)?;
                // flow -> geodesic: the projected flow, with sharp-mapped momenta
                let v = sharp(chart, &f.position, &f.momenta).map_err(ctx)?;
                out.roundtrip = out
                    .roundtrip
                    .max(g.position.max_abs_diff(&f.position))
                    .max(max_diff(&p, &f.momenta))
                    .max(max_diff(&v, &g.velocity));
            }
            out.drift = out
                .drift
                .max(flow.energy_drift())
                .max(speed_drift(chart, &traj, EXEC).map_err(ctx)?);
            out.body = out
                .body
                .max(body_deviation(chart, &traj, DT, T_END).map_err(ctx)?)
                .max(flow_body_deviation(chart, &flow, DT, T_END).map_err(ctx)?);
            out.runs += 1;
        }
    }
    Ok(out)
}

fn jacobian_identity() -> Outcome {
    let (mut even, mut odd, mut points) = (0.0f64, 0.0f64, 0);
    for m in bundled() {
        if m.samples.len() < 5 {
            return Err(format!("{}: fewer than 5 grid points", m.name()));
        }
        for q in &m.samples {
            let r = exp_jacobian_check(&m.metric, q, 1e-4, DT, EXEC).map_err(err)?;
            even = even.max(r.even_deviation);
            odd = odd.max(r.odd_deviation).max(r.mixed_max);
            points += 1;
        }
    }
    Ok((
        even <= 1e-5 && odd <= 1e-9,
        format!("{points} points: even block {even:.3e} (tol 1e-5), odd block {odd:.3e} (tol 1e-9)"),
    ))
}

fn naturality() -> Outcome {
    let (mut iso, mut control, mut n_iso, mut n_ctl) = (0.0f64, f64::INFINITY, 0, 0);
    for m in bundled() {
        let opts = VerifyOptions::for_model(&m);
        for nm in &m.morphisms {
            match nm.spec.isometry {
                Some(true) => {
                    let d = naturality_over_samples(&m, &nm.morphism, &opts).map_err(err)?;
                    iso = iso.max(d);
                    n_iso += 1;
                }
                // exp is affine on a constant chart, so any linear map commutes with it
                Some(false) if !m.metric.has_constant_coefficients() => {
                    let d = naturality_over_samples(&m, &nm.morphism, &opts).map_err(err)?;
                    control = control.min(d);
                    n_ctl += 1;
                }
                _ => {}
            }
        }
    }
    if n_iso == 0 || n_ctl == 0 {
        return Err("missing isometry fixtures or negative controls".into());
    }
    Ok((
        iso <= 1e-6 && control > 1e-3,
        format!("{n_iso} isometries max {iso:.3e} (tol 1e-6); {n_ctl} curved-chart controls min {control:.3e} (> 1e-3)"),
    ))
}

fn mode_divergence() -> Outcome {
    let m = model("flat_1_2.json");
    let sig = m.signature();
    let l = 2;
    let g = |i| GrassmannElement::generator(l, i);
    let pos = vec![GrassmannElement::scalar(l, 0.2), g(0).scale(0.5), g(1).scale(-0.3)];
    let vel = vec![GrassmannElement::scalar(l, 1.0), g(1), g(0).scale(2.0)];
    let ic = InitialCondition::new(sig, pos, vel).map_err(err)?;
    let paper = integrate(&m.metric, &ic, Mode::Paper, T_END, DT).map_err(err)?;
    let goert = integrate(&m.metric, &ic, Mode::Goertsches, T_END, DT).map_err(err)?;
    let (mut affine, mut constant, mut slope): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for k in 1..3 {
        let q0 = ic.position.value(k);
        let v0 = &ic.velocity[k];
        for (a, b) in paper.samples.iter().zip(&goert.samples) {
            let line = q0 + &v0.scale(a.t);
            affine = affine.max(a.position.value(k).max_abs_diff(&line));
            constant = constant.max(b.position.value(k).max_abs_diff(q0));
        }
        let end = paper.last().position.value(k);
        slope = slope.max((end - q0).max_abs() / paper.last().t);
    }
    Ok((
        affine <= 1e-9 && constant <= 1e-12 && slope > 0.5,
        format!("paper affine error {affine:.3e}, slope {slope:.3}; goertsches variation {constant:.3e}"),
    ))
}

fn structural() -> Outcome {
    let mut geom: f64 = 0.0;
    for m in bundled() {
        for p in random_points(&m.metric, &m.samples, 100, 2, 0x5eed) {
            let t = m.metric.christoffel_at(&p).map_err(err)?;
            let sig = m.signature();
            geom = geom
                .max(compatibility_defect(&m.metric, &p).map_err(err)?)
                .max(t.symmetry_defect(sig))
                .max(t.parity_defect(sig));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut laws: f64 = 0.0;
    let mut inv: f64 = 0.0;
    for n in 0..1000 {
        let l = 1 + n % 6;
        let (pa, pb) = ((n / 6 % 2) as u32, (n / 12 % 2) as u32);
        let a = random_element(&mut rng, l, pa, 1.0);
        let b = random_element(&mut rng, l, pb, 1.0);
        let c = &random_element(&mut rng, l, 0, 1.0) + &random_element(&mut rng, l, 1, 1.0);
        let scale = 1.0 + a.max_abs() * b.max_abs() * c.max_abs();
        let assoc = (&(&a * &b) * &c).max_abs_diff(&(&a * &(&b * &c)));
        let dist = (&a * &(&b + &c)).max_abs_diff(&(&(&a * &b) + &(&a * &c)));
        let comm = (&a * &b).max_abs_diff(&(&b * &a).scale(koszul(pa, pb)));
        laws = laws.max(assoc.max(dist).max(comm) / scale);
        let mut e = random_element(&mut rng, l, 0, 1.0);
        e.set(0, if n % 2 == 0 { 1.5 } else { -0.8 });
        let r = e.invert().map_err(err)?;
        inv = inv.max((&e * &r).max_abs_diff(&GrassmannElement::one(l)));
    }
    Ok((
        geom <= 1e-8 && laws <= 1e-12 && inv <= 1e-10,
        format!("connection {geom:.3e} (tol 1e-8), algebra laws {laws:.3e} (tol 1e-12), inverse {inv:.3e} (tol 1e-10)"),
    ))
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_superflow");
    let dir = tempfile_dir()?;
    let runs: Vec<Vec<String>> = vec![
        vec!["geodesic", "--model", "c_metric_1_2.json", "--ic", "soul"],
        vec!["geodesic", "--model", "warped_2_2.json", "--ic", "mixed", "--mode", "goertsches"],
        vec!["flow", "--model", "c_metric_1_2.json", "--ic", "drift"],
        vec!["flow", "--model", "diag_2_0.json", "--ic", "soul"],
    ]
    .into_iter()
    .map(|r| r.into_iter().map(String::from).collect())
    .collect();
    let mut bytes = 0;
    for (k, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = dir.join(format!("run{k}_{rep}.csv"));
            let status = Command::new(bin)
                .current_dir(models_dir())
                .args(args)
                .arg("--out")
                .arg(&out)
                .status()
                .map_err(err)?;
            if !status.success() {
                return Err(format!("`{}` exited with {status}", args.join(" ")));
            }
            outputs.push(std::fs::read(&out).map_err(err)?);
        }
        if outputs[0] != outputs[1] || outputs[0].is_empty() {
            return Ok((false, format!("`{}` output differs between runs", args.join(" "))));
        }
        bytes += outputs[0].len();
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok((true, format!("{} invocations, {bytes} bytes identical across repeats", runs.len())))
}

fn tempfile_dir() -> Result<PathBuf, String> {
    let dir = std::env::temp_dir().join(format!("superflow-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(err)?;
    Ok(dir)
}

fn main() {
    let start = Instant::now();
    let shared = integrate_all();
    let from_shared = |pick: fn(&Integrated) -> (bool, String)| -> Outcome {
        match &shared {
            Ok(s) => Ok(pick(s)),
            Err(e) => Err(e.clone()),
        }
    };
    let criteria: Vec<(&str, Outcome)> = vec![
        ("1 flat closed form", flat_closed_form()),
        ("2 christoffel oracle", christoffel_oracle()),
        (
            "3 geodesic/flow round trip",
            from_shared(|s| {
                (s.roundtrip <= 1e-6, format!("{} runs, max deviation {:.3e} (tol 1e-6)", s.runs, s.roundtrip))
            }),
        ),
        (
            "4 energy and speed conservation",
            from_shared(|s| (s.drift <= 1e-8, format!("max drift {:.3e} (tol 1e-8)", s.drift))),
        ),
        (
            "5 body reduction",
            from_shared(|s| (s.body <= 1e-8, format!("max deviation {:.3e} (tol 1e-8)", s.body))),
        ),
        ("6 exp jacobian is identity", jacobian_identity()),
        ("7 isometry naturality", naturality()),
        ("8 mode divergence", mode_divergence()),
        ("9 structural invariants", structural()),
        ("10 determinism", determinism()),
    ];
    let mut failed = 0;
    for (name, outcome) in &criteria {
        let (pass, detail) = match outcome {
            Ok((p, d)) => (*p, d.clone()),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("{} [{name}] {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        criteria.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
