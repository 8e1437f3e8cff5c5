//! Acceptance run: one line per criterion, nonzero exit on any failure.
//! Pass criterion numbers as arguments to run a subset.

use std::time::Instant;

use pmaflow_core::admissibility::{
    default_threshold, find_witness, find_witness_from_family, glue_local_witnesses, zero_set_mass, LocalWitness,
};
use pmaflow_core::analysis::{comparison_test, holder_modulus, removability_test, Direction};
use pmaflow_core::barriers::{linfty_bounds, subbarrier, superbarrier, Barrier};
use pmaflow_core::corpus::{self, sq};
use pmaflow_core::elliptic::{
    gkz_stability_probe, long_time_convergence, perron_envelope, solve_dirichlet_ma, EllipticConfig,
};
use pmaflow_core::field::{sweep, SpaceTimeField};
use pmaflow_core::regularization::{inf_convolve_series, sup_convolve_series, time_lipschitz_bound};
use pmaflow_core::solver::{solve_on, SolverConfig, Trajectory};
use pmaflow_core::{tol, Discretization, DomainSpec, GridFunction, ProblemData, Role};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn ball(n: usize, h: f64) -> Discretization {
    Discretization::with_defaults(DomainSpec::ball(n, 1.0).unwrap(), h).unwrap()
}

fn run(data: &ProblemData, disc: &Discretization, every: f64) -> Trajectory {
    let cfg = SolverConfig { h: disc.h(), snapshot_every: every, ..Default::default() };
    solve_on(data, disc, &cfg).unwrap()
}

fn manufactured_flow() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for n in [1, 2] {
        let mut errs = Vec::new();
        for h in [0.1, 0.05] {
            let d = ball(n, h);
            let start = Instant::now();
            let tr = run(&corpus::linear_flow(), &d, 0.5);
            let secs = start.elapsed().as_secs_f64();
            let exact = d.sample(|x| sq(x) + 1.0);
            let e = tr.last().u.sup_distance(&exact);
            ok &= e <= 5.0 * h && secs <= 120.0;
            notes.push(format!("n={n} h={h}: err {e:.2e} ({secs:.0}s)"));
            errs.push(e);
        }
        let ratio = errs[0] / errs[1];
        ok &= ratio >= 1.5;
        notes.push(format!("n={n} ratio {ratio:.2}"));
    }
    (ok, notes.join(", "))
}

fn elliptic_radial() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let cfg = EllipticConfig::default();
    for (n, h) in [(1, 0.05), (2, 0.1)] {
        let d = ball(n, h);
        let prob = corpus::radial_limit();
        let exact = d.sample(sq);
        let a = solve_dirichlet_ma(&prob, &d, &cfg).unwrap();
        let b = perron_envelope(&prob, &d, &cfg).unwrap();
        let (ea, eb, gap) = (a.u.sup_distance(&exact), b.u.sup_distance(&exact), a.u.sup_distance(&b.u));
        ok &= ea <= 5.0 * h && eb <= 5.0 * h && gap <= 2.0 * cfg.residual_target;
        notes.push(format!("n={n}: newton {ea:.2e}, perron {eb:.2e}, gap {gap:.1e}"));
    }
    (ok, notes.join(", "))
}

struct Entry {
    name: &'static str,
    data: ProblemData,
    disc: Discretization,
    traj: Trajectory,
    sub: Barrier,
    sup: Barrier,
}

fn corpus_entries() -> Vec<Entry> {
    let h = 0.1;
    let mut out = Vec::new();
    let mut push = |name: &'static str, data: ProblemData, disc: Discretization| {
        let traj = run(&data, &disc, 0.1);
        let eps = 0.2;
        let u0 = disc.sample(|x| data.u0(x));
        let w = find_witness(&u0, |x| data.f(0.0, x), eps / 4.0, &disc).unwrap();
        let sub = subbarrier(&data, &disc, eps).unwrap();
        let sup = superbarrier(&data, &disc, eps, Some(&w)).unwrap();
        out.push(Entry { name, data, disc, traj, sub, sup });
    };
    push("linear-1", corpus::linear_flow(), ball(1, h));
    push("linear-2", corpus::linear_flow(), ball(2, 0.15));
    push("stationary", corpus::stationary(), ball(1, h));
    push("decaying", corpus::decaying(1, 1.0), ball(1, h));
    for case in corpus::time_independent(1.0) {
        let name: &'static str = Box::leak(case.name.into_boxed_str());
        let d = Discretization::with_defaults(case.domain.clone(), h).unwrap();
        push(name, case.data, d);
    }
    out
}

fn comparison(entries: &[Entry]) -> Outcome {
    let mut pairs = 0;
    let mut bad = Vec::new();
    for e in entries {
        let tol = tol::visc(e.disc.h());
        let times = e.traj.times();
        let traj: &dyn SpaceTimeField = &e.traj;
        let candidates: [(&str, &dyn SpaceTimeField, &dyn SpaceTimeField); 3] =
            [("sub/u", &e.sub, traj), ("u/super", traj, &e.sup), ("sub/super", &e.sub, &e.sup)];
        for (label, a, b) in candidates {
            pairs += 1;
            match comparison_test(a, b, &e.data, &e.disc, &times, tol) {
                Ok(r) if r.passed => {}
                Ok(r) => bad.push(format!("{}:{label} gap {:.2e}", e.name, r.max_gap - r.boundary_gap)),
                Err(err) => bad.push(format!("{}:{label} {err}", e.name)),
            }
        }
    }
    (pairs >= 12 && bad.is_empty(), format!("{pairs} pairs, {} violations {}", bad.len(), bad.join("; ")))
}

fn sandwich(entries: &[Entry]) -> Outcome {
    let mut bad = Vec::new();
    let mut checked = 0;
    let mut worst = f64::NEG_INFINITY;
    for e in entries {
        let tol = tol::visc(e.disc.h());
        let bounds = linfty_bounds(&e.data, &e.disc).unwrap();
        for s in &e.traj.snapshots {
            let lo = e.sub.sample(&e.disc, s.t).unwrap();
            let hi = e.sup.sample(&e.disc, s.t).unwrap();
            let (bl, bu) = bounds.excess(&s.u);
            let below = lo.max_excess_on(&s.u, e.disc.grid.active().iter().copied());
            let above = s.u.max_excess_on(&hi, e.disc.grid.active().iter().copied());
            checked += 1;
            worst = worst.max(below).max(above).max(bl).max(bu);
            if below > tol || above > tol || bl > tol || bu > tol {
                bad.push(format!("{}@{:.2}: {below:.2e}/{above:.2e}/{bl:.2e}/{bu:.2e}", e.name, s.t));
            }
        }
    }
    (bad.is_empty(), format!("{checked} snapshots, worst excess {worst:.2e}, {} outside {}", bad.len(), bad.join("; ")))
}

fn exhaustive_sup(t: &[f64], u: &[f64], k: f64) -> Vec<f64> {
    t.iter()
        .map(|&ti| t.iter().zip(u).map(|(&s, &v)| v - k * (s - ti).abs()).fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

fn convolution_contracts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut failures = 0;
    for _ in 0..100 {
        let len = rng.gen_range(2..40);
        let mut t: Vec<f64> = (0..len).map(|_| rng.gen_range(0.0..2.0)).collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        let u: Vec<f64> = t.iter().map(|_| rng.gen_range(-3.0..3.0)).collect();
        let k = rng.gen_range(0.1..20.0);
        let sup = sup_convolve_series(&t, &u, k);
        let inf = inf_convolve_series(&t, &u, k);
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        let dual: Vec<f64> = sup_convolve_series(&t, &neg, k).iter().map(|v| -v).collect();
        let wider = sup_convolve_series(&t, &u, 2.0 * k);
        let hi = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = u.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut ok = sup == exhaustive_sup(&t, &u, k) && inf == dual;
        for i in 0..t.len() {
            ok &= inf[i] <= u[i] && u[i] <= sup[i] && sup[i] <= hi && inf[i] >= lo;
            ok &= wider[i] <= sup[i];
            for j in 0..t.len() {
                let lip = k * (t[i] - t[j]).abs() + 1e-12;
                ok &= (sup[i] - sup[j]).abs() <= lip && (inf[i] - inf[j]).abs() <= lip;
            }
        }
        failures += usize::from(!ok);
    }
    (failures == 0, format!("100 profiles, {failures} failures"))
}

fn time_lipschitz() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let h = 0.05;
    for case in corpus::time_independent(1.0) {
        let d = Discretization::with_defaults(case.domain.clone(), h).unwrap();
        let tr = run(&case.data, &d, 0.05);
        let rep = time_lipschitz_bound(&tr, &case.data, 10.0 * h).unwrap();
        ok &= rep.passed();
        notes.push(format!("{}: {} pairs, worst excess {:.2}", case.name, rep.pairs, rep.worst_excess));
    }
    let d = ball(1, h);
    let data = corpus::linear_flow();
    let tr = run(&data, &d, 0.05);
    let rep = time_lipschitz_bound(&tr, &data, 10.0 * h).unwrap();
    let inside = (rep.min_quotient - 1.0).abs() <= 0.05 && (rep.max_quotient - 1.0).abs() <= 0.05;
    ok &= inside && rep.passed();
    notes.push(format!("linear quotient [{:.3}, {:.3}]", rep.min_quotient, rep.max_quotient));
    (ok, notes.join(", "))
}

fn holder_moduli() -> Outcome {
    let d = ball(1, 0.025);
    let data = corpus::holder_ramp();
    let tr = run(&data, &d, 0.01);
    let t = holder_modulus(&tr, Direction::Time, 0.5, 3).unwrap();
    let s = holder_modulus(&tr, Direction::Space, 0.25, 3).unwrap();
    (
        t.passed && s.passed,
        format!("time exponent {:.3} (≥ {:.3}), space exponent {:.3} (≥ {:.3})", t.exponent, 0.425, s.exponent, 0.2125),
    )
}

fn admissibility() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let ladder = [0.5, 0.1, 0.02];
    let mut found = 0;
    let mut tried = 0;
    for (name, dom, data) in corpus::zero_mass_pairs() {
        let d = Discretization::with_defaults(dom, 0.1).unwrap();
        let u0 = d.sample(|x| data.u0(x));
        let g = |x: &[f64; 4]| data.f(0.0, x);
        let tau = default_threshold(g, &d);
        let mass = zero_set_mass(&u0, g, tau, &d).unwrap();
        ok &= mass == 0.0;
        for eps in ladder {
            tried += 1;
            if let Ok(w) = find_witness(&u0, g, eps, &d) {
                if w.is_valid(&u0, g, &d) {
                    found += 1;
                    continue;
                }
            }
            notes.push(format!("{name} ε={eps} failed"));
        }
    }
    ok &= found == tried;
    notes.push(format!("zero-mass witnesses {found}/{tried}"));

    let (dom, data) = corpus::log_capped();
    let d = Discretization::with_defaults(dom, 0.05).unwrap();
    let u0 = d.sample(|x| data.u0(x));
    let g = |x: &[f64; 4]| data.f(0.0, x);
    let mass = zero_set_mass(&u0, g, default_threshold(g, &d), &d).unwrap();
    let fam: Vec<GridFunction> =
        [2.0, 4.0, 10.0, 20.0].iter().map(|&m| d.sample(corpus::log_capped_member(m))).collect();
    match find_witness_from_family(&u0, &fam, g, 0.5, &d) {
        Ok((k, w)) if w.is_valid(&u0, g, &d) => {
            notes.push(format!("log-capped: mass {mass:.2e}, member {k}, C {:.2}", w.c))
        }
        other => {
            ok = false;
            notes.push(format!("log-capped failed: {:?}", other.err()));
        }
    }

    let h = 0.05;
    let mut necessity = 0;
    for case in corpus::time_independent(1.0) {
        let disc = Discretization::with_defaults(case.domain.clone(), h).unwrap();
        let tr = run(&case.data, &disc, 0.25);
        let lip = time_lipschitz_bound(&tr, &case.data, 10.0 * h).unwrap();
        for s in tr.snapshots.iter().filter(|s| s.t > 0.0) {
            let c_t = lip.max_quotient.max(s.rate.as_ref().map_or(0.0, |r| r.sup_norm()));
            let big_f = (0..s.u.grid().len())
                .filter(|&i| s.u.grid().class(i) == pmaflow_core::NodeClass::Interior)
                .map(|i| case.data.big_f(0.0, &s.u.grid().coords(i), s.u.get(i)))
                .fold(0.0, f64::max);
            let w = find_witness(&s.u, |x| case.data.f(0.0, x), 0.1, &disc);
            match w {
                Ok(w) if w.c <= c_t + big_f + 1e-6 && w.is_valid(&s.u, |x| case.data.f(0.0, x), &disc) => {
                    necessity += 1
                }
                other => {
                    ok = false;
                    notes.push(format!("{}@{}: {:?}", case.name, s.t, other.map(|w| w.c).err()));
                }
            }
        }
    }
    notes.push(format!("necessity {necessity} snapshots"));

    let d = ball(1, 0.05);
    let u0 = d.sample(|x| sq(x) - 1.0);
    let locals: Vec<LocalWitness> = [-0.5, 0.5]
        .iter()
        .map(|&c| LocalWitness { centre: [c, 0.0, 0.0, 0.0], radius: 0.6, u: u0.clone(), c: 0.0 })
        .collect();
    let glued = glue_local_witnesses(&locals, &u0, 0.05, &d, None).unwrap();
    let band = glued.raw.sup_distance(&u0) <= glued.eps_prime;
    let valid = glued.witness.is_valid(&u0, |_| 1.0, &d);
    ok &= band && valid;
    notes.push(format!("glue: |raw − u₀| ≤ ε′ {band}, witness valid {valid}"));
    (ok, notes.join(", "))
}

fn gkz_probe() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (n, h) in [(1, 0.05), (2, 0.1)] {
        let d = ball(n, h);
        let scales = [1.0, 0.1, 0.01];
        let rep = gkz_stability_probe(&d, |_| 1.0, &scales, &EllipticConfig::default()).unwrap();
        for (s, u) in scales.iter().zip(&rep.sup_u) {
            let oracle = s.powf(1.0 / n as f64);
            ok &= (u - oracle).abs() <= 10.0 * h;
        }
        ok &= rep.monotone;
        notes.push(format!("n={n}: sup|u| {:?}", rep.sup_u.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()));
    }
    (ok, notes.join(", "))
}

fn long_time() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (n, h) in [(1, 0.05), (2, 0.1)] {
        let start = Instant::now();
        let d = ball(n, h);
        let data = corpus::decaying(n, 8.0);
        let cfg = SolverConfig { h, snapshot_every: 0.25, ..Default::default() };
        let rep =
            long_time_convergence(&data, &corpus::radial_limit(), &d, &cfg, &EllipticConfig::default(), 1.0).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let target = (-8.0f64).exp() + 10.0 * h;
        ok &= rep.check(target).is_ok() && secs <= 300.0;
        notes.push(format!(
            "n={n}: final {:.2e} (≤ {target:.2e}), monotone {} ({secs:.0}s)",
            rep.final_error, rep.monotone_after_burn_in
        ));
    }
    (ok, notes.join(", "))
}

fn removability() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let h = 0.05;
    let mut cases: Vec<(String, DomainSpec, ProblemData)> =
        vec![("linear".into(), DomainSpec::ball(1, 1.0).unwrap(), corpus::linear_flow())];
    for c in corpus::time_independent(1.0).into_iter().take(2) {
        cases.push((c.name, c.domain, c.data));
    }
    for (name, dom, data) in cases {
        let d = Discretization::with_defaults(dom, h).unwrap();
        let cfg = SolverConfig { h, ..Default::default() };
        let rep = removability_test(&data, &d, &cfg, 0.5).unwrap();
        ok &= rep.passed && rep.witness_c.is_some();
        notes.push(format!("{name}: seam diff {:.2e}", rep.difference));
    }
    (ok, notes.join(", "))
}

fn vanishing_super() -> Outcome {
    let h = 0.05;
    let d = ball(1, h);
    let data = corpus::vanishing_density(1.0);
    let field = corpus::vanishing_density_super(1.0);
    let times = pmaflow_core::field::interior_times(1.0, 19);
    let rep = sweep(&field, Role::Super, &data, &d, &times, tol::visc(h)).unwrap();
    (rep.passed(), format!("{} samples, {} violations, worst {:.2e}", rep.checked, rep.violations, rep.worst))
}

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |k: usize| args.is_empty() || args.contains(&k);
    let mut failed = 0;
    let mut report = |k: usize, name: &str, (ok, detail): Outcome| {
        println!("criterion {k:>2} {} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    };
    if want(1) {
        report(1, "manufactured linear flow", manufactured_flow());
    }
    if want(2) {
        report(2, "elliptic radial solution", elliptic_radial());
    }
    if want(3) || want(4) {
        let entries = corpus_entries();
        if want(3) {
            report(3, "discrete comparison", comparison(&entries));
        }
        if want(4) {
            report(4, "barrier sandwich", sandwich(&entries));
        }
    }
    if want(5) {
        report(5, "sup/inf-convolution contracts", convolution_contracts());
    }
    if want(6) {
        report(6, "time-Lipschitz bound", time_lipschitz());
    }
    if want(7) {
        report(7, "Hölder moduli", holder_moduli());
    }
    if want(8) {
        report(8, "admissibility", admissibility());
    }
    if want(9) {
        report(9, "stability probe", gkz_probe());
    }
    if want(10) {
        report(10, "long-time convergence", long_time());
    }
    if want(11) {
        report(11, "removability", removability());
    }
    if want(12) {
        report(12, "vanishing-density superbarrier", vanishing_super());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
