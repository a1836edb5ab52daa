//! Verb implementations: each builds the resolved parameter echo first,
//! computes, renders deterministic documents, and emits them through the
//! sink (and the content-addressed cache, for the expensive verbs).

pub mod selftest;

use std::path::{Path, PathBuf};

use ldp_core::cutoff::{CosineTaper, Cutoff, PlateauCutoff};
use ldp_core::deviations::{
    self, check_containment, dp_distribution, dp_snapshots, exact_distribution, fourier_rho,
    monte_carlo_window, smoothed_window, window_bracket, DeviationReport, DpOptions,
    FourierOptions, WindowKind,
};
use ldp_core::potentials::{lattice_check, lip_ratio, recode_potentials, LatticeKind,
    LatticeOptions, Potential};
use ldp_core::ratefn::{mean_range, rate as rate_at, rate_infimum};
use ldp_core::thermo::{normalize_pair, pressure as pressure_of, tilted_pressure, NormalizedSystem};
use ldp_core::transfer::{build_tilted, RadiusOptions};
use ldp_core::{Error, Iv};

use crate::cache::RunCache;
use crate::emit::{csv_document, f17, json_document, parse_grid, parse_lengths, Header, Json, Sink};
use crate::modelfile::ModelFile;
use crate::snapshot;
use crate::CliError;

/// Flags shared by every verb.
pub struct Globals {
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub budget_states: u64,
    pub budget_bins: u64,
    pub verify_cache: bool,
    pub filter: Option<String>,
}

impl Globals {
    fn sink(&self) -> Result<Sink, CliError> {
        Sink::new(self.out.as_deref())
    }

    fn cache(&self) -> Result<Option<RunCache>, CliError> {
        match &self.out {
            Some(dir) => Ok(Some(RunCache::new(dir, self.verify_cache)?)),
            None if self.verify_cache => Err(CliError::msg(
                "--verify-cache needs --out <dir> (the cache lives there)".into(),
            )),
            None => Ok(None),
        }
    }

    fn dp_options(&self) -> DpOptions {
        DpOptions {
            max_clusters: self.budget_bins as usize,
            ..DpOptions::default()
        }
    }
}

/// The names `resolve_pair` will pick, for parameter echoes that re-run
/// identically (a model without "phi" falls back to the zero potential,
/// and the echo must say so).
fn resolved_names(
    mf: &ModelFile,
    phi: Option<&str>,
    psi: Option<&str>,
    exp: Option<&crate::modelfile::RawExperiment>,
) -> (String, String) {
    let phi_name = phi
        .or(exp.and_then(|e| e.phi.as_deref()))
        .unwrap_or(if mf.potentials.contains_key("phi") { "phi" } else { "zero" })
        .to_string();
    let psi_name = psi
        .or(exp.and_then(|e| e.psi.as_deref()))
        .unwrap_or("psi")
        .to_string();
    (phi_name, psi_name)
}

/// Normalize a working pair and enforce the recoded-state budget.
fn build_system(
    mf: &ModelFile,
    phi: &Potential,
    psi: &Potential,
    budget_states: u64,
) -> Result<NormalizedSystem, CliError> {
    mf.model.require_primitive().map_err(CliError::core)?;
    let sys = normalize_pair(&mf.model, phi, psi).map_err(CliError::core)?;
    let states = sys.rec.state_count() as u64;
    if states > budget_states {
        return Err(CliError::core(Error::resource(
            "recoded states",
            states,
            budget_states,
            "raise --budget-states or lower the potential memory",
        )));
    }
    Ok(sys)
}

// ---------------------------------------------------------------------------
// flag grammars

/// `fixed:delta=…` | `poly:c=…,beta=…` | `subexp:c=…,gamma=…` | `exp:c=…,alpha=…`
pub fn parse_schedule(s: &str) -> Result<(WindowKind, String), CliError> {
    let (kind, rest) = s
        .split_once(':')
        .ok_or_else(|| CliError::msg(format!("schedule {s:?} must be kind:key=value,…")))?;
    let mut fields = std::collections::BTreeMap::new();
    for part in rest.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| CliError::msg(format!("schedule field {part:?} must be key=value")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::msg(format!("schedule value {value:?} is not a number")))?;
        fields.insert(key.trim().to_string(), v);
    }
    let need = |key: &str| -> Result<f64, CliError> {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| CliError::msg(format!("schedule {s:?} needs {key}=…")))
    };
    let (kind, canon) = match kind {
        "fixed" | "const" => {
            let delta = need("delta")?;
            (WindowKind::Fixed { delta }, format!("fixed:delta={delta}"))
        }
        "poly" => {
            let c = need("c")?;
            let beta = need("beta")?;
            (
                WindowKind::PowerLaw { delta0: c, theta: beta },
                format!("poly:c={c},beta={beta}"),
            )
        }
        "subexp" => {
            let c = need("c")?;
            let gamma = need("gamma")?;
            (
                WindowKind::SubExponential { delta0: c, gamma },
                format!("subexp:c={c},gamma={gamma}"),
            )
        }
        "exp" => {
            let c = need("c")?;
            let alpha = need("alpha")?;
            (
                WindowKind::Exponential { delta0: c, alpha },
                format!("exp:c={c},alpha={alpha}"),
            )
        }
        other => {
            return Err(CliError::msg(format!(
                "unknown schedule kind {other:?} (fixed | poly | subexp | exp)"
            )))
        }
    };
    kind.validate().map_err(CliError::core)?;
    Ok((kind, canon))
}

pub const DEFAULT_CUTOFF: &str = "plateau:k=4,eta=0.5";

/// `plateau:k=…,eta=…` | `plateau-lower:…` | `cosine:eta=…` | `cosine-lower:eta=…`
pub fn parse_cutoff(s: &str) -> Result<(Box<dyn Cutoff>, String), CliError> {
    let (kind, rest) = s
        .split_once(':')
        .ok_or_else(|| CliError::msg(format!("cutoff {s:?} must be kind:key=value,…")))?;
    let mut fields = std::collections::BTreeMap::new();
    for part in rest.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| CliError::msg(format!("cutoff field {part:?} must be key=value")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::msg(format!("cutoff value {value:?} is not a number")))?;
        fields.insert(key.trim().to_string(), v);
    }
    let need = |key: &str| -> Result<f64, CliError> {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| CliError::msg(format!("cutoff {s:?} needs {key}=…")))
    };
    let built: (Box<dyn Cutoff>, String) = match kind {
        "plateau" | "plateau-lower" => {
            let k = need("k")? as usize;
            let eta = need("eta")?;
            let chi = if kind == "plateau" {
                PlateauCutoff::upper_for_unit(k, eta)
            } else {
                PlateauCutoff::lower_for_unit(k, eta)
            }
            .map_err(CliError::core)?;
            (Box::new(chi), format!("{kind}:k={k},eta={eta}"))
        }
        "cosine" | "cosine-lower" => {
            let eta = need("eta")?;
            let chi = if kind == "cosine" {
                CosineTaper::upper_for_unit(eta)
            } else {
                CosineTaper::lower_for_unit(eta)
            }
            .map_err(CliError::core)?;
            (Box::new(chi), format!("{kind}:eta={eta}"))
        }
        other => {
            return Err(CliError::msg(format!(
                "unknown cutoff kind {other:?} (plateau | plateau-lower | cosine | cosine-lower)"
            )))
        }
    };
    Ok(built)
}

fn parse_band(s: &str) -> Result<(f64, f64), CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 2 {
        return Err(CliError::msg(format!("band {s:?} must be lo:hi")));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::msg(format!("bad band endpoint {:?}", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::msg(format!("bad band endpoint {:?}", parts[1])))?;
    if !(hi > lo) {
        return Err(CliError::msg(format!("band {s:?} needs hi > lo")));
    }
    Ok((lo, hi))
}

// ---------------------------------------------------------------------------
// validate

pub fn validate(g: &Globals, path: &Path) -> Result<u8, CliError> {
    let mf = ModelFile::load(path)?;
    let report = mf.model.validate();

    println!("model {} hash {}", mf.name, mf.short_hash());
    println!(
        "alphabet: {} ({} symbols, {} edges)",
        mf.model.labels().join(" "),
        report.states,
        report.edges
    );
    if report.primitive {
        println!("structure: irreducible, primitive, period 1");
    } else if report.irreducible {
        println!(
            "structure: irreducible, period {}, not primitive",
            report.period
        );
    } else {
        println!("structure: not irreducible");
    }

    for (name, pot) in &mf.potentials {
        let ratio = lip_ratio(pot);
        println!(
            "potential {name}: memory {}, {} entries, values in [{}, {}], {}, lip {}",
            pot.memory(),
            pot.values().len(),
            pot.min_value(),
            pot.max_value(),
            if pot.is_rational() { "rational" } else { "symbolic" },
            ratio.lip,
        );
    }

    if let Some(psi) = mf.potentials.get("psi") {
        if report.irreducible {
            let verdict = lattice_check(&mf.model, psi, LatticeOptions::default())
                .map_err(CliError::core)?;
            match verdict.kind {
                LatticeKind::Lattice { a, c } => println!(
                    "lattice psi: span {c}, drift {a} ({} orbits, residual {}, {})",
                    verdict.orbit_count,
                    verdict.max_residual,
                    if verdict.exact { "exact" } else { "float" },
                ),
                LatticeKind::NoLatticeFound => println!(
                    "lattice psi: no lattice found at resolution {} ({} orbits)",
                    verdict.resolution, verdict.orbit_count
                ),
            }
        }
    }

    for (name, spec) in &mf.profiles {
        println!("profile {name}: {} over {}", spec.kind, spec.roof_name);
    }
    for (name, exp) in &mf.experiments {
        // parse so broken canned experiments fail validation here
        let (_, sched) = parse_schedule(&exp.schedule)?;
        if let Some(c) = &exp.cutoff {
            parse_cutoff(c)?;
        }
        println!(
            "experiment {name}: p {}, {}, n {}",
            exp.p,
            sched,
            exp.n
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
    }
    let _ = g;
    println!("ok");
    Ok(0)
}

// ---------------------------------------------------------------------------
// pressure

pub fn pressure(
    g: &Globals,
    path: &Path,
    phi: Option<&str>,
    psi: Option<&str>,
    xi: Option<f64>,
    xi_grid: Option<&str>,
) -> Result<u8, CliError> {
    let mf = ModelFile::load(path)?;
    let (phi_pot, psi_pot) = mf.resolve_pair(phi, psi, None)?;
    let (phi_name, psi_name) = resolved_names(&mf, phi, psi, None);
    mf.model.require_primitive().map_err(CliError::core)?;
    let (rec, pots) = recode_potentials(&mf.model, &[&phi_pot, &psi_pot]).map_err(CliError::core)?;
    let mut sink = g.sink()?;

    if let Some(grid) = xi_grid {
        let xis = parse_grid(grid)?;
        let header = Header {
            model_hash: mf.hash.clone(),
            model_name: mf.name.clone(),
            echo: format!(
                "pressure {} --phi {} --psi {} --xi-grid {grid}",
                path.display(),
                phi_name, psi_name,
            ),
        };
        let mut rows = Vec::with_capacity(xis.len());
        for &x in &xis {
            let t = build_tilted(&rec, &pots[0], &pots[1], x).map_err(CliError::core)?;
            let pr = pressure_of(&t).map_err(CliError::core)?;
            rows.push(vec![f17(x), f17(pr.value), f17(pr.enclosure.lo), f17(pr.enclosure.hi)]);
        }
        let doc = csv_document(&header, &["xi", "pressure", "pressure_lo", "pressure_hi"], &rows);
        sink.emit("pressure.csv", &doc)?;
        println!(
            "pressure grid: {} tilts in [{}, {}]",
            xis.len(),
            xis[0],
            xis[xis.len() - 1]
        );
        return Ok(0);
    }

    let x = xi.unwrap_or(0.0);
    let t = build_tilted(&rec, &pots[0], &pots[1], x).map_err(CliError::core)?;
    let pr = pressure_of(&t).map_err(CliError::core)?;
    let header = Header {
        model_hash: mf.hash.clone(),
        model_name: mf.name.clone(),
        echo: format!(
            "pressure {} --phi {} --psi {} --xi {}",
            path.display(),
            phi.unwrap_or("phi"),
            psi.unwrap_or("psi"),
            f17(x),
        ),
    };
    let mut body = Json::obj();
    body.push("xi", Json::Float(x))
        .push("pressure", Json::Float(pr.value))
        .push("pressure_lo", Json::Float(pr.enclosure.lo))
        .push("pressure_hi", Json::Float(pr.enclosure.hi))
        .push("lambda", Json::Float(pr.perron.lambda))
        .push("perron_residual", Json::Float(pr.perron.residual))
        .push("perron_iterations", Json::UInt(pr.perron.iterations as u64));
    let doc = json_document(&header, match body {
        Json::Obj(fields) => fields,
        _ => unreachable!(),
    });
    sink.emit("pressure.json", &doc)?;
    println!(
        "pressure(phi + {} psi) = {} in [{}, {}]",
        f17(x),
        f17(pr.value),
        f17(pr.enclosure.lo),
        f17(pr.enclosure.hi)
    );
    Ok(0)
}

// ---------------------------------------------------------------------------
// rate

pub fn rate(
    g: &Globals,
    path: &Path,
    phi: Option<&str>,
    psi: Option<&str>,
    p: Option<f64>,
    p_grid: Option<&str>,
) -> Result<u8, CliError> {
    let mf = ModelFile::load(path)?;
    let (phi_pot, psi_pot) = mf.resolve_pair(phi, psi, None)?;
    let (phi_name, psi_name) = resolved_names(&mf, phi, psi, None);
    let sys = build_system(&mf, &phi_pot, &psi_pot, g.budget_states)?;
    let range = mean_range(&sys).map_err(CliError::core)?;
    let mut sink = g.sink()?;

    let describe_range = format!(
        "admissible raw averages: ({}, {})",
        range.min + sys.mean_shift,
        range.max + sys.mean_shift
    );

    if let Some(grid) = p_grid {
        let ps = parse_grid(grid)?;
        let header = Header {
            model_hash: mf.hash.clone(),
            model_name: mf.name.clone(),
            echo: format!(
                "rate {} --phi {} --psi {} --p-grid {grid}",
                path.display(),
                phi_name, psi_name,
            ),
        };
        let mut rows = Vec::with_capacity(ps.len());
        for &raw in &ps {
            let pc = raw - sys.mean_shift;
            let data = rate_at(&sys, pc)
                .map_err(|e| CliError::core(e).prefix(&format!("p = {raw}: {describe_range}; ")))?;
            let dual = rate_infimum(&sys, pc).map_err(CliError::core)?;
            rows.push(vec![
                f17(raw),
                f17(pc),
                f17(data.xi),
                f17(data.value),
                f17(dual),
                f17(data.tilted_pressure),
                f17(data.variance),
            ]);
        }
        let doc = csv_document(
            &header,
            &["p", "p_centered", "xi", "rate", "rate_dual", "tilted_pressure", "variance"],
            &rows,
        );
        sink.emit("rate.csv", &doc)?;
        println!("rate grid: {} targets; {describe_range}", ps.len());
        return Ok(0);
    }

    let raw = p.ok_or_else(|| CliError::msg("rate needs --p or --p-grid".into()))?;
    let pc = raw - sys.mean_shift;
    let data = rate_at(&sys, pc)
        .map_err(|e| CliError::core(e).prefix(&format!("p = {raw}: {describe_range}; ")))?;
    let dual = rate_infimum(&sys, pc).map_err(CliError::core)?;
    let header = Header {
        model_hash: mf.hash.clone(),
        model_name: mf.name.clone(),
        echo: format!(
            "rate {} --phi {} --psi {} --p {}",
            path.display(),
            phi.unwrap_or("phi"),
            psi.unwrap_or("psi"),
            f17(raw),
        ),
    };
    let mut body = Json::obj();
    body.push("p", Json::Float(raw))
        .push("p_centered", Json::Float(pc))
        .push("mean_shift", Json::Float(sys.mean_shift))
        .push("xi", Json::Float(data.xi))
        .push("rate", Json::Float(data.value))
        .push("rate_dual", Json::Float(dual))
        .push("tilted_pressure", Json::Float(data.tilted_pressure))
        .push("variance", Json::Float(data.variance))
        .push("grid_sup", Json::Float(data.grid_sup))
        .push("mean_min", Json::Float(range.min + sys.mean_shift))
        .push("mean_max", Json::Float(range.max + sys.mean_shift));
    let doc = json_document(&header, match body {
        Json::Obj(fields) => fields,
        _ => unreachable!(),
    });
    sink.emit("rate.json", &doc)?;
    println!(
        "J({raw}) = {} at tilt xi = {} (dual route {}, variance {})",
        f17(data.value),
        f17(data.xi),
        f17(dual),
        f17(data.variance)
    );
    Ok(0)
}

// ---------------------------------------------------------------------------
// interval

#[allow(clippy::too_many_arguments)]
pub fn interval(
    g: &Globals,
    path: &Path,
    phi: Option<&str>,
    psi: Option<&str>,
    p: f64,
    n: usize,
    delta: f64,
    cutoff: Option<&str>,
    exact: bool,
    mc: Option<u64>,
) -> Result<u8, CliError> {
    if !(delta > 0.0) || n == 0 {
        return Err(CliError::msg("interval needs n >= 1 and delta > 0".into()));
    }
    let mf = ModelFile::load(path)?;
    let (phi_pot, psi_pot) = mf.resolve_pair(phi, psi, None)?;
    let (phi_name, psi_name) = resolved_names(&mf, phi, psi, None);
    let sys = build_system(&mf, &phi_pot, &psi_pot, g.budget_states)?;
    let pc = p - sys.mean_shift;
    let mut sink = g.sink()?;

    // clusters stay far finer than the window half-width
    let mut opts = g.dp_options();
    opts.width_cap = opts.width_cap.min(delta / 16.0);
    opts.merge_eps = opts.merge_eps.min(opts.width_cap / 8.0);
    let dist = dp_distribution(&sys, n, &opts).map_err(CliError::core)?;

    let eps = delta * n as f64;
    let center = pc * n as f64;
    let bracket = window_bracket(&dist, center - eps, center + eps);
    let (lo, hi) = bracket.bounds();

    let mut echo = format!(
        "interval {} --phi {} --psi {} --p {} --n {n} --delta {} --budget-bins {}",
        path.display(),
        phi_name, psi_name,
        f17(p),
        f17(delta),
        g.budget_bins,
    );

    let mut body = Json::obj();
    body.push("p", Json::Float(p))
        .push("p_centered", Json::Float(pc))
        .push("n", Json::UInt(n as u64))
        .push("delta", Json::Float(delta))
        .push("eps", Json::Float(eps))
        .push("prob_lo", Json::Float(lo))
        .push("prob_hi", Json::Float(hi))
        .push("slope_lo", Json::Float(lo.ln() / n as f64))
        .push("slope_hi", Json::Float(hi.ln() / n as f64))
        .push("clusters_inside", Json::UInt(bracket.clusters_inside as u64))
        .push("clusters_touching", Json::UInt(bracket.clusters_touching as u64))
        .push("clusters_total", Json::UInt(dist.cluster_count() as u64));
    println!(
        "window probability in [{}, {}] ({} clusters inside, {} touching)",
        f17(lo),
        f17(hi),
        bracket.clusters_inside,
        bracket.clusters_touching
    );

    if let Some(spec) = cutoff {
        let (chi, canon) = parse_cutoff(spec)?;
        echo.push_str(&format!(" --cutoff {canon}"));
        let sm = smoothed_window(&dist, center, eps, chi.as_ref()).map_err(CliError::core)?;
        body.push("smoothed_lo", Json::Float(sm.lo))
            .push("smoothed_hi", Json::Float(sm.hi))
            .push("cutoff", Json::Str(canon));
        println!("smoothed functional in [{}, {}]", f17(sm.lo), f17(sm.hi));
    }

    if exact {
        echo.push_str(" --exact");
        let ex = exact_distribution(&sys, n, g.budget_bins as usize).map_err(CliError::core)?;
        let report = check_containment(&dist, &ex).map_err(CliError::core)?;
        // exact window mass: sum of atoms certainly inside / possibly touching
        let mut exact_lo = Iv::point(0.0);
        let mut exact_hi = Iv::point(0.0);
        for state in &ex.per_state {
            for (pos, mass) in state {
                let enc = pos.enclosure();
                if enc.lo > center - eps && enc.hi < center + eps {
                    exact_lo = exact_lo.add(*mass);
                }
                if enc.hi >= center - eps && enc.lo <= center + eps {
                    exact_hi = exact_hi.add(*mass);
                }
            }
        }
        body.push("exact_atoms", Json::UInt(ex.atom_count() as u64))
            .push("exact_prob_lo", Json::Float(exact_lo.lo))
            .push("exact_prob_hi", Json::Float(exact_hi.hi))
            .push("containment_clean", Json::Bool(report.clean()))
            .push("position_violations", Json::UInt(report.position_violations as u64))
            .push("mass_violations", Json::UInt(report.mass_violations as u64));
        println!(
            "exact enumeration: {} atoms, window mass in [{}, {}], containment {}",
            ex.atom_count(),
            f17(exact_lo.lo),
            f17(exact_hi.hi),
            if report.clean() { "clean" } else { "VIOLATED" }
        );
        if !report.clean() {
            return Err(CliError::msg(format!(
                "DP brackets violate the exact oracle: {} position, {} mass violations",
                report.position_violations, report.mass_violations
            )));
        }
    }

    if let Some(samples) = mc {
        echo.push_str(&format!(" --mc {samples} --seed {}", g.seed));
        let est = monte_carlo_window(&sys, pc, n, eps, samples, g.seed).map_err(CliError::core)?;
        let (w_lo, w_hi) = est.wilson(1.959963984540054);
        body.push("mc_hits", Json::UInt(est.hits))
            .push("mc_samples", Json::UInt(est.samples))
            .push("mc_estimate", Json::Float(est.estimate))
            .push("mc_wilson_lo", Json::Float(w_lo))
            .push("mc_wilson_hi", Json::Float(w_hi));
        println!(
            "monte carlo: {}/{} hits, wilson 95% [{}, {}]",
            est.hits,
            est.samples,
            f17(w_lo),
            f17(w_hi)
        );
    }

    let header = Header { model_hash: mf.hash.clone(), model_name: mf.name.clone(), echo };
    let doc = json_document(&header, match body {
        Json::Obj(fields) => fields,
        _ => unreachable!(),
    });
    sink.emit("interval.json", &doc)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// lattice

pub fn lattice(
    g: &Globals,
    path: &Path,
    psi: Option<&str>,
    max_period: usize,
    resolution: f64,
) -> Result<u8, CliError> {
    let mf = ModelFile::load(path)?;
    let psi_pot = mf.potential(psi.unwrap_or("psi"))?;
    let opts = LatticeOptions { max_period, resolution, ..LatticeOptions::default() };
    let verdict = lattice_check(&mf.model, &psi_pot, opts).map_err(CliError::core)?;
    let mut sink = g.sink()?;

    let header = Header {
        model_hash: mf.hash.clone(),
        model_name: mf.name.clone(),
        echo: format!(
            "lattice {} --psi {} --max-period {max_period} --resolution {}",
            path.display(),
            psi.unwrap_or("psi"),
            f17(resolution),
        ),
    };
    let mut body = Json::obj();
    match verdict.kind {
        LatticeKind::Lattice { a, c } => {
            body.push("kind", Json::Str("lattice".into()))
                .push("span", Json::Float(c))
                .push("drift", Json::Float(a));
            println!("lattice: span {}, drift {}", f17(c), f17(a));
        }
        LatticeKind::NoLatticeFound => {
            body.push("kind", Json::Str("no-lattice-found".into()));
            println!("no lattice found at resolution {}", f17(resolution));
        }
    }
    body.push("max_period", Json::UInt(verdict.max_period as u64))
        .push("resolution", Json::Float(verdict.resolution))
        .push("orbit_count", Json::UInt(verdict.orbit_count as u64))
        .push("max_residual", Json::Float(verdict.max_residual))
        .push("degenerate_constant", Json::Bool(verdict.degenerate_constant))
        .push("exact", Json::Bool(verdict.exact));
    let doc = json_document(&header, match body {
        Json::Obj(fields) => fields,
        _ => unreachable!(),
    });
    sink.emit("lattice.json", &doc)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// sweep

pub fn sweep(
    g: &Globals,
    path: &Path,
    phi: Option<&str>,
    psi: Option<&str>,
    xi: f64,
    u: &str,
) -> Result<u8, CliError> {
    let mf = ModelFile::load(path)?;
    let (phi_pot, psi_pot) = mf.resolve_pair(phi, psi, None)?;
    let (phi_name, psi_name) = resolved_names(&mf, phi, psi, None);
    let sys = build_system(&mf, &phi_pot, &psi_pot, g.budget_states)?;

    let grid = parse_grid(u)?;
    if grid.len() < 3 {
        return Err(CliError::msg("sweep needs at least 3 initial points".into()));
    }
    let band = (grid[0], grid[grid.len() - 1]);
    let echo = format!(
        "sweep {} --phi {} --psi {} --xi {} --u {u}",
        path.display(),
        phi_name, psi_name,
        f17(xi),
    );
    let header = Header { model_hash: mf.hash.clone(), model_name: mf.name.clone(), echo: echo.clone() };
    let mut sink = g.sink()?;
    let cache = g.cache()?;

    let compute = || -> Result<Vec<String>, CliError> {
        let report = ldp_core::transfer::spectral_sweep(
            &sys.rec,
            &sys.phi,
            &sys.psi,
            xi,
            band,
            grid.len(),
            &RadiusOptions::default(),
        )
        .map_err(CliError::core)?;
        let lambda_ref = tilted_pressure(&sys.rec, &sys.phi, &sys.psi, xi)
            .map_err(CliError::core)?
            .exp();
        let rows: Vec<Vec<String>> = report
            .points
            .iter()
            .map(|pt| {
                vec![
                    f17(pt.u),
                    f17(pt.rho),
                    f17(pt.enclosure.lo),
                    f17(pt.enclosure.hi),
                    f17(lambda_ref),
                ]
            })
            .collect();
        let csv = csv_document(
            &header,
            &["u", "radius", "radius_lo", "radius_hi", "lambda_ref"],
            &rows,
        );
        let rho_hat = report.rho_hat / lambda_ref;
        let mut body = Json::obj();
        body.push("xi", Json::Float(xi))
            .push("band_lo", Json::Float(band.0))
            .push("band_hi", Json::Float(band.1))
            .push("points", Json::UInt(report.points.len() as u64))
            .push("lambda_ref", Json::Float(lambda_ref))
            .push("max_radius", Json::Float(report.rho_hat))
            .push("rho_hat", Json::Float(rho_hat))
            .push("u_at_max", Json::Float(report.u_at_max))
            .push("refinement_levels", Json::UInt(report.refinement_levels as u64));
        let json = json_document(&header, match body {
            Json::Obj(fields) => fields,
            _ => unreachable!(),
        });
        Ok(vec![csv, json])
    };

    let docs = cached_documents(cache.as_ref(), &mf.hash, &echo, &["sweep.csv", "sweep.json"], compute)?;
    // summary values parsed back from the (possibly cached) JSON document
    let rho_hat = extract_float(&docs[1], "rho_hat")?;
    let u_at_max = extract_float(&docs[1], "u_at_max")?;
    sink.emit("sweep.csv", &docs[0])?;
    sink.emit("sweep.json", &docs[1])?;
    println!("rho_hat = {} at u = {}", f17(rho_hat), f17(u_at_max));
    Ok(0)
}

// ---------------------------------------------------------------------------
// run

pub struct RunArgs {
    pub phi: Option<String>,
    pub psi: Option<String>,
    pub experiment: Option<String>,
    pub p: Option<f64>,
    pub schedule: Option<String>,
    pub n: Option<String>,
    pub cutoff: Option<String>,
    pub band: Option<String>,
    pub points: usize,
    pub fourier: bool,
    pub mc: Option<u64>,
    pub snapshot: bool,
}

pub fn run(g: &Globals, path: &Path, args: RunArgs) -> Result<u8, CliError> {
    let mf = ModelFile::load(path)?;
    let experiment = match &args.experiment {
        Some(name) => Some(mf.experiments.get(name).cloned().ok_or_else(|| {
            CliError::msg(format!(
                "no experiment named {name:?} (available: {})",
                mf.experiments.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })?),
        // fall back to "default" only to fill flags the user omitted
        None => mf.experiments.get("default").cloned(),
    };
    let exp = experiment.as_ref();

    let p_raw = args
        .p
        .or(exp.map(|e| e.p))
        .ok_or_else(|| CliError::msg("run needs --p (or an experiment that sets it)".into()))?;
    let schedule_str = args
        .schedule
        .clone()
        .or(exp.map(|e| e.schedule.clone()))
        .ok_or_else(|| CliError::msg("run needs --schedule".into()))?;
    let ns = match &args.n {
        Some(list) => parse_lengths(list)?,
        None => exp
            .map(|e| e.n.clone())
            .filter(|v| !v.is_empty())
            .ok_or_else(|| CliError::msg("run needs --n".into()))?,
    };
    let cutoff_str = args
        .cutoff
        .clone()
        .or(exp.and_then(|e| e.cutoff.clone()))
        .unwrap_or_else(|| DEFAULT_CUTOFF.to_string());
    let band = match &args.band {
        Some(b) => parse_band(b)?,
        None => exp
            .and_then(|e| e.band)
            .map(|[lo, hi]| (lo, hi))
            .unwrap_or((0.5, 50.0)),
    };
    let seed = exp.and_then(|e| e.seed).unwrap_or(g.seed);

    let (kind, sched_canon) = parse_schedule(&schedule_str)?;
    let (chi, cutoff_canon) = parse_cutoff(&cutoff_str)?;
    let (phi_pot, psi_pot) =
        mf.resolve_pair(args.phi.as_deref(), args.psi.as_deref(), exp)?;
    let (phi_name, psi_name) =
        resolved_names(&mf, args.phi.as_deref(), args.psi.as_deref(), exp);
    let sys = build_system(&mf, &phi_pot, &psi_pot, g.budget_states)?;
    let pc = p_raw - sys.mean_shift;

    // budget-bins feeds the DP merge policy, so it is part of the result key
    let mut echo = format!(
        "run {} --phi {} --psi {} --p {} --schedule {sched_canon} --n {} --cutoff {cutoff_canon} --band {}:{} --points {} --budget-bins {}",
        path.display(),
        phi_name, psi_name,
        f17(p_raw),
        ns.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","),
        band.0,
        band.1,
        args.points,
        g.budget_bins,
    );
    if args.fourier {
        echo.push_str(" --fourier");
    }
    if let Some(samples) = args.mc {
        echo.push_str(&format!(" --mc {samples} --seed {seed}"));
    }
    let header = Header { model_hash: mf.hash.clone(), model_name: mf.name.clone(), echo: echo.clone() };
    let mut sink = g.sink()?;
    // snapshots are raw bytes, outside the text cache; take the direct path
    let cache = if args.snapshot { None } else { g.cache()? };

    let fourier_opts = FourierOptions::default();
    let compute = || -> Result<Vec<String>, CliError> {
        // contraction factor at the saddle tilt, for feasibility marking
        let probe = rate_at(&sys, pc).map_err(CliError::core)?;
        let (rho_hat, sweep) = deviations::empirical_rho_hat(
            &sys,
            probe.xi,
            band,
            args.points,
            &RadiusOptions::default(),
        )
        .map_err(CliError::core)?;

        let report = deviations::run_schedule(
            &sys,
            pc,
            kind,
            &ns,
            chi.as_ref(),
            &g.dp_options(),
            args.fourier.then_some(&fourier_opts),
            Some(rho_hat),
        )
        .map_err(CliError::core)?;

        let mc_rows: Vec<(usize, deviations::McWindow)> = match args.mc {
            Some(samples) => {
                let n = *ns.last().expect("ns nonempty");
                let eps = kind.eps(n);
                vec![(n, monte_carlo_window(&sys, pc, n, eps, samples, seed).map_err(CliError::core)?)]
            }
            None => Vec::new(),
        };

        let csv = render_run_csv(&header, &report);
        let json = render_run_json(&header, &mf, p_raw, &sys, &report, &sweep, &mc_rows);
        let exit = if report.schedule_feasible == Some(false) { "2" } else { "0" };
        Ok(vec![csv, json, exit.to_string()])
    };

    let docs = cached_documents(
        cache.as_ref(),
        &mf.hash,
        &echo,
        &["run.csv", "run.json", "exit"],
        compute,
    )?;
    sink.emit("run.csv", &docs[0])?;
    sink.emit("run.json", &docs[1])?;

    if args.snapshot {
        let n_last = *ns.last().expect("ns nonempty");
        let mut opts = g.dp_options();
        let min_delta = ns.iter().map(|&n| kind.delta(n)).fold(f64::INFINITY, f64::min);
        opts.width_cap = opts.width_cap.min(min_delta / 16.0);
        opts.merge_eps = opts.merge_eps.min(opts.width_cap / 8.0);
        let snaps = dp_snapshots(&sys, &[n_last], &opts).map_err(CliError::core)?;
        let bytes = snapshot::write(&snaps[0]);
        sink.emit_bytes(&format!("run-n{n_last}.ldpd"), &bytes)?;
    }

    let verdict_gap = extract_float(&docs[1], "verdict_gap")?;
    let target = extract_float(&docs[1], "target")?;
    let feasible = docs[2].trim() == "0";
    println!(
        "target slope {} reached within gap {} at n = {}{}",
        f17(target),
        f17(verdict_gap),
        ns.last().expect("ns nonempty"),
        if feasible { "" } else { " (schedule infeasible for the measured contraction)" }
    );
    Ok(if feasible { 0 } else { 2 })
}

fn render_run_csv(header: &Header, report: &DeviationReport) -> String {
    let columns = [
        "n",
        "delta",
        "eps",
        "prob_lo",
        "prob_hi",
        "slope_lo",
        "slope_hi",
        "target",
        "slope_gap",
        "smoothed_lo",
        "smoothed_hi",
        "fourier",
        "fourier_tail",
        "predicted",
        "predicted_refined",
        "ratio",
        "feasible",
        "clusters",
    ];
    let opt = |x: Option<f64>| x.map(f17).unwrap_or_default();
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                f17(r.delta),
                f17(r.eps),
                f17(r.prob_lo),
                f17(r.prob_hi),
                f17(r.slope_lo),
                f17(r.slope_hi),
                f17(r.target),
                f17(r.slope_gap),
                f17(r.smoothed.lo),
                f17(r.smoothed.hi),
                opt(r.fourier),
                opt(r.fourier_tail),
                f17(r.predicted),
                f17(r.predicted_refined),
                f17(r.ratio),
                r.feasible.map(|b| b.to_string()).unwrap_or_default(),
                r.clusters.to_string(),
            ]
        })
        .collect();
    csv_document(header, &columns, &rows)
}

#[allow(clippy::too_many_arguments)]
fn render_run_json(
    header: &Header,
    mf: &ModelFile,
    p_raw: f64,
    sys: &NormalizedSystem,
    report: &DeviationReport,
    sweep: &ldp_core::transfer::SweepReport,
    mc_rows: &[(usize, deviations::McWindow)],
) -> String {
    let _ = mf;
    let mut body = Json::obj();
    body.push("p", Json::Float(p_raw))
        .push("p_centered", Json::Float(report.p))
        .push("mean_shift", Json::Float(sys.mean_shift))
        .push("xi", Json::Float(report.rate.xi))
        .push("rate", Json::Float(report.rate.value))
        .push("variance", Json::Float(report.rate.variance))
        .push("alpha_limit", Json::Float(report.alpha_limit))
        .push("target", Json::Float(-report.rate.value - report.alpha_limit))
        .push(
            "rho_hat",
            report.rho_hat.map(Json::Float).unwrap_or(Json::Null),
        )
        .push(
            "alpha_cap",
            report.alpha_cap.map(Json::Float).unwrap_or(Json::Null),
        )
        .push(
            "schedule_feasible",
            report.schedule_feasible.map(Json::Bool).unwrap_or(Json::Null),
        )
        .push("verdict_gap", Json::Float(report.verdict_gap))
        .push("sweep_u_at_max", Json::Float(sweep.u_at_max))
        .push("sweep_points", Json::UInt(sweep.points.len() as u64));

    let mut rows = Vec::with_capacity(report.rows.len());
    for r in &report.rows {
        let mut row = Json::obj();
        row.push("n", Json::UInt(r.n as u64))
            .push("delta", Json::Float(r.delta))
            .push("eps", Json::Float(r.eps))
            .push("prob_lo", Json::Float(r.prob_lo))
            .push("prob_hi", Json::Float(r.prob_hi))
            .push("slope_lo", Json::Float(r.slope_lo))
            .push("slope_hi", Json::Float(r.slope_hi))
            .push("target", Json::Float(r.target))
            .push("slope_gap", Json::Float(r.slope_gap))
            .push("smoothed_lo", Json::Float(r.smoothed.lo))
            .push("smoothed_hi", Json::Float(r.smoothed.hi))
            .push("fourier", r.fourier.map(Json::Float).unwrap_or(Json::Null))
            .push(
                "fourier_tail",
                r.fourier_tail.map(Json::Float).unwrap_or(Json::Null),
            )
            .push("predicted", Json::Float(r.predicted))
            .push("predicted_refined", Json::Float(r.predicted_refined))
            .push("ratio", Json::Float(r.ratio))
            .push("feasible", r.feasible.map(Json::Bool).unwrap_or(Json::Null))
            .push("clusters", Json::UInt(r.clusters as u64));
        rows.push(row);
    }
    body.push("rows", Json::Arr(rows));

    if !mc_rows.is_empty() {
        let mut items = Vec::new();
        for (n, est) in mc_rows {
            let (w_lo, w_hi) = est.wilson(1.959963984540054);
            let mut row = Json::obj();
            row.push("n", Json::UInt(*n as u64))
                .push("hits", Json::UInt(est.hits))
                .push("samples", Json::UInt(est.samples))
                .push("estimate", Json::Float(est.estimate))
                .push("wilson_lo", Json::Float(w_lo))
                .push("wilson_hi", Json::Float(w_hi));
            items.push(row);
        }
        body.push("monte_carlo", Json::Arr(items));
    }

    json_document(header, match body {
        Json::Obj(fields) => fields,
        _ => unreachable!(),
    })
}

// ---------------------------------------------------------------------------
// rho

#[allow(clippy::too_many_arguments)]
pub fn rho(
    g: &Globals,
    path: &Path,
    phi: Option<&str>,
    psi: Option<&str>,
    p: f64,
    n: usize,
    eps: f64,
    cutoff: Option<&str>,
    fourier: bool,
) -> Result<u8, CliError> {
    if !(eps > 0.0) || n == 0 {
        return Err(CliError::msg("rho needs n >= 1 and eps > 0".into()));
    }
    let mf = ModelFile::load(path)?;
    let (phi_pot, psi_pot) = mf.resolve_pair(phi, psi, None)?;
    let (phi_name, psi_name) = resolved_names(&mf, phi, psi, None);
    let sys = build_system(&mf, &phi_pot, &psi_pot, g.budget_states)?;
    let pc = p - sys.mean_shift;
    let (chi, cutoff_canon) = parse_cutoff(cutoff.unwrap_or(DEFAULT_CUTOFF))?;
    let mut sink = g.sink()?;

    let delta = eps / n as f64;
    let mut opts = g.dp_options();
    opts.width_cap = opts.width_cap.min(delta / 16.0);
    opts.merge_eps = opts.merge_eps.min(opts.width_cap / 8.0);
    let dist = dp_distribution(&sys, n, &opts).map_err(CliError::core)?;
    let center = pc * n as f64;
    let sm = smoothed_window(&dist, center, eps, chi.as_ref()).map_err(CliError::core)?;
    let rate_data = rate_at(&sys, pc).map_err(CliError::core)?;
    let hat0 = chi.hat(num_complex::Complex64::new(0.0, 0.0)).re;
    let predicted = deviations::sharp_prediction(&rate_data, hat0, eps, n);
    let predicted_refined = deviations::sharp_prediction_refined(&rate_data, chi.as_ref(), eps, n);
    let nf = n as f64;
    let ratio = sm.mid() * (2.0 * std::f64::consts::PI * nf * rate_data.variance).sqrt()
        * (nf * rate_data.value).exp()
        / (hat0 * eps);

    let mut echo = format!(
        "rho {} --phi {} --psi {} --p {} --n {n} --eps {} --cutoff {cutoff_canon} --budget-bins {}",
        path.display(),
        phi_name, psi_name,
        f17(p),
        f17(eps),
        g.budget_bins,
    );
    if fourier {
        echo.push_str(" --fourier");
    }

    let mut body = Json::obj();
    body.push("p", Json::Float(p))
        .push("p_centered", Json::Float(pc))
        .push("n", Json::UInt(n as u64))
        .push("eps", Json::Float(eps))
        .push("cutoff", Json::Str(cutoff_canon))
        .push("smoothed_lo", Json::Float(sm.lo))
        .push("smoothed_hi", Json::Float(sm.hi))
        .push("rate", Json::Float(rate_data.value))
        .push("xi", Json::Float(rate_data.xi))
        .push("variance", Json::Float(rate_data.variance))
        .push("predicted", Json::Float(predicted))
        .push("predicted_refined", Json::Float(predicted_refined))
        .push("ratio", Json::Float(ratio))
        .push("clusters", Json::UInt(dist.cluster_count() as u64));
    println!(
        "smoothed window in [{}, {}] (prediction {}, ratio {})",
        f17(sm.lo),
        f17(sm.hi),
        f17(predicted_refined),
        f17(ratio)
    );

    if fourier {
        let fr = fourier_rho(&sys, &rate_data, chi.as_ref(), eps, n, &FourierOptions::default())
            .map_err(CliError::core)?;
        body.push("fourier", Json::Float(fr.value))
            .push("fourier_tail", Json::Float(fr.tail_bound))
            .push("fourier_quad_error", Json::Float(fr.quad_error))
            .push("fourier_norm_residual", Json::Float(fr.norm_residual))
            .push("fourier_evaluations", Json::UInt(fr.evaluations as u64))
            .push("fourier_t_max", Json::Float(fr.t_max));
        let combined = fr.tail_bound + fr.quad_error + sm.width();
        let gap = (fr.value - sm.mid()).abs();
        body.push("fourier_gap", Json::Float(gap))
            .push("fourier_budget", Json::Float(combined));
        println!(
            "fourier route: {} (tail {}, quadrature {}, gap to DP {})",
            f17(fr.value),
            f17(fr.tail_bound),
            f17(fr.quad_error),
            f17(gap)
        );
    }

    let header = Header { model_hash: mf.hash.clone(), model_name: mf.name.clone(), echo };
    let doc = json_document(&header, match body {
        Json::Obj(fields) => fields,
        _ => unreachable!(),
    });
    sink.emit("rho.json", &doc)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// suspend

pub fn suspend(g: &Globals, path: &Path, profile: &str, p: Option<f64>) -> Result<u8, CliError> {
    let mf = ModelFile::load(path)?;
    let spec = mf.profiles.get(profile).ok_or_else(|| {
        CliError::msg(format!(
            "no profile named {profile:?} (available: {})",
            mf.profiles.keys().cloned().collect::<Vec<_>>().join(", ")
        ))
    })?;
    let susp = &spec.suspension;
    let residual = susp.verify_return_identity(&mf.model).map_err(CliError::core)?;
    let observable = susp.observable(&mf.model).map_err(CliError::core)?;
    let mut sink = g.sink()?;

    let mut echo = format!("suspend {} --profile {profile}", path.display());
    if let Some(target) = p {
        echo.push_str(&format!(" --p {}", f17(target)));
    }

    let table = |pot: &Potential| -> Json {
        let mut rows = Vec::new();
        for (word, value) in pot.values() {
            let mut row = Json::obj();
            row.push("word", Json::Str(mf.model.word_string(word)))
                .push("value", Json::Str(value.canonical()))
                .push("float", Json::Float(value.val));
            rows.push(row);
        }
        Json::Arr(rows)
    };

    let mut body = Json::obj();
    body.push("profile", Json::Str(profile.into()))
        .push("kind", Json::Str(spec.kind.clone()))
        .push("roof", Json::Str(spec.roof_name.clone()))
        .push("roof_memory", Json::UInt(susp.roof().memory() as u64))
        .push("return_identity_residual", Json::Float(residual))
        .push("observable_memory", Json::UInt(observable.memory() as u64))
        .push("observable", table(&observable));
    println!(
        "profile {profile} ({} over {}): return identity residual {}",
        spec.kind,
        spec.roof_name,
        f17(residual)
    );

    if let Some(target) = p {
        let dev = susp
            .deviation_observable(&mf.model, target)
            .map_err(CliError::core)?;
        body.push("deviation_p", Json::Float(target))
            .push("deviation_observable", table(&dev));
        println!(
            "deviation observable psi - {} tau: {} entries of memory {}",
            target,
            dev.values().len(),
            dev.memory()
        );
    }

    let header = Header { model_hash: mf.hash.clone(), model_name: mf.name.clone(), echo };
    let doc = json_document(&header, match body {
        Json::Obj(fields) => fields,
        _ => unreachable!(),
    });
    sink.emit("suspend.json", &doc)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// shared cache plumbing

/// Fetch the named documents from the cache or compute them all at once.
/// The final document list always corresponds 1:1 to `names`.
fn cached_documents(
    cache: Option<&RunCache>,
    model_hash: &str,
    echo: &str,
    names: &[&str],
    compute: impl FnOnce() -> Result<Vec<String>, CliError>,
) -> Result<Vec<String>, CliError> {
    let Some(cache) = cache else {
        let docs = compute()?;
        debug_assert_eq!(docs.len(), names.len());
        return Ok(docs);
    };
    let keys: Vec<String> = names
        .iter()
        .map(|name| RunCache::key(model_hash, &format!("{echo}#{name}")))
        .collect();

    let mut cached = Vec::with_capacity(names.len());
    for key in &keys {
        match cache.peek(key)? {
            Some(payload) => cached.push(payload),
            None => {
                cached.clear();
                break;
            }
        }
    }
    if cached.len() == names.len() && !cache.verify {
        return Ok(cached);
    }

    let docs = compute()?;
    debug_assert_eq!(docs.len(), names.len());
    if cached.len() == names.len() {
        // verify mode with a full set of entries: insist on equality
        for ((name, old), new) in names.iter().zip(&cached).zip(&docs) {
            if old != new {
                return Err(CliError::msg(format!(
                    "cache entry for {name} does not match recomputation \
                     (key {})",
                    RunCache::key(model_hash, &format!("{echo}#{name}"))
                )));
            }
        }
        return Ok(docs);
    }
    for (key, doc) in keys.iter().zip(&docs) {
        cache.store(key, doc)?;
    }
    Ok(docs)
}

/// Pull `"field": "<f17 float>"` back out of an emitted JSON document; used
/// to print summaries from possibly-cached payloads.
fn extract_float(doc: &str, field: &str) -> Result<f64, CliError> {
    let needle = format!("\"{field}\": \"");
    let start = doc
        .find(&needle)
        .ok_or_else(|| CliError::msg(format!("document is missing field {field:?}")))?
        + needle.len();
    let end = doc[start..]
        .find('"')
        .ok_or_else(|| CliError::msg(format!("document field {field:?} is malformed")))?;
    doc[start..start + end]
        .parse()
        .map_err(|_| CliError::msg(format!("document field {field:?} is not a float")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_grammar_round_trips() {
        let (kind, canon) = parse_schedule("poly:c=1,beta=2").unwrap();
        assert_eq!(canon, "poly:c=1,beta=2");
        assert!(matches!(kind, WindowKind::PowerLaw { delta0, theta }
            if delta0 == 1.0 && theta == 2.0));
        let (kind, canon) = parse_schedule("exp:alpha=0.01,c=0.5").unwrap();
        assert_eq!(canon, "exp:c=0.5,alpha=0.01", "canonical field order");
        assert!(matches!(kind, WindowKind::Exponential { delta0, alpha }
            if delta0 == 0.5 && alpha == 0.01));
        let (_, canon) = parse_schedule("const:delta=0.05").unwrap();
        assert_eq!(canon, "fixed:delta=0.05");
        assert!(parse_schedule("poly:c=1").is_err(), "beta is required");
        assert!(parse_schedule("warp:x=1").is_err());
        assert!(parse_schedule("fixed:delta=-1").is_err(), "positivity enforced");
    }

    #[test]
    fn cutoff_grammar_builds_all_kinds() {
        for spec in [
            "plateau:k=4,eta=0.5",
            "plateau-lower:k=3,eta=0.25",
            "cosine:eta=0.5",
            "cosine-lower:eta=0.5",
        ] {
            let (chi, canon) = parse_cutoff(spec).unwrap();
            assert_eq!(canon, spec);
            assert!(chi.value(0.0) > 0.99, "{spec} is 1 near the origin");
            assert_eq!(chi.value(5.0), 0.0, "{spec} vanishes far out");
        }
        assert!(parse_cutoff("plateau:eta=0.5").is_err(), "k is required");
        assert!(parse_cutoff("boxcar:eta=1").is_err());
    }

    #[test]
    fn band_grammar() {
        assert_eq!(parse_band("0.5:50").unwrap(), (0.5, 50.0));
        assert!(parse_band("50:0.5").is_err());
        assert!(parse_band("1:2:3").is_err());
    }

    #[test]
    fn float_fields_extract_from_documents() {
        let doc = "{\n  \"rho_hat\": \"9.5000000000000000e-1\",\n}";
        assert_eq!(extract_float(doc, "rho_hat").unwrap(), 0.95);
        assert!(extract_float(doc, "missing").is_err());
    }
}
