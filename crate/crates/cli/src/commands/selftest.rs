//! Built-in diagnostic suite: deterministic checks with closed-form or
//! dual-route oracles, printed one per line. Output carries no timings or
//! paths, so two consecutive runs with the same flags are byte-identical.

use ldp_core::cutoff::PlateauCutoff;
use ldp_core::deviations::{
    check_containment, dp_distribution, empirical_rho_hat, exact_distribution, fourier_rho,
    mgf_log_real, smoothed_window, window_bracket, DpOptions, FourierOptions,
};
use ldp_core::potentials::{lattice_check, LatticeKind, LatticeOptions};
use ldp_core::ratefn::{rate as rate_at, rate_infimum};
use ldp_core::thermo::{normalize_pair, tilted_pressure, NormalizedSystem};
use ldp_core::transfer::RadiusOptions;

use crate::cache::RunCache;
use crate::emit::{f17, json_document, Header, Json};
use crate::modelfile::{ModelFile, BUNDLED};
use crate::snapshot;
use crate::CliError;

use super::Globals;

type Check = Result<String, String>;

struct Harness<'a> {
    filter: Option<&'a str>,
    ran: usize,
    failed: usize,
}

impl Harness<'_> {
    fn check(&mut self, name: &str, body: impl FnOnce() -> Check) {
        if let Some(f) = self.filter {
            if !name.contains(f) {
                return;
            }
        }
        self.ran += 1;
        match body() {
            Ok(detail) => println!("ok {name} — {detail}"),
            Err(detail) => {
                self.failed += 1;
                println!("FAIL {name} — {detail}");
            }
        }
    }
}

fn bundled(name: &str) -> Result<ModelFile, String> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| format!("no bundled model {name:?}"))?;
    ModelFile::from_text(text).map_err(|e| e.to_string())
}

/// Normalized system for a bundled model with its conventional pair.
fn system(name: &str) -> Result<NormalizedSystem, String> {
    let mf = bundled(name)?;
    let (phi, psi) = mf.resolve_pair(None, None, None).map_err(|e| e.to_string())?;
    normalize_pair(&mf.model, &phi, &psi).map_err(|e| e.to_string())
}

pub fn run(g: &Globals) -> Result<u8, CliError> {
    let mut h = Harness { filter: g.filter.as_deref(), ran: 0, failed: 0 };

    h.check("corpus-load", || {
        let mut count = 0usize;
        for (name, text) in BUNDLED {
            let a = ModelFile::from_text(text).map_err(|e| format!("{name}: {e}"))?;
            let b = ModelFile::from_text(text).map_err(|e| format!("{name}: {e}"))?;
            if a.hash != b.hash {
                return Err(format!("{name}: hash is not stable across parses"));
            }
            a.model
                .require_primitive()
                .map_err(|e| format!("{name}: {e}"))?;
            count += 1;
        }
        if count < 6 {
            return Err(format!("only {count} bundled models; expected at least 6"));
        }
        Ok(format!("{count} models parse, hash stably, and are primitive"))
    });

    h.check("pressure-full-shift", || {
        let mf = bundled("bernoulli")?;
        let (phi, psi) = mf.resolve_pair(None, None, None).map_err(|e| e.to_string())?;
        let (rec, pots) = ldp_core::potentials::recode_potentials(&mf.model, &[&phi, &psi])
            .map_err(|e| e.to_string())?;
        let pr = tilted_pressure(&rec, &pots[0], &pots[1], 0.0).map_err(|e| e.to_string())?;
        let gap = (pr - std::f64::consts::LN_2).abs();
        if gap > 1e-12 {
            return Err(format!("Pr(0) = {} is {} from ln 2", f17(pr), f17(gap)));
        }
        Ok(format!("|Pr(0) - ln 2| = {}", f17(gap)))
    });

    h.check("pressure-golden-mean", || {
        let mf = bundled("golden-mean")?;
        let (phi, psi) = mf.resolve_pair(None, None, None).map_err(|e| e.to_string())?;
        let (rec, pots) = ldp_core::potentials::recode_potentials(&mf.model, &[&phi, &psi])
            .map_err(|e| e.to_string())?;
        let pr = tilted_pressure(&rec, &pots[0], &pots[1], 0.0).map_err(|e| e.to_string())?;
        let truth = ((1.0 + 5.0f64.sqrt()) / 2.0).ln();
        let gap = (pr - truth).abs();
        if gap > 1e-12 {
            return Err(format!("Pr(0) = {} is {} from ln phi", f17(pr), f17(gap)));
        }
        Ok(format!("|Pr(0) - ln((1+sqrt 5)/2)| = {}", f17(gap)))
    });

    h.check("rate-closed-form", || {
        let sys = system("bernoulli")?;
        let pc = 0.7 - sys.mean_shift;
        let data = rate_at(&sys, pc).map_err(|e| e.to_string())?;
        let j_truth = std::f64::consts::LN_2 + 0.7 * 0.7f64.ln() + 0.3 * 0.3f64.ln();
        let xi_truth = (7.0f64 / 3.0).ln();
        let j_gap = (data.value - j_truth).abs();
        let xi_gap = (data.xi - xi_truth).abs();
        if j_gap > 1e-10 {
            return Err(format!("J(0.7) = {} is {} from the entropy form", f17(data.value), f17(j_gap)));
        }
        if xi_gap > 1e-9 {
            return Err(format!("xi(0.7) = {} is {} from ln(7/3)", f17(data.xi), f17(xi_gap)));
        }
        let dual = rate_infimum(&sys, pc).map_err(|e| e.to_string())?;
        let dual_gap = (dual - data.value).abs();
        if dual_gap > 1e-9 {
            return Err(format!("legendre and infimum routes differ by {}", f17(dual_gap)));
        }
        let center = rate_at(&sys, 0.0).map_err(|e| e.to_string())?.value;
        if center.abs() > 1e-12 {
            return Err(format!("J at the mean is {}, not 0", f17(center)));
        }
        Ok(format!(
            "J(0.7) within {}, xi within {}, routes agree within {}",
            f17(j_gap),
            f17(xi_gap),
            f17(dual_gap)
        ))
    });

    h.check("window-oracle", || {
        let sys = system("bernoulli")?;
        let dist = dp_distribution(&sys, 20, &DpOptions::default()).map_err(|e| e.to_string())?;
        let bracket = window_bracket(&dist, -0.5, 2.5);
        let (lo, hi) = bracket.bounds();
        let truth = 478686.0 / 1048576.0;
        if hi - lo > 1e-12 {
            return Err(format!("bracket width {} on an exactly representable mass", f17(hi - lo)));
        }
        let gap = (lo - truth).abs().max((hi - truth).abs());
        if gap > 1e-12 {
            return Err(format!(
                "binomial window mass [{}, {}] misses 478686/1048576 by {}",
                f17(lo),
                f17(hi),
                f17(gap)
            ));
        }
        Ok(format!("binomial n=20 window mass matches within {}", f17(gap)))
    });

    h.check("mgf-closed-form", || {
        let sys = system("bernoulli")?;
        let xi = 0.3f64;
        let n = 8usize;
        let log_m = mgf_log_real(&sys, xi, n).map_err(|e| e.to_string())?;
        let truth = n as f64 * (xi / 2.0).cosh().ln();
        let gap = (log_m - truth).abs();
        if gap > 1e-12 {
            return Err(format!(
                "log E[e^(0.3 S_8)] = {} is {} from 8 ln cosh 0.15",
                f17(log_m),
                f17(gap)
            ));
        }
        Ok(format!("fair-coin mgf matches cosh form within {}", f17(gap)))
    });

    h.check("dp-vs-exact", || {
        let mut checked = 0usize;
        let mut worst_mass = 0.0f64;
        for name in ["bernoulli", "golden-lattice", "golden-nonlattice"] {
            let sys = system(name)?;
            let n = 10usize;
            let dist =
                dp_distribution(&sys, n, &DpOptions::default()).map_err(|e| e.to_string())?;
            let exact = exact_distribution(&sys, n, 1_000_000).map_err(|e| e.to_string())?;
            let report = check_containment(&dist, &exact).map_err(|e| e.to_string())?;
            if !report.clean() {
                return Err(format!(
                    "{name}: {} position and {} mass violations over {} atoms",
                    report.position_violations, report.mass_violations, report.atoms
                ));
            }
            let mass = dist.total_mass();
            let drift = (mass.lo - 1.0).abs().max((mass.hi - 1.0).abs());
            if drift > 1e-9 {
                return Err(format!("{name}: total mass off by {}", f17(drift)));
            }
            worst_mass = worst_mass.max(drift);
            checked += 1;
        }
        Ok(format!(
            "{checked} models clean at n=10, mass drift at most {}",
            f17(worst_mass)
        ))
    });

    h.check("lattice-verdicts", || {
        let sqrt2 = 2.0f64.sqrt();
        let expect: &[(&str, Option<(f64, f64)>)] = &[
            ("bernoulli", Some((0.0, 1.0))),
            ("golden-mean", Some((0.0, 1.0))),
            ("golden-lattice", Some((sqrt2 - 1.0, 2.0 - sqrt2))),
            ("integer", Some((0.0, 1.0))),
            ("triple", Some((0.0, 1.0 / 3.0))),
            ("golden-nonlattice", None),
            ("dense-nonlattice", None),
        ];
        for &(name, want) in expect {
            let mf = bundled(name)?;
            let psi = mf.potential("psi").map_err(|e| e.to_string())?;
            let verdict = lattice_check(&mf.model, &psi, LatticeOptions::default())
                .map_err(|e| format!("{name}: {e}"))?;
            match (verdict.kind, want) {
                (LatticeKind::Lattice { a, c }, Some((a_want, c_want))) => {
                    if (a - a_want).abs() > 1e-9 || (c - c_want).abs() > 1e-9 {
                        return Err(format!(
                            "{name}: span {} drift {} instead of span {} drift {}",
                            f17(c),
                            f17(a),
                            f17(c_want),
                            f17(a_want)
                        ));
                    }
                }
                (LatticeKind::NoLatticeFound, None) => {}
                (LatticeKind::Lattice { a, c }, None) => {
                    return Err(format!("{name}: unexpected lattice span {c} drift {a}"))
                }
                (LatticeKind::NoLatticeFound, Some(_)) => {
                    return Err(format!("{name}: lattice was expected but not found"))
                }
            }
        }
        Ok(format!("{} verdicts as designed", expect.len()))
    });

    h.check("smoothed-sandwich", || {
        let sys = system("bernoulli")?;
        let dist = dp_distribution(&sys, 30, &DpOptions::default()).map_err(|e| e.to_string())?;
        let center = 2.0;
        let eps = 2.5;
        let bracket = window_bracket(&dist, center - eps, center + eps);
        let lower = PlateauCutoff::lower_for_unit(3, 0.4).map_err(|e| e.to_string())?;
        let upper = PlateauCutoff::upper_for_unit(3, 0.4).map_err(|e| e.to_string())?;
        let e_lower = smoothed_window(&dist, center, eps, &lower).map_err(|e| e.to_string())?;
        let e_upper = smoothed_window(&dist, center, eps, &upper).map_err(|e| e.to_string())?;
        if e_lower.lo > bracket.touching.hi + 1e-12 {
            return Err(format!(
                "E[chi-] = {} exceeds window mass {}",
                f17(e_lower.lo),
                f17(bracket.touching.hi)
            ));
        }
        if bracket.inside.lo > e_upper.hi + 1e-12 {
            return Err(format!(
                "window mass {} exceeds E[chi+] = {}",
                f17(bracket.inside.lo),
                f17(e_upper.hi)
            ));
        }
        Ok(format!(
            "E[chi-] = {} <= window <= E[chi+] = {}",
            f17(e_lower.lo),
            f17(e_upper.hi)
        ))
    });

    h.check("fourier-vs-dp", || {
        let mf = bundled("dense-nonlattice")?;
        let exp = mf
            .experiments
            .get("default")
            .ok_or("dense-nonlattice has no default experiment")?;
        let sys = system("dense-nonlattice")?;
        let pc = exp.p - sys.mean_shift;
        let n = 40usize;
        let eps = 1.5f64;
        let rate_data = rate_at(&sys, pc).map_err(|e| e.to_string())?;
        let cutoff = PlateauCutoff::upper_for_unit(4, 0.5).map_err(|e| e.to_string())?;
        let dist = dp_distribution(&sys, n, &DpOptions::default()).map_err(|e| e.to_string())?;
        let sm = smoothed_window(&dist, pc * n as f64, eps, &cutoff).map_err(|e| e.to_string())?;
        let fr = fourier_rho(&sys, &rate_data, &cutoff, eps, n, &FourierOptions::default())
            .map_err(|e| e.to_string())?;
        let slack = fr.tail_bound + fr.quad_error + 1e-10;
        if fr.value < sm.lo - slack || fr.value > sm.hi + slack {
            return Err(format!(
                "fourier {} outside certified [{}, {}] with slack {}",
                f17(fr.value),
                f17(sm.lo),
                f17(sm.hi),
                f17(slack)
            ));
        }
        if fr.norm_residual > 1e-9 {
            return Err(format!("mgf normalization residual {}", f17(fr.norm_residual)));
        }
        Ok(format!(
            "routes agree within tail {} + quadrature {}",
            f17(fr.tail_bound),
            f17(fr.quad_error)
        ))
    });

    h.check("suspension-identity", || {
        let mf = bundled("golden-lattice")?;
        if mf.profiles.len() < 4 {
            return Err(format!("expected at least 4 profiles, found {}", mf.profiles.len()));
        }
        let mut worst = 0.0f64;
        for (name, spec) in &mf.profiles {
            let residual = spec
                .suspension
                .verify_return_identity(&mf.model)
                .map_err(|e| format!("{name}: {e}"))?;
            if residual > 1e-9 {
                return Err(format!("{name}: return identity residual {}", f17(residual)));
            }
            worst = worst.max(residual);
        }
        Ok(format!(
            "{} profiles re-integrate within {}",
            mf.profiles.len(),
            f17(worst)
        ))
    });

    h.check("sweep-contraction", || {
        let sys = system("golden-nonlattice")?;
        let (rho_hat, sweep) =
            empirical_rho_hat(&sys, 0.0, (0.5, 50.0), 101, &RadiusOptions::default())
                .map_err(|e| e.to_string())?;
        if rho_hat >= 1.0 - 1e-3 {
            return Err(format!(
                "rho_hat = {} at u = {} does not contract",
                f17(rho_hat),
                f17(sweep.u_at_max)
            ));
        }
        Ok(format!(
            "twisted radius stays at {} (u_max = {})",
            f17(rho_hat),
            f17(sweep.u_at_max)
        ))
    });

    h.check("determinism", || {
        let header = Header {
            model_hash: "0".repeat(64),
            model_name: "selftest".into(),
            echo: "selftest determinism".into(),
        };
        let render = || {
            let mut body = Json::obj();
            body.push("value", Json::Float(0.1 + 0.2))
                .push("count", Json::UInt(3));
            json_document(
                &header,
                match body {
                    Json::Obj(fields) => fields,
                    _ => unreachable!(),
                },
            )
        };
        if render() != render() {
            return Err("json document rendering is not reproducible".into());
        }
        let sys = system("bernoulli")?;
        let make = || -> Result<Vec<u8>, String> {
            let dist =
                dp_distribution(&sys, 6, &DpOptions::default()).map_err(|e| e.to_string())?;
            Ok(snapshot::write(&dist))
        };
        let bytes_a = make()?;
        let bytes_b = make()?;
        if bytes_a != bytes_b {
            return Err("independent DP runs produced different snapshots".into());
        }
        let back = snapshot::read(&bytes_a).map_err(|e| e.to_string())?;
        if snapshot::write(&back) != bytes_a {
            return Err("snapshot does not round-trip byte-identically".into());
        }
        Ok(format!("documents and {}-byte snapshots reproduce", bytes_a.len()))
    });

    if let Some(out) = &g.out {
        h.check("cache-roundtrip", || {
            let cache = RunCache::new(out, g.verify_cache).map_err(|e| e.to_string())?;
            let key = RunCache::key("selftest", "cache-roundtrip-v1");
            let (first, _) = cache
                .get_or_compute(&key, || Ok("selftest cache payload".into()))
                .map_err(|e| e.to_string())?;
            let (second, _) = cache
                .get_or_compute(&key, || Ok("selftest cache payload".into()))
                .map_err(|e| e.to_string())?;
            if first != second {
                return Err("payload changed between cache reads".into());
            }
            Ok("payload stable under reuse".into())
        });
    }

    println!("selftest: {} passed, {} failed", h.ran - h.failed, h.failed);
    if h.ran == 0 {
        return Err(CliError::msg(format!(
            "--filter {:?} matched no checks",
            g.filter.as_deref().unwrap_or("")
        )));
    }
    Ok(if h.failed == 0 { 0 } else { 1 })
}
