//! Result serialization: one machine-readable JSON results file plus
//! line-oriented TSV tables per run. Numeric tables carry their units in
//! `#` header lines, machine tables print 17 significant digits, human
//! tables 6. Timestamps live only in the manifest so that the numeric
//! tables of two identical runs are byte-identical.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::RmfError;
use crate::fields::{DensitySet, MesonFieldSet};
use crate::hamiltonian::{BoundsReport, RegimeReport};
use crate::scf::IterationRecord;
use crate::variational::{ConcentrationReport, EnergyBreakdown, SubadditivityReport};

pub const ARTIFACT_VERSION: &str = concat!("rmf ", env!("CARGO_PKG_VERSION"));

/// 17 significant digits: round-trips any f64 exactly.
pub fn fmt_machine(x: f64) -> String {
    format!("{x:.16e}")
}

/// 6 significant digits for human-facing tables.
pub fn fmt_human(x: f64) -> String {
    format!("{x:.5e}")
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub artifact: String,
    /// "ok" or a failure description; partial results are still written
    pub status: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// config with all defaults materialized
    pub config_echo: String,
}

impl Manifest {
    pub fn new(config_echo: String) -> Self {
        Self {
            artifact: ARTIFACT_VERSION.into(),
            status: "ok".into(),
            started_unix: unix_now(),
            finished_unix: 0,
            config_echo,
        }
    }

    pub fn finish(&mut self, status: &str) {
        self.status = status.into();
        self.finished_unix = unix_now();
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DescentRecord {
    pub epsilon: f64,
    pub predicted_first_order: f64,
    pub measured_change: f64,
}

/// Everything numeric a run produces, in one serializable block.
#[derive(Debug, Clone, Serialize, Default)]
pub struct Results {
    pub regime: Option<RegimeReport>,
    pub converged: bool,
    pub iterations: usize,
    pub total_energy: f64,
    pub energy: Option<EnergyBreakdown>,
    pub epsilons_p: Vec<f64>,
    pub epsilons_n: Vec<f64>,
    pub el_residual_max: f64,
    pub commutator_residual_p: f64,
    pub commutator_residual_n: f64,
    pub degenerate_fermi_level: bool,
    pub history: Vec<IterationRecord>,
    pub spectrum_p: Vec<f64>,
    pub spectrum_n: Vec<f64>,
    pub subadditivity: Vec<SubadditivityReport>,
    pub concentration: Vec<ConcentrationReport>,
    pub descent: Vec<DescentRecord>,
    pub bounds: Vec<BoundsReport>,
}

#[derive(Debug, Clone)]
pub struct ResultBundle {
    pub manifest: Manifest,
    pub results: Results,
    /// field and density snapshots, written only with --dump-fields
    pub snapshots: Option<(MesonFieldSet, DensitySet)>,
}

const UNITS_HEADER: &str = "# units: natural (hbar = c = 1), energies in m_b, lengths in 1/m_b";

fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(UNITS_HEADER);
    out.push('\n');
    out.push_str("# ");
    out.push_str(&headers.join("\t"));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

pub fn scf_history_table(history: &[IterationRecord]) -> String {
    let rows: Vec<Vec<String>> = history
        .iter()
        .map(|r| {
            vec![
                r.iteration.to_string(),
                fmt_machine(r.total_energy),
                fmt_machine(r.max_delta_eps),
                fmt_machine(r.density_residual),
                fmt_machine(r.el_residual),
            ]
        })
        .collect();
    table(
        &["iteration", "total_energy", "max_delta_eps", "density_residual", "el_residual"],
        &rows,
    )
}

pub fn spectrum_table(spectrum_p: &[f64], spectrum_n: &[f64]) -> String {
    let mut rows = Vec::new();
    for (species, spectrum) in [("proton", spectrum_p), ("neutron", spectrum_n)] {
        for (i, &e) in spectrum.iter().enumerate() {
            rows.push(vec![species.to_string(), i.to_string(), fmt_machine(e)]);
        }
    }
    table(&["species", "index", "eigenvalue"], &rows)
}

pub fn subadditivity_table(reports: &[SubadditivityReport]) -> String {
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let lambda = r
                .lambda
                .iter()
                .map(|&l| fmt_human(l))
                .collect::<Vec<_>>()
                .join(",");
            vec![
                lambda,
                fmt_machine(r.i_full),
                fmt_machine(r.i_lambda),
                fmt_machine(r.i_complement),
                fmt_machine(r.gap),
                r.strict.to_string(),
            ]
        })
        .collect();
    table(&["lambda", "i_full", "i_lambda", "i_complement", "gap", "strict"], &rows)
}

pub fn concentration_table(reports: &[ConcentrationReport]) -> String {
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                fmt_machine(r.radius),
                fmt_machine(r.max_fraction),
                fmt_human(r.argmax_center[0]),
                fmt_human(r.argmax_center[1]),
                fmt_human(r.argmax_center[2]),
            ]
        })
        .collect();
    table(&["radius", "max_fraction", "center_x", "center_y", "center_z"], &rows)
}

pub fn descent_table(records: &[DescentRecord]) -> String {
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                fmt_machine(r.epsilon),
                fmt_machine(r.predicted_first_order),
                fmt_machine(r.measured_change),
            ]
        })
        .collect();
    table(&["epsilon", "predicted_first_order", "measured_change"], &rows)
}

pub fn bounds_table(reports: &[BoundsReport]) -> String {
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                fmt_machine(r.d_p),
                fmt_machine(r.d_n),
                fmt_machine(r.bound_upper_p),
                fmt_machine(r.bound_upper_n),
                fmt_machine(r.bound_lower_p),
                fmt_machine(r.bound_lower_n),
                fmt_machine(r.h_p),
                fmt_machine(r.h_n),
                fmt_machine(r.hardy_ratio_full),
                fmt_machine(r.hardy_ratio_projected),
            ]
        })
        .collect();
    table(
        &[
            "d_p",
            "d_n",
            "bound_upper_p",
            "bound_upper_n",
            "bound_lower_p",
            "bound_lower_n",
            "h_p",
            "h_n",
            "hardy_ratio_full",
            "hardy_ratio_projected",
        ],
        &rows,
    )
}

pub fn fields_table(fields: &MesonFieldSet, densities: &DensitySet) -> String {
    let rows: Vec<Vec<String>> = (0..fields.sigma.len())
        .map(|i| {
            vec![
                i.to_string(),
                fmt_machine(fields.sigma[i]),
                fmt_machine(fields.omega0[i]),
                fmt_machine(fields.r00[i]),
                fmt_machine(fields.a0[i]),
                fmt_machine(densities.rho_s[i]),
                fmt_machine(densities.rho_0[i]),
                fmt_machine(densities.rho_00[i]),
                fmt_machine(densities.rho_c[i]),
            ]
        })
        .collect();
    table(
        &["site", "sigma", "omega0", "r00", "a0", "rho_s", "rho_0", "rho_00", "rho_c"],
        &rows,
    )
}

/// Human-readable run summary at 6 significant digits.
pub fn summary_text(results: &Results) -> String {
    let mut out = String::new();
    out.push_str(UNITS_HEADER);
    out.push('\n');
    out.push_str(&format!("converged\t{}\n", results.converged));
    out.push_str(&format!("iterations\t{}\n", results.iterations));
    out.push_str(&format!("total_energy\t{}\n", fmt_human(results.total_energy)));
    if let Some(e) = &results.energy {
        out.push_str(&format!("kinetic\t{}\n", fmt_human(e.kinetic)));
        out.push_str(&format!("sigma_term\t{}\n", fmt_human(e.sigma_term)));
        out.push_str(&format!("omega_term\t{}\n", fmt_human(e.omega_term)));
        out.push_str(&format!("rho_term\t{}\n", fmt_human(e.rho_term)));
        out.push_str(&format!("coulomb_term\t{}\n", fmt_human(e.coulomb_term)));
    }
    for (name, eps) in [("epsilon_p", &results.epsilons_p), ("epsilon_n", &results.epsilons_n)] {
        for (i, &e) in eps.iter().enumerate() {
            out.push_str(&format!("{name}[{i}]\t{}\n", fmt_human(e)));
        }
    }
    out.push_str(&format!("el_residual_max\t{}\n", fmt_human(results.el_residual_max)));
    out.push_str(&format!(
        "commutator_residual\t{}\t{}\n",
        fmt_human(results.commutator_residual_p),
        fmt_human(results.commutator_residual_n)
    ));
    out
}

/// Writes the whole bundle into `dir` (created if missing). Returns the list
/// of files written.
pub fn write_bundle(dir: &Path, bundle: &ResultBundle) -> Result<Vec<String>, RmfError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, content: String| -> Result<(), RmfError> {
        fs::write(dir.join(name), content)?;
        written.push(name.to_string());
        Ok(())
    };
    put(
        "manifest.json",
        serde_json::to_string_pretty(&bundle.manifest).expect("manifest serializes") + "\n",
    )?;
    put(
        "results.json",
        serde_json::to_string_pretty(&bundle.results).expect("results serialize") + "\n",
    )?;
    put("summary.txt", summary_text(&bundle.results))?;
    let r = &bundle.results;
    if !r.history.is_empty() {
        put("scf_history.tsv", scf_history_table(&r.history))?;
    }
    if !r.spectrum_p.is_empty() || !r.spectrum_n.is_empty() {
        put("spectrum.tsv", spectrum_table(&r.spectrum_p, &r.spectrum_n))?;
    }
    if !r.subadditivity.is_empty() {
        put("subadditivity.tsv", subadditivity_table(&r.subadditivity))?;
    }
    if !r.concentration.is_empty() {
        put("concentration.tsv", concentration_table(&r.concentration))?;
    }
    if !r.descent.is_empty() {
        put("descent.tsv", descent_table(&r.descent))?;
    }
    if !r.bounds.is_empty() {
        put("bounds.tsv", bounds_table(&r.bounds))?;
    }
    if let Some((fields, densities)) = &bundle.snapshots {
        put("fields.tsv", fields_table(fields, densities))?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn machine_format_round_trips() {
        for &x in &[1.0, -0.1, std::f64::consts::PI, 1.2345678901234567e-8, 2.0 / 3.0] {
            let s = fmt_machine(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn human_format_six_digits() {
        assert_eq!(fmt_human(std::f64::consts::PI), "3.14159e0");
    }

    #[test]
    fn tables_carry_units_header() {
        let t = spectrum_table(&[1.0], &[]);
        assert!(t.starts_with(UNITS_HEADER));
        assert!(t.contains("proton\t0\t1.0000000000000000e0"));
    }

    #[test]
    fn write_bundle_deterministic_tables() {
        let dir = tempfile::tempdir().unwrap();
        let results = Results {
            converged: true,
            iterations: 3,
            total_energy: 2.0,
            spectrum_p: vec![-1.0, 1.0],
            spectrum_n: vec![-1.0, 1.0],
            ..Default::default()
        };
        let bundle = ResultBundle {
            manifest: Manifest::new("x = 1".into()),
            results,
            snapshots: None,
        };
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        write_bundle(&a, &bundle).unwrap();
        write_bundle(&b, &bundle).unwrap();
        for name in ["results.json", "summary.txt", "spectrum.tsv"] {
            let fa = fs::read(a.join(name)).unwrap();
            let fb = fs::read(b.join(name)).unwrap();
            assert_eq!(fa, fb, "{name}");
        }
    }
}
