use anyhow::anyhow;
use serde_json::json;

use floqeels_core::eels::{
    broaden_spectrum, linspace, run_point, sweep_map, CouplingGeometry, MapResult, PeakOptions,
    PeakSet, SpectrumGrid, SweepAxis,
};
use floqeels_core::floquet::{solve_floquet, stark_shift, FloquetSolution};
use floqeels_core::lindblad::{steady_state_fourier, to_floquet_basis};
use floqeels_core::model::{builtin_scenario, load_config, DriveParams, RunConfig, Scenario};
use floqeels_core::oracle::{run_full_validation, ValidationReport};

use crate::output::{num, write_manifest, Csv, OutDir, Timings};
use crate::{Common, Failure, OmegaAxis};

type CmdResult = Result<(), Failure>;

/// Like `println!`, but a closed stdout is not an error.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

/// Loads the configuration and applies flag overrides.
fn resolve(common: &Common) -> Result<(RunConfig, String), Failure> {
    let (mut cfg, label) = match (&common.config, &common.scenario) {
        (Some(path), _) => (load_config(path)?, path.display().to_string()),
        (None, Some(name)) => (builtin_scenario(name)?, name.clone()),
        (None, None) => {
            return Err(Failure::input(anyhow!(
                "one of --config FILE or --scenario NAME is required"
            )))
        }
    };
    if let Some(w) = common.omega_l {
        cfg.drive = DriveParams::new(w)?;
    }
    if let Some(r) = common.rabi {
        if !(r == 0.0 && cfg.model.rabi_strength() == 0.0) {
            cfg.model = cfg.model.with_rabi_strength(r)?;
        }
    }
    let numerics = &mut cfg.numerics;
    if let Some(t) = common.peak_tol {
        numerics.peak_tol = t;
    }
    if let Some(f) = common.fwhm {
        numerics.broadening_fwhm = f;
    }
    if let Some(l) = common.l_max {
        numerics.l_max = l;
        numerics.l_max_start = numerics.l_max_start.min(l);
    }
    numerics.validate()?;
    resolve_threads(common)?;
    Ok((cfg, label))
}

fn peak_options(common: &Common, cfg: &RunConfig) -> Result<PeakOptions, Failure> {
    let mut opts = PeakOptions::new(cfg.numerics.peak_tol);
    if let (Some(r), Some(b)) = (common.impact_parameter, common.beta) {
        opts.geometry = Some(CouplingGeometry::new(r, b)?);
    }
    Ok(opts)
}

fn omega_grid(axis: &OmegaAxis) -> Result<Vec<f64>, Failure> {
    if axis.omega_points < 2 || !(axis.omega_min < axis.omega_max) {
        return Err(Failure::input(anyhow!(
            "omega axis needs omega-min < omega-max and at least 2 points"
        )));
    }
    Ok(linspace(axis.omega_min, axis.omega_max, axis.omega_points))
}

fn parse_sweep(spec: &str) -> Result<SweepAxis, Failure> {
    let bad = || {
        Failure::input(anyhow!(
            "--sweep expects rabi:LO:HI:N or omega_l:LO:HI:N, got `{spec}`"
        ))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 4 {
        return Err(bad());
    }
    let lo: f64 = parts[1].parse().map_err(|_| bad())?;
    let hi: f64 = parts[2].parse().map_err(|_| bad())?;
    let n: usize = parts[3].parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(bad());
    }
    let values = if n == 1 { vec![lo] } else { linspace(lo, hi, n) };
    match parts[0] {
        "rabi" => Ok(SweepAxis::Rabi(values)),
        "omega_l" => Ok(SweepAxis::OmegaL(values)),
        _ => Err(bad()),
    }
}

fn geometry_json(opts: &PeakOptions) -> serde_json::Value {
    match opts.geometry {
        Some(g) => json!({"impact_parameter": g.impact_parameter, "beta": g.beta}),
        None => serde_json::Value::Null,
    }
}

fn run_comments(cfg: &RunConfig, label: &str) -> Vec<String> {
    vec![
        format!("system: {label}"),
        "units: hbar = 1, frequencies in units of omega0 (reference transition)".to_string(),
        format!("omega_l = {}", num(cfg.drive.omega_l)),
        format!("rabi strength = {}", num(cfg.model.rabi_strength())),
    ]
}

fn spectrum_csv(grid: &SpectrumGrid, mut comments: Vec<String>) -> String {
    comments.push("omega: energy loss (negative = gain)".to_string());
    comments.push(format!(
        "gamma: loss probability per unit omega, normalized to the undriven omega0 peak; gaussian fwhm = {}",
        num(grid.fwhm)
    ));
    let mut csv = Csv::new(&comments, &["omega", "gamma"]);
    for (w, g) in grid.omega.iter().zip(&grid.gamma) {
        csv.row(&[num(*w), num(*g)]);
    }
    csv.into_string()
}

fn peaks_csv(peaks: &PeakSet, mut comments: Vec<String>) -> String {
    comments.push("prob: peak probability normalized to the undriven omega0 peak".to_string());
    comments.push(format!(
        "retained |l| <= {}; sum of non-elastic probabilities = {}; negative entries flagged = {}",
        peaks.window,
        num(peaks.sum_prob),
        peaks.negative.len()
    ));
    let mut csv = Csv::new(&comments, &["j", "jp", "l", "omega", "prob"]);
    for p in &peaks.entries {
        csv.row(&[p.j.to_string(), p.jp.to_string(), p.l.to_string(), num(p.omega), num(p.prob)]);
    }
    csv.into_string()
}

pub fn spectrum(argv: &[String], common: &Common, axis: &OmegaAxis, reference: bool) -> CmdResult {
    let (cfg, label) = resolve(common)?;
    let opts = peak_options(common, &cfg)?;
    let omega = omega_grid(axis)?;
    let fwhm = cfg.numerics.broadening_fwhm;
    let mut timings = Timings::default();
    let point = timings.time("pipeline", || run_point(&cfg.model, &cfg.drive, &cfg.numerics, &opts))?;
    let grid = timings.time("broadening", || broaden_spectrum(&point.peaks, fwhm, &omega))?;
    let reference_grid = if reference {
        let model = if cfg.model.rabi_strength() == 0.0 {
            cfg.model.clone()
        } else {
            cfg.model.with_rabi_strength(0.0)?
        };
        let p = timings.time("reference", || run_point(&model, &cfg.drive, &cfg.numerics, &opts))?;
        Some(broaden_spectrum(&p.peaks, fwhm, &omega)?)
    } else {
        None
    };

    let mut out = OutDir::create(&common.out)?;
    let comments = run_comments(&cfg, &label);
    out.write("spectrum.csv", spectrum_csv(&grid, comments.clone()))?;
    out.write("peaks.csv", peaks_csv(&point.peaks, comments.clone()))?;
    if !point.peaks.negative.is_empty() {
        let neg = PeakSet {
            entries: point.peaks.negative.clone(),
            negative: Vec::new(),
            ..point.peaks.clone()
        };
        out.write("peaks_negative.csv", peaks_csv(&neg, comments.clone()))?;
    }
    if let Some(g) = &reference_grid {
        let mut c = comments.clone();
        c.push("undriven reference (rabi strength 0)".to_string());
        out.write("spectrum_reference.csv", spectrum_csv(g, c))?;
    }
    let params = json!({
        "omega_axis": {"min": axis.omega_min, "max": axis.omega_max, "points": axis.omega_points},
        "reference": reference,
        "geometry": geometry_json(&opts),
    });
    write_manifest(&mut out, argv, "spectrum", Some(cfg.to_config_file()), params, &timings)?;
    say!(
        "{} peaks, sum of non-elastic probabilities {:.6}, written to {}",
        point.peaks.entries.len(),
        point.peaks.sum_prob,
        out.path().display()
    );
    Ok(())
}

fn map_text(map: &MapResult, comments: &[String]) -> String {
    let mut text = String::new();
    for c in comments {
        text.push_str(&format!("# {c}\n"));
    }
    for row in &map.rows {
        let line: Vec<String> = match &row.gamma {
            Some(g) => g.iter().map(|x| num(*x)).collect(),
            None => vec!["nan".to_string(); map.omega.len()],
        };
        text.push_str(&line.join(" "));
        text.push('\n');
    }
    text
}

fn map_binary(map: &MapResult) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(8 * map.rows.len() * map.omega.len());
    for row in &map.rows {
        match &row.gamma {
            Some(g) => g.iter().for_each(|x| bytes.extend_from_slice(&x.to_le_bytes())),
            None => (0..map.omega.len()).for_each(|_| bytes.extend_from_slice(&f64::NAN.to_le_bytes())),
        }
    }
    bytes
}

pub fn map(argv: &[String], common: &Common, axis: &OmegaAxis, sweep: &str) -> CmdResult {
    let sweep_axis = parse_sweep(sweep)?;
    let (cfg, label) = resolve(common)?;
    let opts = peak_options(common, &cfg)?;
    let omega = omega_grid(axis)?;
    let mut timings = Timings::default();
    let map = timings.time("sweep", || {
        sweep_map(&cfg.model, &cfg.drive, &cfg.numerics, &opts, sweep_axis.clone(), &omega)
    })?;
    let name = map.axis.name();

    let mut out = OutDir::create(&common.out)?;
    let mut comments = run_comments(&cfg, &label);
    comments.push(format!("swept parameter: {name} (overrides the value above)"));
    let mut text_comments = comments.clone();
    text_comments.push(format!(
        "rows: {} values of {name} listed in map_axis.csv; columns: {} omega values from {} to {}",
        map.rows.len(),
        omega.len(),
        num(axis.omega_min),
        num(axis.omega_max)
    ));
    text_comments.push("entries: broadened loss probability, normalized to the undriven omega0 peak; nan marks a failed row".to_string());
    out.write("map.txt", map_text(&map, &text_comments))?;
    out.write("map.bin", map_binary(&map))?;

    let mut axis_csv = Csv::new(&comments, &["row", name, "status", "sum_prob", "error"]);
    let mut peaks = Csv::new(&comments, &["row", name, "j", "jp", "l", "omega", "prob"]);
    for (i, row) in map.rows.iter().enumerate() {
        let (status, sum) = match &row.peaks {
            Some(p) => ("ok", num(p.sum_prob)),
            None => ("failed", "nan".to_string()),
        };
        let err = row.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        axis_csv.row(&[i.to_string(), num(row.value), status.to_string(), sum, err]);
        for p in row.peaks.iter().flat_map(|s| &s.entries) {
            peaks.row(&[
                i.to_string(),
                num(row.value),
                p.j.to_string(),
                p.jp.to_string(),
                p.l.to_string(),
                num(p.omega),
                num(p.prob),
            ]);
        }
    }
    out.write("map_axis.csv", axis_csv.into_string())?;
    out.write("map_peaks.csv", peaks.into_string())?;
    let failed = map.failed_rows().count();
    let params = json!({
        "sweep": {"kind": name, "values": map.axis.values()},
        "omega_axis": {"min": axis.omega_min, "max": axis.omega_max, "points": axis.omega_points},
        "binary_layout": {"dtype": "f64 little-endian", "order": "row-major", "rows": map.rows.len(), "cols": omega.len()},
        "geometry": geometry_json(&opts),
        "failed_rows": failed,
    });
    write_manifest(&mut out, argv, "map", Some(cfg.to_config_file()), params, &timings)?;
    say!(
        "{}x{} map written to {}",
        map.rows.len(),
        omega.len(),
        out.path().display()
    );
    if failed > 0 {
        for (i, row) in map.failed_rows() {
            eprintln!("row {i} ({name} = {}): {}", row.value, row.error.as_deref().unwrap_or(""));
        }
        return Err(Failure::numerical(anyhow!("{failed} of {} rows failed", map.rows.len())));
    }
    Ok(())
}

/// Indices `(a, l)` of the `count` largest-magnitude coefficients of band `j`.
fn leading_coefficients(fs: &FloquetSolution, j: usize, count: usize) -> Vec<(usize, i64, f64)> {
    let lm = fs.l_max() as i64;
    let mut all: Vec<(usize, i64, f64)> = (-lm..=lm)
        .flat_map(|l| (0..fs.n_levels()).map(move |a| (a, l)))
        .map(|(a, l)| (a, l, fs.coeff(j, a, l)))
        .collect();
    all.sort_by(|x, y| y.2.abs().total_cmp(&x.2.abs()).then((x.1, x.0).cmp(&(y.1, y.0))));
    all.truncate(count);
    all
}

pub fn floquet(argv: &[String], common: &Common, full: bool) -> CmdResult {
    let (cfg, label) = resolve(common)?;
    let mut timings = Timings::default();
    let fs = timings.time("floquet", || solve_floquet(&cfg.model, &cfg.drive, &cfg.numerics))?;
    let mut comments = run_comments(&cfg, &label);
    comments.push(format!(
        "convergence: l_max = {}, converged = {}, band change against doubled truncation = {}",
        fs.l_max(),
        fs.converged(),
        num(fs.residual())
    ));
    if let Ok(shift) = stark_shift(&fs, &cfg.model) {
        comments.push(format!("stark shift |w1 - w0| - omega0 = {}", num(shift)));
    }
    comments.push("omega_tilde: quasienergy of the replica centred on l = 0; omega_folded: folded into (-omega_l/2, omega_l/2]".to_string());
    const LEADING: usize = 3;
    let mut columns = vec!["j".to_string(), "omega_tilde".to_string(), "omega_folded".to_string()];
    for k in 1..=LEADING {
        columns.extend([format!("lead{k}_a"), format!("lead{k}_l"), format!("lead{k}_f")]);
    }
    let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&comments, &columns);
    for j in 0..fs.n_levels() {
        let mut row = vec![j.to_string(), num(fs.omega_tilde()[j]), num(fs.omega_folded(j))];
        for (a, l, f) in leading_coefficients(&fs, j, LEADING) {
            row.extend([a.to_string(), l.to_string(), num(f)]);
        }
        csv.row(&row);
    }
    let mut out = OutDir::create(&common.out)?;
    out.write("floquet.csv", csv.into_string())?;
    if full {
        let mut all = Csv::new(&comments, &["j", "a", "l", "f"]);
        let lm = fs.l_max() as i64;
        for j in 0..fs.n_levels() {
            for l in -lm..=lm {
                for a in 0..fs.n_levels() {
                    all.row(&[j.to_string(), a.to_string(), l.to_string(), num(fs.coeff(j, a, l))]);
                }
            }
        }
        out.write("floquet_coeffs.csv", all.into_string())?;
    }
    let params = json!({"full": full});
    write_manifest(&mut out, argv, "floquet", Some(cfg.to_config_file()), params, &timings)?;
    for j in 0..fs.n_levels() {
        say!("band {j}: omega_tilde = {:.12}", fs.omega_tilde()[j]);
    }
    Ok(())
}

pub fn steady(argv: &[String], common: &Common, full: bool) -> CmdResult {
    let (cfg, label) = resolve(common)?;
    let mut timings = Timings::default();
    let fs = timings.time("floquet", || solve_floquet(&cfg.model, &cfg.drive, &cfg.numerics))?;
    let ss = timings.time("steady", || {
        steady_state_fourier(&cfg.model, &cfg.drive, &cfg.numerics, fs.l_max())
    })?;
    let ss = timings.time("basis change", || to_floquet_basis(&ss, &fs))?;
    let mut comments = run_comments(&cfg, &label);
    comments.push(format!(
        "solver: {:?}, residual = {}, l_max = {}",
        ss.method(),
        num(ss.residual()),
        ss.l_max()
    ));
    comments.push("level_population: time-averaged rho_aa; floquet_population: rho~_jj,0 in the Floquet basis".to_string());
    let levels = ss.populations();
    let bands = ss.floquet_populations()?;
    let mut csv = Csv::new(&comments, &["index", "label", "level_population", "floquet_population"]);
    for (i, label) in cfg.model.labels().iter().enumerate() {
        csv.row(&[i.to_string(), label.clone(), num(levels[i]), num(bands[i])]);
    }
    let mut out = OutDir::create(&common.out)?;
    out.write("steady.csv", csv.into_string())?;
    if full {
        let n = ss.n_levels();
        let lm = ss.l_max() as i64;
        let mut all = Csv::new(&comments, &["basis", "i", "k", "l", "re", "im"]);
        for l in -lm..=lm {
            for i in 0..n {
                for k in 0..n {
                    let r = ss.rho(i, k, l);
                    all.row(&["level".into(), i.to_string(), k.to_string(), l.to_string(), num(r.re), num(r.im)]);
                }
            }
        }
        for l in -lm..=lm {
            for i in 0..n {
                for k in 0..n {
                    let r = ss.rho_floquet(i, k, l)?;
                    all.row(&["floquet".into(), i.to_string(), k.to_string(), l.to_string(), num(r.re), num(r.im)]);
                }
            }
        }
        out.write("steady_coeffs.csv", all.into_string())?;
    }
    let params = json!({"full": full});
    write_manifest(&mut out, argv, "steady", Some(cfg.to_config_file()), params, &timings)?;
    for (j, p) in bands.iter().enumerate() {
        say!("rho~_{j}{j},0 = {p:.10}");
    }
    Ok(())
}

pub fn validate(argv: &[String], common: &Common, name: Option<&str>) -> CmdResult {
    let runs: Vec<(RunConfig, String)> = match name {
        Some(n) => {
            let named = Common {
                scenario: Some(n.to_string()),
                ..common.clone()
            };
            vec![resolve(&named)?]
        }
        None if common.config.is_none() && common.scenario.is_none() => {
            resolve_threads(common)?;
            Scenario::ALL
                .into_iter()
                .map(|s| (s.run_config(), s.name().to_string()))
                .collect()
        }
        None => vec![resolve(common)?],
    };
    let mut timings = Timings::default();
    let reports: Vec<ValidationReport> = timings.time("validation", || {
        runs.iter().map(|(cfg, label)| run_full_validation(label, cfg)).collect()
    });
    for r in &reports {
        say!("{}", r.to_table());
    }
    let report_json = serde_json::to_string_pretty(&reports).expect("report serializes");
    say!("{report_json}");
    let mut out = OutDir::create(&common.out)?;
    out.write("validation.json", report_json + "\n")?;
    let config = (runs.len() == 1).then(|| runs[0].0.to_config_file());
    let labels: Vec<&str> = runs.iter().map(|r| r.1.as_str()).collect();
    let params = json!({"systems": labels, "passed": reports.iter().all(|r| r.passed)});
    write_manifest(&mut out, argv, "validate", config, params, &timings)?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.label.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::validation(anyhow!("validation failed for {}", failed.join(", "))))
    }
}

fn resolve_threads(common: &Common) -> Result<(), Failure> {
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Failure::input(anyhow!("--threads must be >= 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(Failure::input)?;
    }
    Ok(())
}
