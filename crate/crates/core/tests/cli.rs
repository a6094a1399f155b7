use std::fs;
use std::path::Path;
use std::process::Command;

fn mortcast(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mortcast"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn simulate_into(dir: &Path, extra: &[&str]) -> (String, String) {
    let data = dir.join("data");
    let data = data.to_str().unwrap().to_string();
    let mut args = vec!["simulate", "--out", &data, "--seed", "5", "--months", "180", "--population", "3000000"];
    args.extend_from_slice(extra);
    let out = mortcast(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (format!("{data}/deaths.csv"), format!("{data}/population.csv"))
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn every_command_writes_its_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (deaths, population) = simulate_into(dir.path(), &["--shock-start", "2020-03"]);
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    for (cmd, extra) in [
        ("fit", vec![]),
        ("forecast", vec!["--horizon", "18"]),
        ("backtest", vec![]),
        ("grid-search", vec!["--grid-trend", "1e4,1e6", "--grid-season", "1e5"]),
        ("excess", vec![]),
    ] {
        let mut args = vec![cmd, "--deaths", &deaths, "--population", &population, "--model", "stss", "--out", out];
        args.extend(extra);
        let run = mortcast(&args);
        assert!(run.status.success(), "{cmd}: {}", String::from_utf8_lossy(&run.stderr));
    }
    let names: Vec<String> = read_dir_sorted(Path::new(out)).into_iter().map(|(n, _)| n).collect();
    for expected in [
        "fit_SIM.csv",
        "fit_SIM.json",
        "forecast_SIM.csv",
        "forecast_SIM.json",
        "backtest_SIM.csv",
        "backtest_SIM.json",
        "grid_SIM.csv",
        "grid_SIM.json",
        "excess_SIM.csv",
        "excess_periods_SIM.csv",
        "excess_SIM.json",
        "plotdata_fit_SIM.csv",
        "plotdata_forecast_SIM.csv",
        "plotdata_backtest_SIM.csv",
        "plotdata_grid-search_SIM.csv",
        "plotdata_excess_SIM.csv",
    ] {
        assert!(names.iter().any(|n| n == expected), "missing {expected}");
    }

    let forecast = fs::read_to_string(Path::new(out).join("forecast_SIM.csv")).unwrap();
    assert_eq!(forecast.lines().filter(|l| l.contains(",forecast,")).count(), 18);
    let excess = fs::read_to_string(Path::new(out).join("excess_SIM.csv")).unwrap();
    assert!(excess.lines().next().unwrap().ends_with("excess_rate"));
    let grid = fs::read_to_string(Path::new(out).join("grid_SIM.csv")).unwrap();
    assert_eq!(grid.lines().count(), 3);
    assert_eq!(grid.lines().filter(|l| l.ends_with(",true")).count(), 1);
}

#[test]
fn backtest_on_fifteen_years_has_five_windows() {
    let dir = tempfile::tempdir().unwrap();
    let (deaths, _) = simulate_into(dir.path(), &[]);
    let out = dir.path().join("out");
    let run = mortcast(&["backtest", "--deaths", &deaths, "--window-years", "10", "--out", out.to_str().unwrap()]);
    assert!(run.status.success());
    let table = fs::read_to_string(out.join("backtest_SIM.csv")).unwrap();
    let windows: Vec<&str> = table.lines().skip(1).filter(|l| !l.starts_with("mean")).collect();
    assert_eq!(windows.len(), 5);
    assert!(windows[0].starts_with("1,2010-01,2019-12,2020-01,"));
    assert!(windows[4].starts_with("5,2014-01,2023-12,2024-01,"));
}

#[test]
fn single_point_grid_chooses_that_point() {
    let dir = tempfile::tempdir().unwrap();
    let (deaths, _) = simulate_into(dir.path(), &[]);
    let out = dir.path().join("out");
    let run = mortcast(&[
        "grid-search", "--deaths", &deaths, "--grid-trend", "3000", "--grid-season", "70000", "--model", "stss", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("grid_SIM.json")).unwrap()).unwrap();
    assert_eq!(json["chosen"]["lambda_trend"], 3000.0);
    assert_eq!(json["chosen"]["lambda_season"], 70000.0);
    assert_eq!(json["points"].as_array().unwrap().len(), 1);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (deaths, population) = simulate_into(dir.path(), &[]);
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        for cmd in ["backtest", "forecast"] {
            let run = mortcast(&[cmd, "--deaths", &deaths, "--population", &population, "--out", out.to_str().unwrap()]);
            assert!(run.status.success());
        }
        outputs.push(read_dir_sorted(&out));
    }
    assert_eq!(outputs[0], outputs[1]);

    let again = dir.path().join("again");
    simulate_into(&again, &[]);
    assert_eq!(fs::read(&deaths).unwrap(), fs::read(again.join("data/deaths.csv")).unwrap());
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let gap = dir.path().join("gap.csv");
    fs::write(&gap, "stratum,year,month,deaths\nX,2019,1,5\nX,2019,3,6\n").unwrap();
    let bad_model = dir.path().join("ok.csv");
    fs::write(&bad_model, "stratum,year,month,deaths\nX,2019,1,5\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["fit", "--deaths", gap.to_str().unwrap(), "--out", out],
        vec!["fit", "--deaths", bad_model.to_str().unwrap(), "--model", "gam", "--out", out],
        vec!["fit", "--deaths", bad_model.to_str().unwrap(), "--out", out],
        vec!["fit", "--deaths", "/nonexistent/deaths.csv", "--out", out],
        vec!["fit", "--out", out],
        vec!["forecast", "--deaths", bad_model.to_str().unwrap(), "--horizon", "0"],
        vec!["grid-search", "--deaths", bad_model.to_str().unwrap(), "--grid-trend", "1,x"],
    ];
    for args in cases {
        let run = mortcast(&args);
        assert_eq!(run.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&run.stderr));
        assert!(!run.stderr.is_empty());
    }
}

#[test]
fn singular_system_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let (deaths, _) = simulate_into(dir.path(), &[]);
    // unpenalized cubic splines with more columns than a year of data supports
    let run = mortcast(&[
        "fit", "--deaths", &deaths, "--model", "stss", "--lambda-trend", "0", "--lambda-season", "0",
        "--segments-per-year", "12", "--degree", "3", "--window-years", "2", "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(3), "{}", String::from_utf8_lossy(&run.stderr));
}

#[test]
fn config_file_supplies_settings() {
    let dir = tempfile::tempdir().unwrap();
    let (deaths, _) = simulate_into(dir.path(), &[]);
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        format!("deaths = {deaths:?}\nmodel = \"sp\"\nhorizon = 6\nout = {:?}\n", dir.path().join("cfg").to_str().unwrap()),
    )
    .unwrap();
    let run = mortcast(&["forecast", "--config", config.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("cfg/forecast_SIM.json")).unwrap()).unwrap();
    assert_eq!(json["model"], "SP");
    assert_eq!(json["horizon"], 6);
}

#[test]
fn ten_years_with_five_year_windows() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let sim = mortcast(&["simulate", "--out", data.to_str().unwrap(), "--months", "120"]);
    assert!(sim.status.success());
    let out = dir.path().join("out");
    let run = mortcast(&[
        "backtest", "--deaths", data.join("deaths.csv").to_str().unwrap(), "--window-years", "5", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("backtest_SIM.json")).unwrap()).unwrap();
    let windows = json["windows"].as_array().unwrap();
    assert_eq!(windows.len(), 5);
    assert_eq!(windows[4]["test_start"], "2019-01");
}

#[test]
fn shock_in_the_final_spring_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let sim = mortcast(&[
        "simulate", "--out", data.to_str().unwrap(), "--months", "126", "--shock-start", "2020-03", "--seed", "3",
    ]);
    assert!(sim.status.success());
    let out = dir.path().join("out");
    let run = mortcast(&["excess", "--deaths", data.join("deaths.csv").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let periods = fs::read_to_string(out.join("excess_periods_SIM.csv")).unwrap();
    let last = periods.lines().last().unwrap();
    assert!(last.starts_with("wave1_2020,2020-03,2020-06,"), "{periods}");
    assert!(last.ends_with(",excess"));
}
