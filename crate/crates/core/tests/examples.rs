#[allow(dead_code)]
mod basis_and_penalty {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/basis_and_penalty.rs"));
}

#[allow(dead_code)]
mod forecast_baseline {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/forecast_baseline.rs"));
}

#[allow(dead_code)]
mod excess_mortality {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/excess_mortality.rs"));
}

#[allow(dead_code)]
mod csv_pipeline {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/csv_pipeline.rs"));
}

#[test]
fn basis_example_runs() {
    basis_and_penalty::run_example().expect("basis example should run");
}

#[test]
fn forecast_example_runs() {
    forecast_baseline::run_example().expect("forecast example should run");
}

#[test]
fn excess_example_runs() {
    excess_mortality::run_example().expect("excess example should run");
}

#[test]
fn pipeline_example_runs() {
    let dir = tempfile::tempdir().unwrap();
    csv_pipeline::run_in(dir.path()).expect("pipeline example should run");
}
