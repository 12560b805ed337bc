//! Every example runs to completion.

#[path = "../examples/grid_sampling.rs"]
mod grid_sampling;
#[path = "../examples/acquire_simulated.rs"]
mod acquire_simulated;
#[path = "../examples/detection_geometry.rs"]
mod detection_geometry;
#[path = "../examples/graffiti_level.rs"]
mod graffiti_level;
#[path = "../examples/voc_evaluation.rs"]
mod voc_evaluation;
#[path = "../examples/sampling_simulator.rs"]
mod sampling_simulator;
#[path = "../examples/remote_detector.rs"]
mod remote_detector;
#[path = "../examples/demo_pipeline.rs"]
mod demo_pipeline;

#[test]
fn grid_sampling_runs() {
    grid_sampling::run().unwrap();
}

#[test]
fn acquire_simulated_runs() {
    acquire_simulated::run().unwrap();
}

#[test]
fn detection_geometry_runs() {
    detection_geometry::run().unwrap();
}

#[test]
fn graffiti_level_runs() {
    graffiti_level::run().unwrap();
}

#[test]
fn voc_evaluation_runs() {
    voc_evaluation::run().unwrap();
}

#[test]
fn sampling_simulator_runs() {
    sampling_simulator::run().unwrap();
}

#[test]
fn remote_detector_runs() {
    remote_detector::run().unwrap();
}

#[test]
fn demo_pipeline_runs() {
    demo_pipeline::run().unwrap();
}
