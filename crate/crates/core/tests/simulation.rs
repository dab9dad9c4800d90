mod common;

use aeronet::nn::{train_reference, ActivationKind, LossKind, NetworkSpec, OptimizerKind, Sample};
use aeronet::protocol::{Message, TraceRecord};
use aeronet::sim::{preprocess, run_simulation, Experiment, Preprocessing, SimError};
use aeronet::topology::{AssignmentDesign, LinkMode};
use common::*;

fn count(trace: &[TraceRecord], variant: &str) -> usize {
    trace.iter().filter_map(TraceRecord::envelope).filter(|e| e.payload.variant() == variant).count()
}

#[test]
fn xor_matches_reference_in_every_design() {
    for design in designs() {
        let exp = xor_experiment(25, design);
        let out = run_simulation(&exp).unwrap();
        let reference = train_reference(&exp.spec, &exp.dataset).unwrap();
        assert_eq!(out.report.final_params, reference.params, "{design:?}");
        assert_eq!(out.report.epoch_losses, reference.epoch_losses, "{design:?}");
        assert_eq!(out.report.epoch_makespans.len(), 25);
    }
}

#[test]
fn softmax_network_matches_reference_sparse_and_wireless() {
    for design in designs() {
        for sparse in [false, true] {
            let mut exp = Experiment::new(relu_softmax_spec(15, 7), design, two_class_dataset());
            exp.sparse_forwarding = sparse;
            exp.link = LinkMode::default_wireless();
            let out = run_simulation(&exp).unwrap();
            let reference = train_reference(&exp.spec, &exp.dataset).unwrap();
            assert_eq!(out.report.final_params, reference.params);
            assert_eq!(out.report.epoch_losses, reference.epoch_losses);
        }
    }
}

#[test]
fn zero_epochs_has_no_training_traffic() {
    let out = run_simulation(&xor_experiment(0, AssignmentDesign::OneNeuronPerDevice)).unwrap();
    assert_eq!(count(&out.trace, "ForwardActivation"), 0);
    assert_eq!(count(&out.trace, "InputVector"), 0);
    let allowed = ["RegisterRequest", "RegisterResponse", "NavigationInstruction", "NeuronConfig", "NeuronAck", "ShardAck"];
    for env in out.trace.iter().filter_map(TraceRecord::envelope) {
        assert!(allowed.contains(&env.payload.variant()), "{}", env.payload.variant());
    }
    assert!(out.report.epoch_losses.is_empty() && out.report.epoch_makespans.is_empty());
}

#[test]
fn per_sample_counts_match_closed_form() {
    let spec = NetworkSpec {
        layer_sizes: vec![3, 4, 2, 2],
        activations: vec![ActivationKind::Sigmoid; 3],
        loss: LossKind::MeanSquaredError,
        epochs: 2,
        optimizer: OptimizerKind::Sgd { learning_rate: 0.1 },
        seed: 5,
    };
    let data = vec![Sample::new(vec![0.1, 0.2, 0.3], vec![1.0, 0.0]), Sample::new(vec![0.3, -0.2, 0.9], vec![0.0, 1.0])];
    let out = run_simulation(&Experiment::new(spec.clone(), AssignmentDesign::LayerGrouped { neurons_per_device: 3 }, data)).unwrap();
    let samples = 4;
    let edges: usize = spec.layer_sizes.windows(2).map(|w| w[0] * w[1]).sum();
    assert_eq!(count(&out.trace, "ForwardActivation"), samples * edges);
    assert_eq!(count(&out.trace, "InputVector"), samples * 3);
    assert_eq!(count(&out.trace, "OutputVector"), samples * 2);
    assert_eq!(count(&out.trace, "GradientReport"), samples * 8);
    assert_eq!(count(&out.trace, "BackwardDelta"), samples * (edges + 2));
    assert_eq!(count(&out.trace, "LossReport"), samples);
}

#[test]
fn sparse_mode_suppresses_zero_inputs() {
    let dense = run_simulation(&xor_experiment(3, AssignmentDesign::OneNeuronPerDevice)).unwrap();
    let mut exp = xor_experiment(3, AssignmentDesign::OneNeuronPerDevice);
    exp.sparse_forwarding = true;
    let sparse = run_simulation(&exp).unwrap();
    assert_eq!(sparse.report.final_params, dense.report.final_params);
    assert!(count(&sparse.trace, "ForwardActivation") < count(&dense.trace, "ForwardActivation"));
    assert!(count(&sparse.trace, "SparseMask") > 0);
}

#[test]
fn min_max_preprocessing_matches_reference_on_scaled_data() {
    let mut exp = xor_experiment(5, AssignmentDesign::OneNeuronPerDevice);
    exp.dataset = exp.dataset.iter().map(|s| Sample::new(s.input.iter().map(|x| 10.0 * x + 3.0).collect(), s.target.clone())).collect();
    exp.preprocessing = Preprocessing::MinMaxNormalize;
    let out = run_simulation(&exp).unwrap();
    let reference = train_reference(&exp.spec, &preprocess(Preprocessing::MinMaxNormalize, &exp.dataset)).unwrap();
    assert_eq!(out.report.final_params, reference.params);
}

#[test]
fn bad_token_blocks_training() {
    let mut exp = xor_experiment(1, AssignmentDesign::OneNeuronPerDevice);
    exp.device_tokens.insert("host-l01-d000".into(), "wrong".into());
    match run_simulation(&exp) {
        Err(SimError::Admission(list)) => assert_eq!(list, vec![("host-l01-d000".into(), "auth_failed".to_string())]),
        other => panic!("expected admission failure, got {other:?}"),
    }
}

#[test]
fn out_of_range_formation_is_rejected_before_running() {
    let mut exp = xor_experiment(1, AssignmentDesign::OneNeuronPerDevice);
    exp.link = LinkMode::Wireless { range_m: 50.0, bandwidth_bps: 1e8, propagation_mps: 3e8, per_hop_overhead_s: 1e-3 };
    assert!(matches!(run_simulation(&exp), Err(SimError::Connectivity(v)) if !v.is_empty()));
}

#[test]
fn navigation_reaches_every_device() {
    let out = run_simulation(&xor_experiment(0, AssignmentDesign::LayerGroupedWithController { neurons_per_device: 2 })).unwrap();
    let navigated: Vec<_> = out
        .trace
        .iter()
        .filter_map(TraceRecord::envelope)
        .filter_map(|e| match &e.payload {
            Message::NavigationInstruction { device_id, position } => Some((device_id.clone(), *position)),
            _ => None,
        })
        .collect();
    assert_eq!(navigated.len(), out.assignment.device_count() - 1);
    for (d, p) in navigated {
        assert_eq!(out.plan.positions[&d], p);
    }
}
