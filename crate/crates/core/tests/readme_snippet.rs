use solvorder_core::group::make_group;
use solvorder_core::protocol::{execute, ProtocolConfig, ProtocolKind};
use solvorder_core::prover::ProverKind;

#[test]
fn library_example() -> Result<(), Box<dyn std::error::Error>> {
    let g = make_group(&"perm:4:(1 2),(1 2 3 4)".parse()?)?;
    let (outcome, transcript) =
        execute(ProtocolKind::ThreeMessage, &g, &[], ProverKind::Honest, 42, &ProtocolConfig::default());
    assert_eq!(outcome.order().unwrap().to_string(), "24");
    assert!(transcript.to_json().contains("\"protocol\""));
    Ok(())
}
