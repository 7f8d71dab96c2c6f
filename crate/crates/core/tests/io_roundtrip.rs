use tminimax::allocation::Allocation;
use tminimax::assignment::draw_assignment;
use tminimax::io::{
    assignment_from_json, assignment_to_json, read_assignment_csv, read_schedule_csv_dir, schedule_from_json,
    schedule_to_json, write_assignment_csv, write_schedule_csv_dir, RunManifest,
};
use tminimax::simulate::{model_schedule, ModelKind, ModelParams};
use tminimax::Family;

#[test]
fn schedule_survives_csv_directory_and_json() {
    let sched = model_schedule(ModelKind::Habituation, &ModelParams::default(), 9, 4, 21).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = write_schedule_csv_dir(dir.path(), &sched).unwrap();
    assert_eq!(paths.len(), 5);
    assert_eq!(read_schedule_csv_dir(dir.path(), 4).unwrap(), sched);
    assert_eq!(schedule_from_json(&schedule_to_json(&sched).unwrap()).unwrap(), sched);
    std::fs::remove_file(dir.path().join("pulse_3.csv")).unwrap();
    assert!(read_schedule_csv_dir(dir.path(), 4).is_err());
}

#[test]
fn assignment_survives_csv_and_json() {
    let alloc = Allocation::from_counts(&[2, 3, 1, 4]).unwrap();
    for family in [Family::Pulse, Family::Wedge] {
        let z = draw_assignment(&alloc, family, 5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.csv");
        write_assignment_csv(&path, &z).unwrap();
        assert_eq!(read_assignment_csv(&path).unwrap(), z);
        assert_eq!(assignment_from_json(&assignment_to_json(&z).unwrap()).unwrap(), z);
    }
}

#[test]
fn manifest_records_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.txt");
    std::fs::write(&input, b"abc").unwrap();
    let mut m = RunManifest::start(vec!["tminimax".into()], Some(1), serde_json::json!({"n": 3}));
    m.add_input(&input).unwrap();
    m.finish();
    let path = dir.path().join("manifest.json");
    m.write(&path).unwrap();
    let back: RunManifest = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, m);
    assert_eq!(
        back.inputs.values().next().unwrap(),
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    );
}
