use std::path::Path;

use flowcore::{read_flo, FlowField};

use crate::{Result, StepFlowError};

/// Load externally computed stepwise flows from a directory holding
/// `step_000.flo ... step_{count-1}.flo`, in index order. Every file must
/// exist and match the expected dimensions; errors name the offending file.
pub fn load_external_flows(
    dir: &Path,
    count: usize,
    expected: (usize, usize),
) -> Result<Vec<FlowField>> {
    let (want_w, want_h) = expected;
    let mut flows = Vec::with_capacity(count);
    for index in 0..count {
        let path = dir.join(format!("step_{index:03}.flo"));
        if !path.exists() {
            return Err(StepFlowError::MissingStep(path));
        }
        let flow = read_flo(&path).map_err(|source| StepFlowError::FlowFile {
            path: path.clone(),
            source,
        })?;
        if flow.width() != want_w || flow.height() != want_h {
            return Err(StepFlowError::WrongDimensions {
                path,
                got_w: flow.width(),
                got_h: flow.height(),
                want_w,
                want_h,
            });
        }
        flows.push(flow);
    }
    Ok(flows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use flowcore::write_flo;

    #[test]
    fn round_trips_written_steps_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let fields: Vec<FlowField> = (0..3)
            .map(|i| FlowField::constant(8, 6, i as f32, -(i as f32)))
            .collect();
        for (i, f) in fields.iter().enumerate() {
            write_flo(f, dir.path().join(format!("step_{i:03}.flo"))).unwrap();
        }
        let loaded = load_external_flows(dir.path(), 3, (8, 6)).unwrap();
        for (a, b) in loaded.iter().zip(&fields) {
            assert_eq!(a.vectors(), b.vectors());
        }
    }

    #[test]
    fn missing_index_is_named() {
        let dir = tempfile::tempdir().unwrap();
        for i in [0usize, 1, 3, 4] {
            write_flo(
                &FlowField::zeros(4, 4),
                dir.path().join(format!("step_{i:03}.flo")),
            )
            .unwrap();
        }
        match load_external_flows(dir.path(), 5, (4, 4)) {
            Err(StepFlowError::MissingStep(p)) => {
                assert!(p.to_string_lossy().ends_with("step_002.flo"))
            }
            other => panic!("expected MissingStep, got {other:?}"),
        }
    }

    #[test]
    fn wrong_dimensions_are_named() {
        let dir = tempfile::tempdir().unwrap();
        write_flo(&FlowField::zeros(4, 4), dir.path().join("step_000.flo")).unwrap();
        assert!(matches!(
            load_external_flows(dir.path(), 1, (8, 8)),
            Err(StepFlowError::WrongDimensions { .. })
        ));
    }

    #[test]
    fn parse_failures_are_named() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("step_000.flo"), b"XXXXgarbage_here").unwrap();
        assert!(matches!(
            load_external_flows(dir.path(), 1, (4, 4)),
            Err(StepFlowError::FlowFile { .. })
        ));
    }
}
